//! Drone route columns and a model-free route checker.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{Instance, Reachability};

pub const ROUTE_TOL: f64 = 1e-6;

/// One drone sortie `s → visits… → s`. Community references are indices
/// into `Instance::communities`; `satellite` indexes `Instance::satellites`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroneRoute {
    pub satellite: usize,
    pub visits: Vec<usize>,
    /// Π, minutes including the return leg.
    pub duration: f64,
    /// t̄ per visit, minutes after leaving the satellite.
    pub visit_times: Vec<f64>,
    /// d per scenario (outer) and visit position (inner).
    pub deliveries: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reduced_cost: Option<f64>,
}

impl DroneRoute {
    /// Route with timing taken from geometry and no delivery plans yet.
    pub fn new(reach: &Reachability, satellite: usize, visits: Vec<usize>) -> Self {
        let (duration, visit_times) = reach.route_times(satellite, &visits);
        Self {
            satellite,
            visits,
            duration,
            visit_times,
            deliveries: Vec::new(),
            reduced_cost: None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.visits.is_empty()
    }

    pub fn position(&self, c: usize) -> Option<usize> {
        self.visits.iter().position(|&v| v == c)
    }

    /// b_c.
    pub fn covers(&self, c: usize) -> bool {
        self.visits.contains(&c)
    }

    /// t̄_c, zero when `c` is not visited.
    pub fn time_at(&self, c: usize) -> f64 {
        self.position(c).map_or(0.0, |k| self.visit_times[k])
    }

    /// d_c for scenario `w`, zero when `c` is not visited.
    pub fn delivered(&self, w: usize, c: usize) -> f64 {
        self.position(c).map_or(0.0, |k| self.deliveries[w][k])
    }

    pub fn load(&self, w: usize) -> f64 {
        self.deliveries[w].iter().sum()
    }

    /// Same satellite and same visiting order.
    pub fn same_path(&self, other: &DroneRoute) -> bool {
        self.satellite == other.satellite && self.visits == other.visits
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RouteViolation {
    UnknownSatellite(usize),
    OutOfRange { community: usize },
    RepeatedVisit { community: usize },
    TooLong { duration: f64, range: f64 },
    DurationMismatch { stated: f64, actual: f64 },
    TimeMismatch { community: usize, stated: f64, actual: f64 },
    PlanShape { scenario: Option<usize> },
    NegativeDelivery { scenario: usize, community: usize },
    Overloaded { scenario: usize, load: f64 },
}

impl fmt::Display for RouteViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use RouteViolation::*;
        match self {
            UnknownSatellite(s) => write!(f, "unknown satellite index {s}"),
            OutOfRange { community } => write!(f, "community {community} is outside the satellite's drone range"),
            RepeatedVisit { community } => write!(f, "community {community} visited twice"),
            TooLong { duration, range } => write!(f, "duration {duration:.4} exceeds range {range:.4}"),
            DurationMismatch { stated, actual } => write!(f, "stated duration {stated:.6}, geometry gives {actual:.6}"),
            TimeMismatch { community, stated, actual } => {
                write!(f, "visit time at {community}: stated {stated:.6}, geometry gives {actual:.6}")
            }
            PlanShape { scenario: None } => write!(f, "delivery plan has the wrong number of scenarios"),
            PlanShape { scenario: Some(w) } => write!(f, "delivery plan for scenario {w} has the wrong length"),
            NegativeDelivery { scenario, community } => {
                write!(f, "negative delivery to {community} in scenario {scenario}")
            }
            Overloaded { scenario, load } => write!(f, "scenario {scenario} load {load:.4} exceeds capacity"),
        }
    }
}

/// Checks a route against geometry only: range, visit-once, timing and
/// per-scenario capacity. `scenarios` is the expected plan count.
pub fn check_route(inst: &Instance, reach: &Reachability, route: &DroneRoute, scenarios: usize) -> Vec<RouteViolation> {
    let mut out = Vec::new();
    let s = route.satellite;
    if s >= inst.num_satellites() {
        out.push(RouteViolation::UnknownSatellite(s));
        return out;
    }
    for (k, &c) in route.visits.iter().enumerate() {
        if c >= inst.num_communities() || !reach.reaches(s, c) {
            out.push(RouteViolation::OutOfRange { community: c });
            return out;
        }
        if route.visits[..k].contains(&c) {
            out.push(RouteViolation::RepeatedVisit { community: c });
        }
    }
    let (actual, times) = reach.route_times(s, &route.visits);
    if actual > inst.flying_range_min + ROUTE_TOL {
        out.push(RouteViolation::TooLong { duration: actual, range: inst.flying_range_min });
    }
    if (actual - route.duration).abs() > ROUTE_TOL {
        out.push(RouteViolation::DurationMismatch { stated: route.duration, actual });
    }
    if route.visit_times.len() != route.visits.len() {
        out.push(RouteViolation::PlanShape { scenario: None });
    } else {
        for (k, &c) in route.visits.iter().enumerate() {
            if (times[k] - route.visit_times[k]).abs() > ROUTE_TOL {
                out.push(RouteViolation::TimeMismatch { community: c, stated: route.visit_times[k], actual: times[k] });
            }
        }
    }
    if route.deliveries.len() != scenarios {
        out.push(RouteViolation::PlanShape { scenario: None });
        return out;
    }
    for (w, plan) in route.deliveries.iter().enumerate() {
        if plan.len() != route.visits.len() {
            out.push(RouteViolation::PlanShape { scenario: Some(w) });
            continue;
        }
        for (k, &d) in plan.iter().enumerate() {
            if !(d >= -ROUTE_TOL) {
                out.push(RouteViolation::NegativeDelivery { scenario: w, community: route.visits[k] });
            }
        }
        let load: f64 = plan.iter().sum();
        if load > inst.max_load + ROUTE_TOL {
            out.push(RouteViolation::Overloaded { scenario: w, load });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_reachability;
    use crate::model::fixtures::*;

    fn setup() -> (Instance, Reachability) {
        let lat = 18.2;
        let comms = vec![
            community(1, lat, east_of(lat, -66.5, 5.0), 10.0),
            community(2, lat + 0.05, east_of(lat, -66.5, 6.0), 10.0),
            community(3, lat, east_of(lat, -66.5, 30.0), 10.0),
        ];
        let inst = line_instance(&[0.0], comms);
        let reach = build_reachability(&inst).unwrap();
        (inst, reach)
    }

    #[test]
    fn constructed_route_passes() {
        let (inst, reach) = setup();
        let mut r = DroneRoute::new(&reach, 0, vec![0, 1]);
        r.deliveries = vec![vec![10.0, 10.0]];
        assert!(check_route(&inst, &reach, &r, 1).is_empty());
        assert!((r.visit_times[0] - 5.0).abs() < 1e-3);
        assert!(r.duration > r.visit_times[1]);
    }

    #[test]
    fn violations_are_named() {
        let (inst, reach) = setup();
        let r = DroneRoute::new(&reach, 0, vec![2]);
        assert_eq!(check_route(&inst, &reach, &r, 0), vec![RouteViolation::OutOfRange { community: 2 }]);

        let mut r = DroneRoute::new(&reach, 0, vec![0, 1]);
        r.deliveries = vec![vec![20.0, 10.0]];
        r.visit_times[1] += 1.0;
        let v = check_route(&inst, &reach, &r, 1);
        assert!(v.iter().any(|x| matches!(x, RouteViolation::Overloaded { scenario: 0, .. })));
        assert!(v.iter().any(|x| matches!(x, RouteViolation::TimeMismatch { community: 1, .. })));

        let r = DroneRoute::new(&reach, 0, vec![0, 0]);
        assert!(check_route(&inst, &reach, &r, 0).contains(&RouteViolation::RepeatedVisit { community: 0 }));
    }

    #[test]
    fn accessors_default_to_zero_off_route() {
        let (_, reach) = setup();
        let mut r = DroneRoute::new(&reach, 0, vec![1]);
        r.deliveries = vec![vec![4.0]];
        assert_eq!(r.delivered(0, 0), 0.0);
        assert_eq!(r.delivered(0, 1), 4.0);
        assert_eq!(r.time_at(0), 0.0);
        assert!(r.covers(1) && !r.covers(0));
    }
}
