//! Problem data: sites, communities, the surviving truck network, fleet and
//! cost parameters, plus drone reachability derived from geometry.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Mean Earth radius in statute miles.
pub const EARTH_RADIUS_MILES: f64 = 3958.8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatLon {
    pub lat: f64,
    pub lon: f64,
}

impl LatLon {
    pub fn new(lat: f64, lon: f64) -> Self {
        Self { lat, lon }
    }

    fn check(&self) -> Result<(), ModelError> {
        if !self.lat.is_finite() || !self.lon.is_finite() || self.lat.abs() > 90.0 || self.lon.abs() > 180.0 {
            return Err(ModelError::BadCoordinate(self.lat, self.lon));
        }
        Ok(())
    }
}

/// Haversine great-circle distance in miles.
pub fn geodesic_miles(p: LatLon, q: LatLon) -> Result<f64, ModelError> {
    p.check()?;
    q.check()?;
    let (phi1, phi2) = (p.lat.to_radians(), q.lat.to_radians());
    let dphi = phi2 - phi1;
    let dlambda = (q.lon - p.lon).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    Ok(2.0 * EARTH_RADIUS_MILES * h.sqrt().min(1.0).asin())
}

/// Travel time in minutes between two points at `speed_mph`.
pub fn geodesic_minutes(p: LatLon, q: LatLon, speed_mph: f64) -> Result<f64, ModelError> {
    if !(speed_mph.is_finite() && speed_mph > 0.0) {
        return Err(ModelError::BadSpeed(speed_mph));
    }
    Ok(geodesic_miles(p, q)? / speed_mph * 60.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Site {
    pub id: u32,
    pub lat: f64,
    pub lon: f64,
}

impl Site {
    pub fn pos(&self) -> LatLon {
        LatLon::new(self.lat, self.lon)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Community {
    pub id: u32,
    pub lat: f64,
    pub lon: f64,
    pub region: usize,
    /// Q̄_c, units.
    pub nominal_demand: f64,
    /// Q̂_c, units.
    pub max_deviation: f64,
    /// F^T_c, $ per minute of delay.
    pub delay_cost: f64,
    /// F^R_c, $ if the community is not reached.
    pub miss_cost: f64,
    /// F^D_c, $ per unit of unmet demand.
    pub shortage_cost: f64,
}

impl Community {
    pub fn pos(&self) -> LatLon {
        LatLon::new(self.lat, self.lon)
    }
}

/// Undirected road segment between the depot and/or satellites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruckEdge {
    pub from: u32,
    pub to: u32,
    pub minutes: f64,
}

/// Directed truck arc over node indices (0 = depot, 1 + s = satellite s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruckArc {
    pub tail: usize,
    pub head: usize,
    pub minutes: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub depot: Site,
    pub satellites: Vec<Site>,
    pub communities: Vec<Community>,
    pub truck_edges: Vec<TruckEdge>,
    pub drone_speed_mph: f64,
    pub truck_speed_mph: f64,
    /// W^d, minutes of flight per sortie.
    pub flying_range_min: f64,
    /// L_max, units per sortie.
    pub max_load: f64,
    pub num_trucks: usize,
    pub drones_per_truck: usize,
    /// Γ, number of communities that may deviate at once.
    pub gamma_total: usize,
    /// Γ_a per region id.
    pub gamma_region: Vec<usize>,
    pub epsilon: f64,
    pub big_m: f64,
}

pub const DEPOT_NODE: usize = 0;

impl Instance {
    pub fn num_satellites(&self) -> usize {
        self.satellites.len()
    }

    pub fn num_communities(&self) -> usize {
        self.communities.len()
    }

    pub fn num_regions(&self) -> usize {
        self.gamma_region.len()
    }

    pub fn satellite_node(s: usize) -> usize {
        s + 1
    }

    /// Node index for a depot/satellite id.
    pub fn node_of_id(&self, id: u32) -> Option<usize> {
        if id == self.depot.id {
            return Some(DEPOT_NODE);
        }
        self.satellites.iter().position(|s| s.id == id).map(Self::satellite_node)
    }

    pub fn node_id(&self, node: usize) -> u32 {
        if node == DEPOT_NODE {
            self.depot.id
        } else {
            self.satellites[node - 1].id
        }
    }

    pub fn node_pos(&self, node: usize) -> LatLon {
        if node == DEPOT_NODE {
            self.depot.pos()
        } else {
            self.satellites[node - 1].pos()
        }
    }

    /// Both directions of every truck edge, in edge order. Edges with unknown
    /// endpoints are skipped (see [`validate_instance`]).
    pub fn truck_arcs(&self) -> Vec<TruckArc> {
        let mut arcs = Vec::with_capacity(2 * self.truck_edges.len());
        for e in &self.truck_edges {
            if let (Some(a), Some(b)) = (self.node_of_id(e.from), self.node_of_id(e.to)) {
                arcs.push(TruckArc { tail: a, head: b, minutes: e.minutes });
                arcs.push(TruckArc { tail: b, head: a, minutes: e.minutes });
            }
        }
        arcs
    }

    pub fn region_members(&self, region: usize) -> Vec<usize> {
        self.communities
            .iter()
            .enumerate()
            .filter(|(_, c)| c.region == region)
            .map(|(i, _)| i)
            .collect()
    }

    /// Upper bound on any truck arrival time: every road driven once plus
    /// every drone slot at every satellite flying a full sortie.
    pub fn default_big_m(&self) -> f64 {
        let roads: f64 = self.truck_edges.iter().map(|e| e.minutes).sum();
        roads + self.drones_per_truck as f64 * self.flying_range_min * self.satellites.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    DuplicateId(u32),
    UnknownEdgeEndpoint { from: u32, to: u32 },
    BadEdgeTime { from: u32, to: u32 },
    SatelliteUnreachable(u32),
    BadCoordinate(u32),
    NegativeDemand(u32),
    NegativeCost(u32),
    UnknownRegion { community: u32, region: usize },
    RegionBudgetTooLarge { region: usize, budget: usize, members: usize },
    TotalBudgetTooLarge { budget: usize, communities: usize },
    NonPositive(&'static str),
    BigMTooSmall { big_m: f64, required: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateId(id) => write!(f, "duplicate id {id}"),
            Violation::UnknownEdgeEndpoint { from, to } => {
                write!(f, "truck edge {from}-{to} has an endpoint that is not the depot or a satellite")
            }
            Violation::BadEdgeTime { from, to } => write!(f, "truck edge {from}-{to} has a negative or non-finite time"),
            Violation::SatelliteUnreachable(id) => write!(f, "satellite {id} is not connected to the depot"),
            Violation::BadCoordinate(id) => write!(f, "site {id} has invalid coordinates"),
            Violation::NegativeDemand(id) => write!(f, "community {id} has negative demand or deviation"),
            Violation::NegativeCost(id) => write!(f, "community {id} has a negative cost"),
            Violation::UnknownRegion { community, region } => {
                write!(f, "community {community} is in undeclared region {region}")
            }
            Violation::RegionBudgetTooLarge { region, budget, members } => {
                write!(f, "region {region} budget {budget} exceeds its {members} communities")
            }
            Violation::TotalBudgetTooLarge { budget, communities } => {
                write!(f, "total budget {budget} exceeds {communities} communities")
            }
            Violation::NonPositive(what) => write!(f, "{what} must be positive"),
            Violation::BigMTooSmall { big_m, required } => {
                write!(f, "big_m {big_m} is below the arrival-time bound {required}")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "{v}")?;
        }
        Ok(())
    }
}

pub fn validate_instance(inst: &Instance) -> ValidationReport {
    let mut out = Vec::new();
    let mut node_ids = BTreeSet::new();
    for site in std::iter::once(&inst.depot).chain(&inst.satellites) {
        if !node_ids.insert(site.id) {
            out.push(Violation::DuplicateId(site.id));
        }
        if site.pos().check().is_err() {
            out.push(Violation::BadCoordinate(site.id));
        }
    }
    let mut comm_ids = BTreeSet::new();
    let mut region_count: BTreeMap<usize, usize> = BTreeMap::new();
    for c in &inst.communities {
        if !comm_ids.insert(c.id) {
            out.push(Violation::DuplicateId(c.id));
        }
        if c.pos().check().is_err() {
            out.push(Violation::BadCoordinate(c.id));
        }
        if !(c.nominal_demand >= 0.0 && c.max_deviation >= 0.0) || !c.nominal_demand.is_finite() || !c.max_deviation.is_finite() {
            out.push(Violation::NegativeDemand(c.id));
        }
        if !(c.delay_cost >= 0.0 && c.miss_cost >= 0.0 && c.shortage_cost >= 0.0)
            || !(c.delay_cost.is_finite() && c.miss_cost.is_finite() && c.shortage_cost.is_finite())
        {
            out.push(Violation::NegativeCost(c.id));
        }
        if c.region >= inst.num_regions() {
            out.push(Violation::UnknownRegion { community: c.id, region: c.region });
        } else {
            *region_count.entry(c.region).or_default() += 1;
        }
    }
    for (region, &budget) in inst.gamma_region.iter().enumerate() {
        let members = region_count.get(&region).copied().unwrap_or(0);
        if budget > members {
            out.push(Violation::RegionBudgetTooLarge { region, budget, members });
        }
    }
    if inst.gamma_total > inst.communities.len() {
        out.push(Violation::TotalBudgetTooLarge {
            budget: inst.gamma_total,
            communities: inst.communities.len(),
        });
    }
    for (what, v) in [
        ("flying_range_min", inst.flying_range_min),
        ("max_load", inst.max_load),
        ("drone_speed_mph", inst.drone_speed_mph),
        ("truck_speed_mph", inst.truck_speed_mph),
        ("epsilon", inst.epsilon),
    ] {
        if !(v.is_finite() && v > 0.0) {
            out.push(Violation::NonPositive(what));
        }
    }
    if inst.num_trucks == 0 {
        out.push(Violation::NonPositive("num_trucks"));
    }
    if inst.drones_per_truck == 0 {
        out.push(Violation::NonPositive("drones_per_truck"));
    }

    // connectivity over the undirected road graph
    let n_nodes = inst.satellites.len() + 1;
    let mut adj = vec![Vec::new(); n_nodes];
    for e in &inst.truck_edges {
        match (inst.node_of_id(e.from), inst.node_of_id(e.to)) {
            (Some(a), Some(b)) => {
                if !(e.minutes.is_finite() && e.minutes >= 0.0) {
                    out.push(Violation::BadEdgeTime { from: e.from, to: e.to });
                }
                adj[a].push(b);
                adj[b].push(a);
            }
            _ => out.push(Violation::UnknownEdgeEndpoint { from: e.from, to: e.to }),
        }
    }
    let mut seen = vec![false; n_nodes];
    let mut queue = VecDeque::from([DEPOT_NODE]);
    seen[DEPOT_NODE] = true;
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    for (s, sat) in inst.satellites.iter().enumerate() {
        if !seen[Instance::satellite_node(s)] {
            out.push(Violation::SatelliteUnreachable(sat.id));
        }
    }
    let required = inst.default_big_m();
    if !(inst.big_m >= required - 1e-9) {
        out.push(Violation::BigMTooSmall { big_m: inst.big_m, required });
    }
    ValidationReport { violations: out }
}

/// Drone reachability: `members[s]` is C_s, the communities whose out-and-back
/// flight from satellite `s` fits the flying range.
#[derive(Debug, Clone, PartialEq)]
pub struct Reachability {
    pub members: Vec<Vec<usize>>,
    /// Drone minutes satellite → community, `[s][c]` for all c.
    sat_to: Vec<Vec<f64>>,
    /// Drone minutes community ↔ community.
    between: Vec<Vec<f64>>,
    in_range: Vec<Vec<bool>>,
}

impl Reachability {
    pub fn sat_minutes(&self, s: usize, c: usize) -> f64 {
        self.sat_to[s][c]
    }

    pub fn comm_minutes(&self, a: usize, b: usize) -> f64 {
        self.between[a][b]
    }

    pub fn reaches(&self, s: usize, c: usize) -> bool {
        self.in_range[s][c]
    }

    pub fn members(&self, s: usize) -> &[usize] {
        &self.members[s]
    }

    /// Duration of `s → visits… → s`, and the arrival time at each visit.
    pub fn route_times(&self, s: usize, visits: &[usize]) -> (f64, Vec<f64>) {
        let mut t = 0.0;
        let mut times = Vec::with_capacity(visits.len());
        let mut prev: Option<usize> = None;
        for &c in visits {
            t += match prev {
                None => self.sat_to[s][c],
                Some(p) => self.between[p][c],
            };
            times.push(t);
            prev = Some(c);
        }
        if let Some(p) = prev {
            t += self.sat_to[s][p];
        }
        (t, times)
    }
}

pub fn build_reachability(inst: &Instance) -> Result<Reachability, ModelError> {
    let speed = inst.drone_speed_mph;
    let nc = inst.communities.len();
    let mut sat_to = Vec::with_capacity(inst.satellites.len());
    let mut in_range = Vec::with_capacity(inst.satellites.len());
    let mut members = Vec::with_capacity(inst.satellites.len());
    for sat in &inst.satellites {
        let row: Vec<f64> = inst
            .communities
            .iter()
            .map(|c| geodesic_minutes(sat.pos(), c.pos(), speed))
            .collect::<Result<_, _>>()?;
        let reach: Vec<bool> = row.iter().map(|t| 2.0 * t <= inst.flying_range_min).collect();
        members.push((0..nc).filter(|&c| reach[c]).collect());
        in_range.push(reach);
        sat_to.push(row);
    }
    let mut between = vec![vec![0.0; nc]; nc];
    for a in 0..nc {
        for b in a + 1..nc {
            let t = geodesic_minutes(inst.communities[a].pos(), inst.communities[b].pos(), speed)?;
            between[a][b] = t;
            between[b][a] = t;
        }
    }
    Ok(Reachability { members, sat_to, between, in_range })
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn zero_distance() {
        let p = LatLon::new(18.22, -66.59);
        assert_eq!(geodesic_minutes(p, p, 60.0).unwrap(), 0.0);
    }

    #[test]
    fn thirty_miles_at_sixty_mph() {
        let lat = 18.0;
        let q = LatLon::new(lat, east_of(lat, -66.0, 30.0));
        // along a parallel the great circle is slightly shorter than the rhumb line
        let t = geodesic_minutes(LatLon::new(lat, -66.0), q, 60.0).unwrap();
        assert!((t - 30.0).abs() < 1e-3, "{t}");
        let north = LatLon::new(lat + 30.0 / (EARTH_RADIUS_MILES.to_radians()), -66.0);
        let t = geodesic_minutes(LatLon::new(lat, -66.0), north, 60.0).unwrap();
        assert!((t - 30.0).abs() < 1e-9, "{t}");
    }

    #[test]
    fn haversine_reference_value() {
        // Independent evaluation (spherical law of cosines, R = 3958.8 mi):
        // (18.22,-66.59)→(18.22,-66.25) ≈ 22.3142 mi → 22.3142 min at 60 mph.
        let (phi, dl) = (18.22f64.to_radians(), (0.34f64).to_radians());
        let central = (phi.sin() * phi.sin() + phi.cos() * phi.cos() * dl.cos()).acos();
        let expected = central * EARTH_RADIUS_MILES;
        let t = geodesic_minutes(LatLon::new(18.22, -66.59), LatLon::new(18.22, -66.25), 60.0).unwrap();
        assert!((t - expected).abs() < 1e-6, "{t} vs {expected}");
        assert!((t - 22.3142).abs() < 1e-3);
    }

    #[test]
    fn rejects_bad_input() {
        let p = LatLon::new(f64::NAN, 0.0);
        assert!(geodesic_minutes(p, LatLon::new(0.0, 0.0), 60.0).is_err());
        assert!(geodesic_minutes(LatLon::new(0.0, 0.0), LatLon::new(0.0, 1.0), 0.0).is_err());
    }

    #[test]
    fn round_trip_rule() {
        let lat = 18.2;
        let far = community(1, lat, east_of(lat, -66.5, 40.0), 5.0);
        let near = community(2, lat, east_of(lat, -66.5, 10.0), 5.0);
        let inst = line_instance(&[0.0], vec![far, near]);
        let r = build_reachability(&inst).unwrap();
        // 80-minute round trip is out, 20-minute round trip is in
        assert_eq!(r.members(0), &[1]);
        let (dur, times) = r.route_times(0, &[1]);
        assert!((dur - 20.0).abs() < 1e-3);
        assert!((times[0] - 10.0).abs() < 1e-3);
    }

    #[test]
    fn valid_fixture_has_empty_report() {
        let lat = 18.2;
        let inst = line_instance(&[5.0, 20.0], vec![community(1, lat, -66.4, 5.0)]);
        let rep = validate_instance(&inst);
        assert!(rep.is_valid(), "{rep}");
    }

    #[test]
    fn region_budget_violation_names_region() {
        let lat = 18.2;
        let mut inst = line_instance(&[5.0], vec![community(1, lat, -66.4, 5.0)]);
        inst.gamma_region = vec![1, 2];
        let rep = validate_instance(&inst);
        assert!(rep
            .violations
            .contains(&Violation::RegionBudgetTooLarge { region: 1, budget: 2, members: 0 }));
    }

    #[test]
    fn disconnected_satellite_reported() {
        let lat = 18.2;
        let mut inst = line_instance(&[5.0, 20.0, 30.0], vec![community(1, lat, -66.4, 5.0)]);
        inst.truck_edges.retain(|e| e.to != 3);
        inst.big_m = inst.default_big_m();
        let rep = validate_instance(&inst);
        assert_eq!(rep.violations, vec![Violation::SatelliteUnreachable(3)]);
    }

    #[test]
    fn unknown_edge_endpoint() {
        let lat = 18.2;
        let mut inst = line_instance(&[5.0], vec![community(1, lat, -66.4, 5.0)]);
        inst.truck_edges.push(TruckEdge { from: 0, to: 99, minutes: 3.0 });
        inst.big_m = inst.default_big_m();
        let rep = validate_instance(&inst);
        assert!(rep.violations.contains(&Violation::UnknownEdgeEndpoint { from: 0, to: 99 }));
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]

        #[test]
        fn geodesic_triangle_inequality(
            a in (17.9f64..18.6, -67.3f64..-65.5),
            b in (17.9f64..18.6, -67.3f64..-65.5),
            c in (17.9f64..18.6, -67.3f64..-65.5),
        ) {
            let (a, b, c) = (LatLon::new(a.0, a.1), LatLon::new(b.0, b.1), LatLon::new(c.0, c.1));
            let ab = geodesic_minutes(a, b, 60.0).unwrap();
            let bc = geodesic_minutes(b, c, 60.0).unwrap();
            let ac = geodesic_minutes(a, c, 60.0).unwrap();
            proptest::prop_assert!(ac <= (ab + bc) * (1.0 + 1e-9) + 1e-12);
            proptest::prop_assert!((ab - geodesic_minutes(b, a, 60.0).unwrap()).abs() <= 1e-9 * (1.0 + ab));
        }

        #[test]
        fn reachability_grows_with_range(seed in 0u64..500, short in 5.0f64..40.0, extra in 0.0f64..30.0) {
            let spec = crate::instgen::GenSpec { seed, communities: 12, satellites: 4, ..Default::default() };
            let mut inst = crate::instgen::generate(&spec).unwrap();
            inst.flying_range_min = short;
            let narrow = build_reachability(&inst).unwrap();
            inst.flying_range_min = short + extra;
            let wide = build_reachability(&inst).unwrap();
            for s in 0..inst.num_satellites() {
                for &c in narrow.members(s) {
                    proptest::prop_assert!(wide.reaches(s, c), "satellite {} lost community {}", s, c);
                }
            }
        }
    }
}
