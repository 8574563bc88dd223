//! Model-free re-evaluation of a reported solution: every master constraint
//! and route rule is checked directly from the instance data, and the cost
//! is rebuilt from scratch.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::driver::RunReport;
use crate::error::Result;
use crate::master::MasterSolution;
use crate::model::{build_reachability, Instance, DEPOT_NODE};
use crate::route::{check_route, RouteViolation};
use crate::scenariogen::{in_uncertainty_set, Scenario};

/// Slack allowed on LP-derived continuous values.
pub const FEAS_TOL: f64 = 1e-5;
/// Allowed gap between the stated and the recomputed cost, dollars.
pub const COST_TOL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ReevalViolation {
    UnknownArc { tail: usize, head: usize },
    RepeatedArc { tail: usize, head: usize },
    TooManyTrucks { used: usize, limit: usize },
    FlowImbalance { node: usize },
    ArrivalMismatch { node: usize, stated: f64, expected: f64 },
    NegativeIdle { satellite: usize },
    DroneAtUnvisited { satellite: usize },
    BadSlot { satellite: usize, slot: usize },
    SlotReused { satellite: usize, slot: usize },
    IdleTooShort { satellite: usize, slot: usize, idle: f64, duration: f64 },
    Route { satellite: usize, slot: usize, violation: RouteViolation },
    Cover { community: usize, visits: usize, missed: bool },
    ServiceTime { satellite: usize, community: usize, stated: f64, expected: f64 },
    ScenarioOutsideSet { scenario: usize },
    ScenarioDemand { scenario: usize, community: usize },
    Shortfall { scenario: usize, community: usize, stated: f64, expected: f64 },
    RecourseMismatch { stated: f64, expected: f64 },
    CostMismatch { stated: f64, expected: f64 },
    Shape(String),
}

impl fmt::Display for ReevalViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use ReevalViolation::*;
        match self {
            UnknownArc { tail, head } => write!(f, "truck arc {tail}->{head} is not a road"),
            RepeatedArc { tail, head } => write!(f, "truck arc {tail}->{head} used twice"),
            TooManyTrucks { used, limit } => write!(f, "{used} trucks leave the depot, limit {limit}"),
            FlowImbalance { node } => write!(f, "truck flow unbalanced at node {node}"),
            ArrivalMismatch { node, stated, expected } => {
                write!(f, "arrival at node {node} is {stated}, timing gives {expected}")
            }
            NegativeIdle { satellite } => write!(f, "negative idle time at satellite {satellite}"),
            DroneAtUnvisited { satellite } => write!(f, "drone route at unvisited satellite {satellite}"),
            BadSlot { satellite, slot } => write!(f, "satellite {satellite} has no drone slot {slot}"),
            SlotReused { satellite, slot } => write!(f, "drone slot {slot} at satellite {satellite} flies twice"),
            IdleTooShort { satellite, slot, idle, duration } => {
                write!(f, "idle {idle} at satellite {satellite} shorter than slot {slot} route {duration}")
            }
            Route { satellite, slot, violation } => {
                write!(f, "route at satellite {satellite} slot {slot}: {violation}")
            }
            Cover { community, visits, missed } => {
                write!(f, "visit cover broken at community {community}: {visits} visits, missed = {missed}")
            }
            ServiceTime { satellite, community, stated, expected } => {
                write!(f, "service time of community {community} from satellite {satellite} is {stated}, expected {expected}")
            }
            ScenarioOutsideSet { scenario } => write!(f, "scenario {scenario} breaks the uncertainty budgets"),
            ScenarioDemand { scenario, community } => {
                write!(f, "scenario {scenario} demand at community {community} disagrees with its flags")
            }
            Shortfall { scenario, community, stated, expected } => {
                write!(f, "shortfall of community {community} in scenario {scenario} is {stated}, expected {expected}")
            }
            RecourseMismatch { stated, expected } => write!(f, "recourse cost {stated}, expected {expected}"),
            CostMismatch { stated, expected } => write!(f, "cost {stated}, recomputed {expected}"),
            Shape(msg) => write!(f, "malformed solution: {msg}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reevaluation {
    pub violations: Vec<ReevalViolation>,
    pub cost: f64,
    pub delay_cost: f64,
    pub miss_cost: f64,
    pub recourse_cost: f64,
    pub unfulfilled_pct: f64,
    pub avg_delay: f64,
}

impl Reevaluation {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= FEAS_TOL * (1.0 + b.abs())
}

fn check_shapes(inst: &Instance, sol: &MasterSolution, scenarios: &[Scenario]) -> Option<String> {
    let (ns, nc) = (inst.num_satellites(), inst.num_communities());
    if sol.missed.len() != nc {
        return Some(format!("{} miss flags for {nc} communities", sol.missed.len()));
    }
    if sol.satellite_arrival.len() != ns || sol.idle.len() != ns {
        return Some("arrival or idle vector length".into());
    }
    if sol.service_time.len() != ns || sol.service_time.iter().any(|r| r.len() != nc) {
        return Some("service time table shape".into());
    }
    if sol.shortfall.len() != scenarios.len() || sol.shortfall.iter().any(|r| r.len() != nc) {
        return Some("shortfall table shape".into());
    }
    if scenarios.iter().any(|sc| sc.demand.len() != nc || sc.deviated.len() != nc) {
        return Some("scenario length".into());
    }
    if let Some(a) = sol.assignments.iter().find(|a| a.satellite >= ns || a.route.satellite != a.satellite) {
        return Some(format!("assignment names satellite {}", a.satellite));
    }
    None
}

/// Checks `sol` against the instance and the scenario set, and compares the
/// rebuilt cost to `stated_cost`.
pub fn reevaluate(
    inst: &Instance,
    scenarios: &[Scenario],
    sol: &MasterSolution,
    stated_cost: f64,
) -> Result<Reevaluation> {
    let reach = build_reachability(inst)?;
    let (ns, nc, md) = (inst.num_satellites(), inst.num_communities(), inst.drones_per_truck);
    let mut out = Vec::new();
    if let Some(msg) = check_shapes(inst, sol, scenarios) {
        return Ok(Reevaluation {
            violations: vec![ReevalViolation::Shape(msg)],
            cost: f64::NAN,
            delay_cost: f64::NAN,
            miss_cost: f64::NAN,
            recourse_cost: f64::NAN,
            unfulfilled_pct: f64::NAN,
            avg_delay: f64::NAN,
        });
    }

    // trucks
    let roads = inst.truck_arcs();
    let mut seen = BTreeSet::new();
    let mut arcs = Vec::new();
    for &(tail, head) in &sol.arcs_used {
        match roads.iter().find(|a| a.tail == tail && a.head == head) {
            None => out.push(ReevalViolation::UnknownArc { tail, head }),
            Some(a) => {
                if !seen.insert((tail, head)) {
                    out.push(ReevalViolation::RepeatedArc { tail, head });
                } else {
                    arcs.push(*a);
                }
            }
        }
    }
    let leaving = arcs.iter().filter(|a| a.tail == DEPOT_NODE).count();
    if leaving > inst.num_trucks {
        out.push(ReevalViolation::TooManyTrucks { used: leaving, limit: inst.num_trucks });
    }
    for node in 1..=ns {
        let into = arcs.iter().filter(|a| a.head == node).count();
        let from = arcs.iter().filter(|a| a.tail == node).count();
        if into != from {
            out.push(ReevalViolation::FlowImbalance { node });
        }
    }
    let visited: Vec<bool> = (1..=ns).map(|node| arcs.iter().any(|a| a.head == node)).collect();
    let clock = |node: usize| -> (f64, f64) {
        if node == DEPOT_NODE {
            (0.0, 0.0)
        } else {
            (sol.satellite_arrival[node - 1], sol.idle[node - 1])
        }
    };
    for a in arcs.iter().filter(|a| a.head != DEPOT_NODE) {
        let (t, d) = clock(a.tail);
        let expected = t + d + a.minutes;
        let stated = sol.satellite_arrival[a.head - 1];
        if !close(stated, expected) {
            out.push(ReevalViolation::ArrivalMismatch { node: a.head, stated, expected });
        }
    }
    for s in 0..ns {
        if sol.idle[s] < -FEAS_TOL {
            out.push(ReevalViolation::NegativeIdle { satellite: s });
        }
    }

    // drones
    let mut slots = BTreeSet::new();
    for a in &sol.assignments {
        let (s, l) = (a.satellite, a.slot);
        if !visited[s] {
            out.push(ReevalViolation::DroneAtUnvisited { satellite: s });
        }
        if l >= md {
            out.push(ReevalViolation::BadSlot { satellite: s, slot: l });
        }
        if !slots.insert((s, l)) {
            out.push(ReevalViolation::SlotReused { satellite: s, slot: l });
        }
        let violations = check_route(inst, &reach, &a.route, scenarios.len());
        let broken = !violations.is_empty();
        out.extend(violations.into_iter().map(|v| ReevalViolation::Route { satellite: s, slot: l, violation: v }));
        if broken {
            continue;
        }
        if sol.idle[s] + FEAS_TOL < a.route.duration {
            out.push(ReevalViolation::IdleTooShort { satellite: s, slot: l, idle: sol.idle[s], duration: a.route.duration });
        }
    }
    if out.iter().any(|v| matches!(v, ReevalViolation::Route { .. } | ReevalViolation::BadSlot { .. })) {
        return Ok(Reevaluation {
            violations: out,
            cost: f64::NAN,
            delay_cost: f64::NAN,
            miss_cost: f64::NAN,
            recourse_cost: f64::NAN,
            unfulfilled_pct: f64::NAN,
            avg_delay: f64::NAN,
        });
    }

    // cover, service times and the delay and miss terms
    let mut visits = vec![0usize; nc];
    let mut expected_service = vec![vec![0.0; nc]; ns];
    for a in &sol.assignments {
        for (&c, &t) in a.route.visits.iter().zip(&a.route.visit_times) {
            visits[c] += 1;
            expected_service[a.satellite][c] = sol.satellite_arrival[a.satellite] + t;
        }
    }
    let mut miss_cost = 0.0;
    for c in 0..nc {
        if visits[c] + usize::from(sol.missed[c]) != 1 {
            out.push(ReevalViolation::Cover { community: c, visits: visits[c], missed: sol.missed[c] });
        }
        if sol.missed[c] {
            miss_cost += inst.communities[c].miss_cost;
        }
    }
    let mut delay_cost = 0.0;
    let mut served_times = Vec::new();
    for s in 0..ns {
        for c in 0..nc {
            let (stated, expected) = (sol.service_time[s][c], expected_service[s][c]);
            if !close(stated, expected) {
                out.push(ReevalViolation::ServiceTime { satellite: s, community: c, stated, expected });
            }
            delay_cost += inst.communities[c].delay_cost * expected;
        }
    }
    for a in &sol.assignments {
        for &c in &a.route.visits {
            served_times.push(expected_service[a.satellite][c]);
        }
    }

    // scenarios, shortfalls and the recourse term
    let mut recourse_cost: f64 = 0.0;
    let mut shares = Vec::with_capacity(scenarios.len());
    for (w, sc) in scenarios.iter().enumerate() {
        if !in_uncertainty_set(inst, &sc.deviated) {
            out.push(ReevalViolation::ScenarioOutsideSet { scenario: w });
        }
        let mut delivered = vec![0.0; nc];
        for a in &sol.assignments {
            for (k, &c) in a.route.visits.iter().enumerate() {
                delivered[c] += a.route.deliveries[w][k];
            }
        }
        let mut cost = 0.0;
        let mut short_total = 0.0;
        for c in 0..nc {
            let com = &inst.communities[c];
            let q = com.nominal_demand + if sc.deviated[c] { com.max_deviation } else { 0.0 };
            if !close(sc.demand[c], q) {
                out.push(ReevalViolation::ScenarioDemand { scenario: w, community: c });
            }
            let expected = (q - delivered[c]).max(0.0);
            let stated = sol.shortfall[w][c];
            if !close(stated, expected) {
                out.push(ReevalViolation::Shortfall { scenario: w, community: c, stated, expected });
            }
            cost += com.shortage_cost * expected;
            short_total += expected;
        }
        recourse_cost = recourse_cost.max(cost);
        let demand: f64 = sc.demand.iter().sum();
        shares.push(if demand > 0.0 { 100.0 * short_total / demand } else { 0.0 });
    }
    if (sol.recourse_cost - recourse_cost).abs() > COST_TOL {
        out.push(ReevalViolation::RecourseMismatch { stated: sol.recourse_cost, expected: recourse_cost });
    }
    let cost = delay_cost + miss_cost + recourse_cost;
    if (stated_cost - cost).abs() > COST_TOL {
        out.push(ReevalViolation::CostMismatch { stated: stated_cost, expected: cost });
    }
    let mean = |xs: &[f64]| if xs.is_empty() { 0.0 } else { xs.iter().sum::<f64>() / xs.len() as f64 };
    Ok(Reevaluation {
        violations: out,
        cost,
        delay_cost,
        miss_cost,
        recourse_cost,
        unfulfilled_pct: mean(&shares),
        avg_delay: mean(&served_times),
    })
}

/// Re-evaluates the final solution of a run report.
pub fn reevaluate_report(inst: &Instance, report: &RunReport) -> Result<Reevaluation> {
    reevaluate(inst, &report.scenarios, &report.solution, report.cost())
}
