//! Outer scenario loop with inner column generation.
//!
//! Each outer iteration runs column generation on the LP relaxation of the
//! master, fixes an integral plan by relax-and-fix (the lower bound), finds
//! the worst admissible demand against that plan (the upper bound) and,
//! while the bounds are more than ε apart, adds that scenario and repeats.

use std::time::{Duration, Instant};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::master::{build_master, compute_psi, solve_relax_and_fix, solve_relaxed, MasterSolution, RelaxFixOptions};
use crate::metrics::{compute_metrics, Metrics};
use crate::model::{build_reachability, validate_instance, Instance, Reachability};
use crate::pricing::{extend_deliveries, generate_columns};
use crate::route::DroneRoute;
use crate::scenariogen::{build_worstcase, solve_worstcase, Scenario};

/// Columns enter the pool only below this reduced cost.
pub const IMPROVING_RC: f64 = -1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Overrides the instance's ε when set.
    pub epsilon: Option<f64>,
    pub max_outer: usize,
    pub max_cg_rounds: usize,
    pub time_limit_secs: Option<f64>,
    pub seed: u64,
    /// Node cap for each relax-and-fix phase.
    pub node_limit: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { epsilon: None, max_outer: 20, max_cg_rounds: 50, time_limit_secs: None, seed: 0, node_limit: 20_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Converged,
    IterationLimit,
    TimeLimit,
    /// The worst case repeated a scenario already in Ω′ with the gap open.
    Stalled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub n: usize,
    pub lower_bound: f64,
    pub upper_bound: f64,
    /// OPT(Γ_Q) against this iteration's plan.
    pub worst_case: f64,
    pub scenarios: usize,
    pub columns_added: usize,
    pub cg_rounds: usize,
    /// Relaxed master objective before and after each pricing round.
    pub relaxed_objectives: Vec<f64>,
    pub wall_seconds: f64,
    /// LB above UB; both are heuristic bounds so this can happen.
    pub crossed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub status: RunStatus,
    pub iterations: Vec<IterationRecord>,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub epsilon: f64,
    pub scenarios: Vec<Scenario>,
    pub solution: MasterSolution,
    pub pool_sizes: Vec<usize>,
    pub wall_seconds: f64,
    pub metrics: Metrics,
}

impl RunReport {
    pub fn cost(&self) -> f64 {
        self.solution.objective
    }
}

/// Stop iff UB − LB ≤ ε.
pub fn check_termination(lb: f64, ub: f64, epsilon: f64) -> bool {
    ub - lb <= epsilon
}

/// Per satellite, one out-and-back sortie to each of its `m^d` nearest
/// reachable communities, with plans for every scenario in `scenarios`.
pub fn initial_routes(inst: &Instance, reach: &Reachability, scenarios: &[Scenario]) -> Vec<Vec<DroneRoute>> {
    (0..inst.num_satellites())
        .map(|s| {
            let mut near = reach.members(s).to_vec();
            near.sort_by(|&a, &b| reach.sat_minutes(s, a).total_cmp(&reach.sat_minutes(s, b)).then(a.cmp(&b)));
            near.truncate(inst.drones_per_truck);
            near.into_iter()
                .map(|c| {
                    let mut r = DroneRoute::new(reach, s, vec![c]);
                    for sc in scenarios {
                        extend_deliveries(inst, &mut r, sc);
                    }
                    r
                })
                .collect()
        })
        .collect()
}

struct Clock {
    start: Instant,
    limit: Option<Duration>,
}

impl Clock {
    fn expired(&self) -> bool {
        self.limit.is_some_and(|l| self.start.elapsed() >= l)
    }

    fn remaining(&self) -> Option<Duration> {
        self.limit.map(|l| l.saturating_sub(self.start.elapsed()))
    }
}

/// Column generation on the relaxed master. Returns the relaxed objective
/// trace and the number of columns added.
fn column_generation(
    inst: &Instance,
    reach: &Reachability,
    pools: &mut [Vec<DroneRoute>],
    scenarios: &[Scenario],
    cfg: &RunConfig,
    clock: &Clock,
) -> Result<(Vec<f64>, usize, usize)> {
    let mut trace = Vec::new();
    let mut added = 0;
    let mut rounds = 0;
    loop {
        let master = build_master(inst, reach, pools, scenarios)?;
        let (lp, duals) = solve_relaxed(&master)?;
        trace.push(lp.objective);
        if rounds >= cfg.max_cg_rounds || clock.expired() {
            break;
        }
        let fresh: Vec<Vec<DroneRoute>> = (0..inst.num_satellites())
            .into_par_iter()
            .map(|s| generate_columns(inst, reach, s, &duals, scenarios))
            .collect::<Result<_>>()?;
        let mut round_added = 0;
        for (s, routes) in fresh.into_iter().enumerate() {
            for r in routes {
                let rc = r.reduced_cost.unwrap_or(0.0);
                if rc < IMPROVING_RC && !pools[s].iter().any(|p| p.same_path(&r)) {
                    pools[s].push(r);
                    round_added += 1;
                }
            }
        }
        if round_added == 0 {
            break;
        }
        rounds += 1;
        added += round_added;
    }
    Ok((trace, added, rounds))
}

pub fn run(inst: &Instance, cfg: &RunConfig) -> Result<RunReport> {
    let report = validate_instance(inst);
    if !report.is_valid() {
        return Err(Error::Invalid(report.to_string()));
    }
    let reach = build_reachability(inst)?;
    let clock = Clock { start: Instant::now(), limit: cfg.time_limit_secs.map(Duration::from_secs_f64) };
    let epsilon = cfg.epsilon.unwrap_or(inst.epsilon);
    let mut scenarios = vec![Scenario::nominal(inst)];
    let mut pools = initial_routes(inst, &reach, &scenarios);
    let mut lb;
    let mut ub = f64::INFINITY;
    let mut iterations = Vec::new();
    let mut n = 1;
    let (status, solution) = loop {
        let (relaxed, columns_added, cg_rounds) =
            column_generation(inst, &reach, &mut pools, &scenarios, cfg, &clock)?;
        let master = build_master(inst, &reach, &pools, &scenarios)?;
        let opts = RelaxFixOptions { node_limit: cfg.node_limit, time_limit: clock.remaining() };
        let sol = solve_relax_and_fix(inst, &master, &pools, &scenarios, &opts)?;
        let psi = compute_psi(inst, &sol, scenarios.len());
        lb = sol.objective;
        let wc = solve_worstcase(inst, &build_worstcase(inst, &psi))?;
        ub = ub.min(sol.delay_and_miss_cost(inst) + wc.objective);
        let crossed = lb > ub + 1e-9;
        if crossed {
            warn!("iteration {n}: lower bound {lb:.4} above upper bound {ub:.4}");
        }
        info!(
            "iteration {n}: LB {lb:.4} UB {ub:.4} |Ω'| {} columns +{columns_added} in {cg_rounds} rounds",
            scenarios.len()
        );
        iterations.push(IterationRecord {
            n,
            lower_bound: lb,
            upper_bound: ub,
            worst_case: wc.objective,
            scenarios: scenarios.len(),
            columns_added,
            cg_rounds,
            relaxed_objectives: relaxed,
            wall_seconds: clock.start.elapsed().as_secs_f64(),
            crossed,
        });
        if check_termination(lb, ub, epsilon) {
            break (RunStatus::Converged, sol);
        }
        if n >= cfg.max_outer {
            break (RunStatus::IterationLimit, sol);
        }
        if clock.expired() {
            break (RunStatus::TimeLimit, sol);
        }
        if scenarios.iter().any(|s| s.deviated == wc.scenario.deviated) {
            break (RunStatus::Stalled, sol);
        }
        for pool in pools.iter_mut() {
            for r in pool.iter_mut() {
                extend_deliveries(inst, r, &wc.scenario);
            }
        }
        scenarios.push(wc.scenario);
        n += 1;
    };
    let wall_seconds = clock.start.elapsed().as_secs_f64();
    let metrics = compute_metrics(inst, &solution, &scenarios, wall_seconds);
    Ok(RunReport {
        status,
        iterations,
        lower_bound: lb,
        upper_bound: ub,
        epsilon,
        scenarios,
        solution,
        pool_sizes: pools.iter().map(Vec::len).collect(),
        wall_seconds,
        metrics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::*;
    use crate::route::check_route;

    #[test]
    fn termination_rule_is_inclusive() {
        assert!(check_termination(5.0, 5.0, 1.0));
        assert!(check_termination(5.0, 6.0, 1.0));
        assert!(!check_termination(5.0, 6.001, 1.0));
    }

    #[test]
    fn initial_routes_examples() {
        let lat = 18.2;
        let comms = vec![community(1, lat, east_of(lat, -66.5, 10.0), 5.0)];
        let inst = line_instance(&[0.0, 60.0], comms);
        let reach = build_reachability(&inst).unwrap();
        let scen = vec![Scenario::nominal(&inst)];
        let pools = initial_routes(&inst, &reach, &scen);
        assert_eq!(pools[0].len(), 1);
        assert!(pools[1].is_empty());
        let r = &pools[0][0];
        assert!((r.duration - 20.0).abs() < 1e-3);
        assert!((r.visit_times[0] - 10.0).abs() < 1e-3);
        assert!(check_route(&inst, &reach, r, 1).is_empty());
    }

    #[test]
    fn zero_demand_converges_at_once() {
        let lat = 18.2;
        let mut comms = vec![community(1, lat, east_of(lat, -66.5, 4.0), 0.0), community(2, lat, east_of(lat, -66.5, 6.0), 0.0)];
        for c in &mut comms {
            c.max_deviation = 0.0;
            c.delay_cost = 0.0;
        }
        let inst = line_instance(&[0.0], comms);
        let rep = run(&inst, &RunConfig::default()).unwrap();
        assert_eq!(rep.status, RunStatus::Converged);
        assert_eq!(rep.iterations.len(), 1);
        assert!(rep.cost().abs() < 1e-9);
    }

    #[test]
    fn single_community_takes_two_iterations() {
        let lat = 18.2;
        let inst = {
            let mut i = line_instance(&[0.0], vec![community(1, lat, east_of(lat, -66.5, 5.0), 6.0)]);
            i.gamma_total = 1;
            i.gamma_region = vec![1];
            i
        };
        let rep = run(&inst, &RunConfig::default()).unwrap();
        assert_eq!(rep.status, RunStatus::Converged);
        // nominal first, then the deviated scenario, then the bounds meet
        assert_eq!(rep.iterations.len(), 2);
        assert_eq!(rep.scenarios.len(), 2);
        assert_eq!(rep.scenarios[1].deviated, vec![true]);
        assert!(rep.upper_bound - rep.lower_bound <= 1.0);
        // delivery reaches 9 units in both scenarios, delay is the out leg
        assert!(rep.solution.recourse_cost.abs() < 1e-9);
        let t = rep.solution.assignments[0].route.visit_times[0];
        assert!((rep.cost() - t).abs() < 1e-6);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(8))]

        #[test]
        fn outer_loop_invariants(seed in 0u64..1000, gamma in 0.0f64..=100.0) {
            let spec = crate::instgen::GenSpec {
                seed,
                communities: 6,
                satellites: 3,
                gamma_pct: gamma,
                gamma_region_pct: 100.0,
                ..Default::default()
            };
            let inst = crate::instgen::generate(&spec).unwrap();
            let rep = run(&inst, &RunConfig::default()).unwrap();
            // UB only ever takes the minimum
            for w in rep.iterations.windows(2) {
                proptest::prop_assert!(w[1].upper_bound <= w[0].upper_bound + 1e-9);
            }
            for (i, sc) in rep.scenarios.iter().enumerate() {
                proptest::prop_assert!(crate::scenariogen::in_uncertainty_set(&inst, &sc.deviated));
                proptest::prop_assert!(rep.scenarios[..i].iter().all(|o| o.deviated != sc.deviated), "scenario {} repeats", i);
            }
            let ev = crate::reeval::reevaluate_report(&inst, &rep).unwrap();
            proptest::prop_assert!(ev.is_feasible(), "{:?}", ev.violations);
            proptest::prop_assert!((ev.cost - rep.cost()).abs() <= 1e-4);
        }
    }
}
