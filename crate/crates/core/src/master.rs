//! Restricted master problem over the current route pools and scenarios.
//!
//! Variables: truck arcs x, route-to-slot assignments z, miss flags J,
//! truck arrival T_s, idle time Δ_s, community service time T^d, shortfall
//! R per scenario and the recourse epigraph 𝒴. Row handles are kept so the
//! LP duals can be handed to pricing.

use std::time::Duration;

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use linopt::{solve_lp, solve_mip, solve_mip_from, LinearModel, LpSolution, LpStatus, MipOptions, MipStatus, Relation, RowId, VarId};

use crate::error::{Error, Result};
use crate::model::{Instance, Reachability, TruckArc, DEPOT_NODE};
use crate::route::DroneRoute;
use crate::scenariogen::Scenario;

/// Variable and row handles into a built master model.
#[derive(Debug, Clone)]
pub struct MasterIndex {
    pub arcs: Vec<TruckArc>,
    pub x: Vec<VarId>,
    /// z[s][slot][p] for p in the pool of s.
    pub z: Vec<Vec<Vec<VarId>>>,
    pub miss: Vec<VarId>,
    pub arrival: Vec<VarId>,
    pub idle: Vec<VarId>,
    /// T^d[s][c], present only for c in C_s.
    pub service: Vec<Vec<Option<VarId>>>,
    pub shortfall: Vec<Vec<VarId>>,
    pub recourse: VarId,
    pub row_drones: Vec<RowId>,
    pub row_slot: Vec<Vec<RowId>>,
    pub row_idle: Vec<Vec<RowId>>,
    pub row_cover: Vec<RowId>,
    pub row_service: Vec<Vec<Option<RowId>>>,
    pub row_demand: Vec<Vec<RowId>>,
}

#[derive(Debug, Clone)]
pub struct Master {
    pub model: LinearModel,
    pub index: MasterIndex,
}

/// Row duals needed to price a drone route.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DualPrices {
    /// θ_s, drone-count rows.
    pub theta: Vec<f64>,
    /// φ_sℓ, one-route-per-slot rows.
    pub phi: Vec<Vec<f64>>,
    /// ρ_sℓ, idle-time rows.
    pub rho: Vec<Vec<f64>>,
    /// ξ_c, cover rows.
    pub xi: Vec<f64>,
    /// α_sc, service-time rows; 0 where c ∉ C_s.
    pub alpha: Vec<Vec<f64>>,
    /// β_c^ω, demand rows.
    pub beta: Vec<Vec<f64>>,
}

impl DualPrices {
    /// All-zero prices with the right shape.
    pub fn zeros(inst: &Instance, scenarios: usize) -> Self {
        let (ns, nc, md) = (inst.num_satellites(), inst.num_communities(), inst.drones_per_truck);
        Self {
            theta: vec![0.0; ns],
            phi: vec![vec![0.0; md]; ns],
            rho: vec![vec![0.0; md]; ns],
            xi: vec![0.0; nc],
            alpha: vec![vec![0.0; nc]; ns],
            beta: vec![vec![0.0; nc]; scenarios],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub satellite: usize,
    pub slot: usize,
    pub pool_index: usize,
    pub route: DroneRoute,
}

/// Integral master solution with its continuous parts recomputed exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MasterSolution {
    /// Used truck arcs as node pairs (0 = depot, 1 + s = satellite s).
    pub arcs_used: Vec<(usize, usize)>,
    pub assignments: Vec<Assignment>,
    /// J_c.
    pub missed: Vec<bool>,
    /// T_s.
    pub satellite_arrival: Vec<f64>,
    /// Δ_s.
    pub idle: Vec<f64>,
    /// T^d[s][c].
    pub service_time: Vec<Vec<f64>>,
    /// R[ω][c].
    pub shortfall: Vec<Vec<f64>>,
    /// 𝒴.
    pub recourse_cost: f64,
    pub objective: f64,
}

impl MasterSolution {
    pub fn visited(&self, s: usize) -> bool {
        let node = Instance::satellite_node(s);
        self.arcs_used.iter().any(|&(_, h)| h == node)
    }

    /// Σ F^T T^d + Σ F^R J.
    pub fn delay_and_miss_cost(&self, inst: &Instance) -> f64 {
        let mut total = 0.0;
        for row in &self.service_time {
            for (c, t) in row.iter().enumerate() {
                total += inst.communities[c].delay_cost * t;
            }
        }
        for (c, &j) in self.missed.iter().enumerate() {
            if j {
                total += inst.communities[c].miss_cost;
            }
        }
        total
    }
}

fn check_pools(inst: &Instance, reach: &Reachability, pools: &[Vec<DroneRoute>], scenarios: usize) -> Result<()> {
    if pools.len() != inst.num_satellites() {
        return Err(Error::Build(format!("{} route pools for {} satellites", pools.len(), inst.num_satellites())));
    }
    for (s, pool) in pools.iter().enumerate() {
        for (p, r) in pool.iter().enumerate() {
            if r.satellite != s {
                return Err(Error::Build(format!("route {p} in pool {s} belongs to satellite {}", r.satellite)));
            }
            if let Some(&c) = r.visits.iter().find(|&&c| c >= inst.num_communities() || !reach.reaches(s, c)) {
                return Err(Error::Build(format!("route {p} of satellite {s} visits community {c} outside its range")));
            }
            if r.deliveries.len() != scenarios || r.deliveries.iter().any(|d| d.len() != r.visits.len()) {
                return Err(Error::Build(format!("route {p} of satellite {s} lacks a delivery plan per scenario")));
            }
        }
    }
    Ok(())
}

pub fn build_master(
    inst: &Instance,
    reach: &Reachability,
    pools: &[Vec<DroneRoute>],
    scenarios: &[Scenario],
) -> Result<Master> {
    check_pools(inst, reach, pools, scenarios.len())?;
    let (ns, nc, md) = (inst.num_satellites(), inst.num_communities(), inst.drones_per_truck);
    let big_m = inst.big_m;
    let mut m = LinearModel::new();

    let arcs = inst.truck_arcs();
    let x: Vec<VarId> = arcs.iter().map(|a| m.binary(format!("x_{}_{}", a.tail, a.head), 0.0)).collect();
    let z: Vec<Vec<Vec<VarId>>> = (0..ns)
        .map(|s| (0..md).map(|l| (0..pools[s].len()).map(|p| m.binary(format!("z_{s}_{l}_{p}"), 0.0)).collect()).collect())
        .collect();
    let miss: Vec<VarId> = inst.communities.iter().map(|c| m.binary(format!("J_{}", c.id), c.miss_cost)).collect();
    let arrival: Vec<VarId> = (0..ns).map(|s| m.continuous(format!("T_{s}"), 0.0, f64::INFINITY, 0.0)).collect();
    let idle: Vec<VarId> = (0..ns).map(|s| m.continuous(format!("D_{s}"), 0.0, f64::INFINITY, 0.0)).collect();
    let service: Vec<Vec<Option<VarId>>> = (0..ns)
        .map(|s| {
            (0..nc)
                .map(|c| {
                    reach.reaches(s, c).then(|| {
                        m.continuous(format!("Td_{s}_{c}"), 0.0, f64::INFINITY, inst.communities[c].delay_cost)
                    })
                })
                .collect()
        })
        .collect();
    let shortfall: Vec<Vec<VarId>> = (0..scenarios.len())
        .map(|w| (0..nc).map(|c| m.continuous(format!("R_{w}_{c}"), 0.0, f64::INFINITY, 0.0)).collect())
        .collect();
    let recourse = m.continuous("Y", 0.0, f64::INFINITY, 1.0);

    // truck count and flow
    let out_of_depot: Vec<_> = arcs.iter().zip(&x).filter(|(a, _)| a.tail == DEPOT_NODE).map(|(_, &v)| (v, 1.0)).collect();
    m.add_row("trucks", out_of_depot, Relation::Le, inst.num_trucks as f64);
    for node in 1..=ns {
        let terms = arcs.iter().zip(&x).filter_map(|(a, &v)| {
            if a.tail == node {
                Some((v, 1.0))
            } else if a.head == node {
                Some((v, -1.0))
            } else {
                None
            }
        });
        m.add_row(format!("flow_{node}"), terms.collect::<Vec<_>>(), Relation::Eq, 0.0);
    }
    // arrival timing; the depot has T = Δ = 0 and returning arcs carry no row
    for (a, &xv) in arcs.iter().zip(&x) {
        if a.head == DEPOT_NODE {
            continue;
        }
        let mut terms = vec![(arrival[a.head - 1], 1.0)];
        if a.tail != DEPOT_NODE {
            terms.push((arrival[a.tail - 1], -1.0));
            terms.push((idle[a.tail - 1], -1.0));
        }
        let mut lo = terms.clone();
        lo.push((xv, -big_m));
        m.add_row(format!("tlo_{}_{}", a.tail, a.head), lo, Relation::Ge, a.minutes - big_m);
        let mut hi = terms;
        hi.push((xv, big_m));
        m.add_row(format!("thi_{}_{}", a.tail, a.head), hi, Relation::Le, a.minutes + big_m);
    }
    let into = |node: usize| -> Vec<VarId> {
        arcs.iter().zip(&x).filter(|(a, _)| a.head == node).map(|(_, &v)| v).collect()
    };
    let mut row_drones = Vec::with_capacity(ns);
    let mut row_slot = Vec::with_capacity(ns);
    let mut row_idle = Vec::with_capacity(ns);
    for s in 0..ns {
        let inflow = into(Instance::satellite_node(s));
        let mut terms: Vec<(VarId, f64)> = z[s].iter().flatten().map(|&v| (v, 1.0)).collect();
        terms.extend(inflow.iter().map(|&v| (v, -(md as f64))));
        row_drones.push(m.add_row(format!("drones_{s}"), terms, Relation::Le, 0.0));
        let mut slots = Vec::with_capacity(md);
        let mut idles = Vec::with_capacity(md);
        for l in 0..md {
            let mut terms: Vec<(VarId, f64)> = z[s][l].iter().map(|&v| (v, 1.0)).collect();
            terms.extend(inflow.iter().map(|&v| (v, -1.0)));
            slots.push(m.add_row(format!("slot_{s}_{l}"), terms, Relation::Le, 0.0));
            let mut terms: Vec<(VarId, f64)> =
                z[s][l].iter().zip(&pools[s]).map(|(&v, r)| (v, r.duration)).collect();
            terms.push((idle[s], -1.0));
            idles.push(m.add_row(format!("idle_{s}_{l}"), terms, Relation::Le, 0.0));
        }
        row_slot.push(slots);
        row_idle.push(idles);
    }
    let mut row_cover = Vec::with_capacity(nc);
    for c in 0..nc {
        let mut terms = vec![(miss[c], 1.0)];
        for s in 0..ns {
            for (p, r) in pools[s].iter().enumerate() {
                if r.covers(c) {
                    terms.extend((0..md).map(|l| (z[s][l][p], 1.0)));
                }
            }
        }
        row_cover.push(m.add_row(format!("cover_{c}"), terms, Relation::Eq, 1.0));
    }
    // T_s + Σ (t̄ + M b) z − T^d ≤ M, the big-M service-time row rearranged
    let mut row_service = vec![vec![None; nc]; ns];
    for s in 0..ns {
        for &c in reach.members(s) {
            let mut terms = vec![(arrival[s], 1.0), (service[s][c].expect("member has a service variable"), -1.0)];
            for (p, r) in pools[s].iter().enumerate() {
                if let Some(k) = r.position(c) {
                    let coef = r.visit_times[k] + big_m;
                    terms.extend((0..md).map(|l| (z[s][l][p], coef)));
                }
            }
            row_service[s][c] = Some(m.add_row(format!("serve_{s}_{c}"), terms, Relation::Le, big_m));
        }
    }
    let mut row_demand = Vec::with_capacity(scenarios.len());
    for (w, sc) in scenarios.iter().enumerate() {
        let mut terms = vec![(recourse, 1.0)];
        terms.extend((0..nc).map(|c| (shortfall[w][c], -inst.communities[c].shortage_cost)));
        m.add_row(format!("recourse_{w}"), terms, Relation::Ge, 0.0);
        let mut rows = Vec::with_capacity(nc);
        for c in 0..nc {
            let mut terms = vec![(shortfall[w][c], 1.0)];
            for s in 0..ns {
                for (p, r) in pools[s].iter().enumerate() {
                    if let Some(k) = r.position(c) {
                        let d = r.deliveries[w][k];
                        terms.extend((0..md).map(|l| (z[s][l][p], d)));
                    }
                }
            }
            rows.push(m.add_row(format!("demand_{w}_{c}"), terms, Relation::Ge, sc.demand[c]));
        }
        row_demand.push(rows);
    }

    Ok(Master {
        model: m,
        index: MasterIndex {
            arcs,
            x,
            z,
            miss,
            arrival,
            idle,
            service,
            shortfall,
            recourse,
            row_drones,
            row_slot,
            row_idle,
            row_cover,
            row_service,
            row_demand,
        },
    })
}

fn extract_duals(master: &Master, lp: &LpSolution) -> DualPrices {
    let ix = &master.index;
    let ns = ix.row_drones.len();
    let nc = ix.row_cover.len();
    DualPrices {
        theta: ix.row_drones.iter().map(|&r| lp.dual(r)).collect(),
        phi: ix.row_slot.iter().map(|rows| rows.iter().map(|&r| lp.dual(r)).collect()).collect(),
        rho: ix.row_idle.iter().map(|rows| rows.iter().map(|&r| lp.dual(r)).collect()).collect(),
        xi: ix.row_cover.iter().map(|&r| lp.dual(r)).collect(),
        alpha: (0..ns).map(|s| (0..nc).map(|c| ix.row_service[s][c].map_or(0.0, |r| lp.dual(r))).collect()).collect(),
        beta: ix.row_demand.iter().map(|rows| rows.iter().map(|&r| lp.dual(r)).collect()).collect(),
    }
}

/// LP relaxation of the master and its duals.
pub fn solve_relaxed(master: &Master) -> Result<(LpSolution, DualPrices)> {
    let lp = solve_lp(&master.model)?;
    if lp.status != LpStatus::Optimal {
        return Err(Error::Internal(format!("relaxed master ended {:?}", lp.status)));
    }
    let duals = extract_duals(master, &lp);
    Ok((lp, duals))
}

#[derive(Debug, Clone)]
pub struct RelaxFixOptions {
    pub node_limit: usize,
    pub time_limit: Option<Duration>,
}

impl Default for RelaxFixOptions {
    fn default() -> Self {
        Self { node_limit: 20_000, time_limit: None }
    }
}

fn run_mip(model: &LinearModel, opts: &RelaxFixOptions, phase: u8, start: Option<&[f64]>) -> Result<Vec<f64>> {
    let mip = MipOptions { node_limit: opts.node_limit, time_limit: opts.time_limit, ..MipOptions::default() };
    let sol = match start {
        Some(x0) => solve_mip_from(model, &mip, x0)?,
        None => solve_mip(model, &mip)?,
    };
    debug!("relax-and-fix phase {phase}: {:?} obj {:.4} after {} nodes", sol.status, sol.objective, sol.nodes);
    match (sol.status, sol.values) {
        (MipStatus::Optimal, Some(v)) => Ok(v),
        (MipStatus::NodeLimit | MipStatus::TimeLimit, Some(v)) => {
            warn!("relax-and-fix phase {phase} stopped at {:?} with gap {:.4}", sol.status, sol.gap);
            Ok(v)
        }
        (status, _) => Err(Error::Internal(format!("relax-and-fix phase {phase} ended {status:?} without a solution"))),
    }
}

/// Drone slots at a satellite are interchangeable: fill them in order and
/// with strictly increasing pool indices.
fn break_slot_symmetry(model: &mut LinearModel, ix: &MasterIndex) {
    for (s, slots) in ix.z.iter().enumerate() {
        let pool = slots.first().map_or(0, Vec::len) as f64;
        for l in 1..slots.len() {
            let (prev, cur) = (&slots[l - 1], &slots[l]);
            let mut used: Vec<(VarId, f64)> = prev.iter().map(|&v| (v, 1.0)).collect();
            used.extend(cur.iter().map(|&v| (v, -1.0)));
            model.add_row(format!("slot_order_{s}_{l}"), used, Relation::Ge, 0.0);
            // Σ (p+1) z_l − Σ (p+1) z_{l−1} ≥ (P+2) Σ z_l − (P+1)
            let mut idx: Vec<(VarId, f64)> =
                cur.iter().enumerate().map(|(p, &v)| (v, (p + 1) as f64 - (pool + 2.0))).collect();
            idx.extend(prev.iter().enumerate().map(|(p, &v)| (v, -((p + 1) as f64))));
            model.add_row(format!("slot_index_{s}_{l}"), idx, Relation::Ge, -(pool + 1.0));
        }
    }
}

/// A route bounds the idle time on its own whichever slot it occupies. The
/// per-slot rows alone let a relaxation spread a long route thinly over all
/// slots and undercount the idle time.
fn add_route_idle_cuts(model: &mut LinearModel, ix: &MasterIndex, pools: &[Vec<DroneRoute>]) {
    for (s, slots) in ix.z.iter().enumerate() {
        for (p, r) in pools[s].iter().enumerate() {
            let mut terms: Vec<(VarId, f64)> = slots.iter().map(|vars| (vars[p], r.duration)).collect();
            terms.push((ix.idle[s], -1.0));
            model.add_row(format!("idle_route_{s}_{p}"), terms, Relation::Le, 0.0);
        }
    }
}

/// Phase-2 start point from the phase-1 values: routes at visited satellites
/// are taken greedily by their fractional z mass, then by coverage, skipping
/// any that overlap a route already taken; uncovered communities are missed.
/// Slots follow pool order so the start respects the ordering rows.
fn rounded_start(master: &Master, pools: &[Vec<DroneRoute>], v1: &[f64]) -> Vec<f64> {
    let ix = &master.index;
    let mut x0 = v1.to_vec();
    let nc = ix.miss.len();
    let mut candidates = Vec::new();
    for (s, slots) in ix.z.iter().enumerate() {
        let node = Instance::satellite_node(s);
        let visited = ix.arcs.iter().zip(&ix.x).any(|(a, &v)| a.head == node && v1[v.0] > 0.5);
        for p in 0..pools[s].len() {
            let mass: f64 = slots.iter().map(|vars| v1[vars[p].0]).sum();
            if visited {
                candidates.push((s, p, mass));
            }
        }
    }
    candidates.sort_by(|a, b| {
        b.2.total_cmp(&a.2)
            .then(pools[b.0][b.1].visits.len().cmp(&pools[a.0][a.1].visits.len()))
            .then((a.0, a.1).cmp(&(b.0, b.1)))
    });
    let mut covered = vec![false; nc];
    let mut chosen: Vec<Vec<usize>> = vec![Vec::new(); ix.z.len()];
    for (s, p, _) in candidates {
        let r = &pools[s][p];
        if chosen[s].len() < ix.z[s].len() && r.visits.iter().all(|&c| !covered[c]) {
            r.visits.iter().for_each(|&c| covered[c] = true);
            chosen[s].push(p);
        }
    }
    for v in ix.z.iter().flatten().flatten() {
        x0[v.0] = 0.0;
    }
    for (s, ps) in chosen.iter_mut().enumerate() {
        ps.sort_unstable();
        for (l, &p) in ps.iter().enumerate() {
            x0[ix.z[s][l][p].0] = 1.0;
        }
    }
    for (c, &v) in ix.miss.iter().enumerate() {
        x0[v.0] = if covered[c] { 0.0 } else { 1.0 };
    }
    x0
}

/// Phase 1 relaxes z and keeps x and J integral; phase 2 fixes x and
/// restores z integrality. Continuous parts of the result are recomputed
/// from the integral decisions.
pub fn solve_relax_and_fix(
    inst: &Instance,
    master: &Master,
    pools: &[Vec<DroneRoute>],
    scenarios: &[Scenario],
    opts: &RelaxFixOptions,
) -> Result<MasterSolution> {
    let ix = &master.index;
    let mut phase1 = master.model.clone();
    for &v in ix.z.iter().flatten().flatten() {
        phase1.set_integer(v, false);
    }
    let v1 = run_mip(&phase1, opts, 1, None)?;
    let mut phase2 = master.model.clone();
    add_route_idle_cuts(&mut phase2, ix, pools);
    for &xv in &ix.x {
        let val = v1[xv.0].round();
        phase2.set_bounds(xv, val, val);
    }
    break_slot_symmetry(&mut phase2, ix);
    let start = rounded_start(master, pools, &v1);
    let v2 = run_mip(&phase2, opts, 2, Some(&start))?;
    Ok(extract_solution(inst, master, &v2, pools, scenarios))
}

/// Reads integral decisions from `values` and recomputes service times,
/// shortfalls and the recourse cost exactly.
pub fn extract_solution(
    inst: &Instance,
    master: &Master,
    values: &[f64],
    pools: &[Vec<DroneRoute>],
    scenarios: &[Scenario],
) -> MasterSolution {
    let ix = &master.index;
    let (ns, nc) = (inst.num_satellites(), inst.num_communities());
    let arcs_used: Vec<(usize, usize)> = ix
        .arcs
        .iter()
        .zip(&ix.x)
        .filter(|(_, &v)| values[v.0] > 0.5)
        .map(|(a, _)| (a.tail, a.head))
        .collect();
    let mut assignments = Vec::new();
    for s in 0..ns {
        for (l, vars) in ix.z[s].iter().enumerate() {
            for (p, &v) in vars.iter().enumerate() {
                if values[v.0] > 0.5 {
                    assignments.push(Assignment { satellite: s, slot: l, pool_index: p, route: pools[s][p].clone() });
                }
            }
        }
    }
    let missed: Vec<bool> = ix.miss.iter().map(|&v| values[v.0] > 0.5).collect();
    let mut satellite_arrival = vec![0.0; ns];
    let mut idle = vec![0.0; ns];
    for s in 0..ns {
        let node = Instance::satellite_node(s);
        if arcs_used.iter().any(|&(_, h)| h == node) {
            satellite_arrival[s] = values[ix.arrival[s].0].max(0.0);
            idle[s] = values[ix.idle[s].0].max(0.0);
        }
    }
    let mut service_time = vec![vec![0.0; nc]; ns];
    for a in &assignments {
        for (k, &c) in a.route.visits.iter().enumerate() {
            service_time[a.satellite][c] = satellite_arrival[a.satellite] + a.route.visit_times[k];
        }
    }
    let mut shortfall = vec![vec![0.0; nc]; scenarios.len()];
    let mut recourse_cost: f64 = 0.0;
    for (w, sc) in scenarios.iter().enumerate() {
        let mut delivered = vec![0.0; nc];
        for a in &assignments {
            for (k, &c) in a.route.visits.iter().enumerate() {
                delivered[c] += a.route.deliveries[w][k];
            }
        }
        let mut cost = 0.0;
        for c in 0..nc {
            shortfall[w][c] = (sc.demand[c] - delivered[c]).max(0.0);
            cost += inst.communities[c].shortage_cost * shortfall[w][c];
        }
        recourse_cost = recourse_cost.max(cost);
    }
    let mut sol = MasterSolution {
        arcs_used,
        assignments,
        missed,
        satellite_arrival,
        idle,
        service_time,
        shortfall,
        recourse_cost,
        objective: 0.0,
    };
    sol.objective = lower_bound(inst, &sol);
    sol
}

/// Ψ[s][slot][c]: the most delivered to c by that drone slot over Ω′.
pub fn compute_psi(inst: &Instance, sol: &MasterSolution, scenarios: usize) -> Vec<Vec<Vec<f64>>> {
    let (ns, nc, md) = (inst.num_satellites(), inst.num_communities(), inst.drones_per_truck);
    let mut psi = vec![vec![vec![0.0; nc]; md]; ns];
    for a in &sol.assignments {
        for w in 0..scenarios {
            for (k, &c) in a.route.visits.iter().enumerate() {
                let cell = &mut psi[a.satellite][a.slot][c];
                *cell = f64::max(*cell, a.route.deliveries[w][k]);
            }
        }
    }
    psi
}

/// Σ F^T T^d + Σ F^R J + 𝒴 at `sol`.
pub fn lower_bound(inst: &Instance, sol: &MasterSolution) -> f64 {
    sol.delay_and_miss_cost(inst) + sol.recourse_cost
}
