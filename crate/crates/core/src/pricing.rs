//! Drone-route pricing.
//!
//! For a satellite s and drone slot ℓ the subproblem picks one sortie over
//! {s} ∪ allowed minimising the route's reduced cost in the master. Arc
//! loads are projected out: for a single sortie the per-scenario deliveries
//! only need p_j ≤ min(L, Q_j)·[j visited] and Σ_j p_j ≤ L.

use log::trace;

use linopt::{solve_mip, LinearModel, MipOptions, MipStatus, Relation, VarId};

use crate::error::{Error, Result};
use crate::master::DualPrices;
use crate::model::{Instance, Reachability};
use crate::route::DroneRoute;
use crate::scenariogen::Scenario;

/// Lower bound on any hop time inside timing rows, so coincident points
/// cannot close a zero-length subtour.
const MIN_HOP: f64 = 1e-6;
const DUAL_EPS: f64 = 1e-12;

/// Reduced cost of assigning `route` to drone slot `slot` of its satellite:
/// −θ_s − φ_sℓ − ρ_sℓ Π − Σ ξ_c − Σ α_sc (t̄_c + M) − Σ_ω Σ β_c^ω d_c^ω,
/// sums over visited communities.
pub fn reduced_cost(inst: &Instance, route: &DroneRoute, duals: &DualPrices, slot: usize) -> Result<f64> {
    if route.deliveries.len() != duals.beta.len() {
        return Err(Error::Internal(format!(
            "route has plans for {} scenarios, duals for {}",
            route.deliveries.len(),
            duals.beta.len()
        )));
    }
    let s = route.satellite;
    let mut rc = -duals.theta[s] - duals.phi[s][slot] - duals.rho[s][slot] * route.duration;
    for (k, &c) in route.visits.iter().enumerate() {
        rc -= duals.xi[c];
        rc -= duals.alpha[s][c] * (route.visit_times[k] + inst.big_m);
        for (w, plan) in route.deliveries.iter().enumerate() {
            rc -= duals.beta[w][c] * plan[k];
        }
    }
    Ok(rc)
}

/// Fills deliveries in `order`, each capped by its demand and what is left
/// of the payload.
fn fill(inst: &Instance, route: &DroneRoute, demand: &[f64], order: &[usize]) -> Vec<f64> {
    let mut plan = vec![0.0; route.visits.len()];
    let mut left = inst.max_load;
    for &k in order {
        let give = demand[route.visits[k]].min(left).max(0.0);
        plan[k] = give;
        left -= give;
    }
    plan
}

/// Appends a plan for `scenario` that maximises Σ F^D min(alloc, Q) under
/// the payload limit: greedy by F^D descending, community id ascending.
pub fn extend_deliveries(inst: &Instance, route: &mut DroneRoute, scenario: &Scenario) {
    let mut order: Vec<usize> = (0..route.visits.len()).collect();
    let key = |k: &usize| {
        let c = &inst.communities[route.visits[*k]];
        (c.shortage_cost, c.id)
    };
    order.sort_by(|a, b| {
        let (fa, ia) = key(a);
        let (fb, ib) = key(b);
        fb.total_cmp(&fa).then(ia.cmp(&ib))
    });
    let plan = fill(inst, route, &scenario.demand, &order);
    route.deliveries.push(plan);
}

/// Plan for one scenario maximising Σ β d, ties by F^D then id. This is
/// the exact optimum of the delivery part of the pricing objective.
fn priced_plan(inst: &Instance, route: &DroneRoute, scenario: &Scenario, beta: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..route.visits.len()).collect();
    order.sort_by(|&a, &b| {
        let (ca, cb) = (route.visits[a], route.visits[b]);
        let (xa, xb) = (&inst.communities[ca], &inst.communities[cb]);
        beta[cb]
            .total_cmp(&beta[ca])
            .then(xb.shortage_cost.total_cmp(&xa.shortage_cost))
            .then(xa.id.cmp(&xb.id))
    });
    fill(inst, route, &scenario.demand, &order)
}

pub struct PricingModel {
    pub model: LinearModel,
    pub satellite: usize,
    pub slot: usize,
    /// Community index of each non-satellite node (node k + 1).
    pub nodes: Vec<usize>,
    /// (tail node, head node, var); node 0 is the satellite.
    pub arcs: Vec<(usize, usize, VarId)>,
    /// −θ_s − φ_sℓ, not part of the model objective.
    pub constant: f64,
}

/// Pricing MILP over {s} ∪ `allowed`. `None` when `allowed` is empty.
pub fn build_pricing(
    inst: &Instance,
    reach: &Reachability,
    s: usize,
    slot: usize,
    allowed: &[usize],
    duals: &DualPrices,
    scenarios: &[Scenario],
) -> Result<Option<PricingModel>> {
    if allowed.is_empty() {
        return Ok(None);
    }
    if let Some(&c) = allowed.iter().find(|&&c| !reach.reaches(s, c)) {
        return Err(Error::Internal(format!("community {c} is not reachable from satellite {s}")));
    }
    if duals.beta.len() != scenarios.len() {
        return Err(Error::Internal("dual prices do not match the scenario set".into()));
    }
    let w_max = inst.flying_range_min;
    let k = allowed.len();
    let tau = |a: usize, b: usize| -> f64 {
        match (a, b) {
            (0, 0) => 0.0,
            (0, j) => reach.sat_minutes(s, allowed[j - 1]),
            (i, 0) => reach.sat_minutes(s, allowed[i - 1]),
            (i, j) => reach.comm_minutes(allowed[i - 1], allowed[j - 1]),
        }
    };
    let rho = duals.rho[s][slot];
    let mut m = LinearModel::new();
    let mut arcs = Vec::new();
    for i in 0..=k {
        for j in 0..=k {
            if i == j {
                continue;
            }
            // any sortie using (i, j) flies at least s→i→j→s
            if tau(0, i) + tau(i, j) + tau(j, 0) > w_max + 1e-9 {
                continue;
            }
            let mut obj = -rho * tau(i, j);
            if j > 0 {
                let c = allowed[j - 1];
                obj -= duals.xi[c] + duals.alpha[s][c] * inst.big_m;
            }
            arcs.push((i, j, m.binary(format!("v_{i}_{j}"), obj)));
        }
    }
    let t: Vec<Option<VarId>> = std::iter::once(None)
        .chain((1..=k).map(|j| Some(m.continuous(format!("t_{j}"), 0.0, w_max, 0.0))))
        .collect();
    let into = |j: usize| arcs.iter().filter(move |a| a.1 == j).map(|a| a.2);
    let out_of = |j: usize| arcs.iter().filter(move |a| a.0 == j).map(|a| a.2);

    m.add_row("range", arcs.iter().map(|&(i, j, v)| (v, tau(i, j))).collect::<Vec<_>>(), Relation::Le, w_max);
    m.add_row("start", out_of(0).map(|v| (v, 1.0)).collect::<Vec<_>>(), Relation::Le, 1.0);
    for j in 1..=k {
        m.add_row(format!("once_{j}"), into(j).map(|v| (v, 1.0)).collect::<Vec<_>>(), Relation::Le, 1.0);
        let flow: Vec<_> = into(j).map(|v| (v, 1.0)).chain(out_of(j).map(|v| (v, -1.0))).collect();
        m.add_row(format!("flow_{j}"), flow, Relation::Eq, 0.0);
    }
    for &(i, j, v) in &arcs {
        if j == 0 {
            continue;
        }
        let hop = tau(i, j).max(MIN_HOP);
        let tj = t[j].expect("community node has a time");
        let mut lo = vec![(tj, 1.0), (v, -w_max)];
        let mut hi = vec![(tj, 1.0), (v, w_max)];
        if let Some(ti) = t[i] {
            lo.push((ti, -1.0));
            hi.push((ti, -1.0));
        }
        m.add_row(format!("tlo_{i}_{j}"), lo, Relation::Ge, hop - w_max);
        m.add_row(format!("thi_{i}_{j}"), hi, Relation::Le, hop + w_max);
    }
    // visited-only service time: a_j ≥ t_j − W(1 − u_j)
    for j in 1..=k {
        let c = allowed[j - 1];
        let alpha = duals.alpha[s][c];
        if alpha < -DUAL_EPS {
            let a = m.continuous(format!("a_{j}"), 0.0, f64::INFINITY, -alpha);
            let mut terms = vec![(a, 1.0), (t[j].expect("community node has a time"), -1.0)];
            terms.extend(into(j).map(|v| (v, -w_max)));
            m.add_row(format!("act_{j}"), terms, Relation::Ge, -w_max);
        }
    }
    for (w, sc) in scenarios.iter().enumerate() {
        let mut cap = Vec::new();
        for j in 1..=k {
            let c = allowed[j - 1];
            let beta = duals.beta[w][c];
            let ub = inst.max_load.min(sc.demand[c]);
            if beta > DUAL_EPS && ub > 0.0 {
                let p = m.continuous(format!("p_{w}_{j}"), 0.0, ub, -beta);
                let mut terms = vec![(p, 1.0)];
                terms.extend(into(j).map(|v| (v, -ub)));
                m.add_row(format!("pcap_{w}_{j}"), terms, Relation::Le, 0.0);
                cap.push((p, 1.0));
            }
        }
        if !cap.is_empty() {
            m.add_row(format!("load_{w}"), cap, Relation::Le, inst.max_load);
        }
    }
    Ok(Some(PricingModel {
        model: m,
        satellite: s,
        slot,
        nodes: allowed.to_vec(),
        arcs,
        constant: -duals.theta[s] - duals.phi[s][slot],
    }))
}

/// Solves a pricing model and returns the best sortie with its exact
/// reduced cost and a priced delivery plan per scenario. The empty route is
/// returned when no sortie strictly beats it.
pub fn solve_pricing(
    inst: &Instance,
    reach: &Reachability,
    pm: &PricingModel,
    duals: &DualPrices,
    scenarios: &[Scenario],
) -> Result<DroneRoute> {
    let s = pm.satellite;
    let sol = solve_mip(&pm.model, &MipOptions::default())?;
    let values = match (sol.status, sol.values) {
        (MipStatus::Optimal, Some(v)) => v,
        (status, _) => return Err(Error::Internal(format!("pricing MILP ended {status:?}"))),
    };
    trace!("pricing s={s} slot={} obj={:.6} nodes={}", pm.slot, sol.objective + pm.constant, sol.nodes);
    let mut visits = Vec::new();
    if sol.objective < -1e-9 {
        let next = |from: usize| pm.arcs.iter().find(|a| a.0 == from && values[a.2 .0] > 0.5).map(|a| a.1);
        let mut cur = next(0);
        while let Some(node) = cur {
            if node == 0 {
                break;
            }
            if visits.len() > pm.nodes.len() {
                return Err(Error::Internal("pricing arcs do not form a simple sortie".into()));
            }
            visits.push(pm.nodes[node - 1]);
            cur = next(node);
        }
        let used = pm.arcs.iter().filter(|a| values[a.2 .0] > 0.5).count();
        if used != visits.len() + 1 && !visits.is_empty() {
            return Err(Error::Internal("pricing solution contains a detached cycle".into()));
        }
    }
    let mut route = DroneRoute::new(reach, s, visits);
    for (w, sc) in scenarios.iter().enumerate() {
        let plan = priced_plan(inst, &route, sc, &duals.beta[w]);
        route.deliveries.push(plan);
    }
    route.reduced_cost = Some(reduced_cost(inst, &route, duals, pm.slot)?);
    Ok(route)
}

/// Best sortie for one slot over `allowed`; `None` when `allowed` is empty.
pub fn price_slot(
    inst: &Instance,
    reach: &Reachability,
    s: usize,
    slot: usize,
    allowed: &[usize],
    duals: &DualPrices,
    scenarios: &[Scenario],
) -> Result<Option<DroneRoute>> {
    match build_pricing(inst, reach, s, slot, allowed, duals, scenarios)? {
        None => Ok(None),
        Some(pm) => solve_pricing(inst, reach, &pm, duals, scenarios).map(Some),
    }
}

/// Prices slots 0, 1, … of satellite `s` in turn, removing the communities
/// of each generated route from the allowed set before the next slot.
/// Stops when the allowed set is empty or a slot yields the empty route.
pub fn generate_columns(
    inst: &Instance,
    reach: &Reachability,
    s: usize,
    duals: &DualPrices,
    scenarios: &[Scenario],
) -> Result<Vec<DroneRoute>> {
    let wrap = |e: Error| Error::Pricing { satellite: inst.satellites[s].id, source: Box::new(e) };
    let mut allowed: Vec<usize> = reach.members(s).to_vec();
    let mut out = Vec::new();
    for slot in 0..inst.drones_per_truck {
        let Some(route) = price_slot(inst, reach, s, slot, &allowed, duals, scenarios).map_err(wrap)? else {
            break;
        };
        if route.is_empty() {
            break;
        }
        allowed.retain(|c| !route.covers(*c));
        out.push(route);
    }
    Ok(out)
}
