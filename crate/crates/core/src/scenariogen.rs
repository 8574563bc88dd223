//! Worst-case demand search over the budgeted uncertainty set.
//!
//! A scenario flips some communities to their maximum deviation subject to a
//! total budget Γ and per-region budgets Γ_a. Against a fixed delivery table
//! Ψ the inner recourse is simple, so the max–min collapses to one MILP in
//! (y, π, δ) with δ = yπ linearised.

use serde::{Deserialize, Serialize};

use linopt::{solve_mip, LinearModel, MipOptions, MipStatus, Relation, VarId};

use crate::error::{Error, Result};
use crate::model::Instance;

/// Largest community count the enumeration oracle accepts.
pub const ORACLE_LIMIT: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioOrigin {
    Nominal,
    Generated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub deviated: Vec<bool>,
    /// Q^ω per community.
    pub demand: Vec<f64>,
    pub origin: ScenarioOrigin,
}

impl Scenario {
    pub fn nominal(inst: &Instance) -> Self {
        Self {
            deviated: vec![false; inst.num_communities()],
            demand: inst.communities.iter().map(|c| c.nominal_demand).collect(),
            origin: ScenarioOrigin::Nominal,
        }
    }

    pub fn from_flags(inst: &Instance, deviated: Vec<bool>) -> Self {
        let demand = inst
            .communities
            .iter()
            .zip(&deviated)
            .map(|(c, &y)| c.nominal_demand + if y { c.max_deviation } else { 0.0 })
            .collect();
        Self { deviated, demand, origin: ScenarioOrigin::Generated }
    }
}

/// Percentage budget to a community count, rounding down.
pub fn budget_count(pct: f64, count: usize) -> usize {
    ((pct * count as f64) / 100.0 + 1e-9).floor().max(0.0) as usize
}

/// Whether `y` respects both the total and every regional budget.
pub fn in_uncertainty_set(inst: &Instance, y: &[bool]) -> bool {
    if y.len() != inst.num_communities() {
        return false;
    }
    let total = y.iter().filter(|&&b| b).count();
    if total > inst.gamma_total {
        return false;
    }
    let mut per_region = vec![0usize; inst.num_regions()];
    for (c, &b) in inst.communities.iter().zip(y) {
        if b {
            match per_region.get_mut(c.region) {
                Some(n) => *n += 1,
                None => return false,
            }
        }
    }
    per_region.iter().zip(&inst.gamma_region).all(|(n, g)| n <= g)
}

/// Ψ summed over satellites and drone slots, per community.
pub fn delivered_totals(inst: &Instance, psi: &[Vec<Vec<f64>>]) -> Vec<f64> {
    let mut tot = vec![0.0; inst.num_communities()];
    for per_sat in psi {
        for per_slot in per_sat {
            for (c, v) in per_slot.iter().enumerate() {
                tot[c] += v;
            }
        }
    }
    tot
}

/// Closed-form inner recourse cost: Σ F^D max(0, Q̃ − delivered).
pub fn shortage_cost(inst: &Instance, y: &[bool], delivered: &[f64]) -> f64 {
    inst.communities
        .iter()
        .enumerate()
        .map(|(c, com)| {
            let q = com.nominal_demand + if y[c] { com.max_deviation } else { 0.0 };
            com.shortage_cost * (q - delivered[c]).max(0.0)
        })
        .sum()
}

#[derive(Debug, Clone)]
pub struct WorstCaseModel {
    pub model: LinearModel,
    pub y: Vec<VarId>,
    pub pi: Vec<VarId>,
    pub delta: Vec<VarId>,
    delivered: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstCaseResult {
    /// OPT(Γ_Q).
    pub objective: f64,
    pub scenario: Scenario,
    pub pi: Vec<f64>,
    pub delta: Vec<f64>,
}

/// Builds the single-level worst-case MILP against the delivery table Ψ
/// (`psi[s][slot][c]`). The model minimises the negated worst-case cost.
pub fn build_worstcase(inst: &Instance, psi: &[Vec<Vec<f64>>]) -> WorstCaseModel {
    let delivered = delivered_totals(inst, psi);
    let mut m = LinearModel::new();
    let n = inst.num_communities();
    let mut y = Vec::with_capacity(n);
    let mut pi = Vec::with_capacity(n);
    let mut delta = Vec::with_capacity(n);
    for (c, com) in inst.communities.iter().enumerate() {
        y.push(m.binary(format!("y_{}", com.id), 0.0));
        pi.push(m.continuous(format!("pi_{}", com.id), 0.0, com.shortage_cost, delivered[c] - com.nominal_demand));
        delta.push(m.continuous(format!("delta_{}", com.id), 0.0, f64::INFINITY, -com.max_deviation));
    }
    for (a, &budget) in inst.gamma_region.iter().enumerate() {
        let terms: Vec<_> = (0..n).filter(|&c| inst.communities[c].region == a).map(|c| (y[c], 1.0)).collect();
        m.add_row(format!("region_{a}"), terms, Relation::Le, budget as f64);
    }
    m.add_row("total", y.iter().map(|&v| (v, 1.0)), Relation::Le, inst.gamma_total as f64);
    for (c, com) in inst.communities.iter().enumerate() {
        let f = com.shortage_cost;
        m.add_row(format!("dpi_{c}"), [(delta[c], 1.0), (pi[c], -1.0)], Relation::Le, 0.0);
        m.add_row(format!("dy_{c}"), [(delta[c], 1.0), (y[c], -f)], Relation::Le, 0.0);
        m.add_row(format!("dlink_{c}"), [(delta[c], 1.0), (pi[c], -1.0), (y[c], -f)], Relation::Ge, -f);
    }
    WorstCaseModel { model: m, y, pi, delta, delivered }
}

fn solve_fixed(wc: &WorstCaseModel, fixed: &[Option<bool>]) -> Result<Option<(f64, Vec<f64>)>> {
    let mut m = wc.model.clone();
    for (c, f) in fixed.iter().enumerate() {
        if let Some(b) = f {
            let v = if *b { 1.0 } else { 0.0 };
            m.set_bounds(wc.y[c], v, v);
        }
    }
    let sol = solve_mip(&m, &MipOptions::default())?;
    match sol.status {
        MipStatus::Optimal => Ok(Some((-sol.objective, sol.values.expect("optimal status carries values")))),
        MipStatus::Infeasible => Ok(None),
        other => Err(Error::Internal(format!("worst-case MILP ended with {other:?}"))),
    }
}

/// Solves the worst-case MILP, then walks the deviation flags in index order
/// fixing each to 0 whenever that keeps the optimum, which selects the
/// lexicographically smallest optimal `y`.
pub fn solve_worstcase(inst: &Instance, wc: &WorstCaseModel) -> Result<WorstCaseResult> {
    let n = inst.num_communities();
    let (opt, mut x) =
        solve_fixed(wc, &vec![None; n])?.ok_or_else(|| Error::Internal("worst-case MILP infeasible".into()))?;
    let tol = 1e-7 * (1.0 + opt.abs());
    let mut fixed: Vec<Option<bool>> = vec![None; n];
    for c in 0..n {
        if x[wc.y[c].0] < 0.5 {
            fixed[c] = Some(false);
            continue;
        }
        fixed[c] = Some(false);
        match solve_fixed(wc, &fixed)? {
            Some((v, x2)) if v >= opt - tol => x = x2,
            _ => fixed[c] = Some(true),
        }
    }
    let y: Vec<bool> = (0..n).map(|c| x[wc.y[c].0] > 0.5).collect();
    let scenario = Scenario::from_flags(inst, y);
    // At an optimum π_c sits at a bound; snapping it removes simplex noise.
    let pi: Vec<f64> = inst
        .communities
        .iter()
        .enumerate()
        .map(|(c, com)| if scenario.demand[c] - wc.delivered[c] > 1e-9 { com.shortage_cost } else { 0.0 })
        .collect();
    let delta = (0..n).map(|c| if scenario.deviated[c] { pi[c] } else { 0.0 }).collect();
    Ok(WorstCaseResult { objective: opt, scenario, pi, delta })
}

fn enumerate(inst: &Instance, psi: &[Vec<Vec<f64>>]) -> Result<(f64, Vec<bool>)> {
    let n = inst.num_communities();
    if n > ORACLE_LIMIT {
        return Err(Error::TooLarge(n, ORACLE_LIMIT));
    }
    let delivered = delivered_totals(inst, psi);
    let mut best: Option<(f64, Vec<bool>)> = None;
    for mask in 0u32..(1u32 << n) {
        // bit (n-1-c) holds y_c so increasing masks run in lexicographic order
        let y: Vec<bool> = (0..n).map(|c| mask >> (n - 1 - c) & 1 == 1).collect();
        if !in_uncertainty_set(inst, &y) {
            continue;
        }
        let v = shortage_cost(inst, &y, &delivered);
        if best.as_ref().map_or(true, |(b, _)| v > *b + 1e-9) {
            best = Some((v, y));
        }
    }
    Ok(best.expect("the all-zero deviation vector is always feasible"))
}

/// Exhaustive worst case over every admissible deviation vector.
pub fn oracle_worstcase(inst: &Instance, psi: &[Vec<Vec<f64>>]) -> Result<f64> {
    enumerate(inst, psi).map(|(v, _)| v)
}

/// Lexicographically smallest maximiser found by the oracle.
pub fn oracle_argmax(inst: &Instance, psi: &[Vec<Vec<f64>>]) -> Result<Vec<bool>> {
    enumerate(inst, psi).map(|(_, y)| y)
}
