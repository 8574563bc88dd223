//! Bounded-variable revised simplex with an explicit dense basis inverse.
//!
//! Every row `i` gets a slack column `e_i` (`a·x + s = b`) whose bounds encode
//! the relation, and an artificial column `±e_i` that is only opened during
//! phase 1. Row duals are `y = c_B B⁻¹`; for a minimisation this makes the
//! dual of a `≥` row nonnegative, of a `≤` row nonpositive, of an `=` row free.

use crate::error::SolveError;
use crate::model::{LinearModel, Relation};

pub(crate) const FEAS_TOL: f64 = 1e-9;
pub(crate) const DUAL_TOL: f64 = 1e-9;
pub(crate) const PIVOT_TOL: f64 = 1e-9;
/// Primal infeasibility a dual pivot is spent on; matches the acceptance
/// threshold of `optimize`.
const DUAL_LEAVE_TOL: f64 = 1e-7;
/// Dual steps this short count as degenerate.
const DEGENERATE_STEP: f64 = 1e-9;
/// Relative size of the cost perturbation used by warm-started dual solves.
const PERTURB: f64 = 1e-6;
const REFACTOR_EVERY: usize = 64;
const DEGENERATE_SWITCH: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Pos {
    Basic(usize),
    Lower,
    Upper,
    /// Nonbasic free column held at zero.
    Free,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct BasisSnapshot {
    basis: Vec<usize>,
    pos: Vec<Pos>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Outcome {
    Optimal,
    Infeasible,
    Unbounded,
}

pub(crate) struct Simplex {
    m: usize,
    n: usize,
    cols: Vec<Vec<(usize, f64)>>,
    b: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    cost: Vec<f64>,
    x: Vec<f64>,
    basis: Vec<usize>,
    pos: Vec<Pos>,
    binv: Vec<f64>,
    since_refactor: usize,
    iterations: usize,
    /// Iteration count when the current solve started; the limit is per solve.
    solve_start: usize,
    iteration_limit: usize,
}

impl Simplex {
    pub(crate) fn new(model: &LinearModel) -> Self {
        let m = model.num_rows();
        let n = model.num_vars();
        let ncols = n + 2 * m;
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); ncols];
        let mut b = vec![0.0; m];
        let mut lo = vec![0.0; ncols];
        let mut hi = vec![0.0; ncols];
        let mut cost = vec![0.0; ncols];
        for (j, v) in model.vars().iter().enumerate() {
            lo[j] = v.lower;
            hi[j] = v.upper;
            cost[j] = v.obj;
        }
        for (i, row) in model.rows().iter().enumerate() {
            for (v, a) in &row.terms {
                cols[v.0].push((i, *a));
            }
            b[i] = row.rhs;
            let s = n + i;
            cols[s].push((i, 1.0));
            let (l, h) = match row.relation {
                Relation::Le => (0.0, f64::INFINITY),
                Relation::Ge => (f64::NEG_INFINITY, 0.0),
                Relation::Eq => (0.0, 0.0),
            };
            lo[s] = l;
            hi[s] = h;
            cols[n + m + i].push((i, 1.0));
        }
        Simplex {
            m,
            n,
            cols,
            b,
            lo,
            hi,
            cost,
            x: vec![0.0; ncols],
            basis: Vec::new(),
            pos: vec![Pos::Lower; ncols],
            binv: Vec::new(),
            since_refactor: 0,
            iterations: 0,
            solve_start: 0,
            iteration_limit: 20_000 + 60 * (n + m),
        }
    }

    pub(crate) fn num_structural(&self) -> usize {
        self.n
    }

    pub(crate) fn iterations(&self) -> usize {
        self.iterations
    }

    pub(crate) fn set_structural_bounds(&mut self, lo: &[f64], hi: &[f64]) {
        self.lo[..self.n].copy_from_slice(lo);
        self.hi[..self.n].copy_from_slice(hi);
    }

    pub(crate) fn structural_values(&self) -> Vec<f64> {
        self.x[..self.n].to_vec()
    }

    pub(crate) fn objective(&self) -> f64 {
        self.x[..self.n]
            .iter()
            .zip(&self.cost[..self.n])
            .map(|(x, c)| x * c)
            .sum()
    }

    /// Row duals under the true objective.
    pub(crate) fn duals(&self) -> Vec<f64> {
        self.compute_y(&self.cost)
    }

    pub(crate) fn reduced_costs(&self) -> Vec<f64> {
        let y = self.duals();
        (0..self.n).map(|j| self.cost[j] - self.dot_col(j, &y)).collect()
    }

    pub(crate) fn snapshot(&self) -> BasisSnapshot {
        BasisSnapshot {
            basis: self.basis.clone(),
            pos: self.pos.clone(),
        }
    }

    fn nonbasic_value(&self, j: usize, pos: Pos) -> (Pos, f64) {
        let (l, h) = (self.lo[j], self.hi[j]);
        match pos {
            Pos::Lower if l.is_finite() => (Pos::Lower, l),
            Pos::Upper if h.is_finite() => (Pos::Upper, h),
            _ if l.is_finite() => (Pos::Lower, l),
            _ if h.is_finite() => (Pos::Upper, h),
            _ => (Pos::Free, 0.0),
        }
    }

    /// Solve from the all-slack/artificial basis.
    pub(crate) fn solve_cold(&mut self) -> Result<Outcome, SolveError> {
        let (m, n) = (self.m, self.n);
        self.solve_start = self.iterations;
        for j in 0..n {
            let (p, v) = self.nonbasic_value(j, Pos::Lower);
            self.pos[j] = p;
            self.x[j] = v;
        }
        let mut r = self.b.clone();
        for j in 0..n {
            if self.x[j] != 0.0 {
                for &(i, a) in &self.cols[j] {
                    r[i] -= a * self.x[j];
                }
            }
        }
        self.basis = vec![0; m];
        self.binv = vec![0.0; m * m];
        let mut phase1 = vec![0.0; self.cols.len()];
        let mut need_phase1 = false;
        for i in 0..m {
            let s = n + i;
            let a = n + m + i;
            self.lo[a] = 0.0;
            self.hi[a] = 0.0;
            self.cols[a] = vec![(i, 1.0)];
            if r[i] >= self.lo[s] - FEAS_TOL && r[i] <= self.hi[s] + FEAS_TOL {
                self.basis[i] = s;
                self.pos[s] = Pos::Basic(i);
                self.x[s] = r[i];
                self.pos[a] = Pos::Lower;
                self.x[a] = 0.0;
                self.binv[i * m + i] = 1.0;
            } else {
                let v = r[i].clamp(self.lo[s], self.hi[s]);
                self.pos[s] = if v == self.lo[s] { Pos::Lower } else { Pos::Upper };
                self.x[s] = v;
                let e = r[i] - v;
                let sign = if e >= 0.0 { 1.0 } else { -1.0 };
                self.cols[a] = vec![(i, sign)];
                self.hi[a] = f64::INFINITY;
                self.basis[i] = a;
                self.pos[a] = Pos::Basic(i);
                self.x[a] = e.abs();
                self.binv[i * m + i] = sign;
                phase1[a] = 1.0;
                need_phase1 = true;
            }
        }
        self.since_refactor = 0;
        if need_phase1 {
            let scale = 1.0 + self.b.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
            match self.primal(&phase1)? {
                Outcome::Optimal => {}
                // phase 1 is bounded below by zero
                other => return Err(SolveError::Numerical(format!("phase 1 returned {other:?}"))),
            }
            let infeas: f64 = (n + m..n + 2 * m).map(|a| self.x[a].max(0.0)).sum();
            if infeas > 1e-7 * scale {
                return Ok(Outcome::Infeasible);
            }
            for a in n + m..n + 2 * m {
                self.hi[a] = 0.0;
                if !matches!(self.pos[a], Pos::Basic(_)) {
                    self.pos[a] = Pos::Lower;
                    self.x[a] = 0.0;
                }
            }
            self.refactor()?;
        }
        let cost = self.cost.clone();
        self.optimize(&cost, false)
    }

    /// Restart from a stored basis with (possibly) new structural bounds.
    /// Returns `None` when the warm start cannot proceed and a cold solve is
    /// required.
    pub(crate) fn solve_warm(
        &mut self,
        snap: &BasisSnapshot,
        reuse_factor: bool,
    ) -> Result<Option<Outcome>, SolveError> {
        self.solve_start = self.iterations;
        if !reuse_factor || snap.basis != self.basis {
            self.basis = snap.basis.clone();
            self.pos = snap.pos.clone();
            if self.refactor().is_err() {
                return Ok(None);
            }
        } else {
            self.pos = snap.pos.clone();
        }
        for j in 0..self.cols.len() {
            if !matches!(self.pos[j], Pos::Basic(_)) {
                let (p, v) = self.nonbasic_value(j, self.pos[j]);
                self.pos[j] = p;
                self.x[j] = v;
            }
        }
        // restore dual feasibility by bound flips where possible
        let cost = self.cost.clone();
        let y = self.compute_y(&cost);
        for j in 0..self.cols.len() {
            if matches!(self.pos[j], Pos::Basic(_)) || self.lo[j] == self.hi[j] {
                continue;
            }
            let d = cost[j] - self.dot_col(j, &y);
            let tol = 1e-7 * (1.0 + cost[j].abs());
            match self.pos[j] {
                Pos::Lower if d < -tol => {
                    if self.hi[j].is_finite() {
                        self.pos[j] = Pos::Upper;
                        self.x[j] = self.hi[j];
                    } else {
                        return Ok(None);
                    }
                }
                Pos::Upper if d > tol => {
                    if self.lo[j].is_finite() {
                        self.pos[j] = Pos::Lower;
                        self.x[j] = self.lo[j];
                    } else {
                        return Ok(None);
                    }
                }
                Pos::Free if d.abs() > tol => return Ok(None),
                _ => {}
            }
        }
        self.recompute_basic();
        let out = self.dual(&self.perturbed(&cost))?;
        if out != Outcome::Optimal {
            return Ok(Some(out));
        }
        self.optimize(&cost, true).map(Some)
    }

    /// Costs of nonbasic columns nudged away from dual degeneracy in the
    /// direction that keeps them dual feasible. The primal cleanup in
    /// `optimize` runs on the true costs afterwards.
    fn perturbed(&self, cost: &[f64]) -> Vec<f64> {
        let mut c = cost.to_vec();
        for (j, cj) in c.iter_mut().enumerate() {
            if self.lo[j] == self.hi[j] {
                continue;
            }
            let h = ((j as u64).wrapping_mul(2_654_435_761) % 1000) as f64 / 1000.0;
            let delta = PERTURB * (1.0 + cj.abs()) * (1.0 + h);
            match self.pos[j] {
                Pos::Lower => *cj += delta,
                Pos::Upper => *cj -= delta,
                _ => {}
            }
        }
        c
    }

    /// Primal simplex followed by a refactor-and-check cleanup loop. With
    /// `lazy`, a first pass after few updates checks against the current
    /// inverse instead of refactoring.
    fn optimize(&mut self, cost: &[f64], lazy: bool) -> Result<Outcome, SolveError> {
        for round in 0..4 {
            match self.primal(cost)? {
                Outcome::Optimal => {}
                other => return Ok(other),
            }
            if lazy && round == 0 && self.since_refactor < REFACTOR_EVERY / 4 {
                self.recompute_basic();
            } else {
                self.refactor()?;
            }
            if self.max_basic_infeasibility() > 1e-7 {
                match self.dual(cost)? {
                    Outcome::Optimal => {}
                    other => return Ok(other),
                }
            }
            if self.max_dual_infeasibility(cost) <= 1e-7 && self.max_basic_infeasibility() <= 1e-7 {
                return Ok(Outcome::Optimal);
            }
        }
        Err(SolveError::Numerical("simplex failed to settle".into()))
    }

    fn max_basic_infeasibility(&self) -> f64 {
        self.basis
            .iter()
            .map(|&j| (self.lo[j] - self.x[j]).max(self.x[j] - self.hi[j]).max(0.0))
            .fold(0.0, f64::max)
    }

    fn max_dual_infeasibility(&self, cost: &[f64]) -> f64 {
        let y = self.compute_y(cost);
        let mut worst = 0.0f64;
        for j in 0..self.cols.len() {
            if matches!(self.pos[j], Pos::Basic(_)) || self.lo[j] == self.hi[j] {
                continue;
            }
            let d = cost[j] - self.dot_col(j, &y);
            let v = match self.pos[j] {
                Pos::Lower => -d,
                Pos::Upper => d,
                Pos::Free => d.abs(),
                Pos::Basic(_) => 0.0,
            };
            worst = worst.max(v / (1.0 + cost[j].abs()));
        }
        worst
    }

    fn dot_col(&self, j: usize, y: &[f64]) -> f64 {
        self.cols[j].iter().map(|&(i, a)| a * y[i]).sum()
    }

    fn compute_y(&self, cost: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (k, &j) in self.basis.iter().enumerate() {
            let c = cost[j];
            if c != 0.0 {
                let row = &self.binv[k * m..(k + 1) * m];
                for (yi, bi) in y.iter_mut().zip(row) {
                    *yi += c * bi;
                }
            }
        }
        y
    }

    /// `B⁻¹ a_j`
    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut w = vec![0.0; m];
        for &(i, a) in &self.cols[j] {
            for (k, wk) in w.iter_mut().enumerate() {
                *wk += self.binv[k * m + i] * a;
            }
        }
        w
    }

    fn recompute_basic(&mut self) {
        let m = self.m;
        let mut r = self.b.clone();
        for j in 0..self.cols.len() {
            if !matches!(self.pos[j], Pos::Basic(_)) && self.x[j] != 0.0 {
                for &(i, a) in &self.cols[j] {
                    r[i] -= a * self.x[j];
                }
            }
        }
        for k in 0..m {
            let row = &self.binv[k * m..(k + 1) * m];
            let v: f64 = row.iter().zip(&r).map(|(a, b)| a * b).sum();
            self.x[self.basis[k]] = v;
        }
    }

    /// Rebuild `B⁻¹` from the basis columns by Gauss-Jordan elimination.
    fn refactor(&mut self) -> Result<(), SolveError> {
        let m = self.m;
        let mut a = vec![0.0; m * m];
        for (k, &j) in self.basis.iter().enumerate() {
            for &(i, v) in &self.cols[j] {
                a[i * m + k] = v;
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for c in 0..m {
            let mut p = c;
            let mut best = a[c * m + c].abs();
            for r in c + 1..m {
                let v = a[r * m + c].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best < 1e-11 {
                return Err(SolveError::Numerical("singular basis".into()));
            }
            if p != c {
                for k in 0..m {
                    a.swap(c * m + k, p * m + k);
                    inv.swap(c * m + k, p * m + k);
                }
            }
            let piv = a[c * m + c];
            for k in c..m {
                a[c * m + k] /= piv;
            }
            for k in 0..m {
                inv[c * m + k] /= piv;
            }
            // columns left of c are already unit vectors
            let nz: Vec<usize> = (0..m).filter(|&k| inv[c * m + k] != 0.0).collect();
            for r in 0..m {
                if r == c {
                    continue;
                }
                let f = a[r * m + c];
                if f != 0.0 {
                    for k in c..m {
                        a[r * m + k] -= f * a[c * m + k];
                    }
                    for &k in &nz {
                        inv[r * m + k] -= f * inv[c * m + k];
                    }
                }
            }
        }
        // rows of `inv` are indexed by basis position once B is column-ordered
        self.binv = inv;
        self.since_refactor = 0;
        self.recompute_basic();
        Ok(())
    }

    fn pivot(&mut self, r: usize, q: usize, w: &[f64]) {
        let m = self.m;
        let piv = w[r];
        for k in 0..m {
            self.binv[r * m + k] /= piv;
        }
        let (before, rest) = self.binv.split_at_mut(r * m);
        let (prow, after) = rest.split_at_mut(m);
        for (i, chunk) in before.chunks_mut(m).enumerate() {
            let f = w[i];
            if f != 0.0 {
                for (a, p) in chunk.iter_mut().zip(prow.iter()) {
                    *a -= f * p;
                }
            }
        }
        for (off, chunk) in after.chunks_mut(m).enumerate() {
            let f = w[r + 1 + off];
            if f != 0.0 {
                for (a, p) in chunk.iter_mut().zip(prow.iter()) {
                    *a -= f * p;
                }
            }
        }
        let leaving = self.basis[r];
        self.basis[r] = q;
        self.pos[q] = Pos::Basic(r);
        let _ = leaving;
        self.since_refactor += 1;
        self.iterations += 1;
    }

    fn check_limits(&mut self) -> Result<(), SolveError> {
        if self.iterations - self.solve_start > self.iteration_limit {
            return Err(SolveError::Numerical("iteration limit reached".into()));
        }
        if self.since_refactor >= REFACTOR_EVERY {
            self.refactor()?;
        }
        Ok(())
    }

    fn primal(&mut self, cost: &[f64]) -> Result<Outcome, SolveError> {
        let mut degenerate = 0usize;
        loop {
            self.check_limits()?;
            let bland = degenerate > DEGENERATE_SWITCH;
            let y = self.compute_y(cost);
            let mut entering: Option<(usize, f64)> = None;
            let mut best = 0.0;
            for j in 0..self.cols.len() {
                let p = self.pos[j];
                if matches!(p, Pos::Basic(_)) || self.lo[j] == self.hi[j] {
                    continue;
                }
                let d = cost[j] - self.dot_col(j, &y);
                let ok = match p {
                    Pos::Lower => d < -DUAL_TOL,
                    Pos::Upper => d > DUAL_TOL,
                    Pos::Free => d.abs() > DUAL_TOL,
                    Pos::Basic(_) => false,
                };
                if !ok {
                    continue;
                }
                if bland {
                    entering = Some((j, d));
                    break;
                }
                let score = d.abs();
                if score > best {
                    best = score;
                    entering = Some((j, d));
                }
            }
            let Some((q, d)) = entering else {
                return Ok(Outcome::Optimal);
            };
            let w = self.ftran(q);
            let dir = if d < 0.0 { 1.0 } else { -1.0 };
            let flip = self.hi[q] - self.lo[q];

            // Harris pass 1: largest step with bounds relaxed by FEAS_TOL
            let mut theta_max = f64::INFINITY;
            for (k, &wk) in w.iter().enumerate() {
                let alpha = dir * wk;
                let j = self.basis[k];
                if alpha > PIVOT_TOL && self.lo[j].is_finite() {
                    theta_max = theta_max.min((self.x[j] - self.lo[j] + FEAS_TOL) / alpha);
                } else if alpha < -PIVOT_TOL && self.hi[j].is_finite() {
                    theta_max = theta_max.min((self.hi[j] - self.x[j] + FEAS_TOL) / -alpha);
                }
            }
            if theta_max.is_infinite() && flip.is_infinite() {
                return Ok(Outcome::Unbounded);
            }
            // pass 2: among rows within theta_max pick the largest pivot
            let mut leave: Option<(usize, f64)> = None;
            let mut best_alpha = 0.0;
            let mut best_ratio = f64::INFINITY;
            for (k, &wk) in w.iter().enumerate() {
                let alpha = dir * wk;
                let j = self.basis[k];
                let ratio = if alpha > PIVOT_TOL && self.lo[j].is_finite() {
                    (self.x[j] - self.lo[j]) / alpha
                } else if alpha < -PIVOT_TOL && self.hi[j].is_finite() {
                    (self.hi[j] - self.x[j]) / -alpha
                } else {
                    continue;
                };
                let ratio = ratio.max(0.0);
                if ratio > theta_max {
                    continue;
                }
                let better = if bland {
                    ratio < best_ratio - 1e-12
                        || (ratio <= best_ratio + 1e-12
                            && leave.map_or(true, |(r, _)| j < self.basis[r]))
                } else {
                    alpha.abs() > best_alpha
                };
                if better {
                    best_alpha = alpha.abs();
                    best_ratio = ratio;
                    leave = Some((k, ratio));
                }
            }
            let step_to_row = leave.map(|(_, t)| t).unwrap_or(f64::INFINITY);
            if flip <= step_to_row && flip <= theta_max {
                // bound flip of the entering column, basis unchanged
                for (k, &wk) in w.iter().enumerate() {
                    let j = self.basis[k];
                    self.x[j] -= dir * flip * wk;
                }
                if dir > 0.0 {
                    self.x[q] = self.hi[q];
                    self.pos[q] = Pos::Upper;
                } else {
                    self.x[q] = self.lo[q];
                    self.pos[q] = Pos::Lower;
                }
                self.iterations += 1;
                degenerate = 0;
                continue;
            }
            let Some((r, t)) = leave else {
                return Ok(Outcome::Unbounded);
            };
            if t <= 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            for (k, &wk) in w.iter().enumerate() {
                let j = self.basis[k];
                self.x[j] -= dir * t * wk;
            }
            self.x[q] += dir * t;
            let out = self.basis[r];
            if dir * w[r] > 0.0 {
                self.x[out] = self.lo[out];
                self.pos[out] = Pos::Lower;
            } else {
                self.x[out] = self.hi[out];
                self.pos[out] = Pos::Upper;
            }
            self.pivot(r, q, &w);
        }
    }

    /// Bounded dual simplex; expects a dual feasible basis.
    fn dual(&mut self, cost: &[f64]) -> Result<Outcome, SolveError> {
        let m = self.m;
        let mut degenerate = 0usize;
        loop {
            self.check_limits()?;
            // after a long degenerate run: smallest-index rule on both sides
            let bland = degenerate > DEGENERATE_SWITCH;
            let mut leave: Option<usize> = None;
            let mut worst = DUAL_LEAVE_TOL;
            for (k, &j) in self.basis.iter().enumerate() {
                let v = (self.lo[j] - self.x[j]).max(self.x[j] - self.hi[j]);
                if bland {
                    if v > DUAL_LEAVE_TOL && leave.map_or(true, |r| j < self.basis[r]) {
                        leave = Some(k);
                    }
                } else if v > worst {
                    worst = v;
                    leave = Some(k);
                }
            }
            let Some(r) = leave else {
                return Ok(Outcome::Optimal);
            };
            let out = self.basis[r];
            let to_lower = self.x[out] < self.lo[out];
            let y = self.compute_y(cost);
            let rho: Vec<f64> = self.binv[r * m..(r + 1) * m].to_vec();

            let mut cands: Vec<(usize, f64, f64)> = Vec::new();
            let mut bound = f64::INFINITY;
            for j in 0..self.cols.len() {
                let p = self.pos[j];
                if matches!(p, Pos::Basic(_)) || self.lo[j] == self.hi[j] {
                    continue;
                }
                let alpha = self.dot_col(j, &rho);
                if alpha.abs() <= PIVOT_TOL {
                    continue;
                }
                let eligible = match (p, to_lower) {
                    (Pos::Free, _) => true,
                    (Pos::Lower, true) => alpha < 0.0,
                    (Pos::Upper, true) => alpha > 0.0,
                    (Pos::Lower, false) => alpha > 0.0,
                    (Pos::Upper, false) => alpha < 0.0,
                    (Pos::Basic(_), _) => false,
                };
                if !eligible {
                    continue;
                }
                let d = cost[j] - self.dot_col(j, &y);
                let dabs = match p {
                    Pos::Lower => d.max(0.0),
                    Pos::Upper => (-d).max(0.0),
                    _ => d.abs(),
                };
                bound = bound.min((dabs + DUAL_TOL) / alpha.abs());
                cands.push((j, alpha, dabs / alpha.abs()));
            }
            let mut pick: Option<(usize, f64)> = None;
            let mut best_alpha = 0.0;
            let mut best_ratio = f64::INFINITY;
            for &(j, alpha, ratio) in &cands {
                let better = if bland {
                    ratio < best_ratio - DEGENERATE_STEP
                        || (ratio <= best_ratio + DEGENERATE_STEP && pick.map_or(true, |(q, _)| j < q))
                } else {
                    ratio <= bound && alpha.abs() > best_alpha
                };
                if better {
                    best_alpha = alpha.abs();
                    best_ratio = ratio;
                    pick = Some((j, ratio));
                }
            }
            let Some((q, step)) = pick else {
                return Ok(Outcome::Infeasible);
            };
            if step <= DEGENERATE_STEP {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            let w = self.ftran(q);
            let target = if to_lower { self.lo[out] } else { self.hi[out] };
            let theta = (self.x[out] - target) / w[r];
            for (k, &wk) in w.iter().enumerate() {
                let j = self.basis[k];
                self.x[j] -= theta * wk;
            }
            self.x[q] += theta;
            self.x[out] = target;
            self.pos[out] = if to_lower { Pos::Lower } else { Pos::Upper };
            self.pivot(r, q, &w);
        }
    }
}
