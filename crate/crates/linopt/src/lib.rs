//! Small self-contained linear optimisation engine.
//!
//! * [`solve_lp`] solves the continuous relaxation with a bounded revised
//!   simplex and returns row duals.
//! * [`solve_mip`] runs branch-and-bound on top of it.
//! * [`Backend`] lets callers swap in an external solver behind the same
//!   signatures; [`Builtin`] is the default.
//!
//! Dual sign convention (minimisation): the dual of a `≥` row is `≥ 0`, of a
//! `≤` row is `≤ 0`, of an `=` row is free.

mod bnb;
pub mod dump;
mod error;
mod model;
mod simplex;

pub use bnb::{MipOptions, MipSolution, MipStatus, INT_TOL};
pub use error::{ModelError, SolveError};
pub use model::{Constraint, LinearModel, Relation, RowId, VarId, Variable};

use simplex::{Outcome, Simplex};

/// Primal feasibility tolerance used when checking returned solutions.
pub const FEASIBILITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub values: Vec<f64>,
    /// One entry per row, in row order.
    pub duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

impl LpSolution {
    pub fn value(&self, v: VarId) -> f64 {
        self.values[v.0]
    }

    pub fn dual(&self, r: RowId) -> f64 {
        self.duals[r.0]
    }

    fn empty(status: LpStatus, n: usize, m: usize, iterations: usize) -> Self {
        let objective = match status {
            LpStatus::Unbounded => f64::NEG_INFINITY,
            _ => f64::INFINITY,
        };
        LpSolution {
            status,
            values: vec![0.0; n],
            duals: vec![0.0; m],
            reduced_costs: vec![0.0; n],
            objective,
            iterations,
        }
    }
}

/// Solve the continuous relaxation (integrality flags are ignored).
pub fn solve_lp(model: &LinearModel) -> Result<LpSolution, SolveError> {
    model.validate()?;
    let mut ws = Simplex::new(model);
    let outcome = ws.solve_cold()?;
    let (n, m) = (model.num_vars(), model.num_rows());
    Ok(match outcome {
        Outcome::Infeasible => LpSolution::empty(LpStatus::Infeasible, n, m, ws.iterations()),
        Outcome::Unbounded => LpSolution::empty(LpStatus::Unbounded, n, m, ws.iterations()),
        Outcome::Optimal => LpSolution {
            status: LpStatus::Optimal,
            values: ws.structural_values(),
            duals: ws.duals(),
            reduced_costs: ws.reduced_costs(),
            objective: ws.objective(),
            iterations: ws.iterations(),
        },
    })
}

pub fn solve_mip(model: &LinearModel, opts: &MipOptions) -> Result<MipSolution, SolveError> {
    bnb::branch_and_bound(model, opts, None)
}

/// Like [`solve_mip`], seeded with a start point: integer variables are
/// fixed at the rounded `start` values and, if the remaining LP is
/// feasible, its solution becomes the first incumbent. An infeasible start
/// is ignored.
pub fn solve_mip_from(model: &LinearModel, opts: &MipOptions, start: &[f64]) -> Result<MipSolution, SolveError> {
    if start.len() != model.num_vars() {
        return Err(SolveError::Numerical(format!(
            "start has {} values for {} variables",
            start.len(),
            model.num_vars()
        )));
    }
    bnb::branch_and_bound(model, opts, Some(start))
}

pub trait Backend: Send + Sync {
    fn name(&self) -> &str;
    fn solve_lp(&self, model: &LinearModel) -> Result<LpSolution, SolveError>;
    fn solve_mip(&self, model: &LinearModel, opts: &MipOptions) -> Result<MipSolution, SolveError>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Builtin;

impl Backend for Builtin {
    fn name(&self) -> &str {
        "builtin"
    }

    fn solve_lp(&self, model: &LinearModel) -> Result<LpSolution, SolveError> {
        solve_lp(model)
    }

    fn solve_mip(&self, model: &LinearModel, opts: &MipOptions) -> Result<MipSolution, SolveError> {
        solve_mip(model, opts)
    }
}
