//! Linear model container.
//!
//! Objective sense is always minimisation. Callers that need a maximum
//! negate their objective.

use crate::error::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RowId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub integer: bool,
    pub obj: f64,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Debug, Clone, Default)]
pub struct LinearModel {
    vars: Vec<Variable>,
    rows: Vec<Constraint>,
}

impl LinearModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(
        &mut self,
        name: impl Into<String>,
        lower: f64,
        upper: f64,
        obj: f64,
        integer: bool,
    ) -> VarId {
        self.vars.push(Variable {
            name: name.into(),
            lower,
            upper,
            integer,
            obj,
        });
        VarId(self.vars.len() - 1)
    }

    /// Continuous variable in `[lower, upper]`.
    pub fn continuous(&mut self, name: impl Into<String>, lower: f64, upper: f64, obj: f64) -> VarId {
        self.add_var(name, lower, upper, obj, false)
    }

    /// 0/1 variable.
    pub fn binary(&mut self, name: impl Into<String>, obj: f64) -> VarId {
        self.add_var(name, 0.0, 1.0, obj, true)
    }

    /// Adds a row. Repeated variables in `terms` are merged and zero
    /// coefficients dropped.
    pub fn add_row(
        &mut self,
        name: impl Into<String>,
        terms: impl IntoIterator<Item = (VarId, f64)>,
        relation: Relation,
        rhs: f64,
    ) -> RowId {
        let mut terms: Vec<(VarId, f64)> = terms.into_iter().collect();
        terms.sort_by_key(|t| t.0);
        let mut merged: Vec<(VarId, f64)> = Vec::with_capacity(terms.len());
        for (v, a) in terms {
            match merged.last_mut() {
                Some(last) if last.0 == v => last.1 += a,
                _ => merged.push((v, a)),
            }
        }
        merged.retain(|t| t.1 != 0.0);
        self.rows.push(Constraint {
            name: name.into(),
            terms: merged,
            relation,
            rhs,
        });
        RowId(self.rows.len() - 1)
    }

    pub fn set_bounds(&mut self, v: VarId, lower: f64, upper: f64) {
        let var = &mut self.vars[v.0];
        var.lower = lower;
        var.upper = upper;
    }

    pub fn set_integer(&mut self, v: VarId, integer: bool) {
        self.vars[v.0].integer = integer;
    }

    pub fn set_obj(&mut self, v: VarId, obj: f64) {
        self.vars[v.0].obj = obj;
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }

    pub fn rows(&self) -> &[Constraint] {
        &self.rows
    }

    pub fn var(&self, v: VarId) -> &Variable {
        &self.vars[v.0]
    }

    pub fn row(&self, r: RowId) -> &Constraint {
        &self.rows[r.0]
    }

    pub fn num_integer(&self) -> usize {
        self.vars.iter().filter(|v| v.integer).count()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.vars.iter().zip(x).map(|(v, xv)| v.obj * xv).sum()
    }

    pub fn row_activity(&self, r: RowId, x: &[f64]) -> f64 {
        self.rows[r.0].terms.iter().map(|(v, a)| a * x[v.0]).sum()
    }

    /// Largest absolute bound or row violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for (v, xv) in self.vars.iter().zip(x) {
            worst = worst.max(v.lower - xv).max(xv - v.upper);
        }
        for (i, row) in self.rows.iter().enumerate() {
            let act = self.row_activity(RowId(i), x);
            let viol = match row.relation {
                Relation::Le => act - row.rhs,
                Relation::Ge => row.rhs - act,
                Relation::Eq => (act - row.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        worst
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (i, v) in self.vars.iter().enumerate() {
            if v.lower.is_nan() || v.upper.is_nan() || !v.obj.is_finite() {
                return Err(ModelError::NonFinite(format!("variable {} ({})", i, v.name)));
            }
            if v.lower > v.upper {
                return Err(ModelError::EmptyDomain(v.name.clone()));
            }
            if v.lower == f64::INFINITY || v.upper == f64::NEG_INFINITY {
                return Err(ModelError::EmptyDomain(v.name.clone()));
            }
        }
        for row in &self.rows {
            if !row.rhs.is_finite() {
                return Err(ModelError::NonFinite(format!("rhs of row {}", row.name)));
            }
            for (v, a) in &row.terms {
                if v.0 >= self.vars.len() {
                    return Err(ModelError::UnknownVariable {
                        row: row.name.clone(),
                        var: v.0,
                    });
                }
                if !a.is_finite() {
                    return Err(ModelError::NonFinite(format!("coefficient in row {}", row.name)));
                }
            }
        }
        Ok(())
    }
}
