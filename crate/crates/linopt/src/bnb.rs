//! Branch-and-bound over the LP relaxation.
//!
//! Nodes are explored depth-first until the first incumbent exists, then in
//! best-bound order (ties: deeper first, then creation order). Branching
//! picks the most fractional integer variable, lowest index on ties.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::error::SolveError;
use crate::model::LinearModel;
use crate::simplex::{BasisSnapshot, Outcome, Simplex};

pub const INT_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct MipOptions {
    pub node_limit: usize,
    pub time_limit: Option<Duration>,
    pub abs_gap: f64,
    pub rel_gap: f64,
}

impl Default for MipOptions {
    fn default() -> Self {
        Self {
            node_limit: 200_000,
            time_limit: None,
            abs_gap: 1e-6,
            rel_gap: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MipStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Node limit hit; `values` holds the best incumbent if any.
    NodeLimit,
    TimeLimit,
}

#[derive(Debug, Clone)]
pub struct MipSolution {
    pub status: MipStatus,
    pub values: Option<Vec<f64>>,
    pub objective: f64,
    /// Best proven lower bound.
    pub bound: f64,
    pub gap: f64,
    pub nodes: usize,
    /// Global lower bound observed each time a node is taken off the queue.
    pub bound_trace: Vec<f64>,
}

impl MipSolution {
    pub fn has_incumbent(&self) -> bool {
        self.values.is_some()
    }
}

struct Node {
    lo: Vec<f64>,
    hi: Vec<f64>,
    key: f64,
    depth: usize,
    seq: usize,
    basis: Option<Arc<BasisSnapshot>>,
}

struct Ranked(Node);

impl PartialEq for Ranked {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Ranked {}
impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Ranked {
    // max-heap: "greater" is popped first
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .key
            .total_cmp(&self.0.key)
            .then(self.0.depth.cmp(&other.0.depth))
            .then(other.0.seq.cmp(&self.0.seq))
    }
}

fn most_fractional(model: &LinearModel, x: &[f64]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    let mut best_score = f64::INFINITY;
    for (j, v) in model.vars().iter().enumerate() {
        if !v.integer {
            continue;
        }
        let frac = x[j] - x[j].floor();
        if frac <= INT_TOL || frac >= 1.0 - INT_TOL {
            continue;
        }
        let score = (frac - 0.5).abs();
        if score < best_score - 1e-12 {
            best_score = score;
            best = Some((j, x[j]));
        }
    }
    best
}

pub(crate) fn branch_and_bound(
    model: &LinearModel,
    opts: &MipOptions,
    warm_start: Option<&[f64]>,
) -> Result<MipSolution, SolveError> {
    model.validate()?;
    let start = Instant::now();
    let n = model.num_vars();
    let root_lo: Vec<f64> = model.vars().iter().map(|v| v.lower).collect();
    let root_hi: Vec<f64> = model.vars().iter().map(|v| v.upper).collect();
    // integer bounds can be rounded inward up front
    let mut root_lo = root_lo;
    let mut root_hi = root_hi;
    for (j, v) in model.vars().iter().enumerate() {
        if v.integer {
            root_lo[j] = (root_lo[j] - INT_TOL).ceil();
            root_hi[j] = (root_hi[j] + INT_TOL).floor();
            if root_lo[j] > root_hi[j] {
                return Ok(infeasible(0, Vec::new()));
            }
        }
    }

    let mut ws = Simplex::new(model);
    let mut incumbent: Option<Vec<f64>> = None;
    let mut inc_obj = f64::INFINITY;
    if let Some(x0) = warm_start {
        let (mut lo, mut hi) = (root_lo.clone(), root_hi.clone());
        for (j, v) in model.vars().iter().enumerate() {
            if v.integer {
                let r = x0[j].round().clamp(lo[j], hi[j]);
                lo[j] = r;
                hi[j] = r;
            }
        }
        ws.set_structural_bounds(&lo, &hi);
        if ws.solve_cold()? == Outcome::Optimal {
            let vals = ws.structural_values();
            inc_obj = model.objective_value(&vals);
            incumbent = Some(vals);
        }
        ws = Simplex::new(model);
    }
    let mut dive: Vec<Node> = Vec::new();
    let mut heap: BinaryHeap<Ranked> = BinaryHeap::new();
    let mut seq = 0usize;
    let mut nodes = 0usize;
    let mut trace = Vec::new();
    let mut last_snapshot: Option<Arc<BasisSnapshot>> = None;
    let mut status = MipStatus::Optimal;

    dive.push(Node {
        lo: root_lo,
        hi: root_hi,
        key: f64::NEG_INFINITY,
        depth: 0,
        seq,
        basis: None,
    });

    let prune_level = |inc: f64| {
        if inc.is_finite() {
            inc - opts.abs_gap.max(opts.rel_gap * inc.abs())
        } else {
            f64::INFINITY
        }
    };

    loop {
        // once an incumbent exists, move any pending dive nodes to the heap
        if incumbent.is_some() && !dive.is_empty() {
            for node in dive.drain(..) {
                heap.push(Ranked(node));
            }
        }
        let open_min = heap
            .peek()
            .map(|r| r.0.key)
            .into_iter()
            .chain(dive.iter().map(|d| d.key))
            .fold(f64::INFINITY, f64::min);
        let node = if let Some(nd) = dive.pop() {
            nd
        } else if let Some(Ranked(nd)) = heap.pop() {
            nd
        } else {
            break;
        };
        trace.push(open_min.min(node.key));
        if node.key >= prune_level(inc_obj) {
            continue;
        }
        if nodes >= opts.node_limit {
            status = MipStatus::NodeLimit;
            let key = node.key;
            heap.push(Ranked(node));
            let _ = key;
            break;
        }
        if let Some(tl) = opts.time_limit {
            if start.elapsed() > tl {
                status = MipStatus::TimeLimit;
                heap.push(Ranked(node));
                break;
            }
        }
        nodes += 1;

        ws.set_structural_bounds(&node.lo, &node.hi);
        let outcome = match &node.basis {
            Some(snap) => {
                let reuse = last_snapshot.as_ref().is_some_and(|s| Arc::ptr_eq(s, snap));
                match ws.solve_warm(snap, reuse) {
                    Ok(Some(o)) => o,
                    Ok(None) | Err(_) => {
                        ws = Simplex::new(model);
                        ws.set_structural_bounds(&node.lo, &node.hi);
                        ws.solve_cold()?
                    }
                }
            }
            None => ws.solve_cold()?,
        };
        last_snapshot = None;
        match outcome {
            Outcome::Infeasible => continue,
            Outcome::Unbounded => {
                if incumbent.is_none() && nodes == 1 {
                    return Ok(MipSolution {
                        status: MipStatus::Unbounded,
                        values: None,
                        objective: f64::NEG_INFINITY,
                        bound: f64::NEG_INFINITY,
                        gap: f64::INFINITY,
                        nodes,
                        bound_trace: trace,
                    });
                }
                continue;
            }
            Outcome::Optimal => {}
        }
        let obj = ws.objective();
        if obj >= prune_level(inc_obj) {
            continue;
        }
        let x = ws.structural_values();
        match most_fractional(model, &x) {
            None => {
                let mut vals = x;
                for (j, v) in model.vars().iter().enumerate() {
                    if v.integer {
                        vals[j] = vals[j].round();
                    }
                }
                let o = model.objective_value(&vals);
                if o < inc_obj {
                    inc_obj = o;
                    incumbent = Some(vals);
                }
            }
            Some((j, val)) => {
                let snap = Arc::new(ws.snapshot());
                last_snapshot = Some(snap.clone());
                let mut down_hi = node.hi.clone();
                down_hi[j] = val.floor();
                let mut up_lo = node.lo.clone();
                up_lo[j] = val.ceil();
                let down = Node {
                    lo: node.lo.clone(),
                    hi: down_hi,
                    key: obj,
                    depth: node.depth + 1,
                    seq: {
                        seq += 1;
                        seq
                    },
                    basis: Some(snap.clone()),
                };
                let up = Node {
                    lo: up_lo,
                    hi: node.hi,
                    key: obj,
                    depth: node.depth + 1,
                    seq: {
                        seq += 1;
                        seq
                    },
                    basis: Some(snap),
                };
                if incumbent.is_none() {
                    // dive on the up branch first
                    dive.push(down);
                    dive.push(up);
                } else {
                    heap.push(Ranked(down));
                    heap.push(Ranked(up));
                }
            }
        }
        debug_assert_eq!(ws.num_structural(), n);
    }

    let open_bound = heap
        .iter()
        .map(|r| r.0.key)
        .chain(dive.iter().map(|d| d.key))
        .fold(f64::INFINITY, f64::min);
    let bound = if status == MipStatus::Optimal {
        inc_obj
    } else {
        open_bound.min(inc_obj)
    };
    match incumbent {
        None if status == MipStatus::Optimal => Ok(infeasible(nodes, trace)),
        None => Ok(MipSolution {
            status,
            values: None,
            objective: f64::INFINITY,
            bound,
            gap: f64::INFINITY,
            nodes,
            bound_trace: trace,
        }),
        Some(vals) => Ok(MipSolution {
            status,
            values: Some(vals),
            objective: inc_obj,
            bound,
            gap: (inc_obj - bound).max(0.0),
            nodes,
            bound_trace: trace,
        }),
    }
}

fn infeasible(nodes: usize, trace: Vec<f64>) -> MipSolution {
    MipSolution {
        status: MipStatus::Infeasible,
        values: None,
        objective: f64::INFINITY,
        bound: f64::INFINITY,
        gap: f64::INFINITY,
        nodes,
        bound_trace: trace,
    }
}
