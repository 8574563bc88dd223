//! Factorial experiment harness: generate, solve and re-evaluate every
//! (cell, replication) pair and summarise each cell by mean and σ.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::driver::{run, RunConfig, RunStatus};
use crate::error::{Error, Result};
use crate::instgen::{generate, Focus, GenSpec};
use crate::io::{write_instance, write_report};
use crate::metrics::mean_std;
use crate::reeval::reevaluate_report;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    /// Fields not swept are taken from here; `seed` is the first replication's seed.
    pub base: GenSpec,
    pub communities: Vec<usize>,
    pub gamma_pct: Vec<f64>,
    pub drones_per_truck: Vec<usize>,
    pub range_miles: Vec<f64>,
    pub levels: Vec<u8>,
    pub focuses: Vec<Focus>,
    /// Replication r uses seed `base.seed + r`.
    pub replications: usize,
    pub run: RunConfig,
    pub workers: usize,
}

impl ExperimentSpec {
    /// A single cell at the base settings.
    pub fn single(base: GenSpec, replications: usize) -> Self {
        Self {
            communities: vec![base.communities],
            gamma_pct: vec![base.gamma_pct],
            drones_per_truck: vec![base.drones_per_truck],
            range_miles: vec![base.range_miles],
            levels: vec![base.level],
            focuses: vec![base.focus],
            base,
            replications,
            run: RunConfig::default(),
            workers: 1,
        }
    }

    /// The factorial, in nested order communities, Γ, m^d, range, level, focus.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &communities in &self.communities {
            for &gamma_pct in &self.gamma_pct {
                for &drones_per_truck in &self.drones_per_truck {
                    for &range_miles in &self.range_miles {
                        for &level in &self.levels {
                            for &focus in &self.focuses {
                                out.push(Cell { communities, gamma_pct, drones_per_truck, range_miles, level, focus });
                            }
                        }
                    }
                }
            }
        }
        out
    }

    pub fn check(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Spec("at least one replication is required".into()));
        }
        if self.workers == 0 {
            return Err(Error::Spec("at least one worker is required".into()));
        }
        if self.cells().is_empty() {
            return Err(Error::Spec("every sweep list needs at least one value".into()));
        }
        for cell in self.cells() {
            cell.gen_spec(&self.base, self.base.seed).check()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub communities: usize,
    pub gamma_pct: f64,
    pub drones_per_truck: usize,
    pub range_miles: f64,
    pub level: u8,
    pub focus: Focus,
}

impl Cell {
    pub fn gen_spec(&self, base: &GenSpec, seed: u64) -> GenSpec {
        GenSpec {
            seed,
            communities: self.communities,
            gamma_pct: self.gamma_pct,
            drones_per_truck: self.drones_per_truck,
            range_miles: self.range_miles,
            level: self.level,
            focus: self.focus,
            ..base.clone()
        }
    }
}

/// One solved replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub cell: usize,
    pub seed: u64,
    pub status: RunStatus,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub epsilon: f64,
    pub cost: f64,
    pub scenario_count: usize,
    pub unfulfilled_pct: f64,
    pub avg_delay: f64,
    pub cpu_seconds: f64,
    /// Relaxed master objective traces, one per outer iteration.
    pub relaxed_traces: Vec<Vec<f64>>,
    pub reeval_cost: f64,
    pub reeval_violations: Vec<String>,
}

impl RunOutcome {
    pub fn gap(&self) -> f64 {
        self.upper_bound - self.lower_bound
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub cell: usize,
    pub seed: u64,
    pub error: String,
}

/// One summary line per cell, flat so it serialises to CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub communities: usize,
    pub gamma_pct: f64,
    pub drones_per_truck: usize,
    pub range_miles: f64,
    pub level: u8,
    pub focus: Focus,
    pub runs: usize,
    pub failures: usize,
    pub cpu_mean: f64,
    pub cpu_std: f64,
    pub scenarios_mean: f64,
    pub scenarios_std: f64,
    pub cost_mean: f64,
    pub cost_std: f64,
    pub unfulfilled_mean: f64,
    pub unfulfilled_std: f64,
    pub delay_mean: f64,
    pub delay_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub rows: Vec<MetricsRow>,
    pub runs: Vec<RunOutcome>,
    pub failures: Vec<Failure>,
}

fn run_one(spec: &ExperimentSpec, cells: &[Cell], k: usize, r: usize, out_dir: Option<&Path>) -> Result<RunOutcome> {
    let seed = spec.base.seed + r as u64;
    let inst = generate(&cells[k].gen_spec(&spec.base, seed))?;
    let report = run(&inst, &spec.run)?;
    let ev = reevaluate_report(&inst, &report)?;
    if let Some(dir) = out_dir {
        let dir: PathBuf = dir.join(format!("cell{k:03}")).join(format!("seed{seed}"));
        fs::create_dir_all(&dir)?;
        write_instance(&dir.join("instance.json"), &inst)?;
        write_report(&dir.join("report.json"), &report)?;
    }
    Ok(RunOutcome {
        cell: k,
        seed,
        status: report.status,
        lower_bound: report.lower_bound,
        upper_bound: report.upper_bound,
        epsilon: report.epsilon,
        cost: report.cost(),
        scenario_count: report.metrics.scenario_count,
        unfulfilled_pct: report.metrics.unfulfilled_pct,
        avg_delay: report.metrics.avg_delay,
        cpu_seconds: report.metrics.cpu_seconds,
        relaxed_traces: report.iterations.iter().map(|it| it.relaxed_objectives.clone()).collect(),
        reeval_cost: ev.cost,
        reeval_violations: ev.violations.iter().map(ToString::to_string).collect(),
    })
}

fn summarise(cell: &Cell, runs: &[&RunOutcome], failures: usize) -> MetricsRow {
    let stat = |f: fn(&RunOutcome) -> f64| mean_std(&runs.iter().map(|r| f(r)).collect::<Vec<_>>());
    let (cpu_mean, cpu_std) = stat(|r| r.cpu_seconds);
    let (scenarios_mean, scenarios_std) = stat(|r| r.scenario_count as f64);
    let (cost_mean, cost_std) = stat(|r| r.cost);
    let (unfulfilled_mean, unfulfilled_std) = stat(|r| r.unfulfilled_pct);
    let (delay_mean, delay_std) = stat(|r| r.avg_delay);
    MetricsRow {
        communities: cell.communities,
        gamma_pct: cell.gamma_pct,
        drones_per_truck: cell.drones_per_truck,
        range_miles: cell.range_miles,
        level: cell.level,
        focus: cell.focus,
        runs: runs.len(),
        failures,
        cpu_mean,
        cpu_std,
        scenarios_mean,
        scenarios_std,
        cost_mean,
        cost_std,
        unfulfilled_mean,
        unfulfilled_std,
        delay_mean,
        delay_std,
    }
}

/// Runs the full factorial on `spec.workers` threads. A failing replication
/// is recorded and the sweep goes on.
pub fn run_experiment(spec: &ExperimentSpec, out_dir: Option<&Path>) -> Result<ExperimentResult> {
    spec.check()?;
    let cells = spec.cells();
    let jobs: Vec<(usize, usize)> =
        (0..cells.len()).flat_map(|k| (0..spec.replications).map(move |r| (k, r))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers)
        .build()
        .map_err(|e| Error::Internal(e.to_string()))?;
    let results: Vec<(usize, usize, Result<RunOutcome>)> = pool.install(|| {
        jobs.par_iter().map(|&(k, r)| (k, r, run_one(spec, &cells, k, r, out_dir))).collect()
    });
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for (k, r, res) in results {
        match res {
            Ok(o) => {
                info!("cell {k} seed {}: {:?} cost {:.2} in {:.1}s", o.seed, o.status, o.cost, o.cpu_seconds);
                runs.push(o);
            }
            Err(e) => {
                let seed = spec.base.seed + r as u64;
                warn!("cell {k} seed {seed} failed: {e}");
                failures.push(Failure { cell: k, seed, error: e.to_string() });
            }
        }
    }
    let rows = cells
        .iter()
        .enumerate()
        .map(|(k, cell)| {
            let ok: Vec<&RunOutcome> = runs.iter().filter(|o| o.cell == k).collect();
            summarise(cell, &ok, failures.iter().filter(|f| f.cell == k).count())
        })
        .collect();
    Ok(ExperimentResult { rows, runs, failures })
}

pub fn write_rows_csv<W: Write>(rows: &[MetricsRow], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for row in rows {
        wtr.serialize(row).map_err(|e| Error::Internal(e.to_string()))?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> GenSpec {
        GenSpec { seed: 3, communities: 6, satellites: 4, ..GenSpec::default() }
    }

    #[test]
    fn drone_sweep_gives_three_rows() {
        let mut spec = ExperimentSpec::single(small(), 1);
        spec.drones_per_truck = vec![4, 6, 8];
        spec.workers = 2;
        let res = run_experiment(&spec, None).unwrap();
        assert_eq!(res.rows.len(), 3);
        assert_eq!(res.rows.iter().map(|r| r.drones_per_truck).collect::<Vec<_>>(), vec![4, 6, 8]);
        for row in &res.rows {
            assert_eq!(row.runs, 1);
            assert_eq!(row.cost_std, 0.0);
            assert_eq!(row.unfulfilled_std, 0.0);
            assert!((0.0..=100.0).contains(&row.unfulfilled_mean));
        }
        for o in &res.runs {
            assert!(o.reeval_violations.is_empty(), "{:?}", o.reeval_violations);
        }
    }

    #[test]
    fn factorial_order_and_seeds() {
        let mut spec = ExperimentSpec::single(small(), 2);
        spec.gamma_pct = vec![30.0, 70.0];
        spec.range_miles = vec![25.0, 35.0];
        let cells = spec.cells();
        assert_eq!(cells.len(), 4);
        assert_eq!((cells[1].gamma_pct, cells[1].range_miles), (30.0, 35.0));
        assert_eq!((cells[2].gamma_pct, cells[2].range_miles), (70.0, 25.0));
        let res = run_experiment(&spec, None).unwrap();
        assert_eq!(res.runs.len(), 8);
        let mut seeds: Vec<u64> = res.runs.iter().filter(|o| o.cell == 0).map(|o| o.seed).collect();
        seeds.sort();
        assert_eq!(seeds, vec![3, 4]);
    }

    #[test]
    fn degenerate_spec_is_rejected() {
        let mut spec = ExperimentSpec::single(small(), 1);
        spec.communities = vec![0];
        assert!(run_experiment(&spec, None).is_err());
        spec.communities = vec![6];
        spec.replications = 0;
        assert!(spec.check().is_err());
    }

    #[test]
    fn rows_write_as_csv() {
        let spec = ExperimentSpec::single(small(), 1);
        let res = run_experiment(&spec, None).unwrap();
        let mut buf = Vec::new();
        write_rows_csv(&res.rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("communities,gamma_pct,drones_per_truck"));
        assert_eq!(text.lines().count(), 2);
    }
}
