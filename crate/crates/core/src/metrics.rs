//! Summary metrics of a solved run.

use serde::{Deserialize, Serialize};

use crate::master::MasterSolution;
use crate::model::Instance;
use crate::scenariogen::Scenario;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub cost: f64,
    pub scenario_count: usize,
    /// Mean over Ω′ of total shortfall / total demand, in percent.
    pub unfulfilled_pct: f64,
    /// Mean T^d over served communities, minutes.
    pub avg_delay: f64,
    pub cpu_seconds: f64,
}

/// Unfulfilled share per scenario, in percent.
pub fn unfulfilled_by_scenario(shortfall: &[Vec<f64>], scenarios: &[Scenario]) -> Vec<f64> {
    shortfall
        .iter()
        .zip(scenarios)
        .map(|(r, sc)| {
            let demand: f64 = sc.demand.iter().sum();
            if demand > 0.0 {
                100.0 * r.iter().sum::<f64>() / demand
            } else {
                0.0
            }
        })
        .collect()
}

pub fn average_delay(sol: &MasterSolution) -> f64 {
    let mut times = Vec::new();
    for a in &sol.assignments {
        for &c in &a.route.visits {
            times.push(sol.service_time[a.satellite][c]);
        }
    }
    if times.is_empty() {
        0.0
    } else {
        times.iter().sum::<f64>() / times.len() as f64
    }
}

pub fn compute_metrics(_inst: &Instance, sol: &MasterSolution, scenarios: &[Scenario], cpu_seconds: f64) -> Metrics {
    let shares = unfulfilled_by_scenario(&sol.shortfall, scenarios);
    let unfulfilled_pct = if shares.is_empty() { 0.0 } else { shares.iter().sum::<f64>() / shares.len() as f64 };
    Metrics {
        cost: sol.objective,
        scenario_count: scenarios.len(),
        unfulfilled_pct,
        avg_delay: average_delay(sol),
        cpu_seconds,
    }
}

/// Mean and population standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_replication_has_zero_sigma() {
        assert_eq!(mean_std(&[4.2]), (4.2, 0.0));
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!((m, s), (2.0, 1.0));
    }

    #[test]
    fn zero_shortfall_is_zero_percent() {
        let sc = Scenario { deviated: vec![false, false], demand: vec![3.0, 4.0], origin: crate::scenariogen::ScenarioOrigin::Nominal };
        assert_eq!(unfulfilled_by_scenario(&[vec![0.0, 0.0]], &[sc.clone()]), vec![0.0]);
        let shares = unfulfilled_by_scenario(&[vec![3.0, 4.0], vec![0.0, 3.5]], &[sc.clone(), sc]);
        assert_eq!(shares, vec![100.0, 50.0]);
    }
}
