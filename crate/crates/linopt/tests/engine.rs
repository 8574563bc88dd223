use linopt::{solve_lp, solve_mip, solve_mip_from, LinearModel, LpStatus, MipOptions, MipStatus, Relation};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random feasible, bounded LP built around a known interior-ish point.
pub fn random_lp(seed: u64, n: usize, m: usize) -> LinearModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = LinearModel::new();
    let mut x0 = Vec::with_capacity(n);
    let mut vars = Vec::with_capacity(n);
    for j in 0..n {
        let lo = rng.gen_range(-5.0..0.0);
        let hi = lo + rng.gen_range(1.0..10.0);
        x0.push(rng.gen_range(lo..hi));
        vars.push(model.continuous(format!("x{j}"), lo, hi, rng.gen_range(-10.0..10.0)));
    }
    for i in 0..m {
        let mut terms = Vec::new();
        for &v in &vars {
            if rng.gen_bool(0.6) {
                terms.push((v, rng.gen_range(-5.0..5.0)));
            }
        }
        let act: f64 = terms.iter().map(|(v, a)| a * x0[v.0]).sum();
        let rel = match rng.gen_range(0..3) {
            0 => Relation::Le,
            1 => Relation::Ge,
            _ => Relation::Eq,
        };
        let rhs = match rel {
            Relation::Le => act + rng.gen_range(0.0..3.0),
            Relation::Ge => act - rng.gen_range(0.0..3.0),
            Relation::Eq => act,
        };
        model.add_row(format!("r{i}"), terms, rel, rhs);
    }
    model
}

/// Dual objective evaluated from the row duals alone:
/// `b·y + Σ_j min over [l_j, u_j] of (c_j - a_j·y) x_j`.
fn dual_objective(model: &LinearModel, y: &[f64]) -> f64 {
    let n = model.num_vars();
    let mut d: Vec<f64> = model.vars().iter().map(|v| v.obj).collect();
    let mut by = 0.0;
    for (i, row) in model.rows().iter().enumerate() {
        by += row.rhs * y[i];
        for (v, a) in &row.terms {
            d[v.0] -= a * y[i];
        }
    }
    let mut total = by;
    for j in 0..n {
        let v = &model.vars()[j];
        total += if d[j] >= 0.0 { d[j] * v.lower } else { d[j] * v.upper };
    }
    total
}

#[test]
fn strong_duality_and_complementary_slackness_on_100_random_lps() {
    for seed in 0..100u64 {
        let n = 4 + (seed as usize % 9);
        let m = 3 + (seed as usize % 7);
        let model = random_lp(seed, n, m);
        let sol = solve_lp(&model).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal, "seed {seed}");
        assert!(model.max_violation(&sol.values) <= 1e-6, "seed {seed} primal");
        let dobj = dual_objective(&model, &sol.duals);
        assert!(
            (dobj - sol.objective).abs() <= 1e-6 * (1.0 + sol.objective.abs()),
            "seed {seed}: primal {} dual {}",
            sol.objective,
            dobj
        );
        for (i, row) in model.rows().iter().enumerate() {
            let act: f64 = row.terms.iter().map(|(v, a)| a * sol.values[v.0]).sum();
            let y = sol.duals[i];
            match row.relation {
                Relation::Ge => assert!(y >= -1e-9, "seed {seed} sign"),
                Relation::Le => assert!(y <= 1e-9, "seed {seed} sign"),
                Relation::Eq => {}
            }
            assert!((y * (act - row.rhs)).abs() <= 1e-6, "seed {seed} cs row {i}");
        }
    }
}

#[test]
fn knapsack_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let weights: Vec<f64> = (0..10).map(|_| rng.gen_range(1..20) as f64).collect();
    let values: Vec<f64> = (0..10).map(|_| rng.gen_range(1..30) as f64).collect();
    let cap = 40.0;
    let mut best = 0.0f64;
    for mask in 0u32..1 << 10 {
        let (w, v) = (0..10).filter(|i| mask >> i & 1 == 1).fold((0.0, 0.0), |acc, i| {
            (acc.0 + weights[i], acc.1 + values[i])
        });
        if w <= cap {
            best = best.max(v);
        }
    }
    let mut m = LinearModel::new();
    let xs: Vec<_> = (0..10).map(|i| m.binary(format!("x{i}"), -values[i])).collect();
    m.add_row("cap", xs.iter().zip(&weights).map(|(&x, &w)| (x, w)), Relation::Le, cap);
    let sol = solve_mip(&m, &MipOptions::default()).unwrap();
    assert_eq!(sol.status, MipStatus::Optimal);
    assert!((-sol.objective - best).abs() < 1e-9);
}

fn random_binary_program(seed: u64) -> LinearModel {
    let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
    let mut m = LinearModel::new();
    let xs: Vec<_> = (0..10)
        .map(|i| m.binary(format!("x{i}"), rng.gen_range(-10..10) as f64))
        .collect();
    for r in 0..rng.gen_range(2..6) {
        let mut terms = Vec::new();
        for &x in &xs {
            if rng.gen_bool(0.7) {
                terms.push((x, rng.gen_range(-6..7) as f64));
            }
        }
        let rel = if rng.gen_bool(0.5) { Relation::Le } else { Relation::Ge };
        let rhs = rng.gen_range(-6..8) as f64;
        m.add_row(format!("r{r}"), terms, rel, rhs);
    }
    m
}

fn enumerate_binary(m: &LinearModel) -> Option<f64> {
    let n = m.num_vars();
    let mut best: Option<f64> = None;
    for mask in 0u32..1 << n {
        let x: Vec<f64> = (0..n).map(|i| (mask >> i & 1) as f64).collect();
        if m.max_violation(&x) <= 1e-9 {
            let o = m.objective_value(&x);
            best = Some(best.map_or(o, |b: f64| b.min(o)));
        }
    }
    best
}

#[test]
fn thirty_binary_programs_match_enumeration() {
    for seed in 0..30 {
        let m = random_binary_program(seed);
        let oracle = enumerate_binary(&m);
        let sol = solve_mip(&m, &MipOptions::default()).unwrap();
        match oracle {
            None => assert_eq!(sol.status, MipStatus::Infeasible, "seed {seed}"),
            Some(o) => {
                assert_eq!(sol.status, MipStatus::Optimal, "seed {seed}");
                assert!((sol.objective - o).abs() < 1e-9, "seed {seed}: {} vs {o}", sol.objective);
                let x = sol.values.as_ref().unwrap();
                assert!(x.iter().all(|v| (v - v.round()).abs() <= 1e-6));
            }
        }
    }
}

#[test]
fn bound_trace_is_nondecreasing() {
    for seed in 0..30 {
        let m = random_binary_program(seed);
        let sol = solve_mip(&m, &MipOptions::default()).unwrap();
        for w in sol.bound_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "seed {seed}: {:?}", sol.bound_trace);
        }
        if sol.status == MipStatus::Optimal {
            assert!(sol.objective >= sol.bound - 1e-6 * (1.0 + sol.objective.abs()));
        }
    }
}

#[test]
fn resolve_is_deterministic() {
    let m = random_lp(7, 10, 8);
    let a = solve_lp(&m).unwrap();
    let b = solve_lp(&m).unwrap();
    assert_eq!(a.values, b.values);
    assert_eq!(a.duals, b.duals);
    let p = random_binary_program(3);
    let a = solve_mip(&p, &MipOptions::default()).unwrap();
    let b = solve_mip(&p, &MipOptions::default()).unwrap();
    assert_eq!(a.values, b.values);
    assert_eq!(a.nodes, b.nodes);
}

#[test]
fn node_limit_reports_incumbent_and_gap() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut m = LinearModel::new();
    let xs: Vec<_> = (0..30).map(|i| m.binary(format!("x{i}"), -(rng.gen_range(5..40) as f64))).collect();
    let w: Vec<f64> = (0..30).map(|_| rng.gen_range(5..40) as f64).collect();
    m.add_row("cap", xs.iter().zip(&w).map(|(&x, &w)| (x, w)), Relation::Le, 211.0);
    let opts = MipOptions { node_limit: 3, ..Default::default() };
    let sol = solve_mip(&m, &opts).unwrap();
    assert_eq!(sol.status, MipStatus::NodeLimit);
    if sol.has_incumbent() {
        assert!(sol.gap >= 0.0);
        assert!(sol.objective >= sol.bound - 1e-9);
    }
}

#[test]
fn start_point_seeds_the_incumbent() {
    for seed in 0..30 {
        let m = random_binary_program(seed);
        let plain = solve_mip(&m, &MipOptions::default()).unwrap();
        let Some(opt) = plain.values.clone() else { continue };
        // the optimum as a start: same answer, and a one-node limit still returns it
        let seeded = solve_mip_from(&m, &MipOptions::default(), &opt).unwrap();
        assert_eq!(seeded.status, MipStatus::Optimal);
        assert!((seeded.objective - plain.objective).abs() < 1e-9);
        assert!(seeded.nodes <= plain.nodes, "seed {seed}");
        let capped = solve_mip_from(&m, &MipOptions { node_limit: 0, ..Default::default() }, &opt).unwrap();
        assert!(capped.has_incumbent());
        assert!((capped.objective - plain.objective).abs() < 1e-9);
        // an arbitrary start never changes the optimum
        let junk = vec![1.0; m.num_vars()];
        let other = solve_mip_from(&m, &MipOptions::default(), &junk).unwrap();
        assert_eq!(other.status, plain.status);
        assert!((other.objective - plain.objective).abs() < 1e-9);
    }
    let m = random_binary_program(0);
    assert!(solve_mip_from(&m, &MipOptions::default(), &[0.0]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn duals_follow_sign_convention(seed in 0u64..10_000) {
        let model = random_lp(seed, 6, 5);
        let sol = solve_lp(&model).unwrap();
        prop_assert_eq!(sol.status, LpStatus::Optimal);
        for (i, row) in model.rows().iter().enumerate() {
            match row.relation {
                Relation::Ge => prop_assert!(sol.duals[i] >= -1e-9),
                Relation::Le => prop_assert!(sol.duals[i] <= 1e-9),
                Relation::Eq => {}
            }
        }
        let dobj = dual_objective(&model, &sol.duals);
        prop_assert!((dobj - sol.objective).abs() <= 1e-6 * (1.0 + sol.objective.abs()));
    }
}
