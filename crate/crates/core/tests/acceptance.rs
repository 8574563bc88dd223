//! Acceptance criteria 1 to 10. Each criterion prints one PASS or FAIL line;
//! the target fails if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use linopt::{solve_lp, solve_mip, LinearModel, LpStatus, MipOptions, MipStatus, Relation};
use r2evrp::experiment::{run_experiment, ExperimentResult, ExperimentSpec, RunOutcome};
use r2evrp::instgen::{generate, GenSpec};
use r2evrp::io::instance_to_string;
use r2evrp::master::DualPrices;
use r2evrp::pricing::{build_pricing, price_slot};
use r2evrp::reeval::COST_TOL;
use r2evrp::scenariogen::{build_worstcase, oracle_worstcase, solve_worstcase};
use r2evrp::{build_reachability, run, Instance, Reachability, RunConfig, RunStatus, Scenario};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------- criterion 1 ----------

/// Worst-case shortage cost by brute force over all admissible flag vectors.
fn brute_worst_case(inst: &Instance, delivered: &[f64]) -> f64 {
    let n = inst.num_communities();
    let mut best = f64::NEG_INFINITY;
    for mask in 0u32..1 << n {
        let y: Vec<bool> = (0..n).map(|c| mask >> c & 1 == 1).collect();
        if y.iter().filter(|&&b| b).count() > inst.gamma_total {
            continue;
        }
        let regional_ok = inst.gamma_region.iter().enumerate().all(|(a, &g)| {
            (0..n).filter(|&c| y[c] && inst.communities[c].region == a).count() <= g
        });
        if !regional_ok {
            continue;
        }
        let cost: f64 = inst
            .communities
            .iter()
            .enumerate()
            .map(|(c, com)| {
                let q = com.nominal_demand + if y[c] { com.max_deviation } else { 0.0 };
                com.shortage_cost * (q - delivered[c]).max(0.0)
            })
            .sum();
        best = best.max(cost);
    }
    best
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut worst_err: f64 = 0.0;
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(3..=10);
        let spec = GenSpec {
            seed,
            communities: n,
            satellites: 3,
            drones_per_truck: 2,
            level: rng.gen_range(1..=3),
            gamma_pct: [30.0, 50.0, 70.0, 100.0][seed as usize % 4],
            gamma_region_pct: [50.0, 100.0][seed as usize % 2],
            ..GenSpec::default()
        };
        let inst = generate(&spec).map_err(|e| e.to_string())?;
        let mut psi = vec![vec![vec![0.0; n]; 2]; 3];
        let mut delivered = vec![0.0; n];
        for c in 0..n {
            if rng.gen_bool(0.7) {
                let q = inst.communities[c].nominal_demand + inst.communities[c].max_deviation;
                let d = rng.gen_range(0.0..=q);
                psi[rng.gen_range(0..3)][rng.gen_range(0..2)][c] = d;
                delivered[c] = d;
            }
        }
        let wc = solve_worstcase(&inst, &build_worstcase(&inst, &psi)).map_err(|e| e.to_string())?;
        let oracle = oracle_worstcase(&inst, &psi).map_err(|e| e.to_string())?;
        let brute = brute_worst_case(&inst, &delivered);
        let err = (wc.objective - oracle).abs().max((wc.objective - brute).abs());
        ensure(err <= 1e-6, || format!("seed {seed}: MILP {} oracle {oracle} brute {brute}", wc.objective))?;
        worst_err = worst_err.max(err);
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 60.0, || format!("took {secs:.1}s"))?;
    Ok(format!("50 instances, max |MILP - oracle| = {worst_err:.2e}, {secs:.2}s"))
}

// ---------- criterion 2 ----------

fn random_lp(seed: u64) -> LinearModel {
    let mut rng = ChaCha8Rng::seed_from_u64(7_000 + seed);
    let n = rng.gen_range(3..12);
    let m = rng.gen_range(2..9);
    let mut model = LinearModel::new();
    let mut x0 = Vec::new();
    let vars: Vec<_> = (0..n)
        .map(|j| {
            let lo = rng.gen_range(-4.0..1.0);
            let hi = lo + rng.gen_range(0.5..8.0);
            x0.push(rng.gen_range(lo..hi));
            model.continuous(format!("x{j}"), lo, hi, rng.gen_range(-9.0..9.0))
        })
        .collect();
    for i in 0..m {
        let mut terms = Vec::new();
        for &v in &vars {
            if rng.gen_bool(0.65) {
                terms.push((v, rng.gen_range(-4.0..4.0)));
            }
        }
        let act: f64 = terms.iter().map(|(v, a)| a * x0[v.0]).sum();
        let (rel, rhs) = match rng.gen_range(0..3) {
            0 => (Relation::Le, act + rng.gen_range(0.0..2.0)),
            1 => (Relation::Ge, act - rng.gen_range(0.0..2.0)),
            _ => (Relation::Eq, act),
        };
        model.add_row(format!("r{i}"), terms, rel, rhs);
    }
    model
}

fn lp_check(model: &LinearModel) -> Result<(), String> {
    let sol = solve_lp(model).map_err(|e| e.to_string())?;
    ensure(sol.status == LpStatus::Optimal, || format!("status {:?}", sol.status))?;
    ensure(model.max_violation(&sol.values) <= 1e-6, || "primal infeasible".into())?;
    // dual objective: b·y + Σ_j min over the box of the reduced cost times x_j
    let mut red: Vec<f64> = model.vars().iter().map(|v| v.obj).collect();
    let mut dual = 0.0;
    for (i, row) in model.rows().iter().enumerate() {
        let y = sol.duals[i];
        dual += row.rhs * y;
        for (v, a) in &row.terms {
            red[v.0] -= a * y;
        }
        let sign_ok = match row.relation {
            Relation::Ge => y >= -1e-9,
            Relation::Le => y <= 1e-9,
            Relation::Eq => true,
        };
        ensure(sign_ok, || format!("row {i} dual sign"))?;
        let act: f64 = row.terms.iter().map(|(v, a)| a * sol.values[v.0]).sum();
        ensure((y * (act - row.rhs)).abs() <= 1e-6, || format!("row {i} complementary slackness"))?;
    }
    for (j, v) in model.vars().iter().enumerate() {
        dual += if red[j] >= 0.0 { red[j] * v.lower } else { red[j] * v.upper };
        let x = sol.values[j];
        let at_lower = (x - v.lower).abs() <= 1e-7;
        let at_upper = (x - v.upper).abs() <= 1e-7;
        ensure(at_lower || at_upper || red[j].abs() <= 1e-6, || format!("var {j} reduced cost at interior value"))?;
    }
    ensure((dual - sol.objective).abs() <= 1e-6 * (1.0 + sol.objective.abs()), || {
        format!("primal {} dual {dual}", sol.objective)
    })
}

fn random_bip(seed: u64) -> LinearModel {
    let mut rng = ChaCha8Rng::seed_from_u64(9_000 + seed);
    let mut m = LinearModel::new();
    let xs: Vec<_> = (0..10).map(|i| m.binary(format!("b{i}"), rng.gen_range(-12..12) as f64)).collect();
    for r in 0..rng.gen_range(2..7) {
        let mut terms = Vec::new();
        for &x in &xs {
            if rng.gen_bool(0.6) {
                terms.push((x, rng.gen_range(-5..6) as f64));
            }
        }
        let rel = if rng.gen_bool(0.5) { Relation::Le } else { Relation::Ge };
        m.add_row(format!("r{r}"), terms, rel, rng.gen_range(-5..9) as f64);
    }
    m
}

fn criterion_2() -> Outcome {
    for seed in 0..100 {
        lp_check(&random_lp(seed)).map_err(|e| format!("LP {seed}: {e}"))?;
    }
    let mut infeasible = 0;
    for seed in 0..30 {
        let m = random_bip(seed);
        let mut best: Option<f64> = None;
        for mask in 0u32..1 << 10 {
            let x: Vec<f64> = (0..10).map(|i| (mask >> i & 1) as f64).collect();
            let feasible = m.rows().iter().all(|row| {
                let act: f64 = row.terms.iter().map(|(v, a)| a * x[v.0]).sum();
                match row.relation {
                    Relation::Le => act <= row.rhs,
                    Relation::Ge => act >= row.rhs,
                    Relation::Eq => act == row.rhs,
                }
            });
            if feasible {
                let o: f64 = m.vars().iter().zip(&x).map(|(v, x)| v.obj * x).sum();
                best = Some(best.map_or(o, |b| b.min(o)));
            }
        }
        let sol = solve_mip(&m, &MipOptions::default()).map_err(|e| e.to_string())?;
        match best {
            None => {
                infeasible += 1;
                ensure(sol.status == MipStatus::Infeasible, || format!("BIP {seed}: expected infeasible"))?
            }
            Some(b) => ensure(sol.status == MipStatus::Optimal && (sol.objective - b).abs() <= 1e-9, || {
                format!("BIP {seed}: {:?} {} vs {b}", sol.status, sol.objective)
            })?,
        }
    }
    Ok(format!("100 LPs dual-checked, 30 binary programs exact ({infeasible} infeasible)"))
}

// ---------- criterion 3 ----------

/// Lowest reduced cost over every ordered subset of `allowed` within range,
/// each priced with its best per-scenario delivery plan.
fn enumerate_pricing(
    inst: &Instance,
    reach: &Reachability,
    s: usize,
    allowed: &[usize],
    d: &DualPrices,
    scen: &[Scenario],
) -> f64 {
    fn orders(prefix: &mut Vec<usize>, rest: &[usize], out: &mut Vec<Vec<usize>>) {
        out.push(prefix.clone());
        for i in 0..rest.len() {
            let mut r = rest.to_vec();
            let c = r.remove(i);
            prefix.push(c);
            orders(prefix, &r, out);
            prefix.pop();
        }
    }
    let mut all = Vec::new();
    orders(&mut Vec::new(), allowed, &mut all);
    let mut best = f64::INFINITY;
    for seq in all {
        let (dur, times) = reach.route_times(s, &seq);
        if dur > inst.flying_range_min + 1e-9 {
            continue;
        }
        let mut rc = -d.theta[s] - d.phi[s][0] - d.rho[s][0] * dur;
        for (k, &c) in seq.iter().enumerate() {
            rc -= d.xi[c] + d.alpha[s][c] * (times[k] + inst.big_m);
        }
        for (w, sc) in scen.iter().enumerate() {
            let mut gains: Vec<(f64, f64)> = seq.iter().map(|&c| (d.beta[w][c], sc.demand[c])).collect();
            gains.sort_by(|a, b| b.0.total_cmp(&a.0));
            let mut room = inst.max_load;
            for (b, q) in gains {
                let g = q.min(room).max(0.0);
                if b > 0.0 {
                    rc -= b * g;
                    room -= g;
                }
            }
        }
        best = best.min(rc);
    }
    best
}

fn criterion_3() -> Outcome {
    let mut cases = 0;
    let mut multi = 0;
    let mut seed = 0u64;
    while cases < 25 {
        seed += 1;
        ensure(seed < 500, || "could not find 25 satellites with reachable communities".into())?;
        let inst = generate(&GenSpec { seed, communities: 14, satellites: 4, ..GenSpec::default() })
            .map_err(|e| e.to_string())?;
        let reach = build_reachability(&inst).map_err(|e| e.to_string())?;
        let Some(s) = (0..inst.num_satellites()).max_by_key(|&s| reach.members(s).len()) else { continue };
        if reach.members(s).is_empty() {
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut allowed = reach.members(s).to_vec();
        while allowed.len() > 4 {
            allowed.remove(rng.gen_range(0..allowed.len()));
        }
        let scen: Vec<Scenario> = (0..rng.gen_range(1..=3))
            .map(|k| {
                if k == 0 {
                    Scenario::nominal(&inst)
                } else {
                    let flags = (0..inst.num_communities()).map(|_| rng.gen_bool(0.4)).collect();
                    Scenario::from_flags(&inst, flags)
                }
            })
            .collect();
        let mut d = DualPrices::zeros(&inst, scen.len());
        d.theta[s] = -rng.gen_range(0.0..4.0);
        d.phi[s][0] = -rng.gen_range(0.0..4.0);
        d.rho[s][0] = -rng.gen_range(0.0..0.6);
        for c in 0..inst.num_communities() {
            d.xi[c] = rng.gen_range(-30.0..80.0);
            if rng.gen_bool(0.5) {
                d.alpha[s][c] = -rng.gen_range(0.0..0.03);
            }
            for w in 0..scen.len() {
                if rng.gen_bool(0.6) {
                    d.beta[w][c] = rng.gen_range(0.0..9.0);
                }
            }
        }
        let oracle = enumerate_pricing(&inst, &reach, s, &allowed, &d, &scen);
        let pm = build_pricing(&inst, &reach, s, 0, &allowed, &d, &scen)
            .map_err(|e| e.to_string())?
            .ok_or("empty allowed set")?;
        let mip = solve_mip(&pm.model, &MipOptions::default()).map_err(|e| e.to_string())?;
        ensure(mip.status == MipStatus::Optimal, || format!("seed {seed}: pricing {:?}", mip.status))?;
        let milp_value = mip.objective + pm.constant;
        let route = price_slot(&inst, &reach, s, 0, &allowed, &d, &scen)
            .map_err(|e| e.to_string())?
            .ok_or("no route")?;
        let rc = route.reduced_cost.ok_or("route without reduced cost")?;
        ensure((milp_value - oracle).abs() <= 1e-6, || format!("seed {seed}: MILP {milp_value} enumeration {oracle}"))?;
        ensure((rc - oracle).abs() <= 1e-6, || format!("seed {seed}: route RC {rc} enumeration {oracle}"))?;
        if route.visits.len() > 1 {
            multi += 1;
        }
        cases += 1;
    }
    Ok(format!("25 cases match enumeration within 1e-6 ({multi} optimal sorties with 2+ stops)"))
}

// ---------- criteria 4 to 9 ----------

fn base15() -> GenSpec {
    GenSpec {
        seed: 100,
        communities: 15,
        satellites: 6,
        drones_per_truck: 4,
        gamma_pct: 50.0,
        gamma_region_pct: 50.0,
        epsilon: 1.0,
        ..GenSpec::default()
    }
}

fn sweep(replications: usize, edit: impl FnOnce(&mut ExperimentSpec)) -> Result<ExperimentResult, String> {
    let mut spec = ExperimentSpec::single(base15(), replications);
    spec.workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    edit(&mut spec);
    let res = run_experiment(&spec, None).map_err(|e| e.to_string())?;
    if let Some(f) = res.failures.first() {
        return Err(format!("cell {} seed {} failed: {}", f.cell, f.seed, f.error));
    }
    Ok(res)
}

struct Sweeps {
    convergence: ExperimentResult,
    gamma: ExperimentResult,
    drones: ExperimentResult,
    range: ExperimentResult,
}

fn criterion_4(sw: &Sweeps) -> Outcome {
    let mut rounds = 0;
    for o in &sw.convergence.runs {
        for (it, trace) in o.relaxed_traces.iter().enumerate() {
            for w in trace.windows(2) {
                rounds += 1;
                ensure(w[1] <= w[0] + 1e-6, || {
                    format!("seed {} iteration {}: relaxed objective rose {} -> {}", o.seed, it + 1, w[0], w[1])
                })?;
            }
        }
    }
    Ok(format!("{} runs, {rounds} pricing rounds, relaxed objective never rose", sw.convergence.runs.len()))
}

fn criterion_5(sw: &Sweeps) -> Outcome {
    let runs = &sw.convergence.runs;
    ensure(runs.len() == 10, || format!("{} of 10 runs finished", runs.len()))?;
    for o in runs {
        ensure(o.status == RunStatus::Converged && o.gap() <= o.epsilon, || {
            format!("seed {}: {:?} with gap {}", o.seed, o.status, o.gap())
        })?;
        ensure(o.cpu_seconds < 600.0, || format!("seed {}: {:.1}s", o.seed, o.cpu_seconds))?;
        ensure((2..=8).contains(&o.scenario_count), || format!("seed {}: {} scenarios", o.seed, o.scenario_count))?;
    }
    let mean = runs.iter().map(|o| o.scenario_count as f64).sum::<f64>() / runs.len() as f64;
    let slowest = runs.iter().map(|o| o.cpu_seconds).fold(0.0, f64::max);
    Ok(format!("10/10 converged, mean scenarios {mean:.2}, slowest {slowest:.1}s"))
}

fn criterion_6(sw: &Sweeps) -> Outcome {
    let rows = &sw.gamma.rows;
    let (lo, hi) = (&rows[0], &rows[1]);
    let detail = format!(
        "Γ=30%: cost {:.1}, unfulfilled {:.2}%; Γ=70%: cost {:.1}, unfulfilled {:.2}%",
        lo.cost_mean, lo.unfulfilled_mean, hi.cost_mean, hi.unfulfilled_mean
    );
    ensure(lo.cost_mean >= hi.cost_mean && lo.unfulfilled_mean >= hi.unfulfilled_mean, || detail.clone())?;
    Ok(detail)
}

fn non_increasing(res: &ExperimentResult, label: &str, key: impl Fn(&r2evrp::experiment::MetricsRow) -> f64) -> Outcome {
    let vals: Vec<(f64, f64)> = res.rows.iter().map(|r| (key(r), r.unfulfilled_mean)).collect();
    let detail =
        vals.iter().map(|(k, u)| format!("{label}={k}: {u:.2}%")).collect::<Vec<_>>().join(", ");
    ensure(vals.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-9), || detail.clone())?;
    Ok(detail)
}

fn criterion_9(sw: &Sweeps) -> Outcome {
    let all: Vec<&RunOutcome> = [&sw.convergence, &sw.gamma, &sw.drones, &sw.range]
        .iter()
        .flat_map(|r| r.runs.iter())
        .collect();
    for o in &all {
        ensure(o.reeval_violations.is_empty(), || format!("seed {}: {}", o.seed, o.reeval_violations.join("; ")))?;
        ensure((o.reeval_cost - o.cost).abs() <= COST_TOL, || {
            format!("seed {}: cost {} re-evaluated {}", o.seed, o.cost, o.reeval_cost)
        })?;
    }
    Ok(format!("{} runs re-evaluated clean", all.len()))
}

// ---------- criterion 10 ----------

fn criterion_10() -> Outcome {
    let spec = GenSpec { seed: 4242, ..base15() };
    let a = instance_to_string(&generate(&spec).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let b = instance_to_string(&generate(&spec).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    ensure(a == b, || "instance files differ".into())?;
    let inst = generate(&spec).map_err(|e| e.to_string())?;
    let r1 = run(&inst, &RunConfig::default()).map_err(|e| e.to_string())?;
    let r2 = run(&inst, &RunConfig::default()).map_err(|e| e.to_string())?;
    ensure(r1.cost().to_bits() == r2.cost().to_bits(), || format!("costs {} vs {}", r1.cost(), r2.cost()))?;
    ensure(r1.lower_bound.to_bits() == r2.lower_bound.to_bits(), || "lower bounds differ".into())?;
    ensure(r1.upper_bound.to_bits() == r2.upper_bound.to_bits(), || "upper bounds differ".into())?;
    Ok(format!("{} identical instance bytes, objective {} twice", a.len(), r1.cost()))
}

fn report(n: usize, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let res = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
    });
    let secs = start.elapsed().as_secs_f64();
    match res {
        Ok(msg) => {
            println!("criterion {n:>2} {name}: PASS ({msg}) [{secs:.1}s]");
            true
        }
        Err(msg) => {
            println!("criterion {n:>2} {name}: FAIL ({msg}) [{secs:.1}s]");
            false
        }
    }
}

fn main() -> ExitCode {
    let mut ok = true;
    ok &= report(1, "scenario MIP exactness", criterion_1);
    ok &= report(2, "LP/MIP engine", criterion_2);
    ok &= report(3, "pricing exactness", criterion_3);

    let start = Instant::now();
    let sweeps = (|| -> Result<Sweeps, String> {
        Ok(Sweeps {
            convergence: sweep(10, |_| {})?,
            gamma: sweep(5, |s| s.gamma_pct = vec![30.0, 70.0])?,
            drones: sweep(5, |s| s.drones_per_truck = vec![4, 6, 8])?,
            range: sweep(5, |s| s.range_miles = vec![25.0, 35.0, 45.0])?,
        })
    })();
    println!("solver sweeps for criteria 4 to 9 took {:.1}s", start.elapsed().as_secs_f64());
    match &sweeps {
        Ok(sw) => {
            ok &= report(4, "CG monotonicity", || criterion_4(sw));
            ok &= report(5, "convergence", || criterion_5(sw));
            ok &= report(6, "Γ trend", || criterion_6(sw));
            ok &= report(7, "drone-count trend", || non_increasing(&sw.drones, "m^d", |r| r.drones_per_truck as f64));
            ok &= report(8, "range trend", || non_increasing(&sw.range, "W^d miles", |r| r.range_miles));
            ok &= report(9, "solution validity", || criterion_9(sw));
        }
        Err(e) => {
            for (n, name) in [(4, "CG monotonicity"), (5, "convergence"), (6, "Γ trend"), (7, "drone-count trend"), (8, "range trend"), (9, "solution validity")] {
                ok &= report(n, name, || Err(format!("sweep failed: {e}")));
            }
        }
    }
    ok &= report(10, "determinism", criterion_10);
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
