//! `r2evrp` command line: generate, solve, experiment, reevaluate.
//!
//! Every flag can also be set through an `R2E_`-prefixed environment
//! variable, e.g. `R2E_SEED=7`.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use r2evrp::experiment::{run_experiment, write_rows_csv, ExperimentSpec};
use r2evrp::instgen::{generate, Focus, GenSpec};
use r2evrp::io;
use r2evrp::reeval::reevaluate_report;
use r2evrp::{run, RunConfig, RunStatus};

/// Exit code when the run stopped on an iteration or time limit.
const EXIT_LIMIT: u8 = 3;
/// Exit code when the scenario loop stalled with the gap open.
const EXIT_STALLED: u8 = 4;
/// Exit code when re-evaluation finds a violation.
const EXIT_INVALID: u8 = 5;

#[derive(Parser)]
#[command(name = "r2evrp", version, about = "Robust truck-and-drone relief routing")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic instance.
    Generate(GenerateArgs),
    /// Solve an instance and write report, routes and geometry files.
    Solve(SolveArgs),
    /// Run a factorial sweep and write a metrics table.
    Experiment(ExperimentArgs),
    /// Re-check a solve report against its instance.
    Reevaluate(ReevaluateArgs),
}

#[derive(Args, Clone)]
struct FleetArgs {
    #[arg(long, env = "R2E_SATELLITES", default_value_t = 8, value_parser = clap::value_parser!(u32).range(1..))]
    satellites: u32,
    #[arg(long, env = "R2E_GAMMA_REGION_PCT", default_value_t = 50.0)]
    gamma_region_pct: f64,
    #[arg(long, env = "R2E_TRUCKS", default_value_t = 4, value_parser = clap::value_parser!(u32).range(1..))]
    trucks: u32,
    /// Drone load limit, units.
    #[arg(long, env = "R2E_LOAD", default_value_t = 25.0)]
    load: f64,
    /// Termination tolerance, dollars.
    #[arg(long, env = "R2E_EPSILON", default_value_t = 1.0)]
    epsilon: f64,
    /// Optional `id,latitude,longitude,population` table to sample from.
    #[arg(long, env = "R2E_POPULATION_CSV")]
    population_csv: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, env = "R2E_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, env = "R2E_COMMUNITIES", default_value_t = 60, value_parser = clap::value_parser!(u32).range(1..))]
    communities: u32,
    #[arg(long, env = "R2E_LEVEL", default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=3))]
    level: u8,
    #[arg(long, env = "R2E_FOCUS", default_value = "uniform")]
    focus: Focus,
    #[arg(long, env = "R2E_GAMMA_PCT", default_value_t = 50.0)]
    gamma_pct: f64,
    #[arg(long, env = "R2E_DRONES_PER_TRUCK", default_value_t = 4, value_parser = clap::value_parser!(u32).range(1..))]
    drones_per_truck: u32,
    #[arg(long, env = "R2E_RANGE_MILES", default_value_t = 35.0)]
    range_miles: f64,
    #[command(flatten)]
    fleet: FleetArgs,
    /// Instance file to write; stdout when absent.
    #[arg(long, short, env = "R2E_OUTPUT")]
    output: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct RunArgs {
    #[arg(long, env = "R2E_MAX_OUTER", default_value_t = 20)]
    max_outer: usize,
    #[arg(long, env = "R2E_MAX_CG_ROUNDS", default_value_t = 50)]
    max_cg_rounds: usize,
    /// Wall-clock limit per solve, seconds.
    #[arg(long, env = "R2E_TIME_LIMIT")]
    time_limit: Option<f64>,
}

impl RunArgs {
    fn config(&self) -> RunConfig {
        RunConfig {
            max_outer: self.max_outer,
            max_cg_rounds: self.max_cg_rounds,
            time_limit_secs: self.time_limit,
            ..RunConfig::default()
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long, env = "R2E_INSTANCE")]
    instance: PathBuf,
    /// Overrides the instance's termination tolerance, dollars.
    #[arg(long, env = "R2E_EPSILON")]
    epsilon: Option<f64>,
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, env = "R2E_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    /// First replication's seed; replication r uses seed + r.
    #[arg(long, env = "R2E_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, env = "R2E_REPLICATIONS", default_value_t = 3)]
    replications: usize,
    #[arg(long, env = "R2E_COMMUNITIES", value_delimiter = ',', default_value = "60")]
    communities: Vec<usize>,
    #[arg(long, env = "R2E_GAMMA_PCT", value_delimiter = ',', default_value = "50")]
    gamma_pct: Vec<f64>,
    #[arg(long, env = "R2E_DRONES_PER_TRUCK", value_delimiter = ',', default_value = "4")]
    drones_per_truck: Vec<usize>,
    #[arg(long, env = "R2E_RANGE_MILES", value_delimiter = ',', default_value = "35")]
    range_miles: Vec<f64>,
    #[arg(long, env = "R2E_LEVEL", value_delimiter = ',', default_value = "1")]
    level: Vec<u8>,
    #[arg(long, env = "R2E_FOCUS", value_delimiter = ',', default_value = "uniform")]
    focus: Vec<Focus>,
    #[command(flatten)]
    fleet: FleetArgs,
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, env = "R2E_WORKERS", default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    workers: u32,
    /// Writes metrics.csv, experiment.json and per-run files here.
    #[arg(long, env = "R2E_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ReevaluateArgs {
    #[arg(long, env = "R2E_INSTANCE")]
    instance: PathBuf,
    #[arg(long, env = "R2E_REPORT")]
    report: PathBuf,
}

fn base_spec(fleet: &FleetArgs) -> r2evrp::Result<GenSpec> {
    let population_table = match &fleet.population_csv {
        Some(p) => Some(io::read_population_csv(p)?),
        None => None,
    };
    Ok(GenSpec {
        satellites: fleet.satellites as usize,
        gamma_region_pct: fleet.gamma_region_pct,
        num_trucks: fleet.trucks as usize,
        max_load: fleet.load,
        epsilon: fleet.epsilon,
        population_table,
        ..GenSpec::default()
    })
}

fn cmd_generate(a: &GenerateArgs) -> r2evrp::Result<ExitCode> {
    let spec = GenSpec {
        seed: a.seed,
        communities: a.communities as usize,
        level: a.level,
        focus: a.focus,
        gamma_pct: a.gamma_pct,
        drones_per_truck: a.drones_per_truck as usize,
        range_miles: a.range_miles,
        ..base_spec(&a.fleet)?
    };
    let inst = generate(&spec)?;
    match &a.output {
        Some(p) => io::write_instance(p, &inst)?,
        None => println!("{}", io::instance_to_string(&inst)?),
    }
    Ok(ExitCode::SUCCESS)
}

fn write_json(path: &Path, text: String) -> r2evrp::Result<()> {
    Ok(fs::write(path, text + "\n")?)
}

fn cmd_solve(a: &SolveArgs) -> r2evrp::Result<ExitCode> {
    let inst = io::read_instance(&a.instance)?;
    let report = run(&inst, &RunConfig { epsilon: a.epsilon, ..a.run.config() })?;
    fs::create_dir_all(&a.out_dir)?;
    io::write_report(&a.out_dir.join("report.json"), &report)?;
    let routes = io::routes_file(&inst, &report.solution);
    write_json(&a.out_dir.join("routes.json"), io::routes_to_string(&routes)?)?;
    let geo = io::geometry(&inst, &report.solution);
    write_json(&a.out_dir.join("routes.geojson"), serde_json::to_string_pretty(&geo).expect("json value"))?;
    println!(
        "status {:?}  cost {:.4}  LB {:.4}  UB {:.4}  scenarios {}  iterations {}  {:.2}s",
        report.status,
        report.cost(),
        report.lower_bound,
        report.upper_bound,
        report.scenarios.len(),
        report.iterations.len(),
        report.wall_seconds
    );
    Ok(match report.status {
        RunStatus::Converged => ExitCode::SUCCESS,
        RunStatus::IterationLimit | RunStatus::TimeLimit => ExitCode::from(EXIT_LIMIT),
        RunStatus::Stalled => ExitCode::from(EXIT_STALLED),
    })
}

fn cmd_experiment(a: &ExperimentArgs) -> r2evrp::Result<ExitCode> {
    let base = GenSpec { seed: a.seed, ..base_spec(&a.fleet)? };
    let spec = ExperimentSpec {
        base,
        communities: a.communities.clone(),
        gamma_pct: a.gamma_pct.clone(),
        drones_per_truck: a.drones_per_truck.clone(),
        range_miles: a.range_miles.clone(),
        levels: a.level.clone(),
        focuses: a.focus.clone(),
        replications: a.replications,
        run: a.run.config(),
        workers: a.workers as usize,
    };
    fs::create_dir_all(&a.out_dir)?;
    let res = run_experiment(&spec, Some(&a.out_dir))?;
    write_rows_csv(&res.rows, fs::File::create(a.out_dir.join("metrics.csv"))?)?;
    write_json(&a.out_dir.join("experiment.json"), serde_json::to_string_pretty(&res).expect("serialisable"))?;
    write_rows_csv(&res.rows, std::io::stdout())?;
    for f in &res.failures {
        eprintln!("cell {} seed {} failed: {}", f.cell, f.seed, f.error);
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_reevaluate(a: &ReevaluateArgs) -> r2evrp::Result<ExitCode> {
    let inst = io::read_instance(&a.instance)?;
    let report = io::read_report(&a.report)?;
    let ev = reevaluate_report(&inst, &report)?;
    println!(
        "cost {:.6}  stated {:.6}  unfulfilled {:.4}%  avg delay {:.4} min",
        ev.cost,
        report.cost(),
        ev.unfulfilled_pct,
        ev.avg_delay
    );
    for v in &ev.violations {
        println!("violation: {v}");
    }
    Ok(if ev.is_feasible() { ExitCode::SUCCESS } else { ExitCode::from(EXIT_INVALID) })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("R2E_LOG", "warn")).init();
    let cli = Cli::parse();
    let res = match &cli.cmd {
        Command::Generate(a) => cmd_generate(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::Reevaluate(a) => cmd_reevaluate(a),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
