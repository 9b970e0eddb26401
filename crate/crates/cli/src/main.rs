use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use gridsync_core::error::GridError;
use gridsync_core::generator::{derive_line_susceptances, equilibrium_residual, max_residual, FitEquations};
use gridsync_core::report::{report_for, trace_table, verify, write_csv, write_json, RunReport};
use gridsync_core::scenario::{builtin_four_area, parse_scenario};
use gridsync_core::sim::{compare_traces, run, run_closed_loop, run_decoupled, Mode, Scenario};
use gridsync_core::sweep::{run_consensus_case, SweepConfig, SweepOutcome};
use gridsync_core::DEFAULT_TOL_COEFF;

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(name = "gridsync", version, about = "Edge-controlled power grid simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a scenario and write its trace and report.
    Simulate(RunArgs),
    /// Run all Lyapunov, dissipation and steady-state checks.
    Verify(RunArgs),
    /// Fit line susceptances to the equilibrium data.
    DeriveSusceptances(ScenarioArgs),
    /// Max state difference between the closed loop and the decoupled loops.
    CompareDecoupling(RunArgs),
    /// Consensus runs on random connected graphs.
    ConsensusSweep(SweepArgs),
}

#[derive(Args, Clone)]
struct ScenarioArgs {
    /// Scenario file; the built-in four-area network when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Simulate with the configured (P^G, E^ex) as given.
    #[arg(long)]
    raw_equilibrium: bool,
}

#[derive(Args, Clone)]
struct RunArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    mode: Option<String>,
    #[arg(long, default_value_t = 1)]
    decimate: usize,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args)]
struct SweepArgs {
    /// First seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of consecutive seeds.
    #[arg(long, default_value_t = 50)]
    count: u64,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

/// Failure with its exit status.
struct Failure {
    code: u8,
    message: String,
}

impl From<GridError> for Failure {
    fn from(e: GridError) -> Self {
        let code = if e.is_numerical() {
            EXIT_NUMERICAL
        } else {
            match e {
                GridError::Config(_)
                | GridError::InvalidNetwork(_)
                | GridError::Disconnected { .. }
                | GridError::DimensionMismatch { .. }
                | GridError::InvalidParameter(_)
                | GridError::InconsistentSusceptances { .. }
                | GridError::NotAnEquilibrium { .. }
                | GridError::StepBudget { .. } => EXIT_USAGE,
                _ => EXIT_CHECK_FAILED,
            }
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure { code: EXIT_USAGE, message: e.to_string() }
    }
}

type CliResult = Result<u8, Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate(&a),
        Command::Verify(a) => verify_cmd(&a),
        Command::DeriveSusceptances(a) => derive(&a),
        Command::CompareDecoupling(a) => compare(&a),
        Command::ConsensusSweep(a) => sweep(&a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn load(args: &ScenarioArgs) -> Result<Scenario, Failure> {
    let mut scenario = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Failure {
                code: EXIT_USAGE,
                message: format!("{}: {e}", path.display()),
            })?;
            parse_scenario(&text)?
        }
        None => builtin_four_area(),
    };
    if args.raw_equilibrium {
        scenario.raw_equilibrium = true;
    }
    Ok(scenario)
}

fn load_run(args: &RunArgs) -> Result<Scenario, Failure> {
    let mut scenario = load(&args.scenario)?;
    if let Some(dt) = args.dt {
        scenario.sim.dt = dt;
    }
    if let Some(h) = args.horizon {
        scenario.sim.horizon = h;
    }
    if let Some(m) = &args.mode {
        scenario.sim.mode = m.parse::<Mode>()?;
    }
    if args.decimate == 0 {
        return Err(Failure { code: EXIT_USAGE, message: "--decimate must be at least 1".into() });
    }
    scenario.validate()?;
    Ok(scenario)
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| Failure {
            code: EXIT_USAGE,
            message: format!("{}: {e}", p.display()),
        })?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// Report goes next to the trace file, or to stderr when the trace goes to stdout.
fn emit_report(report: &RunReport, trace_path: Option<&Path>) -> Result<(), Failure> {
    match trace_path {
        Some(p) => {
            let mut name = p.as_os_str().to_owned();
            name.push(".report.json");
            let file = File::create(PathBuf::from(name))?;
            write_json(report, BufWriter::new(file))?;
            eprint!("{}", report.to_text());
        }
        None => eprint!("{}", report.to_text()),
    }
    Ok(())
}

fn simulate(args: &RunArgs) -> CliResult {
    let scenario = load_run(args)?;
    let start = std::time::Instant::now();
    let trace = run(&scenario)?;
    let elapsed = start.elapsed().as_secs_f64();
    let report = RunReport {
        simulation_seconds: elapsed,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        ..report_for(&scenario, &trace, DEFAULT_TOL_COEFF)?
    };
    let table = trace_table(&trace, args.decimate)?;
    let mut out = output(args.out.as_deref())?;
    match args.format {
        Format::Csv => write_csv(&table, &mut out)?,
        Format::Json => {
            #[derive(Serialize)]
            struct Doc<'a> {
                trace: &'a gridsync_core::report::TraceTable,
                report: &'a RunReport,
            }
            write_json(&Doc { trace: &table, report: &report }, &mut out)?;
        }
    }
    out.flush()?;
    emit_report(&report, args.out.as_deref())?;
    Ok(0)
}

fn verify_cmd(args: &RunArgs) -> CliResult {
    let scenario = load_run(args)?;
    let (_, report) = verify(&scenario, DEFAULT_TOL_COEFF)?;
    let mut out = output(args.out.as_deref())?;
    match args.format {
        Format::Csv => out.write_all(report.to_text().as_bytes())?,
        Format::Json => write_json(&report, &mut out)?,
    }
    out.flush()?;
    let failures = report.failures();
    if failures.is_empty() {
        eprintln!("all checks passed");
        Ok(0)
    } else {
        eprintln!("failed checks: {}", failures.join(", "));
        Ok(EXIT_CHECK_FAILED)
    }
}

fn derive(args: &ScenarioArgs) -> CliResult {
    let scenario = load(args)?;
    let grid = &scenario.grid;
    let fit = derive_line_susceptances(
        &grid.network,
        &grid.generators,
        &grid.equilibrium,
        FitEquations::RealAndReactive,
        f64::INFINITY,
    )?;
    for ((from, to), b) in grid.network.edges_one_based().iter().zip(&fit.lines.susceptance) {
        println!("B_{from}{to} = {b:.6}");
    }
    println!("max residual = {:.6e}", fit.max_residual);
    println!("rank = {}", fit.rank);
    Ok(0)
}

fn compare(args: &RunArgs) -> CliResult {
    let scenario = load_run(args)?;
    let closed = run_closed_loop(&scenario)?;
    let decoupled = run_decoupled(&scenario)?;
    let diff = compare_traces(&closed, &decoupled)?;
    let residual = max_residual(&equilibrium_residual(&closed.model.grid)?);
    println!("max discrepancy = {diff:.6e}");
    println!("equilibrium residual of simulated inputs = {residual:.6e}");
    Ok(0)
}

fn sweep(args: &SweepArgs) -> CliResult {
    let mut config = SweepConfig::default();
    if let Some(dt) = args.dt {
        config.dt = dt;
    }
    if let Some(h) = args.horizon {
        config.horizon = h;
    }
    let seeds: Vec<u64> = (args.seed..args.seed + args.count).collect();
    let results: Vec<Result<SweepOutcome, GridError>> =
        seeds.par_iter().map(|s| run_consensus_case(*s, &config)).collect();
    let mut outcomes = Vec::with_capacity(results.len());
    let mut numerical = false;
    for (seed, r) in seeds.iter().zip(results) {
        match r {
            Ok(o) => outcomes.push(o),
            Err(e) if e.is_numerical() => {
                eprintln!("seed {seed}: {e}");
                numerical = true;
            }
            Err(e) => return Err(e.into()),
        }
    }
    let mut out = output(args.out.as_deref())?;
    match args.format {
        Format::Csv => {
            writeln!(out, "seed,nodes,edges,consensus_delta,max_volt_dev,passed")?;
            for o in &outcomes {
                writeln!(
                    out,
                    "{},{},{},{:.11e},{:.11e},{}",
                    o.seed, o.nodes, o.edges, o.consensus_delta, o.max_volt_dev, o.passed
                )?;
            }
        }
        Format::Json => write_json(&outcomes, &mut out)?,
    }
    out.flush()?;
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    eprintln!("{} of {} runs reached consensus", outcomes.len() - failed, seeds.len());
    Ok(if numerical {
        EXIT_NUMERICAL
    } else if failed > 0 {
        EXIT_CHECK_FAILED
    } else {
        0
    })
}
