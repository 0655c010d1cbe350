use std::path::PathBuf;
use std::process::ExitCode;

use chernoff_lab::experiments::{
    default_workers, emit_csv_with, load_config, run_bounds_suite, run_scenario_with_workers, BoundStats, CsvOptions,
    Scenario,
};
use chernoff_lab::Error;
use clap::{Parser, Subcommand};

const WORKERS_ENV: &str = "CHERNOFF_LAB_WORKERS";

const EXIT_INVALID: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_VIOLATION: u8 = 3;

#[derive(Parser)]
#[command(
    name = "chernoff-lab",
    version,
    about = "Seeded convergence sweeps for ergodic-projected product formulas"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sweep described by a JSON config and write its CSV table.
    Run {
        config: PathBuf,
        /// Directory for the CSV file (default: current directory).
        #[arg(long)]
        output: Option<PathBuf>,
        /// Worker threads; overrides CHERNOFF_LAB_WORKERS.
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        verbose: bool,
        /// Leave wall_time_s empty so repeated runs give identical files.
        #[arg(long)]
        no_timing: bool,
    },
    /// List the built-in scenarios.
    Scenarios,
    /// Run the bound suites directly.
    CheckBounds {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// Step counts for the ergodic product bound.
        #[arg(long, value_delimiter = ',', default_values_t = [4, 16, 64, 256])]
        n_values: Vec<usize>,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        verbose: bool,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Parse(_) | Error::Validation(_) => EXIT_INVALID,
            _ => EXIT_RUNTIME,
        };
        Failure::new(code, e.to_string())
    }
}

fn init_logging(verbose: bool) {
    let level = if verbose {
        log::LevelFilter::Debug
    } else {
        log::LevelFilter::Warn
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .try_init();
}

fn resolve_workers(flag: Option<usize>) -> Result<usize, Failure> {
    let workers = match flag {
        Some(k) => k,
        None => match std::env::var(WORKERS_ENV) {
            Ok(raw) => raw
                .trim()
                .parse()
                .map_err(|_| Failure::new(EXIT_INVALID, format!("{WORKERS_ENV}={raw:?} is not a worker count")))?,
            Err(_) => default_workers(),
        },
    };
    if workers == 0 {
        return Err(Failure::new(EXIT_INVALID, "worker count must be at least 1"));
    }
    Ok(workers)
}

fn run(config: PathBuf, output: Option<PathBuf>, workers: Option<usize>, no_timing: bool) -> Result<(), Failure> {
    let workers = resolve_workers(workers)?;
    let config = load_config(&config).map_err(|e| match e {
        Error::Io(m) => Failure::new(EXIT_INVALID, format!("cannot read config: {m}")),
        other => other.into(),
    })?;
    log::info!("running {} on {workers} workers", config.scenario);
    let report = run_scenario_with_workers(&config, workers)?;
    let path = output.unwrap_or_default().join(config.output_file());
    emit_csv_with(&report, &path, CsvOptions { timing: !no_timing })?;
    print!("{report}");
    println!("wrote {}", path.display());
    if report.violations > 0 {
        return Err(Failure::new(
            EXIT_VIOLATION,
            format!("{} bound violations", report.violations),
        ));
    }
    if !report.rows.is_empty() && report.failed_rows() == report.rows.len() {
        return Err(Failure::new(EXIT_RUNTIME, "every row failed"));
    }
    Ok(())
}

fn list_scenarios() {
    let width = Scenario::ALL.iter().map(|s| s.name().len()).max().unwrap_or(0);
    for s in Scenario::ALL {
        println!("{:width$}  {}", s.name(), s.description());
    }
}

fn print_stats(name: &str, s: &BoundStats) {
    println!(
        "{name:<24} checks {:>5}  violations {:>3}  errors {:>3}  worst lhs/rhs {:.4e}",
        s.checks, s.violations, s.errors, s.worst_ratio
    );
}

fn check_bounds(seed: u64, trials: usize, n_values: Vec<usize>, t: f64, workers: Option<usize>) -> Result<(), Failure> {
    let workers = resolve_workers(workers)?;
    if trials == 0 || n_values.is_empty() || n_values.contains(&0) || !(t > 0.0 && t.is_finite()) {
        return Err(Failure::new(
            EXIT_INVALID,
            "need trials ≥ 1, positive n values and t > 0",
        ));
    }
    let summary = run_bounds_suite(
        seed,
        trials,
        &n_values,
        t,
        chernoff_lab::superop::DEFAULT_TRUNCATION_TOL,
        workers,
    )?;
    print_stats("√n Chernoff bound", &summary.chernoff);
    print_stats("ergodic product bound", &summary.ergodic.stats);
    print_stats("telescoping bound", &summary.telescoping);
    for row in &summary.ergodic.rows {
        println!(
            "  n = {:>6}  worst lhs {:.4e}  bound {:.4e}",
            row.n, row.lhs, row.bound_value
        );
    }
    println!(
        "  largest n·lhs growth across the sweep: {:.4}",
        summary.ergodic.scaled_growth
    );
    if summary.violations() > 0 {
        return Err(Failure::new(
            EXIT_VIOLATION,
            format!("{} bound violations", summary.violations()),
        ));
    }
    if summary.errors() > 0 {
        return Err(Failure::new(
            EXIT_RUNTIME,
            format!("{} checks could not be evaluated", summary.errors()),
        ));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INVALID } else { 0 });
        }
    };
    let outcome = match cli.command {
        Command::Run {
            config,
            output,
            workers,
            verbose,
            no_timing,
        } => {
            init_logging(verbose);
            run(config, output, workers, no_timing)
        }
        Command::Scenarios => {
            list_scenarios();
            Ok(())
        }
        Command::CheckBounds {
            seed,
            trials,
            n_values,
            t,
            workers,
            verbose,
        } => {
            init_logging(verbose);
            check_bounds(seed, trials, n_values, t, workers)
        }
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
