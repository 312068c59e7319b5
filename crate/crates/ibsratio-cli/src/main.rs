//! Command-line front end: run estimations on simulated or recorded data,
//! evaluate closed-form bounds, dump exact consumption distributions, and
//! regenerate the figure data as CSV.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 replay data
//! exhausted, 3 numeric failure.

mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use ibsratio::TargetParameter;

use run::{
    cmd_bounds, cmd_estimate, cmd_pmf, cmd_reproduce, cmd_simulate, BoundsOpts, CmdError,
    EstimateOpts, GridOpts, PmfOpts, ReproduceOpts, SimulateOpts,
};

/// Environment variable overriding the worker count used by simulation
/// commands. Results are byte-identical for any worker count.
const WORKERS_ENV: &str = "IBSRATIO_WORKERS";

#[derive(Parser)]
#[command(
    name = "ibsratio",
    version,
    about = "Sequential risk-ratio and odds-ratio estimation with guaranteed accuracy"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one estimation on simulated or recorded paired data
    Estimate(EstimateArgs),
    /// Monte Carlo replication grid; one CSV row per cell
    Simulate(SimulateArgs),
    /// Closed-form accuracy and efficiency bounds over a grid
    Bounds(BoundsArgs),
    /// Exact joint consumption pmf window or expected-pairs bracket
    Pmf(PmfArgs),
    /// Regenerate figure data files into a directory
    Reproduce(ReproduceArgs),
}

fn parse_param(s: &str) -> Result<TargetParameter, String> {
    s.parse().map_err(|e: ibsratio::Error| e.to_string())
}

fn parse_range(s: &str) -> Result<(u64, u64), String> {
    let (lo, hi) = s
        .split_once(':')
        .ok_or_else(|| format!("expected LO:HI, got {s:?}"))?;
    let lo = lo.parse::<u64>().map_err(|e| format!("bad range start {lo:?}: {e}"))?;
    let hi = hi.parse::<u64>().map_err(|e| format!("bad range end {hi:?}: {e}"))?;
    if lo > hi {
        return Err(format!("range start {lo} exceeds end {hi}"));
    }
    Ok((lo, hi))
}

#[derive(Args)]
struct EstimateArgs {
    /// Parameter to estimate: rr, lrr, or, lor
    #[arg(long, value_parser = parse_param)]
    param: TargetParameter,
    /// Target accuracy: relative MSE for rr/or, MSE for lrr/lor
    #[arg(long)]
    mse: f64,
    /// Event probability of population 1 (simulated mode)
    #[arg(long, requires = "p2", conflicts_with = "replay")]
    p1: Option<f64>,
    /// Event probability of population 2 (simulated mode)
    #[arg(long, requires = "p1", conflicts_with = "replay")]
    p2: Option<f64>,
    /// Replay recorded pairs from a file ("1 0" per line, # comments)
    #[arg(long, value_name = "FILE")]
    replay: Option<PathBuf>,
    /// Session seed (observation streams and fair coins)
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Emit a machine-readable CSV report
    #[arg(long)]
    csv: bool,
    /// Write the report to a file instead of stdout
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GridArgs {
    /// Parameter to estimate: rr, lrr, or, lor
    #[arg(long, value_parser = parse_param)]
    param: TargetParameter,
    /// Accuracy targets (comma-separated list)
    #[arg(long, value_delimiter = ',', required = true)]
    mu: Vec<f64>,
    /// Geometric means sqrt(p1 p2) of the grid (with --R)
    #[arg(long, value_delimiter = ',')]
    rho: Vec<f64>,
    /// Risk ratios p1/p2 of the grid (with --rho)
    #[arg(long = "R", value_delimiter = ',')]
    big_r: Vec<f64>,
    /// Explicit population-1 probabilities (paired with --p2)
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["rho", "big_r"])]
    p1: Vec<f64>,
    /// Explicit population-2 probabilities (paired with --p1)
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["rho", "big_r"])]
    p2: Vec<f64>,
}

impl GridArgs {
    fn into_opts(self) -> GridOpts {
        GridOpts {
            param: self.param,
            mu: self.mu,
            rho: self.rho,
            big_r: self.big_r,
            p1: self.p1,
            p2: self.p2,
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    grid: GridArgs,
    /// Replications per cell
    #[arg(long, default_value_t = 100_000)]
    reps: u64,
    /// Master seed; every (cell, replication) stream derives from it
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the CSV to a file instead of stdout
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BoundsArgs {
    #[command(flatten)]
    grid: GridArgs,
    /// Write the CSV to a file instead of stdout
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PmfArgs {
    /// Parameter family: rr or lrr (the pmf is trivial for or/lor)
    #[arg(long, value_parser = parse_param)]
    param: TargetParameter,
    /// Accuracy target from which the successes threshold is derived
    #[arg(long, conflicts_with = "successes")]
    mse: Option<f64>,
    /// Successes threshold r given directly
    #[arg(long)]
    successes: Option<u64>,
    /// Event probability of population 1
    #[arg(long)]
    p1: f64,
    /// Event probability of population 2
    #[arg(long)]
    p2: f64,
    /// Window of population-1 counts, inclusive (LO:HI)
    #[arg(long, value_parser = parse_range, requires = "n2")]
    n1: Option<(u64, u64)>,
    /// Window of population-2 counts, inclusive (LO:HI)
    #[arg(long, value_parser = parse_range, requires = "n1")]
    n2: Option<(u64, u64)>,
    /// Emit the bracketed expected number of pairs instead of a window
    #[arg(long, conflicts_with_all = ["n1", "n2"])]
    expected_pairs: bool,
    /// Absolute tolerance of the expected-pairs bracket
    #[arg(long, default_value_t = 1e-6)]
    tail_tol: f64,
    /// Write the CSV to a file instead of stdout
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReproduceArgs {
    /// Figure id: sef-rr, effic-rr, effic-lrr, effic-or, effic-lor,
    /// bounds-rr-lrr-example, bound-rr-lrr, bounds-or-lor-example,
    /// bound-or-lor
    figure: String,
    /// Replications per cell for simulation figures
    #[arg(long, default_value_t = 10_000)]
    reps: u64,
    /// Master seed for simulation figures
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory the CSV files are written into
    #[arg(long, value_name = "DIR", default_value = ".")]
    out: PathBuf,
}

fn configure_workers() -> Result<(), CmdError> {
    let Ok(raw) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let workers: usize = raw
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| {
            CmdError::usage(format!("{WORKERS_ENV} must be a positive integer, got {raw:?}"))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build_global()
        .map_err(|e| CmdError::usage(format!("cannot configure worker pool: {e}")))
}

fn dispatch(cli: Cli) -> Result<(), CmdError> {
    configure_workers()?;
    match cli.command {
        Command::Estimate(args) => cmd_estimate(&EstimateOpts {
            param: args.param,
            mse: args.mse,
            p1: args.p1,
            p2: args.p2,
            replay: args.replay,
            seed: args.seed,
            csv: args.csv,
            out: args.out,
        }),
        Command::Simulate(args) => cmd_simulate(&SimulateOpts {
            grid: args.grid.into_opts(),
            reps: args.reps,
            seed: args.seed,
            out: args.out,
        }),
        Command::Bounds(args) => cmd_bounds(&BoundsOpts {
            grid: args.grid.into_opts(),
            out: args.out,
        }),
        Command::Pmf(args) => cmd_pmf(&PmfOpts {
            param: args.param,
            mse: args.mse,
            successes: args.successes,
            p1: args.p1,
            p2: args.p2,
            n1: args.n1,
            n2: args.n2,
            expected_pairs: args.expected_pairs,
            tail_tol: args.tail_tol,
            out: args.out,
        }),
        Command::Reproduce(args) => cmd_reproduce(&ReproduceOpts {
            figure: args.figure,
            reps: args.reps,
            seed: args.seed,
            out: args.out,
        }),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // help and version are not errors
            if matches!(err.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{err}");
                return ExitCode::SUCCESS;
            }
            eprint!("{err}");
            return ExitCode::from(1);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message);
            ExitCode::from(err.code.clamp(0, 255) as u8)
        }
    }
}
