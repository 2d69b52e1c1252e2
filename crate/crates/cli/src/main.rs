//! `kbann`: sample, simulate, fit, analyze and optimize from the command line.

mod commands;
mod manifest;

use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "kbann", version, about = "Kriging-bootstrapped neural metamodels, Monte Carlo analysis and robust PSO")]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Log more (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, action = ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Latin Hypercube design over a parameter space, written as CSV.
    Sample(SampleArgs),
    /// Append figure-of-merit columns to a sample CSV.
    Simulate(SimulateArgs),
    /// Train one neural metamodel per figure of merit.
    Fit(FitArgs),
    /// Monte Carlo variation analysis around a nominal design.
    Mc(McArgs),
    /// Minimize mean + k·sigma of a figure of merit with a particle swarm.
    Optimize(OptimizeArgs),
    /// Time batch prediction of a bundle against ordinary kriging.
    Bench(BenchArgs),
}

#[derive(Args, Serialize)]
pub struct SampleArgs {
    /// Parameter space JSON (default: the built-in PLL space).
    #[arg(long)]
    pub space: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long)]
    pub samples: PathBuf,
    /// Oracle definition JSON (default: the built-in PLL oracle).
    #[arg(long, conflicts_with_all = ["space", "responses"])]
    pub oracle: Option<PathBuf>,
    /// Parameter space of `--samples` when responses come from `--responses`.
    #[arg(long, requires = "responses")]
    pub space: Option<PathBuf>,
    /// CSV of externally simulated responses, one row per sample row.
    #[arg(long, requires = "space")]
    pub responses: Option<PathBuf>,
    /// Figures of merit to keep (comma separated; default: all).
    #[arg(long, value_delimiter = ',')]
    pub foms: Option<Vec<String>>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Switch {
    On,
    Off,
}

#[derive(Args, Serialize)]
pub struct FitArgs {
    #[arg(long)]
    pub samples: PathBuf,
    /// Parameter space of the samples (default: the built-in PLL space).
    #[arg(long)]
    pub space: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Switch::On)]
    pub bootstrap: Switch,
    /// Hidden units (default: 2·d + 1).
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long, default_value_t = 0.2)]
    pub holdout: f64,
    #[arg(long, default_value_t = 200)]
    pub max_epochs: usize,
    /// Figures of merit to model (comma separated; default: every response column).
    #[arg(long, value_delimiter = ',')]
    pub foms: Option<Vec<String>>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_bundle: PathBuf,
}

#[derive(Args, Serialize)]
pub struct SourceArgs {
    /// Metamodel bundle directory.
    #[arg(long, conflicts_with = "oracle")]
    pub bundle: Option<PathBuf>,
    /// Oracle definition JSON. With neither flag the built-in PLL oracle is used.
    #[arg(long)]
    pub oracle: Option<PathBuf>,
}

#[derive(Args, Serialize)]
pub struct McArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// JSON array of native values, or an `optimize` result (uses `best_x`).
    /// Default: the space nominal.
    #[arg(long)]
    pub nominal: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    pub runs: usize,
    #[arg(long, default_value_t = 0.10)]
    pub sigma_frac: f64,
    #[arg(long, default_value_t = 20)]
    pub bins: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write every draw and its outputs as CSV.
    #[arg(long)]
    pub dump_raw: Option<PathBuf>,
}

#[derive(Args, Serialize)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long, default_value = "power")]
    pub target: String,
    #[arg(long, default_value_t = 3.0)]
    pub k_sigma: f64,
    #[arg(long, default_value = "locking_time")]
    pub constraint: String,
    #[arg(long, default_value_t = 5.51e-6)]
    pub bound: f64,
    /// `le` (mean ≤ bound) or `ge`.
    #[arg(long, default_value = "le")]
    pub sense: String,
    /// Drop the constraint.
    #[arg(long)]
    pub unconstrained: bool,
    #[arg(long, default_value_t = 100.0)]
    pub penalty: f64,
    #[arg(long, default_value_t = 30)]
    pub particles: usize,
    #[arg(long, default_value_t = 100)]
    pub iters: usize,
    /// Monte Carlo runs per particle evaluation.
    #[arg(long, default_value_t = 200)]
    pub mc_runs: usize,
    /// Monte Carlo runs for the final validation.
    #[arg(long, default_value_t = 1000)]
    pub final_runs: usize,
    #[arg(long, default_value_t = 0.10)]
    pub sigma_frac: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Serialize)]
pub struct BenchArgs {
    #[arg(long)]
    pub bundle: PathBuf,
    /// Number of query points.
    #[arg(long, default_value_t = 1000)]
    pub samples_n: usize,
    #[arg(long, default_value_t = 5)]
    pub repeats: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

const EXIT_USAGE: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_NUMERIC: u8 = 4;

/// Maps an error chain onto the documented exit codes.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<kbann::Error>() {
            return match e {
                e if e.is_io() => EXIT_IO,
                e if e.is_numerical() => EXIT_NUMERIC,
                kbann::Error::SimulatorFailure { .. } => EXIT_NUMERIC,
                _ => EXIT_USAGE,
            };
        }
        if cause.is::<std::io::Error>() {
            return EXIT_IO;
        }
        if cause.is::<commands::NumericalFailure>() {
            return EXIT_NUMERIC;
        }
    }
    EXIT_USAGE
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(EXIT_USAGE);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    }

    let result = match &cli.command {
        Command::Sample(a) => commands::sample(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Fit(a) => commands::fit(a),
        Command::Mc(a) => commands::mc(a),
        Command::Optimize(a) => commands::optimize(a),
        Command::Bench(a) => commands::bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
