//! The `mmv` command line: closed-form values, frontiers, simulations,
//! saddle-point verification and the two reference experiments.
//!
//! Every command writes CSV files into `--out` and finishes with a
//! `manifest.json` listing them. Exit codes: 0 success, 1 invalid input,
//! 2 verification failure, 3 internal cross-check failure.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub mod commands;
pub mod output;

pub use output::RunManifest;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Model(#[from] mmv_core::Error),
    #[error("{0}")]
    Usage(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("cross-check failed: {0}")]
    CrossCheck(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Model(_) | CliError::Usage(_) | CliError::Io(_) => 1,
            CliError::Verification(_) => 2,
            CliError::CrossCheck(_) => 3,
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.into())
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "mmv", version, about = "Monotone mean-variance insurer: values, frontiers, simulation and verification")]
pub struct Cli {
    /// Directory for CSV outputs and the manifest.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,

    /// Cap on simulation worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Value, riskless wealth and terminal mean and variance.
    Value(ValueArgs),
    /// Efficient frontier over a grid of risk aversions or target means.
    Frontier(FrontierArgs),
    /// Monte Carlo terminal statistics and trajectory dumps.
    Simulate(SimulateArgs),
    /// Check the saddle-point conditions on a grid.
    Verify(VerifyArgs),
    /// Evaluate the monotone and classical mean-variance preferences of a
    /// finite-support law.
    #[command(name = "mmv-eval")]
    MmvEval(MmvEvalArgs),
    /// Constant 10 against 10 + U(0, 12) with risk aversion 2.
    #[command(name = "example-6-1")]
    Example61(Example61Args),
    /// Reference insurer instance: closed forms, verification and simulation.
    #[command(name = "experiment-6-2")]
    Experiment62(Experiment62Args),
}

#[derive(Debug, Args)]
pub struct ValueArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Report the infinitely risk-averse limit.
    #[arg(long)]
    pub theta_infinite: bool,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false, id = "grid")]
pub struct FrontierGrid {
    /// Risk aversions, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub theta: Option<Vec<f64>>,
    /// Target terminal means, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub xi: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct FrontierArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[command(flatten)]
    pub grid: FrontierGrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyChoice {
    Equilibrium,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeChoice {
    Jumps,
    Diffusion,
}

#[derive(Debug, Clone, Args)]
pub struct McArgs {
    #[arg(long, default_value_t = 100_000)]
    pub paths: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Time step; defaults to 1e-3 T / 3.
    #[arg(long)]
    pub dt: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, value_enum, default_value_t = StrategyChoice::Equilibrium)]
    pub strategy: StrategyChoice,
    #[command(flatten)]
    pub mc: McArgs,
    #[arg(long, value_enum, default_value_t = ModeChoice::Jumps)]
    pub mode: ModeChoice,
    /// Number of trajectories to dump.
    #[arg(long, default_value_t = 0)]
    pub dump: usize,
    /// Initial stock price of the plotted stock proxy.
    #[arg(long, default_value_t = 1.0)]
    pub s0: f64,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 1.0, 2.0, 2.9])]
    pub t: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.5, 1.0, 2.0])]
    pub x: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.5, 1.0, 2.0])]
    pub y: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true,
          default_values_t = [-0.5, -0.1, -0.01, 0.01, 0.1, 0.5])]
    pub deltas: Vec<f64>,
    #[arg(long, default_value_t = mmv_core::verifier::SCAN_TOLERANCE)]
    pub tol: f64,
    /// Multiply the candidate retention by this factor before checking.
    #[arg(long, default_value_t = 1.0)]
    pub retention_scale: f64,
    /// Paths for the paired Monte Carlo check; 0 skips it.
    #[arg(long, default_value_t = 0)]
    pub mc_paths: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub dt: Option<f64>,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false, id = "law")]
pub struct LawSource {
    /// CSV with header `value,prob`.
    #[arg(long)]
    pub atoms: Option<PathBuf>,
    /// Builtin `uniform(a,b,n)`: n midpoint atoms of U(a, b).
    #[arg(long)]
    pub builtin: Option<String>,
}

#[derive(Debug, Args)]
pub struct MmvEvalArgs {
    #[command(flatten)]
    pub law: LawSource,
    #[arg(long, allow_negative_numbers = true, default_value_t = 0.0)]
    pub shift: f64,
    #[arg(long)]
    pub theta: f64,
}

#[derive(Debug, Args)]
pub struct Example61Args {
    /// Atoms in the discretisation of U(0, 12).
    #[arg(long, default_value_t = 1_000_000)]
    pub atoms: usize,
}

#[derive(Debug, Args)]
pub struct Experiment62Args {
    /// Defaults to the built-in reference instance.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub mc: McArgs,
    #[arg(long, default_value_t = 2)]
    pub dump: usize,
    #[arg(long, default_value_t = 1.0)]
    pub s0: f64,
}

/// Runs a parsed command, printing a summary to `stdout`.
pub fn run(cli: &Cli, stdout: &mut dyn Write) -> CliResult<RunManifest> {
    use commands::*;
    match &cli.command {
        Command::Value(a) => cmd_value(cli, a, stdout),
        Command::Frontier(a) => cmd_frontier(cli, a, stdout),
        Command::Simulate(a) => cmd_simulate(cli, a, stdout),
        Command::Verify(a) => cmd_verify(cli, a, stdout),
        Command::MmvEval(a) => cmd_mmv_eval(cli, a, stdout),
        Command::Example61(a) => cmd_example_6_1(cli, a, stdout),
        Command::Experiment62(a) => cmd_experiment_6_2(cli, a, stdout),
    }
}
