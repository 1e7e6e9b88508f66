mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Anchor projected PCA for matrices with blockwise missing feature blocks.
#[derive(Debug, Parser)]
#[command(name = "appca", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic instance (X.csv, X_full.csv, theta_true.csv, layout.json).
    Simulate(SimulateArgs),
    /// Fit an embedding to a masked matrix.
    Fit(FitArgs),
    /// Alignment-adjusted error of an embedding against the truth.
    Eval(EvalArgs),
    /// Run a simulation grid and summarise it.
    Sweep(SweepArgs),
    /// Re-run a simulate or sweep from its manifest.
    Replay(ReplayArgs),
    /// Choose a rank with the information criterion.
    SelectRank(SelectRankArgs),
    /// Check a layout and optionally a chain plan.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// 2x3, 3x3 or custom (custom needs --config).
    #[arg(long, default_value = "2x3")]
    pub scenario: String,
    /// Subjects per group.
    #[arg(long)]
    pub n: Option<usize>,
    /// Features per block.
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 6)]
    pub r: usize,
    #[arg(long, default_value_t = 1.0)]
    pub noise_sd: f64,
    /// Full configuration as JSON; replaces the other settings.
    #[arg(long, conflicts_with_all = ["n", "p", "alpha", "beta"])]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Matrix CSV with NaN in unobserved blocks.
    #[arg(long)]
    pub x: PathBuf,
    #[arg(long)]
    pub layout: PathBuf,
    /// appca, appca-crossfit, chain, shared-pca or two-step.
    #[arg(long)]
    pub method: String,
    /// A positive integer or `auto`.
    #[arg(long)]
    pub rank: String,
    /// Largest rank considered by `--rank auto`.
    #[arg(long, default_value_t = 12)]
    pub r_max: usize,
    /// Chain plan JSON, or `auto` to discover one.
    #[arg(long, default_value = "auto")]
    pub plan: String,
    /// Reference group for two-step (one-based).
    #[arg(long, default_value_t = 1)]
    pub reference: usize,
    /// Seed of the cross-fit column split.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory for theta_hat.csv and manifest.json.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub theta_hat: PathBuf,
    #[arg(long)]
    pub theta_true: PathBuf,
    /// Report path; printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Grid JSON: {"configs": [...], "methods": [...], "reps", "base_seed", "workers"}.
    #[arg(long)]
    pub grid: PathBuf,
    /// Overrides the grid's worker count.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Record per-fit wall time in the JSONL (makes reruns differ).
    #[arg(long)]
    pub timing: bool,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Defaults to the manifest's directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides the worker count of a sweep.
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SelectRankArgs {
    #[arg(long)]
    pub x: PathBuf,
    /// With a layout, each group's observed submatrix is scored and the
    /// largest choice wins; without one, X must be complete.
    #[arg(long)]
    pub layout: Option<PathBuf>,
    #[arg(long, default_value_t = 12)]
    pub r_max: usize,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub layout: PathBuf,
    #[arg(long, conflicts_with = "discover")]
    pub plan: Option<PathBuf>,
    /// Search for a chain plan and print it.
    #[arg(long)]
    pub discover: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(&a),
        Command::Fit(a) => commands::fit(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Sweep(a) => commands::sweep(&a),
        Command::Replay(a) => commands::replay(&a),
        Command::SelectRank(a) => commands::select_rank(&a),
        Command::Validate(a) => commands::validate(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("appca: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
