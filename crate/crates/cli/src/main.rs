use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pnes_channel::states::{StateKind, DEFAULT_TAIL_TOL};

mod commands;
mod format;

#[derive(Debug, Parser)]
#[command(name = "pnes", version, about = "Photon-number correlated channels through lossy links")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ideal-state summary: parameter, moments, correlation, entropy and cutoff.
    StateInfo(StateInfoArgs),
    /// Lossy joint photon-number distribution as `p,q,probability`.
    JointDist(JointArgs),
    /// Optimized capacity at one channel point.
    Capacity(CapacityArgs),
    /// Capacity over a grid of mean photon numbers and symmetric losses.
    Sweep(SweepArgs),
    /// Capacity while moving loss between the arms at fixed overall transmissivity.
    AsymSweep(AsymArgs),
    /// Response of the coincidence probabilities P(n, n) to arm asymmetry.
    Curvature(CurvatureArgs),
    /// Closed forms against the thinning oracle and the moment formulas.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Tmc,
    Twb,
    Tth,
}

impl From<KindArg> for StateKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Tmc => StateKind::Tmc,
            KindArg::Twb => StateKind::Twb,
            KindArg::Tth => StateKind::Tth,
        }
    }
}

/// Whether `--mean` is the two-mode total or the mean of a single mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Convention {
    Total,
    PerMode,
}

impl Convention {
    pub fn to_total(self, mean: f64) -> f64 {
        match self {
            Convention::Total => mean,
            Convention::PerMode => 2.0 * mean,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Convention::Total => "total",
            Convention::PerMode => "per-mode",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GridArg {
    Default,
    Quick,
}

#[derive(Debug, Clone, Args)]
pub struct SourceArgs {
    #[arg(long, value_enum)]
    pub kind: KindArg,
    /// Mean photon number, read according to --convention.
    #[arg(long)]
    pub mean: f64,
    #[arg(long, value_enum, default_value = "total")]
    pub convention: Convention,
}

#[derive(Debug, Clone, Args)]
pub struct ChannelArgs {
    /// Transmissivity of arm 1.
    #[arg(long, default_value_t = 1.0, conflicts_with = "eta")]
    pub eta1: f64,
    /// Transmissivity of arm 2.
    #[arg(long, default_value_t = 1.0, conflicts_with = "eta")]
    pub eta2: f64,
    /// Same transmissivity on both arms.
    #[arg(long)]
    pub eta: Option<f64>,
}

impl ChannelArgs {
    pub fn arms(&self) -> (f64, f64) {
        match self.eta {
            Some(e) => (e, e),
            None => (self.eta1, self.eta2),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Write the table here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Largest probability mass allowed outside the photon-number cutoff.
    #[arg(long, default_value_t = DEFAULT_TAIL_TOL)]
    pub tail_tol: f64,
}

#[derive(Debug, Clone, Args)]
pub struct StateInfoArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct JointArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub channel: ChannelArgs,
    /// Photon-number cutoff; chosen from --tail-tol when omitted.
    #[arg(long)]
    pub cutoff: Option<usize>,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CapacityArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub channel: ChannelArgs,
    #[arg(long, default_value_t = 2)]
    pub alphabet: usize,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub kind: KindArg,
    /// Comma-separated mean photon numbers.
    #[arg(long, value_delimiter = ',', required = true)]
    pub means: Vec<f64>,
    #[arg(long, value_enum, default_value = "total")]
    pub convention: Convention,
    /// Comma-separated symmetric transmissivities.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub etas: Vec<f64>,
    #[arg(long, default_value_t = 2)]
    pub alphabet: usize,
    /// Binary only: add the threshold at the integer part of the received
    /// mode mean and its mutual information.
    #[arg(long)]
    pub compare_mean_threshold: bool,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct AsymArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Overall transmissivity sqrt(eta1 * eta2).
    #[arg(long)]
    pub eta: f64,
    /// Comma-separated values of eta1 in [eta^2, 1].
    #[arg(long, value_delimiter = ',', required = true)]
    pub eta1_grid: Vec<f64>,
    #[arg(long, default_value_t = 2)]
    pub alphabet: usize,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CurvatureArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Overall transmissivity sqrt(eta1 * eta2).
    #[arg(long)]
    pub eta: f64,
    /// Difference eta1 - eta2 used for the finite difference.
    #[arg(long, default_value_t = 1e-3)]
    pub delta: f64,
    /// Largest photon number n reported.
    #[arg(long, default_value_t = 5)]
    pub n_max: usize,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[arg(long, value_enum, default_value = "default")]
    pub grid: GridArg,
    #[command(flatten)]
    pub out: OutputArgs,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(&cli.command) {
        Ok(outcome) => ExitCode::from(outcome.code()),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
