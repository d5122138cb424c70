//! `cogol` — train, tune, benchmark and compare ordinal logit models.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cogol_core::{KernelKind, Mode};

#[derive(Debug, Parser)]
#[command(name = "cogol", version, about, args_override_self = true)]
pub struct Cli {
    /// `key = value` file supplying defaults for any long flag.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one model and save it as JSON.
    Train(TrainArgs),
    /// Predict labels for a CSV with a saved model.
    Predict(PredictArgs),
    /// Random-search the penalty weights with stratified cross-validation.
    Tune(TuneArgs),
    /// Replicated split/tune/test protocol over a directory of CSVs.
    Benchmark(BenchmarkArgs),
    /// Paired Wilcoxon test between two comparison CSVs.
    Compare(CompareArgs),
    /// Generate a synthetic ordinal dataset.
    Synth(SynthArgs),
    /// Evaluate a 2-D model on a regular grid (plot-ready CSV).
    Grid(GridArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Ol,
    Gol,
    Cogol,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Ol => Mode::Ol,
            ModeArg::Gol => Mode::Gol,
            ModeArg::Cogol => Mode::CoGol,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KernelArg {
    Linear,
    Rbf,
}

impl From<KernelArg> for KernelKind {
    fn from(k: KernelArg) -> Self {
        match k {
            KernelArg::Linear => KernelKind::Linear,
            KernelArg::Rbf => KernelKind::Rbf,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthKind {
    ParallelBands,
    RotatingBoundaries,
    ConcentricRings,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "cogol")]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 1e-3)]
    pub alpha: f64,
    /// Ignored for OL (tied) and GOL (zero).
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    /// Fit through a kernel expansion instead of the primal weights.
    #[arg(long, value_enum)]
    pub kernel: Option<KernelArg>,
    /// RBF bandwidth; defaults to the geometric centre of the heuristic range.
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 5000)]
    pub max_iters: usize,
    /// Write per-iteration objective and gradient norm to trace.tsv.
    #[arg(long)]
    pub trace: bool,
    /// Run directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "cogol")]
    pub mode: ModeArg,
    #[arg(long, value_enum)]
    pub kernel: Option<KernelArg>,
    /// Fix the RBF bandwidth instead of searching it.
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 3)]
    pub folds: usize,
    /// Defaults to 30 (linear) or 40 (kernel).
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    /// Directory of `<name>.csv` files, or a single CSV.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(
        long,
        value_enum,
        value_delimiter = ',',
        default_value = "ol,gol,cogol"
    )]
    pub modes: Vec<ModeArg>,
    /// Mode the others are tested against.
    #[arg(long, value_enum, default_value = "ol")]
    pub baseline: ModeArg,
    #[arg(long, value_enum)]
    pub kernel: Option<KernelArg>,
    #[arg(long, default_value_t = 30)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 3)]
    pub folds: usize,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    pub a: PathBuf,
    pub b: PathBuf,
    #[arg(long, default_value = "mae")]
    pub metric: String,
    /// Model rows to take from A when it holds several per dataset.
    #[arg(long)]
    pub model_a: Option<String>,
    #[arg(long)]
    pub model_b: Option<String>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum)]
    pub kind: SynthKind,
    #[arg(long, default_value_t = 300)]
    pub n: usize,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long, default_value_t = 2)]
    pub p: usize,
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    /// Total rotation for rotating-boundaries data, in degrees.
    #[arg(long, default_value_t = 90.0)]
    pub angle: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// File stem inside the run directory; defaults to the generator name.
    #[arg(long)]
    pub name: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Take the grid bounds from this CSV (padded by 10%).
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value_t = -3.0, allow_negative_numbers = true)]
    pub lo: f64,
    #[arg(long, default_value_t = 3.0, allow_negative_numbers = true)]
    pub hi: f64,
    #[arg(long, default_value_t = 101)]
    pub steps: usize,
    #[arg(long)]
    pub out: PathBuf,
}

/// Failure with the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<cogol_core::Error> for Failure {
    fn from(e: cogol_core::Error) -> Self {
        use cogol_core::Error as E;
        let code = match e {
            E::Numerical(_) | E::NonFiniteObjective { .. } | E::NonPositiveProbability { .. } => 1,
            _ => 2,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let argv = match config::expand(argv) {
        Ok(a) => a,
        Err(f) => {
            eprintln!("error: {}", f.message);
            return ExitCode::from(f.code);
        }
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match commands::run(cli.command, &argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
