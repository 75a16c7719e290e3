//! The `slads` command line.
//!
//! Subcommands: `train`, `pretrain`, `run`, `eval` and `synth`. Settings
//! resolve as flag, then `--config` file entry, then built-in default.
//!
//! Exit codes: 0 success, 1 usage or invalid setting, 2 I/O or file
//! format failure, 3 numeric failure or aborted runs.

mod commands;
pub mod config;
pub mod report;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::Error;

pub use commands::{cmd_eval, cmd_pretrain, cmd_run, cmd_synth, cmd_train, sha256_hex};
pub use report::{EvalReport, EvalRow};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Failed(#[from] Error),
    #[error("{failed} of {total} runs aborted; report written to {report}")]
    RunsAborted {
        failed: usize,
        total: usize,
        report: PathBuf,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::RunsAborted { .. } => EXIT_NUMERIC,
            CliError::Failed(e) => match e {
                Error::Io { .. } | Error::Pgm { .. } | Error::PgmData(_) | Error::ModelFile(_) => {
                    EXIT_IO
                }
                Error::InvalidParameter(_) => EXIT_USAGE,
                _ => EXIT_NUMERIC,
            },
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "slads", version, about = "Supervised dynamic sparse sampling")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a training database from images and fit an ERD model.
    Train(TrainArgs),
    /// Train a generic model from one broad-range image.
    Pretrain(PretrainArgs),
    /// Run one sampling campaign and export its artifacts.
    Run(RunArgs),
    /// Compare methods over seeded repeats and write a PSNR report.
    Eval(EvalArgs),
    /// Write a procedural test image.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RegressorArg {
    Lsq,
    Svr,
    Nn,
}

impl From<RegressorArg> for crate::regress::ModelKind {
    fn from(r: RegressorArg) -> Self {
        match r {
            RegressorArg::Lsq => crate::regress::ModelKind::Lsq,
            RegressorArg::Svr => crate::regress::ModelKind::Svr,
            RegressorArg::Nn => crate::regress::ModelKind::Nn,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ActivationArg {
    Relu,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScoringArg {
    Full,
    Incremental,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Blobs,
    Texture,
    Piecewise,
}

/// Interpolation overrides shared by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct IdwArgs {
    /// Half-width of the update, RD and density window.
    #[arg(long)]
    pub window: Option<usize>,
    /// Nearest measurements blended per pixel.
    #[arg(long)]
    pub neighbors: Option<usize>,
    /// Inverse-distance exponent.
    #[arg(long)]
    pub power: Option<f64>,
}

/// Training settings shared by `train` and `pretrain`.
#[derive(Debug, Clone, Default, Args)]
pub struct FitArgs {
    /// Output model file.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub regressor: Option<RegressorArg>,
    /// Hidden activation of the nn regressor.
    #[arg(long, value_enum)]
    pub activation: Option<ActivationArg>,
    /// Comma-separated mask densities of the training schedule.
    #[arg(long, value_delimiter = ',')]
    pub densities: Option<Vec<f64>>,
    /// Candidate pixels recorded per image and density.
    #[arg(long)]
    pub samples_per_level: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Training epochs of the nn regressor.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Mini-batch size of the nn regressor.
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Also export the training database as CSV.
    #[arg(long)]
    pub db_csv: Option<PathBuf>,
    #[command(flatten)]
    pub idw: IdwArgs,
    /// key=value file with defaults for any of the flags above.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct TrainArgs {
    /// Training images (8-bit P5 graymaps).
    #[arg(long, num_args = 1..)]
    pub images: Vec<PathBuf>,
    #[command(flatten)]
    pub fit: FitArgs,
}

#[derive(Debug, Clone, Default, Args)]
pub struct PretrainArgs {
    /// Generic training image with a wide intensity range and varied texture.
    #[arg(long)]
    pub image: Option<PathBuf>,
    #[command(flatten)]
    pub fit: FitArgs,
}

/// Campaign settings shared by `run` and `eval`.
#[derive(Debug, Clone, Default, Args)]
pub struct CampaignArgs {
    /// Fraction of pixels seeded at random before the greedy loop.
    #[arg(long)]
    pub initial: Option<f64>,
    /// Fraction of pixels measured when the run stops.
    #[arg(long)]
    pub budget: Option<f64>,
    /// Comma-separated checkpoint densities.
    #[arg(long, value_delimiter = ',')]
    pub densities: Option<Vec<f64>>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Standard deviation of simulated Gaussian measurement noise.
    #[arg(long)]
    pub noise_sigma: Option<f64>,
    #[arg(long, value_enum)]
    pub scoring: Option<ScoringArg>,
    #[command(flatten)]
    pub idw: IdwArgs,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Trained model file.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Use a baseline instead of a model.
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    /// Ground-truth image probed by the simulated instrument.
    #[arg(long)]
    pub image: Option<PathBuf>,
    /// Output directory for masks, reconstructions and the history CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub campaign: CampaignArgs,
}

#[derive(Debug, Clone, Default, Args)]
pub struct EvalArgs {
    /// Model files to evaluate.
    #[arg(long, num_args = 1..)]
    pub model: Vec<PathBuf>,
    /// Also evaluate a baseline.
    #[arg(long, value_enum)]
    pub method: Vec<MethodArg>,
    /// Test images; statistics pool all images and repeats.
    #[arg(long, num_args = 1..)]
    pub image: Vec<PathBuf>,
    /// Report CSV path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Runs per method and image, seeded seed..seed+repeats-1.
    #[arg(long)]
    pub repeats: Option<usize>,
    /// Leave the wall-time column empty so reports are byte-reproducible.
    #[arg(long)]
    pub no_timing: bool,
    #[command(flatten)]
    pub campaign: CampaignArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum)]
    pub family: FamilyArg,
    #[arg(long, default_value_t = 64)]
    pub width: usize,
    #[arg(long, default_value_t = 64)]
    pub height: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Caps the rayon pool from `SLADS_THREADS` (0 or unset means automatic).
fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("SLADS_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("SLADS_THREADS must be a count, got {raw:?}")))?;
    if n > 0 {
        // a pool may already exist when called twice in one process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

pub fn dispatch(cli: Cli) -> Result<String, CliError> {
    configure_threads()?;
    match cli.command {
        Command::Train(a) => cmd_train(&a),
        Command::Pretrain(a) => cmd_pretrain(&a),
        Command::Run(a) => cmd_run(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Synth(a) => cmd_synth(&a),
    }
}

/// Parses `args` (including the program name), runs the command, prints
/// its summary or error and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(summary) => {
            print!("{summary}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
