//! `kstrip`: dataset generation, training, evaluation, inference and
//! inspection for k-space skull stripping.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};

/// Exit code 2 for usage and configuration problems, 1 for everything else.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<kstrip::Error> for CliError {
    fn from(e: kstrip::Error) -> Self {
        match e {
            kstrip::Error::Config(_) | kstrip::Error::UnsupportedSize(_) => CliError::Usage(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "kstrip", version, about = "Skull stripping on complex k-space with a complex-valued U-Net")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic phantom dataset.
    GenData(GenDataArgs),
    /// Train a model on a dataset.
    Train(TrainArgs),
    /// Score a checkpoint on a dataset split.
    Eval(EvalArgs),
    /// Run a checkpoint on one dataset slice.
    Infer(InferArgs),
    /// Render a dataset slice's k-space and image.
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    /// Key-value file with flag defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    pub patients: usize,
    /// Slices per patient.
    #[arg(long, default_value_t = 40)]
    pub slices: usize,
    /// Slice edge length, a power of two.
    #[arg(long, default_value_t = 64)]
    pub size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output dataset file.
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Key-value file with flag defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset file.
    #[arg(long)]
    pub data: PathBuf,
    /// Output directory for checkpoints, log and manifest.
    #[arg(long)]
    pub out: PathBuf,
    /// Desk preset: 64x64, 2 levels, base 8, batch 16, 50 epochs, lr halved every 25.
    #[arg(long)]
    pub desk: bool,
    /// Continue from a checkpoint; its stored settings apply except --epochs.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Seed for weights, patient split, shuffling, augmentation and dropout.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// [default: 150, 50 with --desk]
    #[arg(long)]
    pub epochs: Option<usize>,
    /// [default: 64, 16 with --desk]
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Initial learning rate [default: 0.001]
    #[arg(long)]
    pub lr: Option<f64>,
    /// Epochs between learning-rate halvings [default: 50, 25 with --desk]
    #[arg(long)]
    pub lr_period: Option<usize>,
    /// Clip the global gradient norm.
    #[arg(long)]
    pub clip_norm: Option<f64>,
    /// Disable periphery augmentation.
    #[arg(long)]
    pub no_augment: bool,
    /// Input edge length [default: 256, 64 with --desk]
    #[arg(long)]
    pub size: Option<usize>,
    /// [default: 32, 8 with --desk]
    #[arg(long)]
    pub base_channels: Option<usize>,
    /// Encoder levels [default: 3, 2 with --desk]
    #[arg(long)]
    pub levels: Option<usize>,
    /// Residual blocks per encoder level [default: 4, 2 with --desk]
    #[arg(long)]
    pub blocks: Option<usize>,
    /// Residual blocks per decoder level [default: 4, 2 with --desk]
    #[arg(long)]
    pub decoder_blocks: Option<usize>,
    /// Bottleneck channels [default: 256, 32 with --desk]
    #[arg(long)]
    pub bottleneck: Option<usize>,
    /// [default: 0.05]
    #[arg(long)]
    pub dropout: Option<f64>,
    /// Suppress per-epoch output.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitName {
    Train,
    Val,
    Test,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReferenceName {
    /// Phantom generator masks.
    Generator,
    /// Target k-space binarized like the prediction.
    Target,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Key-value file with flag defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub data: PathBuf,
    /// Model checkpoint.
    #[arg(long, required_unless_present = "oracle", conflicts_with = "oracle")]
    pub checkpoint: Option<PathBuf>,
    /// Score the target k-space itself instead of a model.
    #[arg(long)]
    pub oracle: bool,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = SplitName::Test)]
    pub split: SplitName,
    /// Split seed [default: the checkpoint's training seed, else 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Mask threshold as a multiple of the mean predicted magnitude.
    #[arg(long, default_value_t = kstrip::evaluation::DEFAULT_THRESHOLD_FACTOR)]
    pub threshold: f64,
    /// Exclude slices with fewer brain pixels [default: 5000 scaled by slice area]
    #[arg(long)]
    pub min_brain_pixels: Option<usize>,
    #[arg(long, value_enum, default_value_t = ReferenceName::Generator)]
    pub reference: ReferenceName,
    /// Dataset label in the report.
    #[arg(long, default_value = "phantom")]
    pub name: String,
    /// Also write per_slice.csv.
    #[arg(long)]
    pub per_slice: bool,
    /// Number of figure panels to export.
    #[arg(long, default_value_t = 0)]
    pub panels: usize,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    /// Key-value file with flag defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Slice index within the dataset.
    #[arg(long, default_value_t = 0)]
    pub index: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = kstrip::evaluation::DEFAULT_THRESHOLD_FACTOR)]
    pub threshold: f64,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    /// Key-value file with flag defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub index: usize,
    #[arg(long)]
    pub out: PathBuf,
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("KSTRIP_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().map_err(|_| CliError::Usage(format!("KSTRIP_THREADS must be a count, got `{raw}`")))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    Ok(())
}

fn run() -> Result<(), CliError> {
    let mut cmd = Cli::command();
    let names: Vec<String> = cmd.get_subcommands().map(|s| s.get_name().to_string()).collect();
    for name in names {
        cmd = cmd.mut_subcommand(name, |s| s.args_override_self(true));
    }
    let args = config::expand_args(&cmd, std::env::args().collect())?;
    let cli = match cmd.try_get_matches_from(args).and_then(|m| Cli::from_arg_matches(&m)) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    configure_threads()?;
    match cli.command {
        Command::GenData(a) => commands::gen_data(&a),
        Command::Train(a) => commands::train(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Infer(a) => commands::infer(&a),
        Command::Inspect(a) => commands::inspect(&a),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
