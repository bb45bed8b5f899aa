use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "echoroom", version, about = "Room curve estimation from loudspeaker echo paths")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// PRNG seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// TOML file with default parameters.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file or directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Log progress to stderr; repeat for more detail.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate rooms and write a dataset directory.
    GenData(GenDataArgs),
    /// Per-record RT30 and low-frequency roll-off CSV.
    Features(FeaturesArgs),
    /// Fit an estimator and write model.json.
    Train(TrainArgs),
    /// Estimate the room curve of one echo path.
    Predict(PredictArgs),
    /// Design a room-compensation FIR.
    Design(DesignArgs),
    /// Cross-validate estimators on a dataset.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct GenDataArgs {
    #[arg(long)]
    pub rooms: Option<usize>,
    #[arg(long)]
    pub nfft: Option<usize>,
    #[arg(long)]
    pub listeners: Option<usize>,
    #[arg(long)]
    pub max_order: Option<u32>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct FeaturesArgs {
    #[arg(long)]
    pub dataset: PathBuf,
}

#[derive(Debug, Clone, Default, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// ls, gpca or lpca.
    #[arg(long)]
    pub est: Option<String>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub ks: Option<usize>,
    #[arg(long)]
    pub kr: Option<usize>,
    /// rt30 or rolloff (lpca only).
    #[arg(long)]
    pub feature: Option<String>,
    /// Tail probability of the outer groups (lpca only).
    #[arg(long)]
    pub q: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct EchoSource {
    /// Dataset record file (rec_<idx>.json).
    #[arg(long, conflicts_with = "ir")]
    pub record: Option<PathBuf>,
    /// Raw echo impulse response, one sample per line.
    #[arg(long, requires = "sample_rate")]
    pub ir: Option<PathBuf>,
    #[arg(long)]
    pub sample_rate: Option<u32>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub source: EchoSource,
}

#[derive(Debug, Clone, Default, Args)]
pub struct DesignArgs {
    /// Room curve CSV from `predict`.
    #[arg(long, conflicts_with = "model")]
    pub r_hat: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[command(flatten)]
    pub source: EchoSource,
    #[arg(long, allow_hyphen_values = true)]
    pub shelf_db: Option<f64>,
    #[arg(long)]
    pub corner_hz: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub clamp_min_db: Option<f64>,
    #[arg(long)]
    pub clamp_max_db: Option<f64>,
    #[arg(long)]
    pub fir_length: Option<usize>,
    /// Smooth the design over 1/N octave before realization.
    #[arg(long)]
    pub smooth_octave: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Estimator spec such as `ls:mu=0.001` or `lpca-rt:ks=80,kr=32`;
    /// repeat for several.
    #[arg(long = "est")]
    pub estimators: Vec<String>,
    #[arg(long)]
    pub n_train: Option<usize>,
    #[arg(long)]
    pub n_val: Option<usize>,
    #[arg(long)]
    pub repeats: Option<usize>,
}
