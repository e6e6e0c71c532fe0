use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "normnet", version, about = "Normality tests, neural normality classifiers and their evaluation")]
pub struct Cli {
    /// Worker threads for parallel stages.
    #[arg(long, global = true, env = "NORMNET_THREADS")]
    pub threads: Option<usize>,
    /// Directory for cached Lilliefors null tables.
    #[arg(long, global = true, env = "NORMNET_CACHE_DIR")]
    pub cache_dir: Option<PathBuf>,
    #[arg(short, long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic dataset.
    Generate(GenerateArgs),
    /// Turn a height or magnitude CSV into a dataset.
    Ingest(IngestArgs),
    /// Train a network on a dataset.
    Train(TrainArgs),
    /// Classify and test individual samples.
    Test(TestArgs),
    /// Score a network and the classical tests on a dataset.
    Evaluate(EvaluateArgs),
    /// Grid search with k-fold cross-validation.
    Crossval(CrossvalArgs),
    /// Accuracy and fit time against training-set size.
    LearningCurve(LearningCurveArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
pub enum SetName {
    A,
    B,
    C,
    D,
    Large,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ScaleArg {
    Sd,
    Variance,
}

#[derive(Args, Debug, Serialize)]
pub struct GenerateArgs {
    #[arg(long, value_enum, ignore_case = true)]
    pub set: SetName,
    /// Records per class (sets A, B, D, large).
    #[arg(long)]
    pub per_class: Option<usize>,
    /// Samples per size and group (set C).
    #[arg(long)]
    pub per_size: Option<usize>,
    /// Comma-separated sample sizes overriding the set's defaults.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// How the sd draw scales non-normal records.
    #[arg(long, value_enum, default_value = "sd")]
    pub nonnormal_scale: ScaleArg,
    /// Also write a stratified split: this share to `<stem>_cv`, the rest to `<stem>_test`.
    #[arg(long)]
    pub cv_fraction: Option<f64>,
    /// Output file; a directory for set C.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum IngestKind {
    Height,
    Magnitude,
}

#[derive(Args, Debug, Serialize)]
pub struct IngestArgs {
    #[arg(long, value_enum)]
    pub kind: IngestKind,
    #[arg(long)]
    pub csv: PathBuf,
    /// Height windows: width in years.
    #[arg(long, default_value_t = 9)]
    pub window: u32,
    /// Height windows: smallest kept sample.
    #[arg(long, default_value_t = 3)]
    pub min_size: usize,
    /// Magnitude subsample sizes.
    #[arg(long, value_delimiter = ',', default_value = "5,10,15,20,25,30,35,40,45,50,55,60,65,70,75,80,85,90,95,100")]
    pub sizes: Vec<usize>,
    /// Magnitude subsamples per size.
    #[arg(long, default_value_t = 1000)]
    pub per_size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Dbnn,
    Sbnn,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct NetArgs {
    /// Hidden layer sizes, comma-separated.
    #[arg(long, value_delimiter = ',', default_value = "100,10")]
    pub arch: Vec<usize>,
    /// Descriptor quantile step.
    #[arg(long, default_value_t = 0.1)]
    pub q: f64,
    /// L2 regularization coefficient.
    #[arg(long, default_value_t = 0.1)]
    pub c: f64,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    #[arg(long, default_value_t = 128)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 10)]
    pub patience: usize,
    #[arg(long, value_enum, default_value = "dbnn")]
    pub mode: Mode,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub net: NetArgs,
    /// Model file; the report and manifest are written next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SuiteArgs {
    /// Tests to run, comma-separated.
    #[arg(long, value_delimiter = ',', default_value = "SW,LF,AD,JB,FSSD")]
    pub tests: Vec<String>,
    /// Monte Carlo draws for the Lilliefors null.
    #[arg(long, default_value_t = 10_000)]
    pub lf_sims: usize,
    /// Parametric-bootstrap draws for FSSD.
    #[arg(long, default_value_t = 200)]
    pub fssd_sims: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct TestArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// CSV with one sample per line.
    #[arg(long, conflicts_with = "sample")]
    pub input: Option<PathBuf>,
    /// One comma-separated sample.
    #[arg(long, allow_hyphen_values = true)]
    pub sample: Option<String>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[command(flatten)]
    pub suite: SuiteArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// JSON lines output; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[command(flatten)]
    pub suite: SuiteArgs,
    /// Run no classical tests.
    #[arg(long)]
    pub no_tests: bool,
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.05,0.1")]
    pub alpha: Vec<f64>,
    /// Per-size thresholds closest to the ideal ROC corner (network only).
    #[arg(long)]
    pub optimize_threshold: bool,
    /// Reliability diagram of the network's probabilities.
    #[arg(long)]
    pub reliability: bool,
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
    /// Also draw this many random subsets for the reliability diagram.
    #[arg(long, default_value_t = 0)]
    pub reliability_subsets: usize,
    #[arg(long, default_value_t = 1000)]
    pub subset_size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct CrossvalArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// Descriptor quantile steps of the grid.
    #[arg(long, value_delimiter = ',', default_value = "0.05,0.1")]
    pub q: Vec<f64>,
    /// Architectures separated by `;`, layers by `,`.
    #[arg(long, default_value = "100,10;1000")]
    pub archs: String,
    #[arg(long, value_delimiter = ',', default_value = "0.1,1,10")]
    pub c: Vec<f64>,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    #[arg(long, default_value_t = 128)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Table CSV; the JSON report and manifest go next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct LearningCurveArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1")]
    pub fractions: Vec<f64>,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[command(flatten)]
    pub net: NetArgs,
    #[arg(long)]
    pub out: PathBuf,
}
