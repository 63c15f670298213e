//! `privml` command-line pipeline.
//!
//! Every subcommand reads and writes plain files. Keys, the encrypted model
//! and ciphertexts live in separate files so they can be handed to different
//! parties.

mod commands;
pub mod manifest;

use std::ffi::OsString;
use std::io;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use privml::data::DataError;
use privml::dpsgd::DpError;
use privml::fvrns::FvError;
use privml::metrics::MetricsError;
use privml::model::{ActivationPreset, ModelError};
use privml::polyapprox::ApproxError;

pub use manifest::RunManifest;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    File { path: PathBuf, source: io::Error },
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Fv(#[from] FvError),
    #[error(transparent)]
    Approx(#[from] ApproxError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Dp(#[from] DpError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl CliError {
    pub(crate) fn file(path: &Path, source: io::Error) -> Self {
        CliError::File { path: path.to_path_buf(), source }
    }

    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::File { .. }
            | CliError::Io(_)
            | CliError::Data(DataError::Io(_))
            | CliError::Model(ModelError::Io(_))
            | CliError::Fv(FvError::Io(_)) => 3,
            CliError::Model(ModelError::Encoding(_)) => 4,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "privml", version, about = "Private training and encrypted inference for readmission risk models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Clean, encode and split a raw readmission CSV.
    Preprocess(PreprocessArgs),
    /// Generate a synthetic dataset (or a raw CSV with `--format csv`).
    Synth(SynthArgs),
    /// Train the d-32-1 network, optionally with DP-SGD.
    Train(TrainArgs),
    /// Fit the Swish approximation and scan base-2 exponents.
    Approx(ApproxArgs),
    /// Generate secret, public and evaluation keys.
    Keygen(KeygenArgs),
    /// Quantize a trained model and bind it to a parameter set.
    EncryptModel(EncryptModelArgs),
    /// Encrypt one feature row.
    EncryptInput(EncryptInputArgs),
    /// Run the encrypted forward pass.
    Infer(InferArgs),
    /// Decrypt and decode an encrypted score.
    Decrypt(DecryptArgs),
    /// Accuracy, AUC and recall of a model on a dataset split.
    Evaluate(EvaluateArgs),
    /// Time encrypted inference for each activation variant.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fraction of rows in the training split.
    #[arg(long, default_value_t = 0.8)]
    pub train_fraction: f64,
    /// Age brackets as one scaled number instead of one-hot levels.
    #[arg(long)]
    pub ordinal_age: bool,
    /// Also encode diag_2 and diag_3 as ICD9 groups.
    #[arg(long)]
    pub group_secondary: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SynthFormat {
    /// Feature matrix in [0,1], split and cached.
    Dataset,
    /// Raw records with the columns of the public readmission CSV.
    Csv,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    #[arg(long, default_value_t = 20)]
    pub d: usize,
    #[arg(long, default_value_t = 0.11)]
    pub pos_rate: f64,
    /// Standard deviation of the planted linear score.
    #[arg(long, default_value_t = 4.0)]
    pub signal: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = SynthFormat::Dataset)]
    pub format: SynthFormat,
    /// Give every column a raw scale in [1, 100] instead of [0, 1].
    #[arg(long)]
    pub raw_scales: bool,
    #[arg(long, default_value_t = 0.8)]
    pub train_fraction: f64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Directory with train.pmds (and optionally spec.txt).
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub epochs: usize,
    #[arg(long, default_value_t = 256)]
    pub batch: usize,
    #[arg(long, default_value = "swish-quant")]
    pub activation: ActivationPreset,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    /// Loss weight of positive examples.
    #[arg(long, default_value_t = 8.0)]
    pub w_pos: f64,
    #[arg(long, default_value_t = privml::model::HIDDEN)]
    pub hidden: usize,
    #[arg(long)]
    pub no_bias: bool,
    #[command(flatten)]
    pub dp: DpArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DpArgs {
    /// Train with DP-SGD.
    #[arg(long)]
    pub dp: bool,
    #[arg(long, default_value_t = 1.0, requires = "dp")]
    pub sigma: f64,
    #[arg(long, default_value_t = 1.0, requires = "dp")]
    pub clip: f64,
    #[arg(long, default_value_t = 1e-5, requires = "dp")]
    pub delta: f64,
    /// Stop before a step would push epsilon past this value.
    #[arg(long, requires = "dp")]
    pub eps_budget: Option<f64>,
    /// Choose sigma so that the full run spends exactly this epsilon.
    #[arg(long, requires = "dp", conflicts_with = "sigma")]
    pub target_eps: Option<f64>,
    /// Poisson sampling of lots instead of fixed-size lots.
    #[arg(long, requires = "dp")]
    pub poisson: bool,
}

#[derive(Debug, Args)]
pub struct ApproxArgs {
    #[arg(long, default_value_t = 2)]
    pub degree: usize,
    /// Half-width `a` of the interval [-a, a]; calibrated when omitted.
    #[arg(long)]
    pub interval_a: Option<f64>,
    /// Scan constraint bound `K`; defaults to the rounded polynomial's error.
    #[arg(long)]
    pub bound: Option<f64>,
    #[arg(long, default_value_t = 3)]
    pub radius: i32,
    #[arg(long, default_value_t = 100_001)]
    pub grid: usize,
}

#[derive(Debug, Args)]
pub struct KeygenArgs {
    #[arg(long, default_value_t = 8192)]
    pub n: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Seed for reproducible keys; fresh OS entropy when omitted.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct EncryptModelArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub keys: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 15)]
    pub input_bits: u32,
    #[arg(long, default_value_t = 15)]
    pub weight_bits: u32,
}

#[derive(Debug, Args)]
pub struct EncryptInputArgs {
    /// File holding one comma-separated feature row.
    #[arg(long, conflicts_with = "data", required_unless_present = "data")]
    pub row: Option<PathBuf>,
    /// Dataset file to take the row from (with --index).
    #[arg(long, requires = "index")]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub index: Option<usize>,
    #[arg(long)]
    pub keys: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 15)]
    pub input_bits: u32,
    /// Seed for the encryption randomness; fresh OS entropy when omitted.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PathArg {
    Generic,
    Shift,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[arg(long)]
    pub emodel: PathBuf,
    /// Key directory; only params.txt and eval.key are read.
    #[arg(long)]
    pub keys: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = PathArg::Shift)]
    pub path: PathArg,
}

#[derive(Debug, Args)]
pub struct DecryptArgs {
    #[arg(long)]
    pub keys: PathBuf,
    #[arg(long = "in")]
    pub input: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// `train` or `test`.
    #[arg(long, default_value = "test")]
    pub split: String,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    /// Score with the 15-bit fixed-point forward pass.
    #[arg(long)]
    pub quantized: bool,
    /// Also print per-example gradient-norm quartiles.
    #[arg(long)]
    pub grad_norms: bool,
    #[arg(long, default_value_t = 8.0)]
    pub w_pos: f64,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub emodel: PathBuf,
    #[arg(long)]
    pub keys: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Run the variants concurrently; wallclock figures are then not comparable.
    #[arg(long)]
    pub parallel: bool,
}

/// Parses `argv` and runs the subcommand, returning the process exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match commands::dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
