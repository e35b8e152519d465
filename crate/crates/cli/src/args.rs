use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pixcode::coding::CodingScheme;
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "pixcode", version, about = "Pixel antenna coding: synthesis, datasets, training, optimization and benchmarks")]
pub struct Cli {
    /// Directory for every output file.
    #[arg(long, global = true, env = "PIXCODE_OUT_DIR", default_value = ".")]
    pub out_dir: PathBuf,

    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Synthesize a passive, reciprocal pixel antenna model.
    GenAntenna(GenAntennaArgs),
    /// Sample rich-scattering virtual channels.
    GenChannel(GenChannelArgs),
    /// Generate a labelled dataset (SEBO labels under each coding scheme).
    GenDataset(GenDatasetArgs),
    /// Train one head per coding scheme and write an ensemble manifest.
    Train(TrainArgs),
    /// Optimize the antenna coder(s) of one instance.
    Optimize(OptimizeArgs),
    /// Evaluate an ensemble on a dataset's test split.
    Eval(EvalArgs),
    /// Compare random, codebook, SEBO and HMSM on a dataset's test split.
    Bench(BenchArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::GenAntenna(_) => "gen-antenna",
            Command::GenChannel(_) => "gen-channel",
            Command::GenDataset(_) => "gen-dataset",
            Command::Train(_) => "train",
            Command::Optimize(_) => "optimize",
            Command::Eval(_) => "eval",
            Command::Bench(_) => "bench",
        }
    }
}

#[derive(Args, Debug, Serialize)]
pub struct GenAntennaArgs {
    /// Pixel ports Q.
    #[arg(long)]
    pub q: usize,
    /// Angular samples K per polarization.
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub seed: u64,
    /// Open-circuit load reactance in ohms.
    #[arg(long, default_value_t = pixcode::antenna::DEFAULT_GAMMA)]
    pub gamma: f64,
    #[arg(long, default_value = "antenna.txt")]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct GenChannelArgs {
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub seed: u64,
    /// Number of channels; channel i uses a seed derived from `--seed` and i.
    #[arg(long, default_value_t = 1)]
    pub count: usize,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SystemArg {
    Siso,
    Mimo,
}

/// Where the antenna comes from and what system it is used in.
#[derive(Args, Debug, Serialize)]
pub struct SystemArgs {
    #[arg(long, value_enum, default_value_t = SystemArg::Siso)]
    pub system: SystemArg,
    /// Antenna model file; overrides `--q`/`--antenna-seed` synthesis.
    #[arg(long)]
    pub antenna: Option<PathBuf>,
    /// Pixel ports of a synthesized antenna.
    #[arg(long, default_value_t = 12)]
    pub q: usize,
    #[arg(long, default_value_t = 0)]
    pub antenna_seed: u64,
    /// Angular samples K per polarization.
    #[arg(long, default_value_t = 8)]
    pub k: usize,
    #[arg(long, default_value_t = 4)]
    pub n_t: usize,
    #[arg(long, default_value_t = 2)]
    pub n_r: usize,
}

#[derive(Args, Debug, Serialize)]
pub struct GenDatasetArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    /// Candidate SNRs in dB (MIMO), one drawn per record.
    #[arg(long, value_delimiter = ',', default_value = "0,10,20")]
    pub snr_db: Vec<f64>,
    #[arg(long)]
    pub samples: usize,
    #[arg(long, default_value_t = 12)]
    pub block: usize,
    #[arg(long, default_value_t = pixcode::optimize::DEFAULT_MAX_SWEEPS)]
    pub max_sweeps: usize,
    #[arg(long, value_delimiter = ',', default_value = "binary:3,gray:3")]
    #[serde(serialize_with = "display_list")]
    pub schemes: Vec<CodingScheme>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.9)]
    pub train_fraction: f64,
    /// Also write every record's channel matrix into `channels/`.
    #[arg(long)]
    pub materialize: bool,
    #[arg(long, default_value = "dataset.json")]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Schemes to train (default: every scheme in the dataset).
    #[arg(long, value_delimiter = ',')]
    #[serde(serialize_with = "display_list")]
    pub schemes: Vec<CodingScheme>,
    #[arg(long, default_value_t = 64)]
    pub hidden: usize,
    #[arg(long, default_value_t = 15)]
    pub epochs: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    /// Average-pool window height (0 = full side). Default depends on the system.
    #[arg(long)]
    pub pool_rows: Option<usize>,
    /// Average-pool window width (0 = full side). Default depends on the system.
    #[arg(long)]
    pub pool_cols: Option<usize>,
    /// Use only the first N training records.
    #[arg(long)]
    pub train_limit: Option<usize>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value = "ensemble.json")]
    pub out: PathBuf,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Algo {
    Exhaustive,
    Sebo,
    Codebook,
    Random,
    Hmsm,
}

#[derive(Args, Debug, Serialize)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    #[arg(long, value_enum)]
    pub algo: Algo,
    /// Channel file; otherwise a channel is sampled from `--channel-seed`.
    #[arg(long)]
    pub channel: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub channel_seed: u64,
    #[arg(long, default_value_t = 10.0)]
    pub snr_db: f64,
    #[arg(long, default_value_t = 12)]
    pub block: usize,
    #[arg(long, default_value_t = pixcode::optimize::DEFAULT_MAX_SWEEPS)]
    pub max_sweeps: usize,
    #[arg(long, default_value_t = 1024)]
    pub codebook_size: usize,
    /// Seed of the codebook and random baselines.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Start SEBO from a random coder drawn with this seed instead of all zeros.
    #[arg(long)]
    pub init_seed: Option<u64>,
    #[arg(long)]
    pub ensemble: Option<PathBuf>,
    #[arg(long, default_value = "result.json")]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub ensemble: PathBuf,
    /// Test records timed against a fresh SEBO run.
    #[arg(long, default_value_t = 100)]
    pub timed: usize,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Prefix of the report files.
    #[arg(long, default_value = "eval")]
    pub prefix: String,
}

#[derive(Args, Debug, Serialize)]
pub struct BenchArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// HMSM rows are included when an ensemble is given.
    #[arg(long)]
    pub ensemble: Option<PathBuf>,
    /// Use only the first N test records.
    #[arg(long)]
    pub limit: Option<usize>,
    #[arg(long, default_value_t = 1024)]
    pub codebook_size: usize,
    /// SEBO block size (default: the dataset's).
    #[arg(long)]
    pub block: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Timed repetitions per run; the median is reported.
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,
    #[arg(long, default_value = "bench")]
    pub prefix: String,
}

fn display_list<S: serde::Serializer>(v: &[CodingScheme], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|x| x.to_string()))
}
