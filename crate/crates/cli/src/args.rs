use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub const EXIT_CODES: &str = "\
Exit codes:
  0  success
  1  usage error (bad or missing flags)
  2  configuration error (invalid config or manifest, unparsable file, model geometry mismatch)
  3  I/O error (missing or unwritable file)
  4  numeric failure (invalid signal data, degenerate references, diverged training)";

#[derive(Debug, Parser)]
#[command(
    name = "maskforge",
    version,
    about = "Two-stage mask-based music source separation with discriminative enhancement",
    after_help = EXIT_CODES
)]
pub struct Cli {
    /// Worker threads for per-song stages (separation, evaluation).
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    pub jobs: u32,

    /// Only log warnings and errors.
    #[arg(long, short, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the seeded synthetic corpus, its manifest and a default config.
    #[command(after_help = EXIT_CODES)]
    GenData(GenData),
    /// Train the separator network (DNN-A).
    #[command(after_help = EXIT_CODES)]
    TrainSep(TrainSep),
    /// Train an enhancer network (DNN-B) with the discriminative cost.
    #[command(after_help = EXIT_CODES)]
    TrainEnh(TrainEnh),
    /// Train vocal and accompaniment NMF bases for the "N" baseline.
    #[command(after_help = EXIT_CODES)]
    TrainNmf(TrainNmf),
    /// Separate one mixture WAV into source_1.wav (vocal) and source_2.wav.
    #[command(after_help = EXIT_CODES)]
    Separate(Separate),
    /// Score separated estimates against the test split references.
    #[command(after_help = EXIT_CODES)]
    Evaluate(Evaluate),
    /// Run the whole S / N / D* experiment: generate data if absent, train,
    /// separate the test split and evaluate.
    #[command(after_help = EXIT_CODES)]
    Reproduce(Reproduce),
}

#[derive(Debug, Args)]
pub struct GenData {
    /// Output corpus directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Generator seed; also written as the training seed of the default config.
    #[arg(long, env = "MASKFORGE_SEED", default_value_t = 1)]
    pub seed: u64,
    /// Songs in train_a, train_b and test.
    #[arg(long, value_delimiter = ',', default_values_t = [8usize, 8, 6])]
    pub songs: Vec<usize>,
    /// Song duration in seconds.
    #[arg(long, default_value_t = 6.0)]
    pub duration: f64,
    /// Sample rate in Hz.
    #[arg(long, default_value_t = 16_000)]
    pub rate: u32,
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    /// Corpus directory containing manifest.toml.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Pipeline config (TOML). Defaults to <corpus>/config.toml, or the
    /// built-in desk preset when that file does not exist.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Training seed; overrides the config file.
    #[arg(long, env = "MASKFORGE_SEED")]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct TrainSep {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Model file to write; the cost trace goes next to it as <stem>.costs.csv.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainEnh {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Trained separator model.
    #[arg(long = "dnn-a")]
    pub dnn_a: PathBuf,
    /// Discriminative weight in [0, 1).
    #[arg(long)]
    pub lambda: f64,
    /// Model file to write; the cost trace goes next to it as <stem>.costs.csv.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainNmf {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Basis vectors per source; overrides the config.
    #[arg(long)]
    pub k: Option<usize>,
    /// Directory receiving nmf_vocal.basis and nmf_accompaniment.basis.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct Separate {
    /// Mixture WAV (stereo is averaged to mono).
    #[arg(long)]
    pub mixture: PathBuf,
    /// Trained separator model.
    #[arg(long = "dnn-a")]
    pub dnn_a: PathBuf,
    /// Enhancer model (models D*). Omit both enhancers for model S.
    #[arg(long = "dnn-b", conflicts_with = "nmf")]
    pub dnn_b: Option<PathBuf>,
    /// Vocal and accompaniment NMF bases, comma separated (model N).
    #[arg(long, value_delimiter = ',', num_args = 2)]
    pub nmf: Option<Vec<PathBuf>>,
    /// Pipeline config. Without it the STFT geometry is inferred from the
    /// separator width (window = FFT length, hop = a quarter of it).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory for source_1.wav and source_2.wav.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct Evaluate {
    /// Corpus directory containing manifest.toml.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Estimates laid out as <model>/<song_id>/source_{1,2}.wav.
    #[arg(long)]
    pub estimates: PathBuf,
    /// Per-source CSV; <stem>.summary.csv and <stem>.songs.csv are written
    /// next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct Reproduce {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Output directory for models, estimates and CSVs.
    #[arg(long)]
    pub out: PathBuf,
}
