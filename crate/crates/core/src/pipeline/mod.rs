//! End-to-end orchestration: training sets, model training, inference and
//! the S / N / D* experiment matrix.
//!
//! Spectrogram matrices here are frames × bins. The NMF stage works on the
//! transpose internally.

mod config;
mod corpus;
mod experiment;
mod separate;
mod stages;

pub use config::{derive_seed, dnn_tag, NetworkSection, NmfSection, PipelineConfig, StftSection};
pub use corpus::{Corpus, Song, Split};
pub use experiment::{
    cost_trace_csv, estimate_path, reproduce, run_experiment, run_oracle, save_models, train_all,
    ReproduceOutput, SongEstimate, TrainedEnhancer, TrainedModels, MODEL_N, MODEL_S,
};
pub use separate::{
    oracle_separate, separate, separate_magnitudes, separate_nmf, separate_with, Enhancer,
    Separation,
};
pub use stages::{
    build_sep_training, gen_enh_training, train_dnn_a, train_dnn_b, train_nmf_bases, Stage,
};
