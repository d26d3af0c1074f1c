//! Two-stage single-channel source separation.
//!
//! A separator network predicts a ratio mask from the mixture magnitude
//! spectrogram. A second network then enhances all separated sources
//! jointly, optionally trained with a discriminative cost that pushes each
//! output away from the other sources' references. An NMF-based enhancer
//! serves as a baseline, and a projection-based SDR/SIR/SAR suite scores
//! the results.

pub mod data_io;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod masks;
pub mod neural;
pub mod nmf;
pub mod pipeline;
mod textfile;

pub use error::{Error, Result};
