//! WAV files, corpus manifests, config files and the synthetic corpus.

mod manifest;
mod synth;
mod wav;

pub use manifest::{
    load_config, load_corpus, load_manifest, load_song, save_config, save_manifest,
    CorpusManifest, ManifestEntry,
};
pub use synth::{generate_synthetic_corpus, synthesize_corpus, synthesize_song, SynthSpec};
pub use wav::{decode_wav, encode_wav, quantize_i16, read_wav, write_wav, BitDepth};

/// Manifest file name inside a corpus directory.
pub const MANIFEST_FILE: &str = "manifest.toml";
/// Default config file name written next to a generated corpus.
pub const CONFIG_FILE: &str = "config.toml";
