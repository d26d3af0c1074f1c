use serde::{Deserialize, Serialize};

use crate::data_io::SynthSpec;
use crate::dsp::StftGeometry;
use crate::error::{Error, Result};
use crate::neural::TrainConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StftSection {
    pub window_len: usize,
    pub hop: usize,
    pub fft_len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    /// Full layer widths, input first.
    pub layers: Vec<usize>,
    pub train: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NmfSection {
    pub rank: usize,
    pub train_iters: usize,
    pub decode_iters: usize,
}

/// Everything needed to train and run every model of the experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    #[serde(default = "default_sources")]
    pub sources: usize,
    /// Multiplier applied to magnitude spectra before they enter a network.
    #[serde(default = "default_input_gain")]
    pub input_gain: f64,
    /// Feed the enhancer frame-normalised separated spectra instead of raw ones.
    #[serde(default)]
    pub normalize_enhancer_inputs: bool,
    pub lambdas: Vec<f64>,
    pub stft: StftSection,
    pub dnn_a: NetworkSection,
    pub dnn_b: NetworkSection,
    pub nmf: NmfSection,
    /// Corpus generated by `reproduce` when none exists yet.
    pub synth: SynthSpec,
}

fn default_sources() -> usize {
    2
}

fn default_input_gain() -> f64 {
    1.0
}

impl PipelineConfig {
    /// Desk-scale preset: 16 kHz audio, 1024-point frames with 4× overlap.
    pub fn desk() -> Self {
        let bins = 513;
        Self {
            seed: 1,
            sources: 2,
            input_gain: 1.0,
            normalize_enhancer_inputs: false,
            lambdas: vec![0.0, 0.2, 0.4],
            stft: StftSection {
                window_len: 1024,
                hop: 256,
                fft_len: 1024,
            },
            dnn_a: NetworkSection {
                layers: vec![bins, 256, 256, 256, bins],
                train: TrainConfig::default(),
            },
            dnn_b: NetworkSection {
                layers: vec![2 * bins, 256, 256, 256, 2 * bins],
                train: TrainConfig::default(),
            },
            nmf: NmfSection {
                rank: 80,
                train_iters: 200,
                decode_iters: 100,
            },
            synth: SynthSpec::default(),
        }
    }

    /// Full-scale preset: 44.1 kHz, 2048-point frames, hop 512,
    /// 1025-wide separator and 4100-wide enhancer hidden layers.
    pub fn full_scale() -> Self {
        let bins = 1025;
        let mut cfg = Self::desk();
        cfg.stft = StftSection {
            window_len: 2048,
            hop: 512,
            fft_len: 2048,
        };
        cfg.dnn_a.layers = vec![bins; 5];
        cfg.dnn_b.layers = vec![2 * bins, 4100, 4100, 4100, 2 * bins];
        cfg.synth.sample_rate = 44_100;
        cfg
    }

    pub fn geometry(&self) -> Result<StftGeometry> {
        StftGeometry::new(self.stft.window_len, self.stft.hop, self.stft.fft_len)
    }

    pub fn bins(&self) -> usize {
        self.stft.fft_len / 2 + 1
    }

    /// Check every invariant and report all violations together.
    pub fn validate(&self) -> Result<()> {
        let mut v = Vec::new();
        if let Err(e) = self.geometry() {
            v.push(format!("stft: {e}"));
        }
        let bins = self.bins();
        if self.sources != 2 {
            v.push(format!("sources must be 2, got {}", self.sources));
        }
        if !(self.input_gain.is_finite() && self.input_gain > 0.0) {
            v.push(format!("input_gain must be positive, got {}", self.input_gain));
        }
        check_layers(&mut v, "dnn_a", &self.dnn_a.layers, bins, bins);
        check_layers(
            &mut v,
            "dnn_b",
            &self.dnn_b.layers,
            self.sources * bins,
            self.sources * bins,
        );
        for (name, net) in [("dnn_a", &self.dnn_a), ("dnn_b", &self.dnn_b)] {
            v.extend(net.train.violations(&format!("{name}.train")));
            if net.train.learning_rate == 0.0 {
                v.push(format!("{name}.train.learning_rate must be positive"));
            }
        }
        if self.lambdas.is_empty() {
            v.push("lambdas must list at least one value".into());
        }
        for &l in &self.lambdas {
            if !(0.0..1.0).contains(&l) {
                v.push(format!("lambda {l} outside [0, 1)"));
            }
        }
        if self.nmf.rank == 0 {
            v.push("nmf.rank must be at least 1".into());
        }
        if self.nmf.train_iters == 0 || self.nmf.decode_iters == 0 {
            v.push("nmf iteration counts must be at least 1".into());
        }
        if let Err(Error::Config(errs)) = self.synth.validate() {
            v.extend(errs.into_iter().map(|e| format!("synth: {e}")));
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(v))
        }
    }
}

fn check_layers(v: &mut Vec<String>, name: &str, layers: &[usize], input: usize, output: usize) {
    if layers.len() < 2 {
        v.push(format!("{name}.layers needs at least input and output widths"));
        return;
    }
    if layers.contains(&0) {
        v.push(format!("{name}.layers contains a zero width"));
    }
    if layers[0] != input {
        v.push(format!("{name} input width {} != {input}", layers[0]));
    }
    if *layers.last().unwrap() != output {
        v.push(format!(
            "{name} output width {} != {output}",
            layers.last().unwrap()
        ));
    }
}

/// Model label for an enhancer trained with `lambda`: 0.2 → `D2`.
pub fn dnn_tag(lambda: f64) -> String {
    let tenths = lambda * 10.0;
    if (tenths - tenths.round()).abs() < 1e-9 {
        format!("D{}", tenths.round() as i64)
    } else {
        format!("D{lambda}")
    }
}

/// Stage-specific seed derived from the global seed (SplitMix64 finaliser).
pub fn derive_seed(seed: u64, stage: u64) -> u64 {
    let mut z = seed
        .wrapping_add(stage.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
