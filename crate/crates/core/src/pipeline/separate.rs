use ndarray::Array2;

use super::config::PipelineConfig;
use super::corpus::Song;
use super::stages::{check_dnn_a, check_dnn_b, enhancer_input, initial_estimates, source_magnitudes, Stage};
use crate::dsp::{analyse, frame_norms, istft, MagSpectrogram, Waveform};
use crate::error::{Error, Result};
use crate::masks::{apply_mask, final_mask, ratio_mask, Mask, StackedSpectra};
use crate::neural::Mlp;
use crate::nmf::{decode_nmf, nmf_masks, NmfBasis};

/// What runs after the separator.
#[derive(Debug, Clone, Copy)]
pub enum Enhancer<'a> {
    /// Model "S": the separator's estimates are final.
    None,
    Dnn(&'a Mlp),
    /// Vocal basis, accompaniment basis.
    Nmf(&'a NmfBasis, &'a NmfBasis),
}

/// Final source magnitudes and waveforms for one mixture.
#[derive(Debug, Clone)]
pub struct Separation {
    pub mixture_magnitude: Array2<f64>,
    pub magnitudes: Vec<Array2<f64>>,
    pub waveforms: Vec<Waveform>,
}

fn masks_to_magnitudes(masks: &[Mask], mixture: &Array2<f64>) -> Result<Vec<Array2<f64>>> {
    masks.iter().map(|m| apply_mask(m, mixture)).collect()
}

/// Final magnitude estimates for a mixture magnitude spectrogram.
pub fn separate_magnitudes(
    mixture: &Array2<f64>,
    dnn_a: &Mlp,
    enhancer: Enhancer<'_>,
    cfg: &PipelineConfig,
) -> Result<Vec<Array2<f64>>> {
    check_dnn_a(dnn_a, cfg)?;
    let estimates = initial_estimates(dnn_a, mixture, cfg)?;
    match enhancer {
        Enhancer::None => Ok(estimates.to_vec()),
        Enhancer::Dnn(dnn_b) => {
            check_dnn_b(dnn_b, cfg)?;
            let gains = [frame_norms(&estimates[0]), frame_norms(&estimates[1])];
            let q = dnn_b.forward(enhancer_input(&estimates, cfg).view())?;
            let outputs = StackedSpectra::from_wide(q.view(), cfg.sources)?;
            masks_to_magnitudes(&final_mask(&outputs, &gains)?, mixture)
        }
        Enhancer::Nmf(vocal, acc) => {
            for b in [vocal, acc] {
                if b.bins() != cfg.bins() {
                    return Err(Error::InvalidConfig(format!(
                        "NMF basis has {} bins but the STFT has {}",
                        b.bins(),
                        cfg.bins()
                    )));
                }
            }
            let seed = Stage::NmfDecode.seed(cfg);
            let iters = cfg.nmf.decode_iters;
            let d1 = decode_nmf(estimates[0].t(), vocal, iters, seed)?;
            let d2 = decode_nmf(estimates[1].t(), acc, iters, seed)?;
            let r1 = vocal.w.dot(&d1.activations.h);
            let r2 = acc.w.dot(&d2.activations.h);
            let (m1, m2) = nmf_masks(r1.t(), r2.t())?;
            masks_to_magnitudes(&[m1, m2], mixture)
        }
    }
}

/// Separate a time-domain mixture. Sources are resynthesised with the
/// mixture phase and have the mixture's length and rate.
pub fn separate_with(mixture: &Waveform, dnn_a: &Mlp, enhancer: Enhancer<'_>, cfg: &PipelineConfig) -> Result<Separation> {
    let geom = cfg.geometry()?;
    let (mag, phase) = analyse(mixture, geom)?;
    let magnitudes = separate_magnitudes(&mag.values, dnn_a, enhancer, cfg)?;
    let waveforms = magnitudes
        .iter()
        .map(|m| {
            let spec = MagSpectrogram::new(m.clone(), geom)?;
            istft(&spec, &phase, mixture.len(), mixture.sample_rate)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Separation {
        mixture_magnitude: mag.values,
        magnitudes,
        waveforms,
    })
}

/// Model "S" when `dnn_b` is `None`, otherwise the DNN-enhanced path.
pub fn separate(mixture: &Waveform, dnn_a: &Mlp, dnn_b: Option<&Mlp>, cfg: &PipelineConfig) -> Result<Vec<Waveform>> {
    let enhancer = dnn_b.map_or(Enhancer::None, Enhancer::Dnn);
    Ok(separate_with(mixture, dnn_a, enhancer, cfg)?.waveforms)
}

/// Model "N": separator followed by NMF re-estimation.
pub fn separate_nmf(
    mixture: &Waveform,
    dnn_a: &Mlp,
    vocal: &NmfBasis,
    accompaniment: &NmfBasis,
    cfg: &PipelineConfig,
) -> Result<Vec<Waveform>> {
    Ok(separate_with(mixture, dnn_a, Enhancer::Nmf(vocal, accompaniment), cfg)?.waveforms)
}

/// Ideal ratio masks built from the true sources, applied to the mixture.
pub fn oracle_separate(song: &Song, cfg: &PipelineConfig) -> Result<Vec<Waveform>> {
    let geom = cfg.geometry()?;
    let mixture = song.mixture();
    let (mag, phase) = analyse(&mixture, geom)?;
    let (s1, s2) = source_magnitudes(song, geom)?;
    ratio_mask(&StackedSpectra::new(vec![s1, s2])?)?
        .iter()
        .map(|m| {
            let spec = MagSpectrogram::new(apply_mask(m, &mag.values)?, geom)?;
            istft(&spec, &phase, mixture.len(), mixture.sample_rate)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::init_mlp;
    use crate::nmf::NmfBasis;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tiny_cfg() -> PipelineConfig {
        let mut cfg = PipelineConfig::desk();
        cfg.stft.window_len = 64;
        cfg.stft.hop = 16;
        cfg.stft.fft_len = 64;
        cfg.dnn_a.layers = vec![33, 8, 33];
        cfg.dnn_b.layers = vec![66, 8, 66];
        cfg.nmf.rank = 4;
        cfg.nmf.decode_iters = 10;
        cfg
    }

    fn noise(len: usize, seed: u64) -> Waveform {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Waveform::new((0..len).map(|_| rng.random_range(-0.5..0.5)).collect(), 8000).unwrap()
    }

    fn random_basis(seed: u64) -> NmfBasis {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        NmfBasis::new(Array2::from_shape_simple_fn((33, 4), || rng.random_range(0.01..1.0))).unwrap()
    }

    #[test]
    fn every_path_conserves_the_mixture() {
        let cfg = tiny_cfg();
        let a = init_mlp(&cfg.dnn_a.layers, 1).unwrap();
        let b = init_mlp(&cfg.dnn_b.layers, 2).unwrap();
        let (w1, w2) = (random_basis(3), random_basis(4));
        let mix = noise(700, 5);
        for enh in [Enhancer::None, Enhancer::Dnn(&b), Enhancer::Nmf(&w1, &w2)] {
            let sep = separate_with(&mix, &a, enh, &cfg).unwrap();
            let sum = &sep.magnitudes[0] + &sep.magnitudes[1];
            for (s, y) in sum.iter().zip(sep.mixture_magnitude.iter()) {
                assert!((s - y).abs() <= 1e-9, "{s} vs {y}");
            }
            for w in &sep.waveforms {
                assert_eq!(w.len(), mix.len());
                assert_eq!(w.sample_rate, mix.sample_rate);
            }
        }
    }

    #[test]
    fn silence_in_silence_out() {
        let cfg = tiny_cfg();
        let a = init_mlp(&cfg.dnn_a.layers, 1).unwrap();
        let b = init_mlp(&cfg.dnn_b.layers, 2).unwrap();
        let mix = Waveform::zeros(300, 8000);
        for w in separate(&mix, &a, Some(&b), &cfg).unwrap() {
            assert!(w.samples.iter().all(|s| *s == 0.0));
        }
    }

    #[test]
    fn model_s_ignores_the_enhancer() {
        let cfg = tiny_cfg();
        let a = init_mlp(&cfg.dnn_a.layers, 1).unwrap();
        let mix = noise(500, 9);
        let s1 = separate(&mix, &a, None, &cfg).unwrap();
        let s2 = separate(&mix, &a, None, &cfg).unwrap();
        assert_eq!(s1, s2);
        let b = init_mlp(&cfg.dnn_b.layers, 2).unwrap();
        assert_ne!(separate(&mix, &a, Some(&b), &cfg).unwrap(), s1);
    }

    #[test]
    fn geometry_mismatch_is_invalid_config() {
        let cfg = tiny_cfg();
        let wrong = init_mlp(&[20, 4, 20], 1).unwrap();
        assert!(matches!(
            separate(&noise(200, 1), &wrong, None, &cfg),
            Err(Error::InvalidConfig(_))
        ));
        let a = init_mlp(&cfg.dnn_a.layers, 1).unwrap();
        let wrong_b = init_mlp(&[33, 4, 33], 1).unwrap();
        assert!(matches!(
            separate(&noise(200, 1), &a, Some(&wrong_b), &cfg),
            Err(Error::InvalidConfig(_))
        ));
    }
}
