use ndarray::{concatenate, Array2, ArrayView2, Axis};

use super::config::{derive_seed, PipelineConfig};
use super::corpus::Song;
use crate::dsp::{analyse, normalize_frames, StftGeometry};
use crate::error::{Error, Result};
use crate::masks::{apply_mask, complement_mask, ratio_mask, Mask, StackedSpectra};
use crate::neural::{init_mlp, train, CostSpec, Mlp, TrainOutcome};
use crate::nmf::{train_nmf, NmfBasis};

/// Seed streams, one per randomised stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    DnnAInit = 0,
    DnnAShuffle = 1,
    DnnBInit = 2,
    DnnBShuffle = 3,
    NmfVocal = 4,
    NmfAccompaniment = 5,
    NmfDecode = 6,
}

impl Stage {
    pub fn seed(self, cfg: &PipelineConfig) -> u64 {
        derive_seed(cfg.seed, self as u64)
    }
}

/// Source magnitude spectrograms `(|S_1|, |S_2|)` of one song.
pub(crate) fn source_magnitudes(song: &Song, geom: StftGeometry) -> Result<(Array2<f64>, Array2<f64>)> {
    let (v, _) = analyse(&song.vocal, geom)?;
    let (a, _) = analyse(&song.accompaniment, geom)?;
    Ok((v.values, a.values))
}

/// Vocal mask predicted by the separator for a mixture magnitude.
pub(crate) fn predict_mask(dnn_a: &Mlp, mixture: &Array2<f64>, cfg: &PipelineConfig) -> Result<Mask> {
    let out = dnn_a.forward((mixture * cfg.input_gain).view())?;
    Mask::clamped(out)
}

/// Initial separated estimates `Z ⊙ X` and `(1 − Z) ⊙ X`.
pub(crate) fn initial_estimates(
    dnn_a: &Mlp,
    mixture: &Array2<f64>,
    cfg: &PipelineConfig,
) -> Result<[Array2<f64>; 2]> {
    let vocal = predict_mask(dnn_a, mixture, cfg)?;
    let acc = complement_mask(&vocal);
    Ok([apply_mask(&vocal, mixture)?, apply_mask(&acc, mixture)?])
}

/// Enhancer input rows: the separated blocks side by side.
pub(crate) fn enhancer_input(estimates: &[Array2<f64>; 2], cfg: &PipelineConfig) -> Array2<f64> {
    let block = |s: &Array2<f64>| {
        if cfg.normalize_enhancer_inputs {
            normalize_frames(s).0
        } else {
            s * cfg.input_gain
        }
    };
    let (a, b) = (block(&estimates[0]), block(&estimates[1]));
    concatenate(Axis(1), &[a.view(), b.view()]).expect("blocks share a frame count")
}

pub(crate) fn check_dnn_a(dnn_a: &Mlp, cfg: &PipelineConfig) -> Result<()> {
    let f = cfg.bins();
    if dnn_a.input_width() != f || dnn_a.output_width() != f {
        return Err(Error::InvalidConfig(format!(
            "separator is {}→{} wide but the STFT has {f} bins",
            dnn_a.input_width(),
            dnn_a.output_width()
        )));
    }
    Ok(())
}

pub(crate) fn check_dnn_b(dnn_b: &Mlp, cfg: &PipelineConfig) -> Result<()> {
    let w = cfg.sources * cfg.bins();
    if dnn_b.input_width() != w || dnn_b.output_width() != w {
        return Err(Error::InvalidConfig(format!(
            "enhancer is {}→{} wide but {} sources × {} bins need {w}",
            dnn_b.input_width(),
            dnn_b.output_width(),
            cfg.sources,
            cfg.bins()
        )));
    }
    Ok(())
}

fn stack_rows(parts: Vec<Array2<f64>>) -> Array2<f64> {
    let views: Vec<ArrayView2<f64>> = parts.iter().map(|p| p.view()).collect();
    concatenate(Axis(0), &views).expect("rows share a width")
}

fn nonempty(songs: &[&Song], what: &str) -> Result<()> {
    if songs.is_empty() {
        Err(Error::InvalidInput(format!("{what} split has no songs")))
    } else {
        Ok(())
    }
}

/// Separator training pairs: magnitude-domain mixtures `|S_1| + |S_2|`
/// (scaled by the input gain) and the vocal ratio masks.
pub fn build_sep_training(songs: &[&Song], cfg: &PipelineConfig) -> Result<(Array2<f64>, Array2<f64>)> {
    nonempty(songs, "separator training")?;
    let geom = cfg.geometry()?;
    let mut inputs = Vec::with_capacity(songs.len());
    let mut targets = Vec::with_capacity(songs.len());
    for song in songs {
        let (s1, s2) = source_magnitudes(song, geom)?;
        let x = &s1 + &s2;
        let mask = ratio_mask(&StackedSpectra::new(vec![s1, s2])?)?.swap_remove(0);
        inputs.push(x * cfg.input_gain);
        targets.push(mask.into_values());
    }
    Ok((stack_rows(inputs), stack_rows(targets)))
}

pub fn train_dnn_a(songs: &[&Song], cfg: &PipelineConfig) -> Result<TrainOutcome> {
    let (x, t) = build_sep_training(songs, cfg)?;
    let net = init_mlp(&cfg.dnn_a.layers, Stage::DnnAInit.seed(cfg))?;
    check_dnn_a(&net, cfg)?;
    let mut tc = cfg.dnn_a.train.clone();
    tc.seed = Stage::DnnAShuffle.seed(cfg);
    log::info!("training separator on {} frames", x.nrows());
    let mut out = train(&net, x.view(), t.view(), &CostSpec::MaskMse, &tc)?;
    out.net.tag = "A".into();
    Ok(out)
}

/// Enhancer training pairs. `U` holds the separator's estimates for each
/// song side by side; `V` holds the true source magnitudes with every frame
/// of every source block scaled to unit L2 norm.
pub fn gen_enh_training(
    songs: &[&Song],
    dnn_a: &Mlp,
    cfg: &PipelineConfig,
) -> Result<(Array2<f64>, Array2<f64>)> {
    nonempty(songs, "enhancer training")?;
    check_dnn_a(dnn_a, cfg)?;
    let geom = cfg.geometry()?;
    let mut us = Vec::with_capacity(songs.len());
    let mut vs = Vec::with_capacity(songs.len());
    for song in songs {
        let (s1, s2) = source_magnitudes(song, geom)?;
        let x = &s1 + &s2;
        let estimates = initial_estimates(dnn_a, &x, cfg)?;
        us.push(enhancer_input(&estimates, cfg));
        let (n1, _) = normalize_frames(&s1);
        let (n2, _) = normalize_frames(&s2);
        vs.push(concatenate(Axis(1), &[n1.view(), n2.view()]).expect("equal frame counts"));
    }
    Ok((stack_rows(us), stack_rows(vs)))
}

/// Train one enhancer. Every λ starts from the same initial weights and
/// visits minibatches in the same order.
pub fn train_dnn_b(
    u: ArrayView2<f64>,
    v: ArrayView2<f64>,
    lambda: f64,
    cfg: &PipelineConfig,
) -> Result<TrainOutcome> {
    if !(0.0..1.0).contains(&lambda) {
        return Err(Error::InvalidConfig(format!("lambda {lambda} outside [0, 1)")));
    }
    let net = init_mlp(&cfg.dnn_b.layers, Stage::DnnBInit.seed(cfg))?;
    check_dnn_b(&net, cfg)?;
    let spec = CostSpec::discriminative(lambda, cfg.sources, cfg.bins())?;
    let mut tc = cfg.dnn_b.train.clone();
    tc.seed = Stage::DnnBShuffle.seed(cfg);
    log::info!("training enhancer (lambda {lambda}) on {} frames", u.nrows());
    let mut out = train(&net, u, v, &spec, &tc)?;
    out.net.tag = super::dnn_tag(lambda);
    Ok(out)
}

/// One KL-NMF basis per source, learned from the reference magnitudes.
pub fn train_nmf_bases(songs: &[&Song], cfg: &PipelineConfig) -> Result<(NmfBasis, NmfBasis)> {
    nonempty(songs, "NMF training")?;
    let geom = cfg.geometry()?;
    let mut vocal = Vec::with_capacity(songs.len());
    let mut acc = Vec::with_capacity(songs.len());
    for song in songs {
        let (s1, s2) = source_magnitudes(song, geom)?;
        vocal.push(s1);
        acc.push(s2);
    }
    let (vocal, acc) = (stack_rows(vocal), stack_rows(acc));
    let fit = |s: &Array2<f64>, stage: Stage| {
        train_nmf(s.t(), cfg.nmf.rank, cfg.nmf.train_iters, stage.seed(cfg)).map(|f| f.basis)
    };
    Ok((fit(&vocal, Stage::NmfVocal)?, fit(&acc, Stage::NmfAccompaniment)?))
}
