//! Generalized-KL NMF used as the baseline enhancer.
//!
//! Matrices here are `bins × frames` (the transpose of the spectrogram
//! layout used elsewhere). Basis columns are kept at unit L1 norm.

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::masks::{complement_mask, Mask, DENOMINATOR_FLOOR};
use crate::textfile::{read_text, TextReader, TextWriter};

/// Floor for reconstructed entries inside update ratios and the divergence.
pub const RECON_FLOOR: f64 = 1e-12;

const MAGIC: &str = "maskforge-nmf-basis";
pub const BASIS_FORMAT_VERSION: u32 = 1;

/// Basis matrix `W`, `bins × K`.
#[derive(Debug, Clone, PartialEq)]
pub struct NmfBasis {
    pub w: Array2<f64>,
}

impl NmfBasis {
    pub fn new(w: Array2<f64>) -> Result<Self> {
        if w.iter().any(|v| *v < 0.0 || !v.is_finite()) {
            return Err(Error::InvalidInput("basis must be finite and nonnegative".into()));
        }
        if w.ncols() == 0 {
            return Err(Error::InvalidInput("basis has no columns".into()));
        }
        Ok(Self { w })
    }

    pub fn bins(&self) -> usize {
        self.w.nrows()
    }

    pub fn rank(&self) -> usize {
        self.w.ncols()
    }
}

/// Activation matrix `H`, `K × frames`.
#[derive(Debug, Clone, PartialEq)]
pub struct NmfActivations {
    pub h: Array2<f64>,
}

#[derive(Debug, Clone)]
pub struct NmfFit {
    pub basis: NmfBasis,
    pub activations: NmfActivations,
    /// Divergence after each iteration.
    pub divergence: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct NmfDecode {
    pub activations: NmfActivations,
    pub divergence: Vec<f64>,
}

fn check_nonneg(s: &ArrayView2<f64>, what: &str) -> Result<()> {
    if s.iter().any(|v| *v < 0.0 || !v.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "{what} must be finite and nonnegative"
        )));
    }
    Ok(())
}

/// Generalized KL divergence `Σ s·ln(s/r) − s + r` with `r` floored and
/// `0·ln 0 = 0`.
pub fn kl_divergence(s: ArrayView2<f64>, recon: ArrayView2<f64>) -> f64 {
    Zip::from(&s).and(&recon).fold(0.0, |acc, &x, &r| {
        let r = r.max(RECON_FLOOR);
        let log_term = if x > 0.0 { x * (x / r).ln() } else { 0.0 };
        acc + log_term - x + r
    })
}

fn ratio(s: &ArrayView2<f64>, recon: &Array2<f64>) -> Array2<f64> {
    let mut out = Array2::zeros(s.dim());
    Zip::from(&mut out)
        .and(s)
        .and(recon)
        .for_each(|o, &x, &r| *o = x / r.max(RECON_FLOOR));
    out
}

fn update_h(s: &ArrayView2<f64>, w: &Array2<f64>, h: &mut Array2<f64>, recon: &Array2<f64>) {
    let numer = w.t().dot(&ratio(s, recon));
    let col_sums = w.sum_axis(Axis(0));
    Zip::from(h.rows_mut())
        .and(numer.rows())
        .and(&col_sums)
        .for_each(|mut h_row, n_row, &denom| {
            let d = denom.max(RECON_FLOOR);
            Zip::from(&mut h_row)
                .and(&n_row)
                .for_each(|hv, &nv| *hv *= nv / d);
        });
}

fn update_w(s: &ArrayView2<f64>, w: &mut Array2<f64>, h: &Array2<f64>) {
    let recon = w.dot(h);
    let numer = ratio(s, &recon).dot(&h.t());
    let row_sums = h.sum_axis(Axis(1));
    Zip::from(w.rows_mut())
        .and(numer.rows())
        .for_each(|mut w_row, n_row| {
            Zip::from(&mut w_row)
                .and(&n_row)
                .and(&row_sums)
                .for_each(|wv, &nv, &denom| *wv *= nv / denom.max(RECON_FLOOR));
        });
}

/// Rescale `W` columns to unit L1 norm and push the scale into `H` rows,
/// leaving `W·H` unchanged.
pub fn normalize_basis(w: &mut Array2<f64>, h: &mut Array2<f64>) {
    let norms: Array1<f64> = w.sum_axis(Axis(0));
    for (k, &norm) in norms.iter().enumerate() {
        if norm > 0.0 {
            w.column_mut(k).mapv_inplace(|v| v / norm);
            h.row_mut(k).mapv_inplace(|v| v * norm);
        }
    }
}

fn random_positive(rng: &mut ChaCha8Rng, dim: (usize, usize)) -> Array2<f64> {
    // (0, 1]
    Array2::from_shape_simple_fn(dim, || 1.0 - rng.random::<f64>())
}

/// Learn `S ≈ W·H` by alternating Lee–Seung KL updates.
pub fn train_nmf(s: ArrayView2<f64>, rank: usize, iters: usize, seed: u64) -> Result<NmfFit> {
    check_nonneg(&s, "training spectrogram")?;
    if rank == 0 || iters == 0 {
        return Err(Error::InvalidConfig(format!(
            "rank ({rank}) and iteration count ({iters}) must be positive"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = random_positive(&mut rng, (s.nrows(), rank));
    let mut h = random_positive(&mut rng, (rank, s.ncols()));
    normalize_basis(&mut w, &mut h);
    let mut divergence = Vec::with_capacity(iters);
    let mut recon = w.dot(&h);
    for _ in 0..iters {
        update_h(&s, &w, &mut h, &recon);
        update_w(&s, &mut w, &h);
        normalize_basis(&mut w, &mut h);
        recon = w.dot(&h);
        divergence.push(kl_divergence(s, recon.view()));
    }
    Ok(NmfFit {
        basis: NmfBasis { w },
        activations: NmfActivations { h },
        divergence,
    })
}

/// Fit activations for `s` against a fixed basis.
pub fn decode_nmf(s: ArrayView2<f64>, basis: &NmfBasis, iters: usize, seed: u64) -> Result<NmfDecode> {
    check_nonneg(&s, "spectrogram to decode")?;
    if s.nrows() != basis.bins() {
        return Err(Error::Shape(format!(
            "spectrogram has {} bins, basis has {}",
            s.nrows(),
            basis.bins()
        )));
    }
    if iters == 0 {
        return Err(Error::InvalidConfig("decode iteration count must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut h = random_positive(&mut rng, (basis.rank(), s.ncols()));
    let mut divergence = Vec::with_capacity(iters);
    let mut recon = basis.w.dot(&h);
    for _ in 0..iters {
        update_h(&s, &basis.w, &mut h, &recon);
        recon = basis.w.dot(&h);
        divergence.push(kl_divergence(s, recon.view()));
    }
    Ok(NmfDecode {
        activations: NmfActivations { h },
        divergence,
    })
}

/// `M_1 = R_1 / (R_1 + R_2)` with near-silent bins split evenly, and `M_2 = 1 − M_1`.
pub fn nmf_masks(recon_1: ArrayView2<f64>, recon_2: ArrayView2<f64>) -> Result<(Mask, Mask)> {
    if recon_1.dim() != recon_2.dim() {
        return Err(Error::Shape(format!(
            "reconstructions {:?} and {:?} differ",
            recon_1.dim(),
            recon_2.dim()
        )));
    }
    check_nonneg(&recon_1, "reconstruction")?;
    check_nonneg(&recon_2, "reconstruction")?;
    let mut m = Array2::zeros(recon_1.dim());
    Zip::from(&mut m)
        .and(&recon_1)
        .and(&recon_2)
        .for_each(|m, &a, &b| {
            let t = a + b;
            *m = if t < DENOMINATOR_FLOOR {
                0.5
            } else {
                (a / t).min(1.0)
            };
        });
    let first = Mask::new(m)?;
    let second = complement_mask(&first);
    Ok((first, second))
}

pub fn save_basis(basis: &NmfBasis, path: &Path) -> Result<()> {
    let mut w = TextWriter::new(MAGIC, BASIS_FORMAT_VERSION);
    w.field("bins", basis.bins());
    w.field("rank", basis.rank());
    for row in basis.w.rows() {
        w.row(row.iter().copied());
    }
    w.write_to(path)
}

pub fn load_basis(path: &Path) -> Result<NmfBasis> {
    let text = read_text(path)?;
    let mut r = TextReader::open(&text, MAGIC, BASIS_FORMAT_VERSION)?;
    let bins: usize = r.parse_field("bins")?;
    let rank: usize = r.parse_field("rank")?;
    let mut flat = Vec::with_capacity(bins * rank);
    for f in 0..bins {
        flat.extend(r.row(&format!("W row {f}"), rank)?);
    }
    r.finish()?;
    let w = Array2::from_shape_vec((bins, rank), flat)
        .map_err(|e| Error::format("W", e.to_string()))?;
    NmfBasis::new(w).map_err(|e| Error::format("W", e.to_string()))
}
