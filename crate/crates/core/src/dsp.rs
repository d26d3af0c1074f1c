//! STFT analysis and synthesis plus per-frame gain handling.
//!
//! Spectrogram matrices are laid out `frames × bins` (rows are time frames).
//! Frames are not centred: frame `n` covers samples `[n·hop, n·hop + window_len)`
//! and the trailing partial frame is zero-padded.

use std::f64::consts::PI;

use ndarray::{Array1, Array2, ArrayView1, Axis, Zip};
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Synthesis divides by the overlap-added squared window, floored at this
/// fraction of its peak. Near the signal edges only a window tail covers a
/// sample, and dividing by a tiny sum would blow up whatever a modified
/// spectrum leaks there.
pub const WINDOW_SUM_FLOOR: f64 = 0.1;

/// A mono time-domain signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidInput("sample rate must be positive".into()));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite sample at index {i}")));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn zeros(len: usize, sample_rate: u32) -> Self {
        Self {
            samples: vec![0.0; len],
            sample_rate,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn truncated(&self, len: usize) -> Self {
        Self {
            samples: self.samples[..len.min(self.samples.len())].to_vec(),
            sample_rate: self.sample_rate,
        }
    }

    pub fn rms(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        (self.samples.iter().map(|s| s * s).sum::<f64>() / self.samples.len() as f64).sqrt()
    }
}

/// Truncate every waveform to the shortest common length.
pub fn align_lengths(waves: &[&Waveform]) -> Vec<Waveform> {
    let len = waves.iter().map(|w| w.len()).min().unwrap_or(0);
    waves.iter().map(|w| w.truncated(len)).collect()
}

/// Framing parameters shared by every spectrogram derived from one signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StftGeometry {
    pub window_len: usize,
    pub hop: usize,
    pub fft_len: usize,
}

impl StftGeometry {
    pub fn new(window_len: usize, hop: usize, fft_len: usize) -> Result<Self> {
        let geometry = Self {
            window_len,
            hop,
            fft_len,
        };
        geometry.validate()?;
        Ok(geometry)
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_len == 0 || self.fft_len == 0 {
            return Err(Error::InvalidConfig("window and FFT lengths must be positive".into()));
        }
        if self.window_len > self.fft_len {
            return Err(Error::InvalidConfig(format!(
                "window_len {} exceeds fft_len {}",
                self.window_len, self.fft_len
            )));
        }
        if self.hop == 0 || self.hop > self.window_len {
            return Err(Error::InvalidConfig(format!(
                "hop {} must lie in 1..={}",
                self.hop, self.window_len
            )));
        }
        Ok(())
    }

    /// One-sided bin count, `fft_len / 2 + 1`.
    pub fn bins(&self) -> usize {
        self.fft_len / 2 + 1
    }

    /// Number of frames needed to cover `len` samples.
    pub fn frame_count(&self, len: usize) -> usize {
        if len <= self.window_len {
            1
        } else {
            (len - self.window_len).div_ceil(self.hop) + 1
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrogram {
    pub values: Array2<Complex64>,
    pub geometry: StftGeometry,
}

/// Nonnegative magnitude spectrogram, `frames × bins`.
#[derive(Debug, Clone, PartialEq)]
pub struct MagSpectrogram {
    pub values: Array2<f64>,
    pub geometry: StftGeometry,
}

impl MagSpectrogram {
    pub fn new(values: Array2<f64>, geometry: StftGeometry) -> Result<Self> {
        if values.ncols() != geometry.bins() {
            return Err(Error::Shape(format!(
                "{} columns but geometry implies {} bins",
                values.ncols(),
                geometry.bins()
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidInput(
                "magnitudes must be finite and nonnegative".into(),
            ));
        }
        Ok(Self { values, geometry })
    }

    pub fn frames(&self) -> usize {
        self.values.nrows()
    }

    pub fn bins(&self) -> usize {
        self.values.ncols()
    }
}

/// Per-bin phase angles in `(-π, π]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseMatrix {
    pub values: Array2<f64>,
    pub geometry: StftGeometry,
}

/// Per-frame Euclidean norms of a spectrogram.
#[derive(Debug, Clone, PartialEq)]
pub struct GainVector {
    pub norms: Array1<f64>,
}

impl GainVector {
    pub fn len(&self) -> usize {
        self.norms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.norms.is_empty()
    }
}

/// Periodic Hann window of length `len`.
pub fn hann_window(len: usize) -> Vec<f64> {
    (0..len)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / len as f64).cos())
        .collect()
}

pub fn stft(wave: &Waveform, geometry: StftGeometry) -> Result<ComplexSpectrogram> {
    geometry.validate()?;
    if wave.is_empty() {
        return Err(Error::InvalidInput("cannot analyse an empty waveform".into()));
    }
    let window = hann_window(geometry.window_len);
    let frames = geometry.frame_count(wave.len());
    let bins = geometry.bins();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(geometry.fft_len);

    let mut values = Array2::<Complex64>::zeros((frames, bins));
    let mut buffer = vec![Complex64::new(0.0, 0.0); geometry.fft_len];
    for (n, mut row) in values.axis_iter_mut(Axis(0)).enumerate() {
        buffer.fill(Complex64::new(0.0, 0.0));
        let start = n * geometry.hop;
        let end = (start + geometry.window_len).min(wave.len());
        for (k, &s) in wave.samples[start..end].iter().enumerate() {
            buffer[k] = Complex64::new(s * window[k], 0.0);
        }
        fft.process(&mut buffer);
        for (dst, src) in row.iter_mut().zip(&buffer[..bins]) {
            *dst = *src;
        }
    }
    Ok(ComplexSpectrogram { values, geometry })
}

/// Inverse STFT from magnitude and phase, overlap-add with squared-window
/// normalisation, truncated or zero-padded to `target_len`.
pub fn istft(
    mag: &MagSpectrogram,
    phase: &PhaseMatrix,
    target_len: usize,
    sample_rate: u32,
) -> Result<Waveform> {
    if mag.values.dim() != phase.values.dim() || mag.geometry != phase.geometry {
        return Err(Error::Shape(format!(
            "magnitude {:?} and phase {:?} disagree",
            mag.values.dim(),
            phase.values.dim()
        )));
    }
    let geometry = mag.geometry;
    geometry.validate()?;
    let bins = geometry.bins();
    if mag.bins() != bins {
        return Err(Error::Shape(format!(
            "{} bins but geometry implies {bins}",
            mag.bins()
        )));
    }
    let window = hann_window(geometry.window_len);
    let frames = mag.frames();
    let out_len = if frames == 0 {
        0
    } else {
        (frames - 1) * geometry.hop + geometry.window_len
    };
    let mut output = vec![0.0; out_len];
    let mut window_sum = vec![0.0; out_len];
    let ifft = FftPlanner::<f64>::new().plan_fft_inverse(geometry.fft_len);
    let mut buffer = vec![Complex64::new(0.0, 0.0); geometry.fft_len];
    let scale = 1.0 / geometry.fft_len as f64;

    for n in 0..frames {
        for ((b, &m), &p) in buffer.iter_mut().zip(mag.values.row(n)).zip(phase.values.row(n)) {
            *b = Complex64::from_polar(m, p);
        }
        // Hermitian mirror for a real-valued frame.
        for f in bins..geometry.fft_len {
            buffer[f] = buffer[geometry.fft_len - f].conj();
        }
        buffer[0].im = 0.0;
        if geometry.fft_len.is_multiple_of(2) {
            buffer[geometry.fft_len / 2].im = 0.0;
        }
        ifft.process(&mut buffer);
        let start = n * geometry.hop;
        for k in 0..geometry.window_len {
            output[start + k] += buffer[k].re * scale * window[k];
            window_sum[start + k] += window[k] * window[k];
        }
    }
    let floor = WINDOW_SUM_FLOOR * window_sum.iter().copied().fold(0.0, f64::max);
    for (o, w) in output.iter_mut().zip(&window_sum) {
        *o /= w.max(floor).max(f64::MIN_POSITIVE);
    }
    output.resize(target_len, 0.0);
    Waveform::new(output, sample_rate)
}

/// Elementwise modulus and argument. A zero entry gets phase 0, and `-π`
/// is folded onto `π` so phases lie in `(-π, π]`.
pub fn magnitude_phase(spec: &ComplexSpectrogram) -> (MagSpectrogram, PhaseMatrix) {
    let mag = spec.values.mapv(|c| c.norm());
    let phase = spec.values.mapv(|c| {
        if c.re == 0.0 && c.im == 0.0 {
            0.0
        } else {
            let a = c.im.atan2(c.re);
            if a <= -PI {
                PI
            } else {
                a
            }
        }
    });
    (
        MagSpectrogram {
            values: mag,
            geometry: spec.geometry,
        },
        PhaseMatrix {
            values: phase,
            geometry: spec.geometry,
        },
    )
}

/// Convenience: `|STFT(wave)|` and its phase.
pub fn analyse(wave: &Waveform, geometry: StftGeometry) -> Result<(MagSpectrogram, PhaseMatrix)> {
    Ok(magnitude_phase(&stft(wave, geometry)?))
}

fn row_norm(row: ArrayView1<f64>) -> f64 {
    row.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn frame_norms(mag: &Array2<f64>) -> GainVector {
    GainVector {
        norms: mag.rows().into_iter().map(row_norm).collect(),
    }
}

/// Scale every nonzero row to unit L2 norm. Zero rows stay zero with gain 0.
pub fn normalize_frames(mag: &Array2<f64>) -> (Array2<f64>, GainVector) {
    let gains = frame_norms(mag);
    let mut normalized = mag.clone();
    for (mut row, &g) in normalized.rows_mut().into_iter().zip(gains.norms.iter()) {
        if g > 0.0 {
            row.mapv_inplace(|x| x / g);
        }
    }
    (normalized, gains)
}

/// Inverse of [`normalize_frames`]: scale row `n` by `gains[n]`.
pub fn denormalize_frames(normalized: &Array2<f64>, gains: &GainVector) -> Result<Array2<f64>> {
    if normalized.nrows() != gains.len() {
        return Err(Error::Shape(format!(
            "{} frames but {} gains",
            normalized.nrows(),
            gains.len()
        )));
    }
    let mut out = normalized.clone();
    Zip::from(out.rows_mut())
        .and(&gains.norms)
        .for_each(|mut row, &g| row.mapv_inplace(|x| x * g));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_wave(rng: &mut ChaCha8Rng, len: usize) -> Waveform {
        Waveform::new((0..len).map(|_| rng.random_range(-1.0..1.0)).collect(), 16_000).unwrap()
    }

    /// O(N²) DFT by definition.
    fn direct_dft(frame: &[f64], fft_len: usize) -> Vec<Complex64> {
        (0..fft_len / 2 + 1)
            .map(|k| {
                frame
                    .iter()
                    .enumerate()
                    .map(|(t, &x)| {
                        let angle = -2.0 * PI * (k * t) as f64 / fft_len as f64;
                        Complex64::new(x * angle.cos(), x * angle.sin())
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn zero_waveform_gives_zero_spectrogram() {
        let geom = StftGeometry::new(64, 16, 64).unwrap();
        let spec = stft(&Waveform::zeros(300, 8000), geom).unwrap();
        assert!(spec.values.iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn full_scale_geometry_has_1025_bins() {
        let geom = StftGeometry::new(2048, 512, 2048).unwrap();
        let spec = stft(&Waveform::zeros(5000, 44_100), geom).unwrap();
        assert_eq!(spec.values.ncols(), 1025);
        assert_eq!(geom.bins(), 1025);
    }

    #[test]
    fn rejects_bad_geometry_and_empty_input() {
        assert!(matches!(StftGeometry::new(128, 0, 128), Err(Error::InvalidConfig(_))));
        assert!(matches!(StftGeometry::new(256, 64, 128), Err(Error::InvalidConfig(_))));
        assert!(matches!(StftGeometry::new(64, 65, 64), Err(Error::InvalidConfig(_))));
        let geom = StftGeometry::new(64, 16, 64).unwrap();
        let empty = Waveform::new(vec![], 8000).unwrap();
        assert!(matches!(stft(&empty, geom), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn sinusoid_peak_matches_direct_dft() {
        let geom = StftGeometry::new(128, 32, 128).unwrap();
        let bin = 9;
        let samples: Vec<f64> = (0..1024)
            .map(|t| (2.0 * PI * bin as f64 * t as f64 / 128.0).sin())
            .collect();
        let wave = Waveform::new(samples.clone(), 8000).unwrap();
        let spec = stft(&wave, geom).unwrap();
        let window = hann_window(128);
        let n = 5;
        let frame: Vec<f64> = (0..128).map(|k| samples[n * 32 + k] * window[k]).collect();
        let oracle = direct_dft(&frame, 128);
        let argmax = |v: &[f64]| {
            v.iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .unwrap()
                .0
        };
        let oracle_mag: Vec<f64> = oracle.iter().map(|c| c.norm()).collect();
        let fast_mag: Vec<f64> = spec.values.row(n).iter().map(|c| c.norm()).collect();
        assert_eq!(argmax(&oracle_mag), bin);
        assert_eq!(argmax(&fast_mag), bin);
        for (a, b) in oracle.iter().zip(spec.values.row(n).iter()) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn trailing_partial_frame_is_zero_padded() {
        let geom = StftGeometry::new(64, 16, 64).unwrap();
        assert_eq!(geom.frame_count(64), 1);
        assert_eq!(geom.frame_count(65), 2);
        assert_eq!(geom.frame_count(80), 2);
        assert_eq!(geom.frame_count(81), 3);
        let wave = Waveform::new(vec![1.0; 81], 8000).unwrap();
        let spec = stft(&wave, geom).unwrap();
        assert_eq!(spec.values.nrows(), 3);
        assert!(spec.values.iter().all(|c| c.re.is_finite() && c.im.is_finite()));
    }

    #[test]
    fn round_trip_interior_error_is_tiny() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let geom = StftGeometry::new(256, 64, 256).unwrap();
        let wave = random_wave(&mut rng, 4 * 256 + 333);
        let (mag, phase) = analyse(&wave, geom).unwrap();
        let back = istft(&mag, &phase, wave.len(), wave.sample_rate).unwrap();
        let half = geom.window_len / 2;
        let range = half..wave.len() - half;
        let err: f64 = range
            .clone()
            .map(|i| (back.samples[i] - wave.samples[i]).powi(2))
            .sum::<f64>()
            .sqrt();
        let norm: f64 = range.map(|i| wave.samples[i].powi(2)).sum::<f64>().sqrt();
        assert!(err / norm < 1e-6, "relative error {}", err / norm);
    }

    #[test]
    fn istft_zero_magnitude_and_shape_errors() {
        let geom = StftGeometry::new(64, 16, 64).unwrap();
        let mag = MagSpectrogram::new(Array2::zeros((5, 33)), geom).unwrap();
        let phase = PhaseMatrix {
            values: Array2::from_elem((5, 33), 0.3),
            geometry: geom,
        };
        let out = istft(&mag, &phase, 100, 8000).unwrap();
        assert_eq!(out.len(), 100);
        assert!(out.samples.iter().all(|&s| s == 0.0));

        let bad = PhaseMatrix {
            values: Array2::zeros((4, 33)),
            geometry: geom,
        };
        assert!(matches!(istft(&mag, &bad, 100, 8000), Err(Error::Shape(_))));
    }

    #[test]
    fn phase_reuse_from_mixture_is_well_formed() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let geom = StftGeometry::new(128, 32, 128).unwrap();
        let a = random_wave(&mut rng, 1000);
        let b = random_wave(&mut rng, 1000);
        let mix = Waveform::new(
            a.samples.iter().zip(&b.samples).map(|(x, y)| x + y).collect(),
            a.sample_rate,
        )
        .unwrap();
        let (mag_a, _) = analyse(&a, geom).unwrap();
        let (_, phase_mix) = analyse(&mix, geom).unwrap();
        let out = istft(&mag_a, &phase_mix, 1000, a.sample_rate).unwrap();
        assert!(out.samples.iter().all(|s| s.is_finite()));
        assert!(out.samples.iter().any(|&s| s != 0.0));
    }

    #[test]
    fn magnitude_phase_conventions() {
        let geom = StftGeometry::new(2, 1, 2).unwrap();
        let spec = ComplexSpectrogram {
            values: array![[Complex64::new(3.0, 4.0), Complex64::new(0.0, 0.0)]],
            geometry: geom,
        };
        let (mag, phase) = magnitude_phase(&spec);
        assert_eq!(mag.values[(0, 0)], 5.0);
        assert_eq!(phase.values[(0, 0)], 4f64.atan2(3.0));
        assert_eq!(mag.values[(0, 1)], 0.0);
        assert_eq!(phase.values[(0, 1)], 0.0);

        let neg = ComplexSpectrogram {
            values: array![[Complex64::new(-1.0, -0.0), Complex64::new(-0.0, 0.0)]],
            geometry: geom,
        };
        let (_, phase) = magnitude_phase(&neg);
        assert_eq!(phase.values[(0, 0)], PI);
        assert_eq!(phase.values[(0, 1)], 0.0);
    }

    #[test]
    fn magnitude_phase_reconstructs_random_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let geom = StftGeometry::new(14, 7, 14).unwrap();
        let values = Array2::from_shape_fn((9, 8), |_| {
            Complex64::new(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0))
        });
        let spec = ComplexSpectrogram { values, geometry: geom };
        let (mag, phase) = magnitude_phase(&spec);
        let max_err = Zip::from(&spec.values)
            .and(&mag.values)
            .and(&phase.values)
            .fold(0.0f64, |acc, c, &m, &p| acc.max((Complex64::from_polar(m, p) - c).norm()));
        assert!(max_err < 1e-12, "{max_err}");
        assert!(phase.values.iter().all(|&p| p > -PI && p <= PI));
    }

    #[test]
    fn frame_norm_cases() {
        let m = array![[0.0, 0.0, 3.0, 0.0], [0.0, 0.0, 0.0, 0.0]];
        let g = frame_norms(&m);
        assert_eq!(g.norms.to_vec(), vec![3.0, 0.0]);

        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let m = Array2::from_shape_fn((6, 17), |_| rng.random_range(0.0..2.0));
        let g = frame_norms(&m);
        for n in 0..6 {
            let mut acc = 0.0;
            for f in 0..17 {
                acc += m[(n, f)] * m[(n, f)];
            }
            assert!((g.norms[n] - acc.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn normalize_frames_cases() {
        let (norm, gains) = normalize_frames(&array![[3.0, 4.0], [0.0, 0.0]]);
        assert!((norm[(0, 0)] - 0.6).abs() < 1e-15);
        assert!((norm[(0, 1)] - 0.8).abs() < 1e-15);
        assert_eq!(gains.norms.to_vec(), vec![5.0, 0.0]);
        assert_eq!(norm.row(1).to_vec(), vec![0.0, 0.0]);

        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let m = Array2::from_shape_fn((10, 20), |_| rng.random_range(0.0..5.0));
        let (norm, gains) = normalize_frames(&m);
        let back = denormalize_frames(&norm, &gains).unwrap();
        assert!((&back - &m).iter().all(|d| d.abs() < 1e-12));
        for g in frame_norms(&norm).norms.iter() {
            assert!((g - 1.0).abs() < 1e-12);
        }
    }
}
