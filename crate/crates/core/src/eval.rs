//! Projection-based SDR / SIR / SAR.
//!
//! This is the time-invariant, filter-free BSS-Eval variant: the estimate
//! is projected onto the raw target reference and onto the span of all
//! references, with no allowed distortion filter. Relative comparisons
//! between systems behave like the filtered toolbox; absolute dB values
//! will differ from it.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::dsp::Waveform;
use crate::error::{Error, Result};

/// Ratios are clamped to `±DB_CAP` instead of `±∞`.
pub const DB_CAP: f64 = 300.0;

/// Gram matrices with a larger condition number are rejected.
pub const MAX_GRAM_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct BssDecomposition {
    pub s_target: Vec<f64>,
    pub e_interf: Vec<f64>,
    pub e_artif: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceMetrics {
    pub sdr: f64,
    pub sir: f64,
    pub sar: f64,
}

impl SourceMetrics {
    pub fn mean(items: &[SourceMetrics]) -> SourceMetrics {
        let n = items.len() as f64;
        SourceMetrics {
            sdr: items.iter().map(|m| m.sdr).sum::<f64>() / n,
            sir: items.iter().map(|m| m.sir).sum::<f64>() / n,
            sar: items.iter().map(|m| m.sar).sum::<f64>() / n,
        }
    }
}

/// Metrics for one song: one entry per source plus their average.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub per_source: Vec<SourceMetrics>,
    pub average: SourceMetrics,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn energy(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn bss_decompose(
    estimate: &Waveform,
    references: &[Waveform],
    target_index: usize,
) -> Result<BssDecomposition> {
    let len = estimate.len();
    if len == 0 {
        return Err(Error::InvalidInput("empty estimate".into()));
    }
    if target_index >= references.len() {
        return Err(Error::InvalidInput(format!(
            "target index {target_index} with {} references",
            references.len()
        )));
    }
    if let Some(r) = references.iter().find(|r| r.len() != len) {
        return Err(Error::Shape(format!(
            "reference of length {} vs estimate of length {len}",
            r.len()
        )));
    }
    let est = &estimate.samples;
    let count = references.len();

    let gram = DMatrix::from_fn(count, count, |i, j| {
        dot(&references[i].samples, &references[j].samples)
    });
    let rhs = DVector::from_fn(count, |i, _| dot(&references[i].samples, est));
    let eig = SymmetricEigen::new(gram);
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if min.is_nan() || min <= 0.0 || max / min > MAX_GRAM_CONDITION {
        return Err(Error::DegenerateReferences(format!(
            "reference Gram matrix has eigenvalues in [{min:e}, {max:e}]"
        )));
    }
    let inv = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l));
    let coeffs = &eig.eigenvectors * inv * eig.eigenvectors.transpose() * rhs;

    let mut span_proj = vec![0.0; len];
    for (r, &c) in references.iter().zip(coeffs.iter()) {
        for (p, &x) in span_proj.iter_mut().zip(&r.samples) {
            *p += c * x;
        }
    }
    let target = &references[target_index].samples;
    let scale = dot(est, target) / energy(target);
    let s_target: Vec<f64> = target.iter().map(|x| scale * x).collect();
    let e_interf: Vec<f64> = span_proj.iter().zip(&s_target).map(|(p, s)| p - s).collect();
    let e_artif: Vec<f64> = est.iter().zip(&span_proj).map(|(e, p)| e - p).collect();
    Ok(BssDecomposition {
        s_target,
        e_interf,
        e_artif,
    })
}

/// `10·log10(num/den)`, capped at `±DB_CAP`. A zero numerator maps to the
/// lower cap, a zero denominator (with nonzero numerator) to the upper one.
pub fn ratio_db(num: f64, den: f64) -> f64 {
    if num <= 0.0 {
        -DB_CAP
    } else if den <= 0.0 {
        DB_CAP
    } else {
        (10.0 * (num / den).log10()).clamp(-DB_CAP, DB_CAP)
    }
}

pub fn sdr_sir_sar(d: &BssDecomposition) -> SourceMetrics {
    let target = energy(&d.s_target);
    let interf = energy(&d.e_interf);
    let artif = energy(&d.e_artif);
    let distortion: Vec<f64> = d.e_interf.iter().zip(&d.e_artif).map(|(i, a)| i + a).collect();
    let signal: Vec<f64> = d.s_target.iter().zip(&d.e_interf).map(|(s, i)| s + i).collect();
    SourceMetrics {
        sdr: ratio_db(target, energy(&distortion)),
        sir: ratio_db(target, interf),
        sar: ratio_db(energy(&signal), artif),
    }
}

/// Score every estimate against its own reference.
pub fn song_report(estimates: &[Waveform], references: &[Waveform]) -> Result<MetricReport> {
    if estimates.len() != references.len() || estimates.is_empty() {
        return Err(Error::Shape(format!(
            "{} estimates for {} references",
            estimates.len(),
            references.len()
        )));
    }
    let per_source = estimates
        .iter()
        .enumerate()
        .map(|(i, est)| bss_decompose(est, references, i).map(|d| sdr_sir_sar(&d)))
        .collect::<Result<Vec<_>>>()?;
    let average = SourceMetrics::mean(&per_source);
    Ok(MetricReport {
        per_source,
        average,
    })
}

/// One evaluated (song, model) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SongResult {
    pub song_id: String,
    pub model: String,
    pub report: MetricReport,
}

pub const SOURCE_NAMES: [&str; 2] = ["vocal", "accompaniment"];

fn source_name(i: usize) -> String {
    SOURCE_NAMES
        .get(i)
        .map(|s| s.to_string())
        .unwrap_or_else(|| format!("source_{}", i + 1))
}

/// `song_id,model,source,sdr_db,sir_db,sar_db`, one row per source.
pub fn metrics_csv(results: &[SongResult]) -> String {
    let mut out = String::from("song_id,model,source,sdr_db,sir_db,sar_db\n");
    for r in results {
        for (i, m) in r.report.per_source.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{:.6},{:.6},{:.6}",
                r.song_id,
                r.model,
                source_name(i),
                m.sdr,
                m.sir,
                m.sar
            )
            .unwrap();
        }
    }
    out
}

/// Per-song source averages, the quantity each box in the model plots.
pub fn song_average_csv(results: &[SongResult]) -> String {
    let mut out = String::from("song_id,model,sdr_db,sir_db,sar_db\n");
    for r in results {
        let m = r.report.average;
        writeln!(
            out,
            "{},{},{:.6},{:.6},{:.6}",
            r.song_id, r.model, m.sdr, m.sir, m.sar
        )
        .unwrap();
    }
    out
}

/// Mean and median of the per-song averages for one model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSummary {
    pub model: String,
    pub songs: usize,
    pub mean: SourceMetrics,
    pub median: SourceMetrics,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Summaries in first-appearance order of the models.
pub fn summarize(results: &[SongResult]) -> Vec<ModelSummary> {
    let mut models: Vec<&str> = Vec::new();
    for r in results {
        if !models.contains(&r.model.as_str()) {
            models.push(&r.model);
        }
    }
    models
        .into_iter()
        .map(|model| {
            let avgs: Vec<SourceMetrics> = results
                .iter()
                .filter(|r| r.model == model)
                .map(|r| r.report.average)
                .collect();
            let pick = |f: fn(&SourceMetrics) -> f64| avgs.iter().map(f).collect::<Vec<_>>();
            ModelSummary {
                model: model.to_string(),
                songs: avgs.len(),
                mean: SourceMetrics::mean(&avgs),
                median: SourceMetrics {
                    sdr: median(&mut pick(|m| m.sdr)),
                    sir: median(&mut pick(|m| m.sir)),
                    sar: median(&mut pick(|m| m.sar)),
                },
            }
        })
        .collect()
}

/// `model,metric,mean_db,median_db,songs`.
pub fn summary_csv(summaries: &[ModelSummary]) -> String {
    let mut out = String::from("model,metric,mean_db,median_db,songs\n");
    for s in summaries {
        for (name, mean, med) in [
            ("sdr", s.mean.sdr, s.median.sdr),
            ("sir", s.mean.sir, s.median.sir),
            ("sar", s.mean.sar, s.median.sar),
        ] {
            writeln!(out, "{},{name},{mean:.6},{med:.6},{}", s.model, s.songs).unwrap();
        }
    }
    out
}

/// Plain-text table for terminal output.
pub fn summary_table(summaries: &[ModelSummary]) -> String {
    let mut out = format!(
        "{:<6} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9}\n",
        "model", "SDR mean", "SDR med", "SIR mean", "SIR med", "SAR mean", "SAR med"
    );
    for s in summaries {
        writeln!(
            out,
            "{:<6} {:>9.3} {:>9.3} {:>9.3} {:>9.3} {:>9.3} {:>9.3}",
            s.model, s.mean.sdr, s.median.sdr, s.mean.sir, s.median.sir, s.mean.sar, s.median.sar
        )
        .unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn wave(samples: Vec<f64>) -> Waveform {
        Waveform::new(samples, 8000).unwrap()
    }

    fn random(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
        (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    /// Exactly orthogonal pair: disjoint supports on even/odd samples.
    fn orthogonal_pair(rng: &mut ChaCha8Rng, len: usize) -> (Vec<f64>, Vec<f64>) {
        let a = (0..len)
            .map(|i| if i % 2 == 0 { rng.random_range(-1.0..1.0) } else { 0.0 })
            .collect();
        let b = (0..len)
            .map(|i| if i % 2 == 1 { rng.random_range(-0.5..0.5) } else { 0.0 })
            .collect();
        (a, b)
    }

    #[test]
    fn perfect_and_scaled_estimates_hit_the_cap() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let refs = vec![wave(random(&mut rng, 200)), wave(random(&mut rng, 200))];
        for c in [1.0, 0.3, 4.0] {
            let est = wave(refs[0].samples.iter().map(|x| c * x).collect());
            let d = bss_decompose(&est, &refs, 0).unwrap();
            let m = sdr_sir_sar(&d);
            assert_eq!(m.sdr, DB_CAP);
            assert_eq!(m.sir, DB_CAP);
            assert!(d.e_interf.iter().chain(&d.e_artif).all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn orthogonal_mixture_sir_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (a, b) = orthogonal_pair(&mut rng, 300);
        let est = wave(a.iter().zip(&b).map(|(x, y)| x + y).collect());
        let refs = vec![wave(a.clone()), wave(b.clone())];
        let d = bss_decompose(&est, &refs, 0).unwrap();
        let m = sdr_sir_sar(&d);
        let closed = 10.0 * (energy(&a) / energy(&b)).log10();
        assert!((m.sir - closed).abs() < 1e-9);
        // Target projection of s1+s2 onto s1 is s1; interference is s2.
        for (t, x) in d.s_target.iter().zip(&a) {
            assert!((t - x).abs() < 1e-12);
        }
    }

    #[test]
    fn decomposition_is_exact_and_artifact_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let refs = vec![wave(random(&mut rng, 150)), wave(random(&mut rng, 150))];
            let est = wave(random(&mut rng, 150));
            let d = bss_decompose(&est, &refs, 1).unwrap();
            let norm = energy(&est.samples).sqrt();
            for i in 0..150 {
                let sum = d.s_target[i] + d.e_interf[i] + d.e_artif[i];
                assert!((sum - est.samples[i]).abs() <= 1e-9 * norm);
            }
            for r in &refs {
                let ip = dot(&d.e_artif, &r.samples);
                assert!(ip.abs() <= 1e-9 * norm * energy(&r.samples).sqrt());
            }
        }
    }

    #[test]
    fn metrics_match_definitions() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let d = BssDecomposition {
            s_target: random(&mut rng, 50),
            e_interf: random(&mut rng, 50),
            e_artif: random(&mut rng, 50),
        };
        let m = sdr_sir_sar(&d);
        let mut st = 0.0;
        let mut ei = 0.0;
        let mut ea = 0.0;
        let mut dist = 0.0;
        let mut sig = 0.0;
        for i in 0..50 {
            st += d.s_target[i].powi(2);
            ei += d.e_interf[i].powi(2);
            ea += d.e_artif[i].powi(2);
            dist += (d.e_interf[i] + d.e_artif[i]).powi(2);
            sig += (d.s_target[i] + d.e_interf[i]).powi(2);
        }
        assert!((m.sdr - 10.0 * (st / dist).log10()).abs() < 1e-9);
        assert!((m.sir - 10.0 * (st / ei).log10()).abs() < 1e-9);
        assert!((m.sar - 10.0 * (sig / ea).log10()).abs() < 1e-9);

        let equal = BssDecomposition {
            s_target: vec![1.0, 0.0],
            e_interf: vec![0.0, 1.0],
            e_artif: vec![0.0, 0.0],
        };
        let m = sdr_sir_sar(&equal);
        assert!(m.sir.abs() < 1e-12);
        assert_eq!(m.sar, DB_CAP);

        let clean = BssDecomposition {
            s_target: vec![1.0, 2.0],
            e_interf: vec![0.0, 0.0],
            e_artif: vec![0.0, 0.0],
        };
        let m = sdr_sir_sar(&clean);
        assert_eq!((m.sdr, m.sir), (DB_CAP, DB_CAP));
    }

    #[test]
    fn degenerate_and_mismatched_references() {
        let r = wave(vec![1.0, 2.0, 3.0]);
        let twice = wave(vec![2.0, 4.0, 6.0]);
        assert!(matches!(
            bss_decompose(&r, &[r.clone(), twice], 0),
            Err(Error::DegenerateReferences(_))
        ));
        assert!(matches!(
            bss_decompose(&r, &[r.clone(), wave(vec![0.0; 3])], 0),
            Err(Error::DegenerateReferences(_))
        ));
        assert!(matches!(
            bss_decompose(&r, &[wave(vec![1.0, 2.0])], 0),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn song_report_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (a, b) = orthogonal_pair(&mut rng, 400);
        let refs = vec![wave(a.clone()), wave(b.clone())];

        let perfect = song_report(&refs, &refs).unwrap();
        assert_eq!(perfect.average.sdr, DB_CAP);
        assert_eq!(perfect.average.sir, DB_CAP);

        let swapped = song_report(&[refs[1].clone(), refs[0].clone()], &refs).unwrap();
        assert!(swapped.per_source.iter().all(|m| m.sir == -DB_CAP));

        let mix = wave(a.iter().zip(&b).map(|(x, y)| x + y).collect());
        let r = song_report(&[mix.clone(), mix], &refs).unwrap();
        let (ea, eb) = (energy(&a), energy(&b));
        let want = [10.0 * (ea / eb).log10(), 10.0 * (eb / ea).log10()];
        for (m, w) in r.per_source.iter().zip(want) {
            assert!(m.sdr.is_finite());
            assert!((m.sdr - w).abs() < 1e-9);
            assert!((m.sir - w).abs() < 1e-9);
        }
        assert!((r.average.sdr - (want[0] + want[1]) / 2.0).abs() < 1e-9);
    }

    #[test]
    fn added_interference_lowers_sir() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (a, b) = orthogonal_pair(&mut rng, 300);
        let refs = vec![wave(a.clone()), wave(b.clone())];
        let mut last = f64::INFINITY;
        for eps in [0.01, 0.05, 0.2, 0.8] {
            let est = wave(a.iter().zip(&b).map(|(x, y)| x + eps * y).collect());
            let sir = sdr_sir_sar(&bss_decompose(&est, &refs, 0).unwrap()).sir;
            assert!(sir < last);
            last = sir;
        }
    }

    #[test]
    fn summaries_and_csv_shapes() {
        let m = |v: f64| SourceMetrics { sdr: v, sir: v + 1.0, sar: v + 2.0 };
        let results: Vec<SongResult> = ["a", "b", "c"]
            .iter()
            .enumerate()
            .flat_map(|(i, id)| {
                ["S", "D0"].iter().map(move |model| SongResult {
                    song_id: id.to_string(),
                    model: model.to_string(),
                    report: MetricReport {
                        per_source: vec![m(i as f64), m(i as f64 + 2.0)],
                        average: m(i as f64 + 1.0),
                    },
                })
            })
            .collect();
        assert_eq!(metrics_csv(&results).lines().count(), 1 + 3 * 2 * 2);
        let s = summarize(&results);
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].model, "S");
        assert_eq!(s[0].mean.sdr, 2.0);
        assert_eq!(s[0].median.sir, 3.0);
        assert_eq!(summary_csv(&s).lines().count(), 1 + 2 * 3);
    }
}
