//! Time-frequency masks: reference ratio masks, complements, masked
//! estimates and the gain-weighted final mask of the enhancement stage.

use ndarray::{concatenate, s, Array2, ArrayView2, Axis, Zip};

use crate::dsp::GainVector;
use crate::error::{Error, Result};

/// Bins whose total falls below this are treated as silent and split evenly
/// between sources. Clamping the denominator instead would leave the shares
/// of such bins summing to less than one.
pub const DENOMINATOR_FLOOR: f64 = 1e-12;

/// A matrix with entries in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    values: Array2<f64>,
}

impl Mask {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidInput(format!("mask entry {v} outside [0, 1]")));
        }
        Ok(Self { values })
    }

    /// Clamp an arbitrary finite matrix into mask range.
    pub fn clamped(values: Array2<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("mask contains non-finite values".into()));
        }
        Ok(Self {
            values: values.mapv(|v| v.clamp(0.0, 1.0)),
        })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    pub fn dim(&self) -> (usize, usize) {
        self.values.dim()
    }
}

/// An ordered list of equally shaped per-source matrices, conceptually the
/// horizontal concatenation `[B_1, …, B_I]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedSpectra {
    blocks: Vec<Array2<f64>>,
}

impl StackedSpectra {
    pub fn new(blocks: Vec<Array2<f64>>) -> Result<Self> {
        if blocks.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "need at least two sources, got {}",
                blocks.len()
            )));
        }
        let dim = blocks[0].dim();
        if let Some((i, b)) = blocks.iter().enumerate().find(|(_, b)| b.dim() != dim) {
            return Err(Error::Shape(format!(
                "block {i} has shape {:?}, expected {dim:?}",
                b.dim()
            )));
        }
        Ok(Self { blocks })
    }

    /// Split a wide matrix into `sources` equal-width blocks.
    pub fn from_wide(wide: ArrayView2<f64>, sources: usize) -> Result<Self> {
        if sources == 0 || !wide.ncols().is_multiple_of(sources) {
            return Err(Error::Shape(format!(
                "width {} does not split into {sources} equal blocks",
                wide.ncols()
            )));
        }
        let width = wide.ncols() / sources;
        Self::new(
            (0..sources)
                .map(|i| wide.slice(s![.., i * width..(i + 1) * width]).to_owned())
                .collect(),
        )
    }

    pub fn to_wide(&self) -> Array2<f64> {
        let views: Vec<_> = self.blocks.iter().map(|b| b.view()).collect();
        concatenate(Axis(1), &views).expect("blocks share shape")
    }

    pub fn blocks(&self) -> &[Array2<f64>] {
        &self.blocks
    }

    pub fn into_blocks(self) -> Vec<Array2<f64>> {
        self.blocks
    }

    pub fn sources(&self) -> usize {
        self.blocks.len()
    }

    pub fn block_dim(&self) -> (usize, usize) {
        self.blocks[0].dim()
    }
}

/// Per-bin shares `part_i / Σ_j part_j`, shared by every mask rule.
fn share_masks(parts: &[Array2<f64>]) -> Vec<Mask> {
    let count = parts.len();
    let even = 1.0 / count as f64;
    let mut total = Array2::<f64>::zeros(parts[0].dim());
    for p in parts {
        total += p;
    }
    parts
        .iter()
        .map(|p| {
            let mut m = Array2::<f64>::zeros(p.dim());
            Zip::from(&mut m).and(p).and(&total).for_each(|m, &x, &t| {
                *m = if t < DENOMINATOR_FLOOR {
                    even
                } else {
                    (x / t).min(1.0)
                };
            });
            Mask { values: m }
        })
        .collect()
}

/// Reference ratio masks `S_i / Σ_j S_j`.
pub fn ratio_mask(sources: &StackedSpectra) -> Result<Vec<Mask>> {
    if sources.blocks.iter().flatten().any(|v| *v < 0.0 || !v.is_finite()) {
        return Err(Error::InvalidInput(
            "source magnitudes must be finite and nonnegative".into(),
        ));
    }
    Ok(share_masks(&sources.blocks))
}

pub fn complement_mask(m: &Mask) -> Mask {
    Mask {
        values: m.values.mapv(|v| 1.0 - v),
    }
}

/// Elementwise product `m ⊙ mixture`.
pub fn apply_mask(m: &Mask, mixture: &Array2<f64>) -> Result<Array2<f64>> {
    if m.dim() != mixture.dim() {
        return Err(Error::Shape(format!(
            "mask {:?} vs mixture {:?}",
            m.dim(),
            mixture.dim()
        )));
    }
    Ok(&m.values * mixture)
}

/// Final enhancement masks: each output block is rescaled frame-wise by its
/// source gain, then the scaled blocks are turned into per-bin shares.
pub fn final_mask(outputs: &StackedSpectra, gains: &[GainVector]) -> Result<Vec<Mask>> {
    if gains.len() != outputs.sources() {
        return Err(Error::Shape(format!(
            "{} gain vectors for {} sources",
            gains.len(),
            outputs.sources()
        )));
    }
    let frames = outputs.block_dim().0;
    let mut scaled = Vec::with_capacity(gains.len());
    for (block, gain) in outputs.blocks.iter().zip(gains) {
        if gain.len() != frames {
            return Err(Error::Shape(format!(
                "gain vector of length {} for {frames} frames",
                gain.len()
            )));
        }
        if gain.norms.iter().any(|g| *g < 0.0 || !g.is_finite()) {
            return Err(Error::InvalidInput("gains must be finite and nonnegative".into()));
        }
        let mut b = block.clone();
        Zip::from(b.rows_mut())
            .and(&gain.norms)
            .for_each(|mut row, &g| row.mapv_inplace(|v| v * g));
        scaled.push(b);
    }
    Ok(share_masks(&scaled))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array1};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_nonneg(rng: &mut ChaCha8Rng, dim: (usize, usize)) -> Array2<f64> {
        Array2::from_shape_fn(dim, |_| {
            // sprinkle exact zeros to exercise the 0/0 rule
            if rng.random_bool(0.15) {
                0.0
            } else {
                rng.random_range(0.0..4.0)
            }
        })
    }

    #[test]
    fn identical_sources_split_evenly() {
        let s = Array2::from_elem((3, 4), 2.5);
        let masks = ratio_mask(&StackedSpectra::new(vec![s.clone(), s]).unwrap()).unwrap();
        for m in &masks {
            assert!(m.values().iter().all(|&v| v == 0.5));
        }
    }

    #[test]
    fn ratio_mask_direct_values() {
        let masks = ratio_mask(
            &StackedSpectra::new(vec![array![[3.0, 0.0]], array![[1.0, 0.0]]]).unwrap(),
        )
        .unwrap();
        assert_eq!(masks[0].values()[(0, 0)], 0.75);
        assert_eq!(masks[1].values()[(0, 0)], 0.25);
        assert_eq!(masks[0].values()[(0, 1)], 0.5);
        assert_eq!(masks[1].values()[(0, 1)], 0.5);
    }

    #[test]
    fn ratio_mask_zero_bins_and_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let blocks: Vec<_> = (0..3).map(|_| random_nonneg(&mut rng, (20, 30))).collect();
        let mut blocks = blocks;
        for b in blocks.iter_mut() {
            b[(0, 0)] = 0.0;
        }
        let masks = ratio_mask(&StackedSpectra::new(blocks).unwrap()).unwrap();
        for m in &masks {
            assert_eq!(m.values()[(0, 0)], 1.0 / 3.0);
        }
        for n in 0..20 {
            for f in 0..30 {
                let mut sum = 0.0;
                for m in &masks {
                    sum += m.values()[(n, f)];
                }
                assert!((sum - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ratio_mask_errors() {
        assert!(matches!(
            StackedSpectra::new(vec![Array2::zeros((2, 2)), Array2::zeros((2, 3))]),
            Err(Error::Shape(_))
        ));
        let neg = StackedSpectra::new(vec![array![[-1.0]], array![[1.0]]]).unwrap();
        assert!(matches!(ratio_mask(&neg), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn complement_cases() {
        let zero = Mask::new(Array2::zeros((2, 3))).unwrap();
        assert!(complement_mask(&zero).values().iter().all(|&v| v == 1.0));

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_nonneg(&mut rng, (8, 9));
        let b = random_nonneg(&mut rng, (8, 9));
        let masks = ratio_mask(&StackedSpectra::new(vec![a, b]).unwrap()).unwrap();
        let comp = complement_mask(&masks[0]);
        let sum = comp.values() + masks[0].values();
        assert!(sum.iter().all(|&v| (v - 1.0).abs() < 1e-15));
        for (c, m) in comp.values().iter().zip(masks[1].values()) {
            assert!((c - m).abs() < 1e-15);
        }
    }

    #[test]
    fn apply_mask_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let y = random_nonneg(&mut rng, (5, 7));
        let ones = Mask::new(Array2::ones((5, 7))).unwrap();
        assert_eq!(apply_mask(&ones, &y).unwrap(), y);
        let zeros = Mask::new(Array2::zeros((5, 7))).unwrap();
        assert!(apply_mask(&zeros, &y).unwrap().iter().all(|&v| v == 0.0));
        assert!(matches!(
            apply_mask(&ones, &Array2::zeros((5, 6))),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn masked_estimates_add_back_to_mixture() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let sources: Vec<_> = (0..2).map(|_| random_nonneg(&mut rng, (12, 15))).collect();
        let y = &sources[0] + &sources[1];
        let masks = ratio_mask(&StackedSpectra::new(sources.clone()).unwrap()).unwrap();
        let est: Vec<_> = masks.iter().map(|m| apply_mask(m, &y).unwrap()).collect();
        let total = &est[0] + &est[1];
        for ((t, yv), (e0, s0)) in total
            .iter()
            .zip(&y)
            .zip(est[0].iter().zip(&sources[0]))
        {
            assert!((t - yv).abs() < 1e-12);
            if *yv > 0.0 {
                assert!((e0 - s0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn final_mask_cases() {
        let q = Array2::from_elem((4, 3), 0.3);
        let outputs = StackedSpectra::new(vec![q.clone(), q.clone()]).unwrap();
        let equal = vec![
            GainVector {
                norms: Array1::from_elem(4, 1.7),
            };
            2
        ];
        for m in final_mask(&outputs, &equal).unwrap() {
            assert!(m.values().iter().all(|&v| v == 0.5));
        }
        let gains = vec![
            GainVector {
                norms: Array1::from_elem(4, 2.0),
            },
            GainVector {
                norms: Array1::from_elem(4, 1.0),
            },
        ];
        let masks = final_mask(&outputs, &gains).unwrap();
        assert!(masks[0].values().iter().all(|&v| (v - 2.0 / 3.0).abs() < 1e-15));
        assert!(masks[1].values().iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));

        let short = vec![
            GainVector {
                norms: Array1::from_elem(3, 1.0),
            };
            2
        ];
        assert!(matches!(final_mask(&outputs, &short), Err(Error::Shape(_))));
    }

    #[test]
    fn final_mask_zero_gains_fall_back_to_even_split() {
        let outputs =
            StackedSpectra::new(vec![Array2::from_elem((2, 2), 0.4), Array2::from_elem((2, 2), 0.9)])
                .unwrap();
        let gains = vec![
            GainVector {
                norms: array![0.0, 1.0],
            },
            GainVector {
                norms: array![0.0, 0.0],
            },
        ];
        let masks = final_mask(&outputs, &gains).unwrap();
        assert_eq!(masks[0].values().row(0).to_vec(), vec![0.5, 0.5]);
        assert_eq!(masks[0].values().row(1).to_vec(), vec![1.0, 1.0]);
        assert_eq!(masks[1].values().row(1).to_vec(), vec![0.0, 0.0]);
    }

    #[test]
    fn tiny_totals_still_sum_to_one() {
        let outputs =
            StackedSpectra::new(vec![Array2::from_elem((1, 3), 0.3), Array2::from_elem((1, 3), 0.6)])
                .unwrap();
        let gains = vec![
            GainVector {
                norms: array![1e-14],
            },
            GainVector {
                norms: array![2e-14],
            },
        ];
        let masks = final_mask(&outputs, &gains).unwrap();
        let sum = masks[0].values() + masks[1].values();
        assert!(sum.iter().all(|v| (v - 1.0).abs() < 1e-15));
    }

    fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Array2<f64>> {
        proptest::collection::vec(prop_oneof![Just(0.0), 0.0..10.0f64], rows * cols)
            .prop_map(move |v| Array2::from_shape_vec((rows, cols), v).unwrap())
    }

    proptest! {
        #[test]
        fn final_mask_scale_invariant(
            q1 in matrix(5, 4),
            q2 in matrix(5, 4),
            g1 in proptest::collection::vec(0.0..5.0f64, 5),
            g2 in proptest::collection::vec(0.0..5.0f64, 5),
            c in 0.01..100.0f64,
        ) {
            let outputs = StackedSpectra::new(vec![q1.mapv(|v| v / 10.0), q2.mapv(|v| v / 10.0)]).unwrap();
            let gains = vec![
                GainVector { norms: Array1::from(g1.clone()) },
                GainVector { norms: Array1::from(g2.clone()) },
            ];
            let scaled = vec![
                GainVector { norms: Array1::from(g1).mapv(|g| g * c) },
                GainVector { norms: Array1::from(g2).mapv(|g| g * c) },
            ];
            let a = final_mask(&outputs, &gains).unwrap();
            let b = final_mask(&outputs, &scaled).unwrap();
            for (ma, mb) in a.iter().zip(&b) {
                for (x, y) in ma.values().iter().zip(mb.values()) {
                    prop_assert!((x - y).abs() < 1e-9);
                }
            }
            let sum = a[0].values() + a[1].values();
            prop_assert!(sum.iter().all(|s| (s - 1.0).abs() < 1e-9));
        }

        #[test]
        fn ratio_masks_in_range_and_sum_to_one(a in matrix(6, 5), b in matrix(6, 5), c in matrix(6, 5)) {
            let masks = ratio_mask(&StackedSpectra::new(vec![a, b, c]).unwrap()).unwrap();
            let mut sum = Array2::<f64>::zeros((6, 5));
            for m in &masks {
                prop_assert!(m.values().iter().all(|v| (0.0..=1.0).contains(v)));
                sum += m.values();
            }
            prop_assert!(sum.iter().all(|s| (s - 1.0).abs() < 1e-9));
        }
    }
}
