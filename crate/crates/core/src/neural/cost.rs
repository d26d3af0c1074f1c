//! Mask regression cost and the discriminative enhancement cost.
//!
//! Both costs are plain sums over every entry of the batch; callers that
//! want a per-frame figure divide by the row count themselves.

use ndarray::{s, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CostSpec {
    /// `Σ (Z − M)²`
    MaskMse,
    /// `Σ (Q − V)² − λ Σ_i Σ_{j≠i} Σ (Q_i − V_j)²` over equal-width blocks.
    Discriminative { lambda: f64, source_dims: Vec<usize> },
}

impl CostSpec {
    pub fn discriminative(lambda: f64, sources: usize, width: usize) -> Result<Self> {
        let spec = CostSpec::Discriminative {
            lambda,
            source_dims: vec![width; sources],
        };
        spec.validate(width * sources)?;
        Ok(spec)
    }

    pub fn validate(&self, output_width: usize) -> Result<()> {
        match self {
            CostSpec::MaskMse => Ok(()),
            CostSpec::Discriminative {
                lambda,
                source_dims,
            } => {
                if !(0.0..1.0).contains(lambda) {
                    return Err(Error::InvalidConfig(format!(
                        "lambda {lambda} outside [0, 1)"
                    )));
                }
                if source_dims.len() < 2 {
                    return Err(Error::InvalidConfig(
                        "discriminative cost needs at least two sources".into(),
                    ));
                }
                if source_dims.iter().any(|&d| d != source_dims[0] || d == 0) {
                    return Err(Error::InvalidConfig(format!(
                        "source blocks must share one nonzero width, got {source_dims:?}"
                    )));
                }
                let total: usize = source_dims.iter().sum();
                if total != output_width {
                    return Err(Error::InvalidConfig(format!(
                        "source_dims sum to {total}, output width is {output_width}"
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn lambda(&self) -> f64 {
        match self {
            CostSpec::MaskMse => 0.0,
            CostSpec::Discriminative { lambda, .. } => *lambda,
        }
    }
}

fn check_shapes(pred: &ArrayView2<f64>, target: &ArrayView2<f64>) -> Result<()> {
    if pred.dim() != target.dim() {
        return Err(Error::Shape(format!(
            "prediction {:?} vs target {:?}",
            pred.dim(),
            target.dim()
        )));
    }
    Ok(())
}

fn squared_distance(a: ArrayView2<f64>, b: ArrayView2<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum()
}

pub fn cost_mask_mse(pred: ArrayView2<f64>, target: ArrayView2<f64>) -> Result<f64> {
    check_shapes(&pred, &target)?;
    Ok(squared_distance(pred, target))
}

pub fn cost_discriminative(
    pred: ArrayView2<f64>,
    target: ArrayView2<f64>,
    spec: &CostSpec,
) -> Result<f64> {
    check_shapes(&pred, &target)?;
    let CostSpec::Discriminative {
        lambda,
        source_dims,
    } = spec
    else {
        return Err(Error::InvalidConfig(
            "cost_discriminative needs a discriminative cost spec".into(),
        ));
    };
    spec.validate(pred.ncols())?;
    let fit = squared_distance(pred, target);
    let width = source_dims[0];
    let mut penalty = 0.0;
    for i in 0..source_dims.len() {
        for j in 0..source_dims.len() {
            if i != j {
                penalty += squared_distance(
                    pred.slice(s![.., i * width..(i + 1) * width]),
                    target.slice(s![.., j * width..(j + 1) * width]),
                );
            }
        }
    }
    Ok(fit - lambda * penalty)
}

pub fn cost(pred: ArrayView2<f64>, target: ArrayView2<f64>, spec: &CostSpec) -> Result<f64> {
    match spec {
        CostSpec::MaskMse => cost_mask_mse(pred, target),
        CostSpec::Discriminative { .. } => cost_discriminative(pred, target, spec),
    }
}

/// `∂cost/∂pred`.
pub fn cost_gradient(
    pred: ArrayView2<f64>,
    target: ArrayView2<f64>,
    spec: &CostSpec,
) -> Result<Array2<f64>> {
    check_shapes(&pred, &target)?;
    let mut grad = (&pred - &target) * 2.0;
    if let CostSpec::Discriminative {
        lambda,
        source_dims,
    } = spec
    {
        spec.validate(pred.ncols())?;
        let width = source_dims[0];
        for i in 0..source_dims.len() {
            let q_i = pred.slice(s![.., i * width..(i + 1) * width]);
            let mut block = grad.slice_mut(s![.., i * width..(i + 1) * width]);
            for j in 0..source_dims.len() {
                if i == j {
                    continue;
                }
                let v_j = target.slice(s![.., j * width..(j + 1) * width]);
                ndarray::Zip::from(&mut block)
                    .and(&q_i)
                    .and(&v_j)
                    .for_each(|g, &q, &v| *g -= 2.0 * lambda * (q - v));
            }
        }
    }
    Ok(grad)
}
