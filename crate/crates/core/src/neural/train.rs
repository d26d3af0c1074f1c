use ndarray::{ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CostSpec, Mlp};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Shuffle seed. Not part of the file format; callers derive it.
    #[serde(skip)]
    pub seed: u64,
    #[serde(default = "default_shuffle")]
    pub shuffle: bool,
}

fn default_shuffle() -> bool {
    true
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 100,
            learning_rate: 0.1,
            seed: 0,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn violations(&self, name: &str) -> Vec<String> {
        let mut out = Vec::new();
        if self.epochs == 0 {
            out.push(format!("{name}.epochs must be at least 1"));
        }
        if self.batch_size == 0 {
            out.push(format!("{name}.batch_size must be at least 1"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            out.push(format!(
                "{name}.learning_rate must be finite and nonnegative, got {}",
                self.learning_rate
            ));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub net: Mlp,
    /// Mean per-frame cost of each epoch, measured on the minibatches
    /// before each update.
    pub costs: Vec<f64>,
}

/// Minibatch SGD. Each step moves along the batch gradient divided by the
/// batch row count, so the per-frame cost is what the learning rate scales.
pub fn train(
    net: &Mlp,
    inputs: ArrayView2<f64>,
    targets: ArrayView2<f64>,
    spec: &CostSpec,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    let violations = cfg.violations("train");
    if !violations.is_empty() {
        return Err(Error::Config(violations));
    }
    let rows = inputs.nrows();
    if rows == 0 {
        return Err(Error::InvalidInput("training set is empty".into()));
    }
    if targets.nrows() != rows {
        return Err(Error::Shape(format!(
            "{rows} input rows but {} target rows",
            targets.nrows()
        )));
    }
    spec.validate(net.output_width())?;

    let mut net = net.clone();
    net.cost = spec.clone();
    net.seed = cfg.seed;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..rows).collect();
    let mut costs = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        if cfg.shuffle {
            order.shuffle(&mut rng);
        }
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let x = inputs.select(Axis(0), chunk);
            let t = targets.select(Axis(0), chunk);
            let (c, grads) = net.backprop(x.view(), t.view(), spec)?;
            total += c;
            net.apply_gradients(&grads, cfg.learning_rate / chunk.len() as f64);
        }
        let mean = total / rows as f64;
        if !mean.is_finite() {
            return Err(Error::Numeric(format!("cost diverged at epoch {epoch}")));
        }
        log::debug!("epoch {epoch}: cost {mean:.6}");
        costs.push(mean);
    }
    Ok(TrainOutcome { net, costs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::init_mlp;
    use ndarray::Array2;
    use rand::Rng;

    fn toy_task() -> (Array2<f64>, Array2<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let x = Array2::from_shape_simple_fn((10, 4), || rng.random_range(0.0..1.0));
        let t = Array2::from_shape_fn((10, 2), |(r, c)| {
            let s = x[(r, 0)] + x[(r, 1)] > x[(r, 2)] + x[(r, 3)];
            if s == (c == 0) {
                1.0
            } else {
                0.0
            }
        });
        (x, t)
    }

    #[test]
    fn training_reduces_cost() {
        let (x, t) = toy_task();
        let net = init_mlp(&[4, 8, 2], 1).unwrap();
        let cfg = TrainConfig {
            epochs: 300,
            batch_size: 5,
            learning_rate: 0.5,
            seed: 3,
            shuffle: true,
        };
        let out = train(&net, x.view(), t.view(), &CostSpec::MaskMse, &cfg).unwrap();
        assert_eq!(out.costs.len(), 300);
        assert!(out.costs.last().unwrap() < out.costs.first().unwrap());
    }

    #[test]
    fn zero_learning_rate_keeps_parameters() {
        let (x, t) = toy_task();
        let net = init_mlp(&[4, 8, 2], 1).unwrap();
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: 4,
            learning_rate: 0.0,
            seed: 0,
            shuffle: true,
        };
        let out = train(&net, x.view(), t.view(), &CostSpec::MaskMse, &cfg).unwrap();
        assert_eq!(out.net.weights, net.weights);
        assert_eq!(out.net.biases, net.biases);
    }

    #[test]
    fn same_seed_same_trace() {
        let (x, t) = toy_task();
        let net = init_mlp(&[4, 8, 2], 1).unwrap();
        let cfg = TrainConfig {
            epochs: 20,
            batch_size: 3,
            learning_rate: 0.3,
            seed: 77,
            shuffle: true,
        };
        let spec = CostSpec::discriminative(0.2, 2, 1).unwrap();
        let a = train(&net, x.view(), t.view(), &spec, &cfg).unwrap();
        let b = train(&net, x.view(), t.view(), &spec, &cfg).unwrap();
        assert_eq!(a.costs, b.costs);
        assert_eq!(a.net, b.net);
    }

    #[test]
    fn empty_dataset_is_rejected() {
        let net = init_mlp(&[4, 2], 1).unwrap();
        let x = Array2::<f64>::zeros((0, 4));
        let t = Array2::<f64>::zeros((0, 2));
        let err = train(&net, x.view(), t.view(), &CostSpec::MaskMse, &TrainConfig::default());
        assert!(matches!(err, Err(Error::InvalidInput(_))));
    }
}
