//! Fully connected sigmoid networks trained by minibatch SGD with
//! hand-derived gradients.

mod cost;
mod io;
mod train;

pub use cost::{cost, cost_discriminative, cost_gradient, cost_mask_mse, CostSpec};
pub use io::{load_mlp, save_mlp, MLP_FORMAT_VERSION};
pub use train::{train, TrainConfig, TrainOutcome};

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Upper clamp for sigmoid outputs so they stay strictly below one.
const SIGMOID_MAX: f64 = 1.0 - f64::EPSILON / 2.0;

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    let y = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    y.clamp(f64::MIN_POSITIVE, SIGMOID_MAX)
}

/// A dense network with a sigmoid after every layer, output included.
///
/// Weights for layer `l` are stored `d_l × d_{l-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layer_dims: Vec<usize>,
    pub(crate) weights: Vec<Array2<f64>>,
    pub(crate) biases: Vec<Array1<f64>>,
    /// Cost the parameters were (or will be) trained with.
    pub cost: CostSpec,
    /// Seed used for initialisation and shuffling.
    pub seed: u64,
    /// Free-form label, e.g. `S` or `D4`.
    pub tag: String,
}

/// Parameter gradients, laid out like the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Gradients {
    fn zeros_like(net: &Mlp) -> Self {
        Self {
            weights: net.weights.iter().map(|w| Array2::zeros(w.dim())).collect(),
            biases: net.biases.iter().map(|b| Array1::zeros(b.len())).collect(),
        }
    }

    pub fn add(&mut self, other: &Gradients) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            *a += b;
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.weights
            .iter()
            .flat_map(|w| w.iter().copied())
            .chain(self.biases.iter().flat_map(|b| b.iter().copied()))
    }
}

/// Glorot-uniform weights, zero biases.
pub fn init_mlp(layer_dims: &[usize], seed: u64) -> Result<Mlp> {
    if layer_dims.len() < 2 || layer_dims.contains(&0) {
        return Err(Error::InvalidConfig(format!(
            "layer dims {layer_dims:?} need at least two positive entries"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights = Vec::with_capacity(layer_dims.len() - 1);
    let mut biases = Vec::with_capacity(layer_dims.len() - 1);
    for pair in layer_dims.windows(2) {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        let r = (6.0 / (fan_in + fan_out) as f64).sqrt();
        weights.push(Array2::from_shape_simple_fn((fan_out, fan_in), || {
            rng.random_range(-r..=r)
        }));
        biases.push(Array1::zeros(fan_out));
    }
    Ok(Mlp {
        layer_dims: layer_dims.to_vec(),
        weights,
        biases,
        cost: CostSpec::MaskMse,
        seed,
        tag: String::new(),
    })
}

impl Mlp {
    /// Assemble a network from explicit parameters.
    pub fn from_parameters(weights: Vec<Array2<f64>>, biases: Vec<Array1<f64>>) -> Result<Self> {
        if weights.is_empty() || weights.len() != biases.len() {
            return Err(Error::Shape(format!(
                "{} weight matrices and {} bias vectors",
                weights.len(),
                biases.len()
            )));
        }
        let mut layer_dims = vec![weights[0].ncols()];
        for (l, (w, b)) in weights.iter().zip(&biases).enumerate() {
            if w.ncols() != *layer_dims.last().unwrap() || w.nrows() != b.len() {
                return Err(Error::Shape(format!("layer {l} parameters are inconsistent")));
            }
            layer_dims.push(w.nrows());
        }
        if weights.iter().flatten().chain(biases.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite parameter".into()));
        }
        Ok(Self {
            layer_dims,
            weights,
            biases,
            cost: CostSpec::MaskMse,
            seed: 0,
            tag: String::new(),
        })
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn input_width(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_width(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    pub fn weights(&self) -> &[Array2<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Array1<f64>] {
        &self.biases
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    fn check_input(&self, batch: &ArrayView2<f64>) -> Result<()> {
        if batch.ncols() != self.input_width() {
            return Err(Error::Shape(format!(
                "batch width {} but network expects {}",
                batch.ncols(),
                self.input_width()
            )));
        }
        Ok(())
    }

    /// Activations of every layer, input first.
    fn forward_trace(&self, batch: ArrayView2<f64>) -> Vec<Array2<f64>> {
        let mut acts = Vec::with_capacity(self.weights.len() + 1);
        acts.push(batch.to_owned());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            let mut z = acts.last().unwrap().dot(&w.t());
            z += b;
            z.mapv_inplace(sigmoid);
            acts.push(z);
        }
        acts
    }

    /// `B × d_0` in, `B × d_L` out.
    pub fn forward(&self, batch: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(&batch)?;
        let mut a = batch.to_owned();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            a = a.dot(&w.t());
            a += b;
            a.mapv_inplace(sigmoid);
        }
        Ok(a)
    }

    /// Backpropagate a given output gradient `∂C/∂a_L` through the trace.
    fn backward(&self, acts: &[Array2<f64>], output_grad: Array2<f64>) -> Gradients {
        let mut grads = Gradients::zeros_like(self);
        let layers = self.weights.len();
        let mut delta = output_grad;
        for l in (0..layers).rev() {
            let a_out = &acts[l + 1];
            delta.zip_mut_with(a_out, |d, &a| *d *= a * (1.0 - a));
            grads.weights[l] = delta.t().dot(&acts[l]);
            grads.biases[l] = delta.sum_axis(Axis(0));
            if l > 0 {
                delta = delta.dot(&self.weights[l]);
            }
        }
        grads
    }

    /// Cost and exact parameter gradients summed over the batch.
    pub fn backprop(
        &self,
        batch_in: ArrayView2<f64>,
        batch_target: ArrayView2<f64>,
        spec: &CostSpec,
    ) -> Result<(f64, Gradients)> {
        self.check_input(&batch_in)?;
        if batch_target.dim() != (batch_in.nrows(), self.output_width()) {
            return Err(Error::Shape(format!(
                "target {:?} for batch of {} rows and output width {}",
                batch_target.dim(),
                batch_in.nrows(),
                self.output_width()
            )));
        }
        let acts = self.forward_trace(batch_in);
        let out = acts.last().unwrap();
        let c = cost(out.view(), batch_target, spec)?;
        let g = cost_gradient(out.view(), batch_target, spec)?;
        Ok((c, self.backward(&acts, g)))
    }

    /// Gradients from an externally supplied `∂C/∂output`.
    pub fn backprop_output_gradient(
        &self,
        batch_in: ArrayView2<f64>,
        output_grad: Array2<f64>,
    ) -> Result<Gradients> {
        self.check_input(&batch_in)?;
        if output_grad.dim() != (batch_in.nrows(), self.output_width()) {
            return Err(Error::Shape("output gradient shape mismatch".into()));
        }
        let acts = self.forward_trace(batch_in);
        Ok(self.backward(&acts, output_grad))
    }

    /// `θ ← θ − step·∇`.
    pub fn apply_gradients(&mut self, grads: &Gradients, step: f64) {
        for (w, g) in self.weights.iter_mut().zip(&grads.weights) {
            w.scaled_add(-step, g);
        }
        for (b, g) in self.biases.iter_mut().zip(&grads.biases) {
            b.scaled_add(-step, g);
        }
    }

    /// Flat parameter access for finite-difference checks.
    pub fn parameter_mut(&mut self, index: usize) -> &mut f64 {
        let mut i = index;
        for w in self.weights.iter_mut() {
            if i < w.len() {
                return w.iter_mut().nth(i).unwrap();
            }
            i -= w.len();
        }
        for b in self.biases.iter_mut() {
            if i < b.len() {
                return &mut b[i];
            }
            i -= b.len();
        }
        panic!("parameter index {index} out of range");
    }
}

/// Central-difference derivatives of the summed batch cost with respect to
/// every parameter, in the order of [`Gradients::iter`].
pub fn numerical_gradient(
    net: &Mlp,
    inputs: ArrayView2<f64>,
    targets: ArrayView2<f64>,
    spec: &CostSpec,
    step: f64,
) -> Result<Vec<f64>> {
    let mut probe = net.clone();
    let eval = |n: &Mlp| -> Result<f64> { cost(n.forward(inputs)?.view(), targets, spec) };
    let mut out = Vec::with_capacity(net.parameter_count());
    for i in 0..net.parameter_count() {
        let original = *probe.parameter_mut(i);
        *probe.parameter_mut(i) = original + step;
        let plus = eval(&probe)?;
        *probe.parameter_mut(i) = original - step;
        let minus = eval(&probe)?;
        *probe.parameter_mut(i) = original;
        out.push((plus - minus) / (2.0 * step));
    }
    Ok(out)
}
