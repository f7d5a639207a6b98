//! Dense ReLU networks with exact reverse-mode gradients.
//!
//! Weights are stored as `(fan_in, fan_out)` so a layer computes `x W + b` on
//! a row-major batch. Hidden layers use the rectifier; the last layer uses the
//! network's configured [`Activation`]. The rectifier derivative at 0 is 0.

mod adam;
mod mmd;
mod train;

pub use adam::{AdamConfig, AdamState};
pub use mmd::{mmd2_linear, mmd2_linear_with_grad};
pub use train::{
    fit_network, train_early_stop, FitReport, Loss, Objective, Penalty, Supervised, TrainConfig,
};

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use rand_distr::{Distribution, Uniform};

use crate::{Error, Result};

/// Output nonlinearity of the final layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Sigmoid,
    /// Used for representation trunks whose output feeds further layers.
    Relu,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Sigmoid => "sigmoid",
            Activation::Relu => "relu",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "identity" => Some(Activation::Identity),
            "sigmoid" => Some(Activation::Sigmoid),
            "relu" => Some(Activation::Relu),
            _ => None,
        }
    }

    fn apply(self, z: &mut Array2<f64>) {
        match self {
            Activation::Identity => {}
            Activation::Sigmoid => z.mapv_inplace(sigmoid),
            Activation::Relu => z.mapv_inplace(relu),
        }
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn relu(z: f64) -> f64 {
    if z > 0.0 {
        z
    } else {
        0.0
    }
}

/// One affine layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// Shape `(fan_in, fan_out)`.
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn fan_in(&self) -> usize {
        self.weight.nrows()
    }

    pub fn fan_out(&self) -> usize {
        self.weight.ncols()
    }
}

/// A multilayer perceptron. Also used as the container for gradients and Adam
/// moments, which share its shape.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Dense>,
    output: Activation,
}

/// Cached intermediate values of a forward pass.
#[derive(Debug, Clone)]
pub struct Tape {
    /// Input of every layer; `inputs[0]` is the batch itself.
    inputs: Vec<Array2<f64>>,
    /// Pre-activation of every layer.
    pre: Vec<Array2<f64>>,
    output: Array2<f64>,
}

impl Tape {
    pub fn output(&self) -> &Array2<f64> {
        &self.output
    }

    /// Pre-activation of the last layer.
    pub fn logits(&self) -> &Array2<f64> {
        self.pre.last().expect("tape has at least one layer")
    }
}

impl Mlp {
    /// Glorot-uniform weights, zero biases.
    pub fn new<R: Rng + ?Sized>(
        layer_sizes: &[usize],
        output: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least 2 layer sizes, got {}",
                layer_sizes.len()
            )));
        }
        if let Some(pos) = layer_sizes.iter().position(|&s| s == 0) {
            return Err(Error::InvalidConfig(format!(
                "layer size at position {pos} is zero"
            )));
        }
        let layers = layer_sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let dist = Uniform::new_inclusive(-limit, limit).expect("finite bounds");
                Dense {
                    weight: Array2::from_shape_simple_fn((fan_in, fan_out), || dist.sample(rng)),
                    bias: Array1::zeros(fan_out),
                }
            })
            .collect();
        Ok(Self { layers, output })
    }

    /// Builds a network from explicit layers, checking that dimensions chain.
    pub fn from_layers(layers: Vec<Dense>, output: Activation) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidConfig("network has no layers".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.fan_in() == 0 || l.fan_out() == 0 {
                return Err(Error::InvalidConfig(format!("layer {i} has a zero dimension")));
            }
            if l.bias.len() != l.fan_out() {
                return Err(Error::Shape(format!(
                    "layer {i}: bias length {} != fan_out {}",
                    l.bias.len(),
                    l.fan_out()
                )));
            }
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].fan_out() != pair[1].fan_in() {
                return Err(Error::Shape(format!(
                    "layer {i} outputs {} but layer {} expects {}",
                    pair[0].fan_out(),
                    i + 1,
                    pair[1].fan_in()
                )));
            }
        }
        Ok(Self { layers, output })
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| Dense {
                    weight: Array2::zeros(l.weight.raw_dim()),
                    bias: Array1::zeros(l.bias.len()),
                })
                .collect(),
            output: self.output,
        }
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn output_activation(&self) -> Activation {
        self.output
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].fan_out()
    }

    /// `[input, hidden.., output]`.
    pub fn layer_sizes(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(Dense::fan_out))
            .collect()
    }

    pub fn n_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.len() + l.bias.len())
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    /// All parameters, layer by layer, weight (row-major) then bias.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            out.extend(l.weight.iter().copied());
            out.extend(l.bias.iter().copied());
        }
        out
    }

    /// Inverse of [`Mlp::flat_params`] for a network of the same shape.
    pub fn set_flat_params(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.n_params() {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                self.n_params(),
                values.len()
            )));
        }
        let mut it = values.iter().copied();
        for l in &mut self.layers {
            l.weight.iter_mut().for_each(|w| *w = it.next().unwrap());
            l.bias.iter_mut().for_each(|b| *b = it.next().unwrap());
        }
        Ok(())
    }

    /// `self += scale * other`, for gradient accumulation.
    pub fn add_scaled(&mut self, other: &Mlp, scale: f64) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weight.scaled_add(scale, &b.weight);
            a.bias.scaled_add(scale, &b.bias);
        }
    }

    fn check_input(&self, x: &ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "input has {} columns, network expects {}",
                x.ncols(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(&x)?;
        let n_layers = self.layers.len();
        let mut a = affine(&self.layers[0], x);
        for i in 1..n_layers {
            Activation::Relu.apply(&mut a);
            a = affine(&self.layers[i], a.view());
        }
        self.output.apply(&mut a);
        Ok(a)
    }

    /// Forward pass of a single-output network, returned as a vector.
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        if self.output_dim() != 1 {
            return Err(Error::Shape(format!(
                "predict needs a scalar-output network, got {} outputs",
                self.output_dim()
            )));
        }
        Ok(self.forward(x)?.column(0).to_owned())
    }

    pub fn forward_tape(&self, x: ArrayView2<f64>) -> Result<Tape> {
        self.check_input(&x)?;
        let n_layers = self.layers.len();
        let mut inputs = Vec::with_capacity(n_layers);
        let mut pre = Vec::with_capacity(n_layers);
        inputs.push(x.to_owned());
        for (i, layer) in self.layers.iter().enumerate() {
            let z = affine(layer, inputs[i].view());
            let mut a = z.clone();
            if i + 1 < n_layers {
                Activation::Relu.apply(&mut a);
                inputs.push(a);
            } else {
                self.output.apply(&mut a);
                pre.push(z);
                return Ok(Tape {
                    inputs,
                    pre,
                    output: a,
                });
            }
            pre.push(z);
        }
        unreachable!("loop returns on the last layer")
    }

    /// Gradients of `sum(grad_output ⊙ output)` w.r.t. parameters and inputs.
    pub fn backward(&self, tape: &Tape, grad_output: ArrayView2<f64>) -> Result<(Mlp, Array2<f64>)> {
        let delta = self.output_delta(tape, grad_output)?;
        let (grads, input_grad) = self.backprop(tape, delta, true);
        Ok((grads.expect("requested"), input_grad))
    }

    /// Like [`Mlp::backward`] but starting from the gradient w.r.t. the
    /// last layer's pre-activation (skips the output activation derivative).
    pub fn backward_from_logits(
        &self,
        tape: &Tape,
        grad_logits: ArrayView2<f64>,
    ) -> Result<(Mlp, Array2<f64>)> {
        self.check_grad_shape(tape, &grad_logits)?;
        let (grads, input_grad) = self.backprop(tape, grad_logits.to_owned(), true);
        Ok((grads.expect("requested"), input_grad))
    }

    /// Input gradient only, skipping parameter gradients.
    pub fn input_backward(&self, tape: &Tape, grad_output: ArrayView2<f64>) -> Result<Array2<f64>> {
        let delta = self.output_delta(tape, grad_output)?;
        Ok(self.backprop(tape, delta, false).1)
    }

    /// Per-row gradient of a scalar-output network w.r.t. its input.
    pub fn input_gradient(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if self.output_dim() != 1 {
            return Err(Error::Shape("input_gradient needs a scalar-output network".into()));
        }
        let tape = self.forward_tape(x)?;
        let ones = Array2::ones((x.nrows(), 1));
        self.input_backward(&tape, ones.view())
    }

    fn check_grad_shape(&self, tape: &Tape, g: &ArrayView2<f64>) -> Result<()> {
        if g.dim() != tape.output.dim() {
            return Err(Error::Shape(format!(
                "output gradient is {:?}, forward output was {:?}",
                g.dim(),
                tape.output.dim()
            )));
        }
        if tape.pre.len() != self.layers.len() {
            return Err(Error::Shape("tape was recorded by a different network".into()));
        }
        Ok(())
    }

    fn output_delta(&self, tape: &Tape, grad_output: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_grad_shape(tape, &grad_output)?;
        let mut delta = grad_output.to_owned();
        match self.output {
            Activation::Identity => {}
            Activation::Sigmoid => {
                Zip::from(&mut delta)
                    .and(&tape.output)
                    .for_each(|d, &y| *d *= y * (1.0 - y));
            }
            Activation::Relu => {
                Zip::from(&mut delta)
                    .and(tape.logits())
                    .for_each(|d, &z| *d = if z > 0.0 { *d } else { 0.0 });
            }
        }
        Ok(delta)
    }

    fn backprop(&self, tape: &Tape, mut delta: Array2<f64>, want_params: bool) -> (Option<Mlp>, Array2<f64>) {
        let mut grads = want_params.then(|| self.zeros_like());
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            if let Some(g) = grads.as_mut() {
                g.layers[i].weight = tape.inputs[i].t().dot(&delta);
                g.layers[i].bias = delta.sum_axis(Axis(0));
            }
            let upstream = delta.dot(&layer.weight.t());
            if i == 0 {
                return (grads, upstream);
            }
            delta = upstream;
            Zip::from(&mut delta)
                .and(&tape.pre[i - 1])
                .for_each(|d, &z| {
                    if z <= 0.0 {
                        *d = 0.0
                    }
                });
        }
        unreachable!("loop returns at layer 0")
    }
}

fn affine(layer: &Dense, x: ArrayView2<f64>) -> Array2<f64> {
    let mut z = x.dot(&layer.weight);
    z += &layer.bias;
    z
}

/// Forward pass followed by a full backward pass.
pub fn mlp_backward(
    net: &Mlp,
    x: ArrayView2<f64>,
    grad_output: ArrayView2<f64>,
) -> Result<(Mlp, Array2<f64>)> {
    let tape = net.forward_tape(x)?;
    net.backward(&tape, grad_output)
}
