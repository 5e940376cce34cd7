//! From-scratch feedforward networks: initialization, forward pass, exact
//! reverse-mode gradients (parameters and inputs), RMSProp updates and Polyak
//! soft target updates.
//!
//! Everything is plain `f64` with fixed accumulation order, so identical seeds
//! give bit-identical parameters across runs.

use rand::Rng;
use thiserror::Error;

pub mod checkpoint;

#[derive(Debug, Error, PartialEq)]
pub enum NnError {
    #[error("layer {index} expects input of size {expected}, previous layer produces {got}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("input has length {got}, network expects {expected}")]
    InputLength { expected: usize, got: usize },
    #[error("output gradient has length {got}, network produces {expected}")]
    OutputLength { expected: usize, got: usize },
    #[error("parameter shapes do not match between networks")]
    ShapeMismatch,
    #[error("gradient contains a non-finite value; step rejected")]
    NonFiniteGradient,
    #[error("network must have at least one layer")]
    Empty,
}

/// Elementwise nonlinearity applied after each affine layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
    Sigmoid,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
            Activation::Tanh => z.tanh(),
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the activation output `y = f(z)`.
    #[inline]
    pub fn derivative_at_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Identity => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
            Activation::Identity => "identity",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "relu" => Some(Activation::Relu),
            "tanh" => Some(Activation::Tanh),
            "sigmoid" => Some(Activation::Sigmoid),
            "identity" => Some(Activation::Identity),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    pub input_size: usize,
    pub output_size: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(input_size: usize, output_size: usize, activation: Activation) -> Self {
        Self {
            input_size,
            output_size,
            activation,
        }
    }
}

/// One affine layer. Weights are row-major: row `i` holds the fan-in of
/// output unit `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub(crate) input_size: usize,
    pub(crate) output_size: usize,
    pub(crate) weights: Vec<f64>,
    pub(crate) bias: Vec<f64>,
    pub(crate) activation: Activation,
}

impl Layer {
    fn forward_into(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            self.weights
                .chunks_exact(self.input_size)
                .zip(&self.bias)
                .map(|(row, &b)| self.activation.apply(b + dot(row, x))),
        );
    }
}

/// Multilayer perceptron: a chain of affine layers with per-layer activations.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
}

/// Per-layer activations recorded during a forward pass. `activations[0]` is
/// the input, `activations[l + 1]` the output of layer `l`. Consumed by
/// [`Mlp::backward`] so a cache cannot be replayed against mutated weights.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    activations: Vec<Vec<f64>>,
}

/// Gradients shaped like an [`Mlp`], plus the gradient with respect to the
/// network input (used for the action-gradient path of the policy update).
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradients>,
    pub input: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradients {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Mlp {
    /// Builds a network from layer specs. Weights are drawn uniformly from
    /// `[-1/sqrt(fan_in), +1/sqrt(fan_in)]`, biases start at zero.
    pub fn init<R: Rng>(specs: &[LayerSpec], rng: &mut R) -> Result<Self, NnError> {
        if specs.is_empty() {
            return Err(NnError::Empty);
        }
        for (i, pair) in specs.windows(2).enumerate() {
            if pair[0].output_size != pair[1].input_size {
                return Err(NnError::DimensionMismatch {
                    index: i + 1,
                    expected: pair[1].input_size,
                    got: pair[0].output_size,
                });
            }
        }
        let layers = specs
            .iter()
            .map(|spec| {
                let bound = 1.0 / (spec.input_size as f64).sqrt();
                let weights = (0..spec.input_size * spec.output_size)
                    .map(|_| (2.0 * rng.random::<f64>() - 1.0) * bound)
                    .collect();
                Layer {
                    input_size: spec.input_size,
                    output_size: spec.output_size,
                    weights,
                    bias: vec![0.0; spec.output_size],
                    activation: spec.activation,
                }
            })
            .collect();
        Ok(Self { layers })
    }

    pub(crate) fn from_layers(layers: Vec<Layer>) -> Result<Self, NnError> {
        if layers.is_empty() {
            return Err(NnError::Empty);
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers
            .iter()
            .map(|l| LayerSpec::new(l.input_size, l.output_size, l.activation))
            .collect()
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].input_size
    }

    pub fn output_size(&self) -> usize {
        self.layers[self.layers.len() - 1].output_size
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    pub fn parameters_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|v| v.is_finite()))
    }

    /// Forward pass returning the output and a cache for backprop.
    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, ForwardCache), NnError> {
        if x.len() != self.input_size() {
            return Err(NnError::InputLength {
                expected: self.input_size(),
                got: x.len(),
            });
        }
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.to_vec());
        for layer in &self.layers {
            let mut out = Vec::new();
            layer.forward_into(activations.last().unwrap(), &mut out);
            activations.push(out);
        }
        let output = activations.last().unwrap().clone();
        Ok((output, ForwardCache { activations }))
    }

    /// Forward pass without a cache, for target networks and evaluation.
    pub fn forward_value(&self, x: &[f64]) -> Result<Vec<f64>, NnError> {
        if x.len() != self.input_size() {
            return Err(NnError::InputLength {
                expected: self.input_size(),
                got: x.len(),
            });
        }
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        for layer in &self.layers {
            layer.forward_into(&cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }

    /// Exact reverse-mode gradients of `output_gradient . output` with respect
    /// to every parameter and to the input.
    pub fn backward(
        &self,
        cache: ForwardCache,
        output_gradient: &[f64],
    ) -> Result<Gradients, NnError> {
        let mut grads = Gradients::zeros_like(self);
        self.backward_into(cache, output_gradient, &mut grads)?;
        Ok(grads)
    }

    /// Same as [`Mlp::backward`] but accumulates into `acc`, so a mini-batch
    /// gradient can be summed without intermediate allocations.
    pub fn backward_into(
        &self,
        cache: ForwardCache,
        output_gradient: &[f64],
        acc: &mut Gradients,
    ) -> Result<(), NnError> {
        if output_gradient.len() != self.output_size() {
            return Err(NnError::OutputLength {
                expected: self.output_size(),
                got: output_gradient.len(),
            });
        }
        if acc.layers.len() != self.layers.len() {
            return Err(NnError::ShapeMismatch);
        }
        let mut upstream = output_gradient.to_vec();
        let mut delta = Vec::new();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let y = &cache.activations[l + 1];
            let x = &cache.activations[l];
            delta.clear();
            delta.extend(
                upstream
                    .iter()
                    .zip(y)
                    .map(|(&u, &yi)| u * layer.activation.derivative_at_output(yi)),
            );
            let lg = &mut acc.layers[l];
            if lg.weights.len() != layer.weights.len() || lg.bias.len() != layer.bias.len() {
                return Err(NnError::ShapeMismatch);
            }
            for (i, &d) in delta.iter().enumerate() {
                let row = &mut lg.weights[i * layer.input_size..(i + 1) * layer.input_size];
                axpy(d, x, row);
                lg.bias[i] += d;
            }
            let mut dx = vec![0.0; layer.input_size];
            for (i, &d) in delta.iter().enumerate() {
                let row = &layer.weights[i * layer.input_size..(i + 1) * layer.input_size];
                axpy(d, row, &mut dx);
            }
            upstream = dx;
        }
        for (a, u) in acc.input.iter_mut().zip(&upstream) {
            *a += u;
        }
        Ok(())
    }

    /// Gradient of `output_gradient . output` with respect to the input only.
    /// Cheaper than a full backward when parameter gradients are not needed.
    pub fn input_gradient(
        &self,
        cache: &ForwardCache,
        output_gradient: &[f64],
    ) -> Result<Vec<f64>, NnError> {
        if output_gradient.len() != self.output_size() {
            return Err(NnError::OutputLength {
                expected: self.output_size(),
                got: output_gradient.len(),
            });
        }
        let mut upstream = output_gradient.to_vec();
        let mut delta = Vec::new();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let y = &cache.activations[l + 1];
            delta.clear();
            delta.extend(
                upstream
                    .iter()
                    .zip(y)
                    .map(|(&u, &yi)| u * layer.activation.derivative_at_output(yi)),
            );
            let mut dx = vec![0.0; layer.input_size];
            for (i, &d) in delta.iter().enumerate() {
                let row = &layer.weights[i * layer.input_size..(i + 1) * layer.input_size];
                axpy(d, row, &mut dx);
            }
            upstream = dx;
        }
        Ok(upstream)
    }

}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGradients {
                    weights: vec![0.0; l.weights.len()],
                    bias: vec![0.0; l.bias.len()],
                })
                .collect(),
            input: vec![0.0; net.input_size()],
        }
    }

    /// Scales every stored gradient (parameters and input) by `factor`.
    pub fn scale(&mut self, factor: f64) {
        for lg in &mut self.layers {
            for v in lg.weights.iter_mut().chain(lg.bias.iter_mut()) {
                *v *= factor;
            }
        }
        for v in &mut self.input {
            *v *= factor;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|lg| lg.weights.iter().chain(&lg.bias).all(|v| v.is_finite()))
    }

    fn parameter_norm(&self) -> f64 {
        self.layers
            .iter()
            .map(|lg| {
                lg.weights
                    .iter()
                    .chain(&lg.bias)
                    .map(|v| v * v)
                    .sum::<f64>()
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// Scales parameter gradients so their global L2 norm does not exceed
/// `max_norm`. Returns the pre-clip norm. The input gradient is left alone;
/// it is not a parameter.
pub fn clip_global_norm(grads: &mut Gradients, max_norm: f64) -> f64 {
    let norm = grads.parameter_norm();
    if norm > max_norm && norm > 0.0 {
        let factor = max_norm / norm;
        for lg in &mut grads.layers {
            for v in lg.weights.iter_mut().chain(lg.bias.iter_mut()) {
                *v *= factor;
            }
        }
    }
    norm
}

/// Per-parameter squared-gradient accumulators for RMSProp.
#[derive(Debug, Clone, PartialEq)]
pub struct RmsPropState {
    pub learning_rate: f64,
    pub decay: f64,
    pub epsilon: f64,
    pub(crate) square_avg: Vec<LayerGradients>,
}

impl RmsPropState {
    pub const DEFAULT_DECAY: f64 = 0.9;
    pub const DEFAULT_EPSILON: f64 = 1e-8;

    pub fn new(net: &Mlp, learning_rate: f64) -> Self {
        Self::with_constants(
            net,
            learning_rate,
            Self::DEFAULT_DECAY,
            Self::DEFAULT_EPSILON,
        )
    }

    pub fn with_constants(net: &Mlp, learning_rate: f64, decay: f64, epsilon: f64) -> Self {
        Self {
            learning_rate,
            decay,
            epsilon,
            square_avg: net
                .layers
                .iter()
                .map(|l| LayerGradients {
                    weights: vec![0.0; l.weights.len()],
                    bias: vec![0.0; l.bias.len()],
                })
                .collect(),
        }
    }
}

/// One RMSProp descent step:
/// `v <- decay * v + (1 - decay) * g^2`, `theta <- theta - lr * g / (sqrt(v) + eps)`.
///
/// Rejects the whole step if any gradient entry is non-finite.
pub fn rmsprop_step(
    net: &mut Mlp,
    grads: &Gradients,
    opt: &mut RmsPropState,
) -> Result<(), NnError> {
    if grads.layers.len() != net.layers.len() || opt.square_avg.len() != net.layers.len() {
        return Err(NnError::ShapeMismatch);
    }
    for (layer, (lg, sq)) in net
        .layers
        .iter()
        .zip(grads.layers.iter().zip(&opt.square_avg))
    {
        if lg.weights.len() != layer.weights.len()
            || lg.bias.len() != layer.bias.len()
            || sq.weights.len() != layer.weights.len()
            || sq.bias.len() != layer.bias.len()
        {
            return Err(NnError::ShapeMismatch);
        }
    }
    if !grads.is_finite() {
        return Err(NnError::NonFiniteGradient);
    }
    let lr = opt.learning_rate;
    let decay = opt.decay;
    let eps = opt.epsilon;
    for (layer, (lg, sq)) in net
        .layers
        .iter_mut()
        .zip(grads.layers.iter().zip(opt.square_avg.iter_mut()))
    {
        for ((theta, &g), v) in layer
            .weights
            .iter_mut()
            .zip(&lg.weights)
            .zip(sq.weights.iter_mut())
        {
            *v = decay * *v + (1.0 - decay) * g * g;
            *theta -= lr * g / (v.sqrt() + eps);
        }
        for ((theta, &g), v) in layer
            .bias
            .iter_mut()
            .zip(&lg.bias)
            .zip(sq.bias.iter_mut())
        {
            *v = decay * *v + (1.0 - decay) * g * g;
            *theta -= lr * g / (v.sqrt() + eps);
        }
    }
    Ok(())
}

/// Polyak update `target <- tau * source + (1 - tau) * target`, elementwise.
pub fn soft_update(target: &mut Mlp, source: &Mlp, tau: f64) -> Result<(), NnError> {
    if target.layers.len() != source.layers.len() {
        return Err(NnError::ShapeMismatch);
    }
    for (t, s) in target.layers.iter_mut().zip(&source.layers) {
        if t.weights.len() != s.weights.len() || t.bias.len() != s.bias.len() {
            return Err(NnError::ShapeMismatch);
        }
        for (tv, &sv) in t.weights.iter_mut().zip(&s.weights) {
            *tv = tau * sv + (1.0 - tau) * *tv;
        }
        for (tv, &sv) in t.bias.iter_mut().zip(&s.bias) {
            *tv = tau * sv + (1.0 - tau) * *tv;
        }
    }
    Ok(())
}

/// Dot product with four independent accumulators; fixed order keeps the
/// result deterministic while breaking the serial add dependency.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (xa, xb) in ca.by_ref().zip(cb.by_ref()) {
        acc[0] += xa[0] * xb[0];
        acc[1] += xa[1] * xb[1];
        acc[2] += xa[2] * xb[2];
        acc[3] += xa[3] * xb[3];
    }
    let mut sum = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (xa, xb) in ca.remainder().iter().zip(cb.remainder()) {
        sum += xa * xb;
    }
    sum
}

/// `out[i] += a * x[i]`.
#[inline]
fn axpy(a: f64, x: &[f64], out: &mut [f64]) {
    for (o, &xi) in out.iter_mut().zip(x) {
        *o += a * xi;
    }
}
