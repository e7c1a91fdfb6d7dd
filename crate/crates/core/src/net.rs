//! Float-domain dense networks with quantized forward activations and
//! straight-through backward passes.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::activation::{Activation, ActivationSpec};
use crate::clustering::WeightCodebook;
use crate::error::{Error, Result};

const WEIGHT_INIT_SD: f64 = 0.005;
const BIAS_INIT_SD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Head {
    /// Identity logits; softmax appears only inside the training loss.
    SoftmaxCrossEntropy,
    L2Regression,
}

impl Head {
    pub fn code(self) -> u8 {
        match self {
            Head::SoftmaxCrossEntropy => 1,
            Head::L2Regression => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(Head::SoftmaxCrossEntropy),
            2 => Some(Head::L2Regression),
            _ => None,
        }
    }
}

/// Maps raw inputs in `[lo, hi]` affinely onto a spec's output range and
/// rounds them to its nearest level.
#[derive(Debug, Clone, PartialEq)]
pub struct InputQuantizer {
    pub lo: f64,
    pub hi: f64,
    pub spec: ActivationSpec,
}

impl InputQuantizer {
    pub fn new(lo: f64, hi: f64, spec: ActivationSpec) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidArgument(format!("bad input range [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi, spec })
    }

    pub fn level_index(&self, raw: f64) -> Result<usize> {
        if !raw.is_finite() {
            return Err(Error::InvalidArgument(format!("non-finite input {raw}")));
        }
        let t = (raw - self.lo) / (self.hi - self.lo);
        let y = self.spec.gamma_min() + t * (self.spec.gamma_max() - self.spec.gamma_min());
        Ok(self.spec.nearest_level(y))
    }

    pub fn level_value(&self, raw: f64) -> Result<f64> {
        Ok(self.spec.level_values()[self.level_index(raw)?])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub in_dim: usize,
    pub out_dim: usize,
    /// Row-major `out_dim × in_dim`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn weight_row(&self, unit: usize) -> &[f64] {
        &self.weights[unit * self.in_dim..(unit + 1) * self.in_dim]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    pub layers: Vec<Layer>,
    pub head: Head,
    pub input: Option<InputQuantizer>,
}

/// Training targets for a batch.
#[derive(Debug, Clone, Copy)]
pub enum Targets<'a> {
    Classes(&'a [usize]),
    /// Row-major `batch × out_dim`.
    Values(&'a [f64]),
}

/// Per-layer values retained by the forward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub batch: usize,
    /// Network input after optional quantization, row-major.
    pub input: Vec<f64>,
    /// Pre-activations per layer, row-major `batch × out_dim`.
    pub pre: Vec<Vec<f64>>,
    /// Activation outputs per layer (quantized levels for quantized layers).
    pub post: Vec<Vec<f64>>,
}

impl ForwardPass {
    pub fn output(&self) -> &[f64] {
        self.post.last().map(Vec::as_slice).unwrap_or(&self.input)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &DenseNet) -> Self {
        Self {
            weights: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            bias: net.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.bias) {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

impl DenseNet {
    /// Builds a network with `dims = [input, hidden..., output]`; every hidden
    /// layer uses `hidden`, the output layer is linear.
    pub fn new(dims: &[usize], hidden: Activation, head: Head, seed: u64) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::InvalidArgument(format!("bad layer dims {dims:?}")));
        }
        if matches!(hidden, Activation::Identity) && dims.len() > 2 {
            return Err(Error::InvalidArgument("hidden layers need a non-linearity".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w_dist = Normal::new(0.0, WEIGHT_INIT_SD).expect("valid sd");
        let b_dist = Normal::new(0.0, BIAS_INIT_SD).expect("valid sd");
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let (in_dim, out_dim) = (w[0], w[1]);
                let last = i == dims.len() - 2;
                Layer {
                    in_dim,
                    out_dim,
                    weights: (0..in_dim * out_dim).map(|_| w_dist.sample(&mut rng)).collect(),
                    bias: (0..out_dim).map(|_| b_dist.sample(&mut rng)).collect(),
                    activation: if last {
                        Activation::Identity
                    } else {
                        hidden.clone()
                    },
                }
            })
            .collect();
        Ok(Self {
            layers,
            head,
            input: None,
        })
    }

    pub fn with_input_quantizer(mut self, quantizer: InputQuantizer) -> Self {
        self.input = Some(quantizer);
        self
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut dims = vec![self.input_dim()];
        dims.extend(self.layers.iter().map(|l| l.out_dim));
        dims
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Every weight and bias, layer by layer (weights before biases).
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.parameter_count());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn parameters_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn set_parameters(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.parameter_count() {
            return Err(Error::ShapeMismatch {
                expected: self.parameter_count(),
                got: values.len(),
            });
        }
        for (p, v) in self.parameters_mut().zip(values) {
            *p = *v;
        }
        Ok(())
    }

    pub fn snap_to(&mut self, codebook: &WeightCodebook) {
        for layer in &mut self.layers {
            codebook.snap_in_place(&mut layer.weights);
            codebook.snap_in_place(&mut layer.bias);
        }
    }

    /// Number of distinct values among all weights and biases.
    pub fn distinct_parameters(&self) -> usize {
        let mut p = self.parameters();
        p.sort_by(f64::total_cmp);
        p.dedup();
        p.len()
    }

    pub fn max_abs_parameter(&self) -> f64 {
        self.parameters().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Applies the input quantizer, if any, to a row-major batch.
    pub fn prepare_input(&self, raw: &[f64]) -> Result<Vec<f64>> {
        if raw.len() % self.input_dim() != 0 {
            return Err(Error::ShapeMismatch {
                expected: self.input_dim(),
                got: raw.len() % self.input_dim(),
            });
        }
        match &self.input {
            None => Ok(raw.to_vec()),
            Some(q) => raw.iter().map(|&x| q.level_value(x)).collect(),
        }
    }

    /// Forward pass over a row-major batch, retaining pre-activations.
    pub fn forward_train(&self, raw: &[f64]) -> Result<ForwardPass> {
        let input = self.prepare_input(raw)?;
        let batch = input.len() / self.input_dim();
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let x = post.last().unwrap_or(&input);
            let mut z = vec![0.0; batch * layer.out_dim];
            let mut a = vec![0.0; batch * layer.out_dim];
            for b in 0..batch {
                let xb = &x[b * layer.in_dim..(b + 1) * layer.in_dim];
                for o in 0..layer.out_dim {
                    let zi = layer.bias[o] + dot(layer.weight_row(o), xb);
                    z[b * layer.out_dim + o] = zi;
                    a[b * layer.out_dim + o] = layer.activation.forward(zi);
                }
            }
            pre.push(z);
            post.push(a);
        }
        Ok(ForwardPass {
            batch,
            input,
            pre,
            post,
        })
    }

    /// Output-layer values (logits or regression outputs) for a batch.
    pub fn predict(&self, raw: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_train(raw)?.post.pop().unwrap_or_default())
    }

    /// Mean loss of a forward pass against `targets`.
    pub fn loss(&self, fwd: &ForwardPass, targets: Targets<'_>) -> Result<f64> {
        let (loss, _) = self.head_error(fwd, targets)?;
        Ok(loss)
    }

    /// Returns `(mean loss, dL/d(output pre-activation))`.
    fn head_error(&self, fwd: &ForwardPass, targets: Targets<'_>) -> Result<(f64, Vec<f64>)> {
        let out_dim = self.output_dim();
        let batch = fwd.batch;
        let out = fwd.output();
        let scale = 1.0 / batch as f64;
        let mut delta = vec![0.0; out.len()];
        let mut loss = 0.0;
        match (self.head, targets) {
            (Head::SoftmaxCrossEntropy, Targets::Classes(labels)) => {
                if labels.len() != batch {
                    return Err(Error::ShapeMismatch {
                        expected: batch,
                        got: labels.len(),
                    });
                }
                for b in 0..batch {
                    let logits = &out[b * out_dim..(b + 1) * out_dim];
                    let label = labels[b];
                    if label >= out_dim {
                        return Err(Error::InvalidArgument(format!("label {label} out of range")));
                    }
                    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let sum: f64 = logits.iter().map(|z| (z - max).exp()).sum();
                    let log_sum = sum.ln() + max;
                    loss += log_sum - logits[label];
                    for (o, z) in logits.iter().enumerate() {
                        let p = (z - log_sum).exp();
                        let t = if o == label { 1.0 } else { 0.0 };
                        delta[b * out_dim + o] = (p - t) * scale;
                    }
                }
            }
            (Head::L2Regression, Targets::Values(values)) => {
                if values.len() != out.len() {
                    return Err(Error::ShapeMismatch {
                        expected: out.len(),
                        got: values.len(),
                    });
                }
                for ((d, p), t) in delta.iter_mut().zip(out).zip(values) {
                    let e = p - t;
                    loss += e * e;
                    *d = 2.0 * e * scale;
                }
            }
            _ => {
                return Err(Error::InvalidArgument(
                    "targets do not match the network head".into(),
                ))
            }
        }
        Ok((loss * scale, delta))
    }

    /// Straight-through backpropagation: plateaus are ignored and each layer
    /// uses the underlying function's derivative at its pre-activation, while
    /// the chain consumes the quantized forward values.
    pub fn backward(&self, fwd: &ForwardPass, targets: Targets<'_>) -> Result<(f64, Gradients)> {
        let (loss, mut delta) = self.head_error(fwd, targets)?;
        // The output activation's derivative still applies when it is not identity.
        let last = self.layers.len() - 1;
        for (d, z) in delta.iter_mut().zip(&fwd.pre[last]) {
            *d *= self.layers[last].activation.derivative(*z);
        }
        let grads = self.backward_from(fwd, delta);
        Ok((loss, grads))
    }

    /// Backpropagates an error signal given at the output pre-activations.
    pub fn backward_from(&self, fwd: &ForwardPass, mut delta: Vec<f64>) -> Gradients {
        let batch = fwd.batch;
        let mut grads = Gradients::zeros_like(self);
        for li in (0..self.layers.len()).rev() {
            let layer = &self.layers[li];
            let x = if li == 0 { &fwd.input } else { &fwd.post[li - 1] };
            let gw = &mut grads.weights[li];
            let gb = &mut grads.bias[li];
            for b in 0..batch {
                let xb = &x[b * layer.in_dim..(b + 1) * layer.in_dim];
                for o in 0..layer.out_dim {
                    let d = delta[b * layer.out_dim + o];
                    if d != 0.0 {
                        axpy(d, xb, &mut gw[o * layer.in_dim..(o + 1) * layer.in_dim]);
                    }
                    gb[o] += d;
                }
            }
            if li == 0 {
                break;
            }
            let below = &self.layers[li - 1];
            let mut next = vec![0.0; batch * layer.in_dim];
            for b in 0..batch {
                let nb = &mut next[b * layer.in_dim..(b + 1) * layer.in_dim];
                for o in 0..layer.out_dim {
                    let d = delta[b * layer.out_dim + o];
                    if d != 0.0 {
                        axpy(d, layer.weight_row(o), nb);
                    }
                }
                let zb = &fwd.pre[li - 1][b * layer.in_dim..(b + 1) * layer.in_dim];
                for (n, z) in nb.iter_mut().zip(zb) {
                    *n *= below.activation.derivative(*z);
                }
            }
            delta = next;
        }
        grads
    }

    /// Replaces each quantized hidden activation with the given spec (e.g. a
    /// grid-snapped one), keeping everything else.
    pub fn with_activation_specs(&self, specs: &[Option<ActivationSpec>]) -> Result<Self> {
        if specs.len() != self.layers.len() {
            return Err(Error::ShapeMismatch {
                expected: self.layers.len(),
                got: specs.len(),
            });
        }
        let mut net = self.clone();
        for (layer, spec) in net.layers.iter_mut().zip(specs) {
            if let Some(spec) = spec {
                layer.activation = Activation::Quantized(spec.clone());
            }
        }
        Ok(net)
    }
}
