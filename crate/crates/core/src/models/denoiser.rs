//! Dense noise-prediction network with hand-written backpropagation.
//!
//! Input layout: `tau_t (H*D) ++ time embedding (2F) ++ condition features`.
//! Hidden layers use the activation tag; the output layer is linear.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::rng::{Domain, RngStream};
use crate::trajectory::{Condition, TrajShape, Trajectory};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Silu,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Silu => x / (1.0 + (-x).exp()),
        }
    }

    #[inline]
    fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Silu => {
                let s = 1.0 / (1.0 + (-x).exp());
                s * (1.0 + x * (1.0 - s))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenoiserArch {
    pub horizon: usize,
    pub action_dim: usize,
    pub cond_dim: usize,
    pub hidden: Vec<usize>,
    pub freqs: usize,
    pub activation: Activation,
}

impl DenoiserArch {
    /// Two hidden layers of 128 units, 8 sinusoid frequency pairs, SiLU.
    pub fn standard(shape: TrajShape, cond_dim: usize) -> Self {
        Self {
            horizon: shape.horizon,
            action_dim: shape.action_dim,
            cond_dim,
            hidden: vec![128, 128],
            freqs: 8,
            activation: Activation::Silu,
        }
    }

    pub fn shape(&self) -> TrajShape {
        TrajShape::new(self.horizon, self.action_dim)
    }

    pub fn input_dim(&self) -> usize {
        self.shape().len() + 2 * self.freqs + self.cond_dim
    }

    pub fn output_dim(&self) -> usize {
        self.shape().len()
    }

    /// `(fan_in, fan_out)` of each layer, input to output.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden.len() + 1);
        let mut prev = self.input_dim();
        for &h in self.hidden.iter().chain(std::iter::once(&self.output_dim())) {
            dims.push((prev, h));
            prev = h;
        }
        dims
    }
}

/// Sinusoidal embedding: `sin(t w_k), cos(t w_k)` with `w_k = 1000^(-k/F)`.
pub fn time_embedding(t: usize, freqs: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * freqs);
    for k in 0..freqs {
        let w = (-(1000f64.ln()) * k as f64 / freqs as f64).exp();
        let phase = t as f64 * w;
        out.push(phase.sin());
        out.push(phase.cos());
    }
    out
}

/// Row-major weights, `weights[o * in_dim + i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
        }
    }

    pub fn row(&self, o: usize) -> &[f64] {
        &self.weights[o * self.in_dim..(o + 1) * self.in_dim]
    }

    fn forward_into(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            self.weights
                .chunks_exact(self.in_dim)
                .zip(&self.bias)
                .map(|(row, b)| b + dot(row, x)),
        );
    }

    pub fn num_params(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Gradient buffers shaped like the network's layers.
#[derive(Clone, Debug, PartialEq)]
pub struct NetGradients {
    pub layers: Vec<DenseLayer>,
}

impl NetGradients {
    pub fn zeros_like(net: &DenoiserNet) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| DenseLayer::zeros(l.in_dim, l.out_dim))
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &NetGradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            axpy(&mut a.weights, 1.0, &b.weights);
            axpy(&mut a.bias, 1.0, &b.bias);
        }
    }

    pub fn scale(&mut self, k: f64) {
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|w| *w *= k);
            l.bias.iter_mut().for_each(|b| *b *= k);
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenoiserNet {
    arch: DenoiserArch,
    layers: Vec<DenseLayer>,
}

/// Activations kept for the backward pass.
pub(crate) struct ForwardCache {
    /// Input of each layer (post-activation of the previous one).
    inputs: Vec<Vec<f64>>,
    /// Pre-activations of each hidden layer.
    pre: Vec<Vec<f64>>,
}

impl DenoiserNet {
    pub fn zeros(arch: DenoiserArch) -> Self {
        let layers = arch
            .layer_dims()
            .into_iter()
            .map(|(i, o)| DenseLayer::zeros(i, o))
            .collect();
        Self { arch, layers }
    }

    /// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn init(arch: DenoiserArch, seed: u64) -> Self {
        let mut net = Self::zeros(arch);
        let stream = RngStream::new(seed);
        for (k, layer) in net.layers.iter_mut().enumerate() {
            let limit = (6.0 / (layer.in_dim + layer.out_dim) as f64).sqrt();
            let mut draws = stream.draws(Domain::Init, k as u64, 0);
            for w in &mut layer.weights {
                *w = draws.uniform_in(-limit, limit);
            }
        }
        net
    }

    pub fn from_layers(arch: DenoiserArch, layers: Vec<DenseLayer>) -> Result<Self> {
        let dims = arch.layer_dims();
        check_len("denoiser layer count", dims.len(), layers.len())?;
        for (k, ((i, o), l)) in dims.iter().zip(&layers).enumerate() {
            if l.in_dim != *i || l.out_dim != *o || l.weights.len() != i * o || l.bias.len() != *o {
                return Err(Error::Checkpoint(format!(
                    "layer {k} is {}x{} with {} weights, architecture expects {o}x{i}",
                    l.out_dim,
                    l.in_dim,
                    l.weights.len()
                )));
            }
            if l.weights.iter().chain(&l.bias).any(|p| !p.is_finite()) {
                return Err(Error::Checkpoint(format!("layer {k} has non-finite parameters")));
            }
        }
        Ok(Self { arch, layers })
    }

    pub fn arch(&self) -> &DenoiserArch {
        &self.arch
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(DenseLayer::num_params).sum()
    }

    /// Parameters in layer order, weights before biases.
    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    pub(crate) fn assemble_input(&self, tau_t: &[f64], t: usize, cond: &[f64]) -> Result<Vec<f64>> {
        check_len("denoiser trajectory", self.arch.output_dim(), tau_t.len())?;
        check_len("denoiser condition", self.arch.cond_dim, cond.len())?;
        let mut x = Vec::with_capacity(self.arch.input_dim());
        x.extend_from_slice(tau_t);
        x.extend(time_embedding(t, self.arch.freqs));
        x.extend_from_slice(cond);
        Ok(x)
    }

    pub fn forward(&self, tau_t: &[f64], t: usize, cond: &[f64]) -> Result<Vec<f64>> {
        let x = self.assemble_input(tau_t, t, cond)?;
        Ok(self.forward_input(x))
    }

    pub(crate) fn forward_input(&self, mut x: Vec<f64>) -> Vec<f64> {
        let act = self.arch.activation;
        let last = self.layers.len() - 1;
        let mut buf = Vec::new();
        for (k, layer) in self.layers.iter().enumerate() {
            layer.forward_into(&x, &mut buf);
            if k < last {
                buf.iter_mut().for_each(|v| *v = act.apply(*v));
            }
            std::mem::swap(&mut x, &mut buf);
        }
        x
    }

    pub(crate) fn forward_cached(&self, input: Vec<f64>) -> (Vec<f64>, ForwardCache) {
        let act = self.arch.activation;
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(last);
        let mut x = input;
        for (k, layer) in self.layers.iter().enumerate() {
            let mut z = Vec::new();
            layer.forward_into(&x, &mut z);
            inputs.push(x);
            if k < last {
                x = z.iter().map(|&v| act.apply(v)).collect();
                pre.push(z);
            } else {
                x = z;
            }
        }
        (x, ForwardCache { inputs, pre })
    }

    /// Accumulates `d loss / d params` into `grads` given `d loss / d output`.
    pub(crate) fn backward(&self, cache: &ForwardCache, d_out: Vec<f64>, grads: &mut NetGradients) {
        let act = self.arch.activation;
        let mut delta = d_out;
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            let input = &cache.inputs[k];
            let g = &mut grads.layers[k];
            for (o, &d) in delta.iter().enumerate() {
                g.bias[o] += d;
                axpy(&mut g.weights[o * layer.in_dim..(o + 1) * layer.in_dim], d, input);
            }
            if k == 0 {
                break;
            }
            let mut d_in = vec![0.0; layer.in_dim];
            for (o, &d) in delta.iter().enumerate() {
                axpy(&mut d_in, d, layer.row(o));
            }
            for (di, &z) in d_in.iter_mut().zip(&cache.pre[k - 1]) {
                *di *= act.derivative(z);
            }
            delta = d_in;
        }
    }
}

pub fn denoiser_forward(net: &DenoiserNet, tau_t: &Trajectory, t: usize, c: &Condition) -> Result<Vec<f64>> {
    net.forward(tau_t.values(), t, c.features())
}
