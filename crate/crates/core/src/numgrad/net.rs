use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numgrad::Tensor;

/// Elementwise activation applied after each affine layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Mish,
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Mish => x * softplus(x).tanh(),
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative as a function of the pre-activation input.
    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Mish => {
                let t = softplus(x).tanh();
                let sigma = 1.0 / (1.0 + (-x).exp());
                t + x * (1.0 - t * t) * sigma
            }
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Activation::Identity => 1.0,
        }
    }
}

/// Numerically stable ln(1 + e^x).
#[inline]
fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else if x < -30.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Layer {
    /// Row-major `[out_dim, in_dim]`.
    weights: Vec<f64>,
    bias: Vec<f64>,
    in_dim: usize,
    out_dim: usize,
    activation: Activation,
}

static NET_IDS: AtomicU64 = AtomicU64::new(1);

/// A small fully connected network with one activation per layer.
///
/// The network is a plain value: cloning it clones the parameters. Every
/// parameter mutation bumps `version`, which invalidates tapes recorded
/// before the mutation.
#[derive(Debug, Clone)]
pub struct FeedforwardNetwork {
    layers: Vec<Layer>,
    id: u64,
    version: u64,
}

/// Activation record from one forward pass, consumed by [`FeedforwardNetwork::backward`].
#[derive(Debug, Clone)]
pub struct Tape {
    net_id: u64,
    version: u64,
    input: Tensor,
    /// Pre-activation values per layer, `[B, out_dim]` each.
    pre: Vec<Tensor>,
    /// Post-activation values per layer.
    post: Vec<Tensor>,
}

impl Tape {
    pub fn output(&self) -> &Tensor {
        self.post.last().expect("tape has at least one layer")
    }
}

/// Per-layer parameter gradients matching a network's layout.
#[derive(Debug, Clone)]
pub struct Gradients {
    weights: Vec<Vec<f64>>,
    bias: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &FeedforwardNetwork) -> Self {
        Gradients {
            weights: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            bias: net.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += *y;
            }
        }
        for (a, b) in self.bias.iter_mut().zip(&other.bias) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += *y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for w in &mut self.weights {
            for x in w {
                *x *= factor;
            }
        }
        for b in &mut self.bias {
            for x in b {
                *x *= factor;
            }
        }
    }

    /// Flatten in the same order as [`FeedforwardNetwork::flat_params`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.bias) {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }

    /// Inverse of [`Gradients::flatten`] for a given network layout.
    pub fn from_flat(net: &FeedforwardNetwork, flat: &[f64]) -> Result<Self> {
        if flat.len() != net.param_count() {
            return Err(Error::Dimension(format!(
                "flat gradient length {} does not match {} parameters",
                flat.len(),
                net.param_count()
            )));
        }
        let mut grads = Gradients::zeros_like(net);
        let mut offset = 0;
        for (w, b) in grads.weights.iter_mut().zip(&mut grads.bias) {
            let (wl, bl) = (w.len(), b.len());
            w.copy_from_slice(&flat[offset..offset + wl]);
            offset += wl;
            b.copy_from_slice(&flat[offset..offset + bl]);
            offset += bl;
        }
        Ok(grads)
    }
}

impl FeedforwardNetwork {
    /// Build a network with the given layer widths, e.g. `[in, h, h, out]`.
    ///
    /// Hidden layers use `hidden`; the final layer is `Identity`. Weights
    /// are Kaiming-uniform with fan-in scaling, biases start at zero.
    pub fn new<R: Rng + ?Sized>(dims: &[usize], hidden: Activation, rng: &mut R) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::Config("network needs at least one layer".into()));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for k in 0..dims.len() - 1 {
            let (in_dim, out_dim) = (dims[k], dims[k + 1]);
            let limit = (6.0 / in_dim as f64).sqrt();
            let weights: Vec<f64> = (0..in_dim * out_dim)
                .map(|_| rng.random_range(-limit..limit))
                .collect();
            let activation = if k + 1 == dims.len() - 1 {
                Activation::Identity
            } else {
                hidden
            };
            layers.push(Layer {
                weights,
                bias: vec![0.0; out_dim],
                in_dim,
                out_dim,
                activation,
            });
        }
        Ok(FeedforwardNetwork {
            layers,
            id: NET_IDS.fetch_add(1, Ordering::Relaxed),
            version: 0,
        })
    }

    /// All-zero parameters; useful as a constant-zero function and in tests.
    pub fn zeros(dims: &[usize], hidden: Activation) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::Config("network needs at least one layer".into()));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        let layers = (0..dims.len() - 1)
            .map(|k| Layer {
                weights: vec![0.0; dims[k] * dims[k + 1]],
                bias: vec![0.0; dims[k + 1]],
                in_dim: dims[k],
                out_dim: dims[k + 1],
                activation: if k + 1 == dims.len() - 1 {
                    Activation::Identity
                } else {
                    hidden
                },
            })
            .collect();
        Ok(FeedforwardNetwork {
            layers,
            id: NET_IDS.fetch_add(1, Ordering::Relaxed),
            version: 0,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim
    }

    /// Layer widths `[in, ..., out]`.
    pub fn dims(&self) -> Vec<usize> {
        let mut d: Vec<usize> = self.layers.iter().map(|l| l.in_dim).collect();
        d.push(self.output_dim());
        d
    }

    pub fn activations(&self) -> Vec<Activation> {
        self.layers.iter().map(|l| l.activation).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    /// Parameters flattened layer by layer, weights then bias.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    /// Overwrite all parameters from a flat vector (invalidates tapes).
    pub fn set_flat_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::Dimension(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                params.len()
            )));
        }
        let mut offset = 0;
        for l in &mut self.layers {
            let (wl, bl) = (l.weights.len(), l.bias.len());
            l.weights.copy_from_slice(&params[offset..offset + wl]);
            offset += wl;
            l.bias.copy_from_slice(&params[offset..offset + bl]);
            offset += bl;
        }
        self.version += 1;
        Ok(())
    }

    /// In-place update `p = delta(idx, p)` over the flat parameter vector
    /// (invalidates tapes).
    pub fn apply_flat_update(&mut self, mut delta: impl FnMut(usize, f64) -> f64) {
        let mut idx = 0;
        for l in &mut self.layers {
            for w in &mut l.weights {
                *w = delta(idx, *w);
                idx += 1;
            }
            for b in &mut l.bias {
                *b = delta(idx, *b);
                idx += 1;
            }
        }
        self.version += 1;
    }

    fn check_input(&self, input: &Tensor) -> Result<usize> {
        if input.row_width() != self.input_dim() {
            return Err(Error::Dimension(format!(
                "input width {} does not match network input dim {}",
                input.row_width(),
                self.input_dim()
            )));
        }
        Ok(input.batch_rows())
    }

    /// Forward pass keeping the activation record needed for `backward`.
    pub fn forward(&self, input: &Tensor) -> Result<(Tensor, Tape)> {
        let batch = self.check_input(input)?;
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post = Vec::with_capacity(self.layers.len());
        let mut current = input.clone();
        for layer in &self.layers {
            let mut z = Tensor::zeros(vec![batch, layer.out_dim]);
            affine(layer, &current, &mut z);
            let mut a = z.clone();
            for v in a.data_mut() {
                *v = layer.activation.apply(*v);
            }
            pre.push(z);
            current = a.clone();
            post.push(a);
        }
        let output = post.last().unwrap().clone();
        Ok((
            output,
            Tape {
                net_id: self.id,
                version: self.version,
                input: input.clone(),
                pre,
                post,
            },
        ))
    }

    /// Forward pass without recording a tape.
    pub fn infer(&self, input: &Tensor) -> Result<Tensor> {
        let batch = self.check_input(input)?;
        let mut current = input.clone();
        for layer in &self.layers {
            let mut z = Tensor::zeros(vec![batch, layer.out_dim]);
            affine(layer, &current, &mut z);
            for v in z.data_mut() {
                *v = layer.activation.apply(*v);
            }
            current = z;
        }
        Ok(current)
    }

    /// Scalar-output convenience for critics: single row in, single f64 out.
    pub fn infer_scalar(&self, input: &[f64]) -> Result<f64> {
        let out = self.infer(&Tensor::new_unchecked(vec![input.len()], input.to_vec()))?;
        Ok(out.data()[0])
    }

    /// Reverse pass for the scalar loss whose gradient w.r.t. the forward
    /// output is `output_gradient` (shape `[B, out]`, summed over the batch).
    ///
    /// Returns parameter gradients and the gradient w.r.t. the input, which
    /// is what lets losses chain across diffusion steps.
    pub fn backward(&self, tape: &Tape, output_gradient: &Tensor) -> Result<(Gradients, Tensor)> {
        if tape.net_id != self.id || tape.version != self.version {
            return Err(Error::StaleTape);
        }
        let batch = tape.input.batch_rows();
        let out_dim = self.output_dim();
        if output_gradient.batch_rows() != batch || output_gradient.row_width() != out_dim {
            return Err(Error::Dimension(format!(
                "output gradient shape {:?} does not match output [{batch}, {out_dim}]",
                output_gradient.shape()
            )));
        }

        let mut grads = Gradients::zeros_like(self);
        let mut upstream = output_gradient.clone();
        for (k, layer) in self.layers.iter().enumerate().rev() {
            let pre = &tape.pre[k];
            let layer_input = if k == 0 { &tape.input } else { &tape.post[k - 1] };

            // d(loss)/d(pre-activation)
            let mut dz = upstream;
            for (v, &p) in dz.data_mut().iter_mut().zip(pre.data()) {
                *v *= layer.activation.derivative(p);
            }

            let wg = &mut grads.weights[k];
            let bg = &mut grads.bias[k];
            let mut dinput = Tensor::zeros(vec![batch, layer.in_dim]);
            for b in 0..batch {
                let dz_row = dz.row(b);
                let in_row = layer_input.row(b);
                let di_row = dinput.row_mut(b);
                for o in 0..layer.out_dim {
                    let g = dz_row[o];
                    if g == 0.0 {
                        continue;
                    }
                    bg[o] += g;
                    let w_row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                    let wg_row = &mut wg[o * layer.in_dim..(o + 1) * layer.in_dim];
                    for i in 0..layer.in_dim {
                        wg_row[i] += g * in_row[i];
                        di_row[i] += g * w_row[i];
                    }
                }
            }
            upstream = dinput;
        }
        Ok((grads, upstream))
    }
}

#[inline]
fn affine(layer: &Layer, input: &Tensor, out: &mut Tensor) {
    let batch = input.batch_rows();
    for b in 0..batch {
        let in_row = input.row(b);
        let out_row = out.row_mut(b);
        for o in 0..layer.out_dim {
            let w_row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
            let mut acc = layer.bias[o];
            for i in 0..layer.in_dim {
                acc = w_row[i].mul_add(in_row[i], acc);
            }
            out_row[o] = acc;
        }
    }
}

// Serialization support for checkpoints: parameters plus structure, no ids.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct NetSpec {
    pub dims: Vec<usize>,
    pub activations: Vec<Activation>,
}

impl FeedforwardNetwork {
    pub(crate) fn spec(&self) -> NetSpec {
        NetSpec {
            dims: self.dims(),
            activations: self.activations(),
        }
    }

    pub(crate) fn from_spec_and_params(spec: &NetSpec, params: &[f64]) -> Result<Self> {
        if spec.activations.len() + 1 != spec.dims.len() {
            return Err(Error::Config("activation list does not match layer count".into()));
        }
        let mut net = FeedforwardNetwork::zeros(&spec.dims, Activation::Identity)?;
        for (l, act) in net.layers.iter_mut().zip(&spec.activations) {
            l.activation = *act;
        }
        net.set_flat_params(params)?;
        Ok(net)
    }
}
