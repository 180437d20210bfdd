//! Dense tanh multilayer perceptrons with hand-written backpropagation.
//!
//! Parameters live in one flat `Vec<f64>` (per layer: row-major weights of
//! shape `out x in`, then the bias), which keeps optimisers, checkpoints and
//! finite-difference checks trivial.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Activations recorded by [`Mlp::forward_cached`]; `layers[0]` is the input
/// and `layers[last]` the (linear) output.
#[derive(Debug, Clone)]
pub struct Cache {
    layers: Vec<Vec<f64>>,
}

impl Cache {
    pub fn output(&self) -> &[f64] {
        self.layers.last().expect("cache has an output layer")
    }
}

pub fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl Mlp {
    /// Glorot-uniform hidden layers; the output layer is additionally scaled
    /// by `output_scale` (small values give near-zero initial outputs).
    pub fn new(sizes: &[usize], output_scale: f64, rng: &mut Rng) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs an input and an output size");
        let mut params = Vec::with_capacity(param_count(sizes));
        let n_layers = sizes.len() - 1;
        for (l, w) in sizes.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let mut bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            if l + 1 == n_layers {
                bound *= output_scale;
            }
            for _ in 0..fan_in * fan_out {
                params.push(rng.random_range(-1.0..=1.0) * bound);
            }
            params.extend(std::iter::repeat_n(0.0, fan_out));
        }
        Self {
            sizes: sizes.to_vec(),
            params,
        }
    }

    pub fn from_params(sizes: Vec<usize>, params: Vec<f64>) -> Option<Self> {
        (sizes.len() >= 2 && param_count(&sizes) == params.len()).then_some(Self { sizes, params })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.input_dim());
        let n_layers = self.sizes.len() - 1;
        let mut cur = x.to_vec();
        let mut offset = 0;
        for l in 0..n_layers {
            let next = self.affine(l, offset, &cur);
            offset += self.sizes[l] * self.sizes[l + 1] + self.sizes[l + 1];
            cur = if l + 1 < n_layers {
                next.into_iter().map(f64::tanh).collect()
            } else {
                next
            };
        }
        cur
    }

    pub fn forward_cached(&self, x: &[f64]) -> Cache {
        debug_assert_eq!(x.len(), self.input_dim());
        let n_layers = self.sizes.len() - 1;
        let mut layers = Vec::with_capacity(n_layers + 1);
        layers.push(x.to_vec());
        let mut offset = 0;
        for l in 0..n_layers {
            let mut next = self.affine(l, offset, &layers[l]);
            offset += self.sizes[l] * self.sizes[l + 1] + self.sizes[l + 1];
            if l + 1 < n_layers {
                next.iter_mut().for_each(|v| *v = v.tanh());
            }
            layers.push(next);
        }
        Cache { layers }
    }

    fn affine(&self, l: usize, offset: usize, input: &[f64]) -> Vec<f64> {
        let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
        let w = &self.params[offset..offset + n_in * n_out];
        let b = &self.params[offset + n_in * n_out..offset + n_in * n_out + n_out];
        w.chunks_exact(n_in)
            .zip(b)
            .map(|(row, bias)| bias + row.iter().zip(input).map(|(a, x)| a * x).sum::<f64>())
            .collect()
    }

    /// Accumulates d(loss)/d(params) into `grads` given d(loss)/d(output).
    /// Returns d(loss)/d(input).
    pub fn backward(&self, cache: &Cache, grad_out: &[f64], grads: &mut [f64]) -> Vec<f64> {
        debug_assert_eq!(grads.len(), self.params.len());
        let n_layers = self.sizes.len() - 1;
        let mut offsets = Vec::with_capacity(n_layers);
        let mut acc = 0;
        for l in 0..n_layers {
            offsets.push(acc);
            acc += self.sizes[l] * self.sizes[l + 1] + self.sizes[l + 1];
        }

        let mut delta = grad_out.to_vec();
        for l in (0..n_layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let input = &cache.layers[l];
            let off = offsets[l];
            let (gw, rest) = grads[off..off + n_in * n_out + n_out].split_at_mut(n_in * n_out);
            let w = &self.params[off..off + n_in * n_out];
            let mut grad_in = vec![0.0; n_in];
            for (o, &d) in delta.iter().enumerate() {
                rest[o] += d;
                if d == 0.0 {
                    continue;
                }
                let row = &mut gw[o * n_in..(o + 1) * n_in];
                let wrow = &w[o * n_in..(o + 1) * n_in];
                for i in 0..n_in {
                    row[i] += d * input[i];
                    grad_in[i] += d * wrow[i];
                }
            }
            if l > 0 {
                // input to this layer is tanh output of the previous one
                for (g, a) in grad_in.iter_mut().zip(input) {
                    *g *= 1.0 - a * a;
                }
            }
            delta = grad_in;
        }
        delta
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        debug_assert_eq!(params.len(), self.m.len());
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= self.lr * (*m / bc1) / ((*v / bc2).sqrt() + self.eps);
        }
    }
}

pub fn sgd_step(params: &mut [f64], grads: &[f64], lr: f64) {
    for (p, g) in params.iter_mut().zip(grads) {
        *p -= lr * g;
    }
}

/// Rescales `grads` in place so their global L2 norm is at most `max_norm`;
/// returns the norm before clipping.
pub fn clip_grad_norm(grads: &mut [f64], max_norm: f64) -> f64 {
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        grads.iter_mut().for_each(|g| *g *= s);
    }
    norm
}

/// Maps values from `[0, 1]` to `[-1, 1]`, the input range the networks
/// are initialised for.
pub fn centered(xs: &[f64]) -> Vec<f64> {
    xs.iter().map(|x| 2.0 * x - 1.0).collect()
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub fn log_softmax(xs: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(xs);
    xs.iter().map(|x| x - lse).collect()
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
