//! Minimal neural substrate for the advising policies: fully-connected
//! networks with manual backpropagation, Adam, and Gumbel-Softmax sampling.
//!
//! Parameters live in one flat buffer per network (weights then biases per
//! layer), which keeps gradient buffers, Adam state, Polyak averaging, and
//! serialization trivial.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Output nonlinearity of a network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutputKind {
    Linear,
    Softmax,
}

/// Numerically stable softmax.
pub fn softmax(x: &[f64]) -> Vec<f64> {
    let m = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = x.iter().map(|&v| (v - m).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Vector-Jacobian product of softmax: given probabilities `p` and an
/// upstream gradient `g` with respect to the probabilities, returns the
/// gradient with respect to the logits.
pub fn softmax_vjp(p: &[f64], g: &[f64]) -> Vec<f64> {
    let dot: f64 = p.iter().zip(g).map(|(&pi, &gi)| pi * gi).sum();
    p.iter().zip(g).map(|(&pi, &gi)| pi * (gi - dot)).collect()
}

/// Draws one Gumbel-Softmax sample from unnormalized logits. Returns the hard
/// one-hot sample (argmax of the perturbed logits) and the relaxed soft
/// probabilities at the given temperature; straight-through use executes the
/// hard sample while gradients flow through the soft vector.
pub fn gumbel_softmax<R: Rng + ?Sized>(
    logits: &[f64],
    temperature: f64,
    rng: &mut R,
) -> (Vec<f64>, Vec<f64>) {
    let perturbed: Vec<f64> = logits
        .iter()
        .map(|&l| {
            let u: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
            l - (-u.ln()).ln()
        })
        .collect();
    let soft = softmax(&perturbed.iter().map(|&z| z / temperature).collect::<Vec<_>>());
    let mut hard = vec![0.0; logits.len()];
    hard[crate::qlearn::argmax(&perturbed)] = 1.0;
    (hard, soft)
}

/// Fully-connected network with rectified-linear hidden layers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mlp {
    widths: Vec<usize>,
    output: OutputKind,
    params: Vec<f64>,
}

/// Activations recorded during a forward pass, for backpropagation.
pub struct MlpCache {
    /// activations[0] is the input; the last entry is the network output.
    activations: Vec<Vec<f64>>,
}

impl MlpCache {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("cache holds the output")
    }
}

impl Mlp {
    /// Glorot-uniform initialization: weights drawn from
    /// U(+-sqrt(6/(fan_in+fan_out))), biases zero.
    pub fn new<R: Rng + ?Sized>(
        input: usize,
        hidden: &[usize],
        output_dim: usize,
        output: OutputKind,
        rng: &mut R,
    ) -> Self {
        let mut widths = Vec::with_capacity(hidden.len() + 2);
        widths.push(input);
        widths.extend_from_slice(hidden);
        widths.push(output_dim);
        let mut params = Vec::new();
        for l in 0..widths.len() - 1 {
            let (fan_in, fan_out) = (widths[l], widths[l + 1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for _ in 0..fan_in * fan_out {
                params.push(rng.gen_range(-bound..bound));
            }
            params.extend(std::iter::repeat(0.0).take(fan_out));
        }
        Mlp {
            widths,
            output,
            params,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn zero_grads(&self) -> Vec<f64> {
        vec![0.0; self.params.len()]
    }

    /// Mutable view of the output layer's bias vector, e.g. for nudging a
    /// network toward a default action before training.
    pub fn output_bias_mut(&mut self) -> &mut [f64] {
        let last = self.widths.len() - 2;
        let off = self.layer_offset(last) + self.widths[last] * self.widths[last + 1];
        let out = self.widths[last + 1];
        &mut self.params[off..off + out]
    }

    /// Offset of layer l's weight block; biases follow the weights.
    fn layer_offset(&self, layer: usize) -> usize {
        let mut off = 0;
        for l in 0..layer {
            off += self.widths[l] * self.widths[l + 1] + self.widths[l + 1];
        }
        off
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.forward_cached(x).activations.pop().unwrap()
    }

    pub fn forward_cached(&self, x: &[f64]) -> MlpCache {
        assert_eq!(x.len(), self.widths[0], "input width mismatch");
        let layers = self.widths.len() - 1;
        let mut activations = Vec::with_capacity(layers + 1);
        activations.push(x.to_vec());
        for l in 0..layers {
            let (n_in, n_out) = (self.widths[l], self.widths[l + 1]);
            let off = self.layer_offset(l);
            let w = &self.params[off..off + n_in * n_out];
            let b = &self.params[off + n_in * n_out..off + n_in * n_out + n_out];
            let a = &activations[l];
            let mut z = vec![0.0; n_out];
            for o in 0..n_out {
                let row = &w[o * n_in..(o + 1) * n_in];
                let mut acc = b[o];
                for i in 0..n_in {
                    acc += row[i] * a[i];
                }
                z[o] = acc;
            }
            let is_last = l == layers - 1;
            let out = if !is_last {
                z.iter().map(|&v| v.max(0.0)).collect()
            } else {
                match self.output {
                    OutputKind::Linear => z,
                    OutputKind::Softmax => softmax(&z),
                }
            };
            activations.push(out);
        }
        MlpCache { activations }
    }

    /// Backpropagates `grad_out` (gradient with respect to the network
    /// output) through the cached forward pass. Parameter gradients are
    /// accumulated into `grads`; the return value is the gradient with
    /// respect to the network input.
    pub fn backward(&self, cache: &MlpCache, grad_out: &[f64], grads: &mut [f64]) -> Vec<f64> {
        assert_eq!(grads.len(), self.params.len(), "gradient buffer mismatch");
        let layers = self.widths.len() - 1;
        let mut delta: Vec<f64> = match self.output {
            OutputKind::Linear => grad_out.to_vec(),
            OutputKind::Softmax => softmax_vjp(cache.output(), grad_out),
        };
        for l in (0..layers).rev() {
            let (n_in, n_out) = (self.widths[l], self.widths[l + 1]);
            let off = self.layer_offset(l);
            let a_prev = &cache.activations[l];
            // Parameter gradients.
            for o in 0..n_out {
                let d = delta[o];
                if d != 0.0 {
                    let wrow = &mut grads[off + o * n_in..off + (o + 1) * n_in];
                    for i in 0..n_in {
                        wrow[i] += d * a_prev[i];
                    }
                }
                grads[off + n_in * n_out + o] += d;
            }
            // Gradient with respect to the previous activation.
            let w = &self.params[off..off + n_in * n_out];
            let mut grad_prev = vec![0.0; n_in];
            for o in 0..n_out {
                let d = delta[o];
                if d != 0.0 {
                    let row = &w[o * n_in..(o + 1) * n_in];
                    for i in 0..n_in {
                        grad_prev[i] += d * row[i];
                    }
                }
            }
            if l > 0 {
                // Rectifier derivative: active exactly where the forward
                // activation is positive.
                for (g, &a) in grad_prev.iter_mut().zip(a_prev.iter()) {
                    if a <= 0.0 {
                        *g = 0.0;
                    }
                }
            }
            delta = grad_prev;
        }
        delta
    }

    /// Moves parameters toward `online` by fraction `tau` (Polyak averaging).
    /// The convex form keeps a full-rate call an exact copy.
    pub fn polyak_from(&mut self, online: &Mlp, tau: f64) {
        assert_eq!(self.params.len(), online.params.len());
        for (t, &o) in self.params.iter_mut().zip(online.params.iter()) {
            *t = (1.0 - tau) * *t + tau * o;
        }
    }
}

/// Adam optimizer with bias correction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(param_count: usize, lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
        }
    }

    /// Applies one descent step along `grads`. Rejects non-finite gradients.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("gradient passed to Adam".into()));
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}
