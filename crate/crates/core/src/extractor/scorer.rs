//! Windowed context layer plus a two-logit head.
//!
//! For sentence `i` with features `x_i`:
//!
//! ```text
//! h_i = tanh(b + sum_o W_o x_{i+o})      o in -w/2..=w/2, same chunk only
//! z_i = c + A h_i + B x_i                z_i = (z0, z1)
//! ```
//!
//! Parameters are stored flat so gradients, optimizers and checkpoints can
//! treat them as a single vector.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::features::SentenceFeatures;
use crate::error::{Error, Result};

pub const DEFAULT_WINDOW: usize = 3;
pub const DEFAULT_HIDDEN: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerParams {
    pub dim: usize,
    pub window: usize,
    pub hidden: usize,
    pub values: Vec<f64>,
}

impl ScorerParams {
    pub fn param_count(dim: usize, window: usize, hidden: usize) -> usize {
        window * hidden * dim + hidden + 2 * hidden + 2 * dim + 2
    }

    pub fn zeros(dim: usize, window: usize, hidden: usize) -> Result<Self> {
        if window.is_multiple_of(2) {
            return Err(Error::Config(format!("window must be odd, got {window}")));
        }
        Ok(ScorerParams {
            dim,
            window,
            hidden,
            values: vec![0.0; Self::param_count(dim, window, hidden)],
        })
    }

    /// Weights uniform in `[-scale, scale]`, biases zero.
    pub fn random(
        dim: usize,
        window: usize,
        hidden: usize,
        scale: f64,
        rng: &mut crate::rng::Rng,
    ) -> Result<Self> {
        let mut p = Self::zeros(dim, window, hidden)?;
        let (w, b_h, a, _, c) = p.offsets();
        for range in [w..b_h, a..c] {
            for v in &mut p.values[range] {
                *v = rng.random_range(-scale..=scale);
            }
        }
        Ok(p)
    }

    /// Start offsets of (W, b_h, A, B, c).
    fn offsets(&self) -> (usize, usize, usize, usize, usize) {
        let w = 0;
        let b_h = self.window * self.hidden * self.dim;
        let a = b_h + self.hidden;
        let b = a + 2 * self.hidden;
        let c = b + 2 * self.dim;
        (w, b_h, a, b, c)
    }

    fn w_index(&self, k: usize, h: usize, d: usize) -> usize {
        (k * self.hidden + h) * self.dim + d
    }

    pub fn head_bias_mut(&mut self) -> &mut [f64] {
        let (.., c) = self.offsets();
        &mut self.values[c..c + 2]
    }

    /// Direct feature-to-logit weights for logit `k` (0 or 1).
    pub fn direct_weights_mut(&mut self, k: usize) -> &mut [f64] {
        let (.., b, _) = self.offsets();
        let start = b + k * self.dim;
        &mut self.values[start..start + self.dim]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    fn check(&self, features: &SentenceFeatures) -> Result<()> {
        if features.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: features.dim(),
            });
        }
        let expected = Self::param_count(self.dim, self.window, self.hidden);
        if self.values.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: self.values.len(),
            });
        }
        Ok(())
    }
}

/// Binary logits `(z0, z1)` per sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceLogits(pub Vec<[f64; 2]>);

/// `ln(1 + e^x)` without overflow.
pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl SentenceLogits {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Selection probability `e^{z1} / (e^{z0} + e^{z1})`.
    pub fn prob(&self, i: usize) -> f64 {
        let [z0, z1] = self.0[i];
        sigmoid(z1 - z0)
    }

    pub fn probs(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.prob(i)).collect()
    }

    /// Log-probability of the action taken on sentence `i`.
    pub fn log_prob(&self, i: usize, selected: bool) -> f64 {
        let [z0, z1] = self.0[i];
        let d = z1 - z0;
        if selected {
            -softplus(-d)
        } else {
            -softplus(d)
        }
    }
}

/// Hidden activations kept from the forward pass for backpropagation.
pub struct ForwardCache {
    hidden: Vec<f64>,
}

fn neighbors(
    features: &SentenceFeatures,
    window: usize,
    i: usize,
) -> impl Iterator<Item = (usize, usize)> + '_ {
    let half = window / 2;
    (0..window).filter_map(move |k| {
        let j = (i + k).checked_sub(half)?;
        (j < features.len() && features.chunk_ids[j] == features.chunk_ids[i]).then_some((k, j))
    })
}

pub fn forward(
    features: &SentenceFeatures,
    params: &ScorerParams,
) -> Result<(SentenceLogits, ForwardCache)> {
    params.check(features)?;
    let (_, b_h, a, b, c) = params.offsets();
    let (dim, hid) = (params.dim, params.hidden);
    let v = &params.values;
    let n = features.len();
    let mut hidden = vec![0.0; n * hid];
    let mut logits = Vec::with_capacity(n);
    for i in 0..n {
        let h = &mut hidden[i * hid..(i + 1) * hid];
        h.copy_from_slice(&v[b_h..b_h + hid]);
        for (k, j) in neighbors(features, params.window, i) {
            let x = features.row(j);
            for (u, hu) in h.iter_mut().enumerate() {
                let w = &v[params.w_index(k, u, 0)..params.w_index(k, u, 0) + dim];
                *hu += w.iter().zip(x).map(|(w, x)| w * x).sum::<f64>();
            }
        }
        h.iter_mut().for_each(|x| *x = x.tanh());
        let x = features.row(i);
        let mut z = [v[c], v[c + 1]];
        for (out, zk) in z.iter_mut().enumerate() {
            *zk += v[a + out * hid..a + (out + 1) * hid]
                .iter()
                .zip(h.iter())
                .map(|(w, h)| w * h)
                .sum::<f64>();
            *zk += v[b + out * dim..b + (out + 1) * dim]
                .iter()
                .zip(x)
                .map(|(w, x)| w * x)
                .sum::<f64>();
        }
        logits.push(z);
    }
    Ok((SentenceLogits(logits), ForwardCache { hidden }))
}

/// Logits for every sentence.
pub fn score(features: &SentenceFeatures, params: &ScorerParams) -> Result<SentenceLogits> {
    forward(features, params).map(|(l, _)| l)
}

/// Gradient of a scalar loss with respect to the parameters, given the
/// loss gradient with respect to every logit.
pub fn backward(
    features: &SentenceFeatures,
    params: &ScorerParams,
    cache: &ForwardCache,
    dlogits: &[[f64; 2]],
) -> Vec<f64> {
    let (_, b_h, a, b, c) = params.offsets();
    let (dim, hid) = (params.dim, params.hidden);
    let v = &params.values;
    let mut grad = vec![0.0; v.len()];
    let mut gpre = vec![0.0; hid];
    for (i, gz) in dlogits.iter().enumerate() {
        if gz[0] == 0.0 && gz[1] == 0.0 {
            continue;
        }
        let h = &cache.hidden[i * hid..(i + 1) * hid];
        let x = features.row(i);
        for out in 0..2 {
            grad[c + out] += gz[out];
            for u in 0..hid {
                grad[a + out * hid + u] += gz[out] * h[u];
            }
            for d in 0..dim {
                grad[b + out * dim + d] += gz[out] * x[d];
            }
        }
        for u in 0..hid {
            let gh = gz[0] * v[a + u] + gz[1] * v[a + hid + u];
            gpre[u] = gh * (1.0 - h[u] * h[u]);
            grad[b_h + u] += gpre[u];
        }
        for (k, j) in neighbors(features, params.window, i) {
            let xj = features.row(j);
            for (u, g) in gpre.iter().enumerate() {
                let base = params.w_index(k, u, 0);
                for d in 0..dim {
                    grad[base + d] += g * xj[d];
                }
            }
        }
    }
    grad
}
