//! Multiplicative log-normal noise conditioned on a variance head, the
//! information-bottleneck penalty that goes with it, and the annealed
//! Bernoulli mask used by the naive-dropout baseline.
//!
//! The variance head emits a pre-activation `s`; `alpha = sigmoid(s)` is the
//! standard deviation of the normal underlying the noise, so
//!
//! ```text
//! eps = exp(alpha * n),  n ~ N(0, 1)
//! z'  = z * eps                       (training)
//! z'  = z                             (evaluation: alpha forced to 0)
//! penalty = mean(-log alpha)
//! ```
//!
//! The penalty is added to the loss with weight `beta`, so minimising the
//! loss pushes `log alpha` up: the variance head is rewarded for drowning
//! out whatever parts of `z` the task does not need.
//!
//! Every function here works on flat slices and is pure given the RNG.

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::sigmoid;

/// Forward-pass regime. Evaluation never reads privileged input.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Train,
    Eval,
}

/// Per-element noise scale `alpha`.
#[derive(Clone, Debug, PartialEq)]
pub struct VarianceField {
    alpha: Vec<f64>,
}

impl VarianceField {
    /// Wraps raw scales. Values must be finite and non-negative; `0` is
    /// allowed here (it switches the noise off) but has no finite penalty.
    pub fn from_values(alpha: Vec<f64>) -> Result<Self> {
        if let Some(bad) = alpha.iter().find(|a| !a.is_finite() || **a < 0.0) {
            return Err(Error::Value(format!("noise scale must be finite and >= 0, got {bad}")));
        }
        Ok(Self { alpha })
    }

    pub fn values(&self) -> &[f64] {
        &self.alpha
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.alpha
    }
}

/// `alpha = sigmoid(s)` elementwise, kept strictly inside (0, 1): f64
/// rounds the sigmoid to exactly 1 beyond `s ~ 37`.
pub fn variance_from_preactivation(s: &[f64]) -> VarianceField {
    const ALPHA_MAX: f64 = 1.0 - f64::EPSILON / 2.0;
    VarianceField {
        alpha: s
            .iter()
            .map(|v| sigmoid(*v).clamp(f64::MIN_POSITIVE, ALPHA_MAX))
            .collect(),
    }
}

/// Chain rule through the sigmoid: `dL/ds = dL/dalpha * alpha (1 - alpha)`.
pub fn variance_backward(alpha: &VarianceField, d_alpha: &[f64]) -> Vec<f64> {
    alpha
        .alpha
        .iter()
        .zip(d_alpha)
        .map(|(a, d)| d * a * (1.0 - a))
        .collect()
}

/// A draw of the multiplicative noise, keeping the underlying normals for
/// the pathwise gradient.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSample {
    pub epsilon: Vec<f64>,
    pub normal: Vec<f64>,
}

/// `eps = exp(alpha * n)` with `n` standard normal, one draw per element in
/// order.
pub fn sample_noise(alpha: &VarianceField, rng: &mut dyn RngCore) -> NoiseSample {
    let normal: Vec<f64> = (0..alpha.len()).map(|_| rng.sample(StandardNormal)).collect();
    let epsilon = alpha.alpha.iter().zip(&normal).map(|(a, n)| (a * n).exp()).collect();
    NoiseSample { epsilon, normal }
}

/// Multiplies `z` by noise in training mode; returns `z` untouched in
/// evaluation mode. The sample is returned for the backward pass.
pub fn apply_pi_dropout(
    z: &[f64],
    alpha: &VarianceField,
    mode: Mode,
    rng: &mut dyn RngCore,
) -> Result<(Vec<f64>, Option<NoiseSample>)> {
    if z.len() != alpha.len() {
        return Err(Error::Shape(format!(
            "features have {} elements but the variance field has {}",
            z.len(),
            alpha.len()
        )));
    }
    match mode {
        Mode::Eval => Ok((z.to_vec(), None)),
        Mode::Train => {
            let noise = sample_noise(alpha, rng);
            let out = z.iter().zip(&noise.epsilon).map(|(v, e)| v * e).collect();
            Ok((out, Some(noise)))
        }
    }
}

/// Gradients of `z * exp(alpha * n)` with respect to `z` and `alpha`.
pub fn pi_dropout_backward(z: &[f64], noise: &NoiseSample, d_out: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let dz = d_out.iter().zip(&noise.epsilon).map(|(d, e)| d * e).collect();
    let d_alpha = d_out
        .iter()
        .zip(z)
        .zip(noise.epsilon.iter().zip(&noise.normal))
        .map(|((d, zv), (e, n))| d * zv * e * n)
        .collect();
    (dz, d_alpha)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IbPenalty {
    pub value: f64,
}

/// `mean(-log alpha)` over every element.
pub fn ib_penalty(alpha: &VarianceField) -> Result<IbPenalty> {
    if alpha.is_empty() {
        return Err(Error::Value("penalty over an empty variance field".into()));
    }
    let mut sum = 0.0;
    for a in &alpha.alpha {
        if !a.is_finite() || *a <= 0.0 {
            return Err(Error::Value(format!("penalty needs alpha in (0, 1], got {a}")));
        }
        sum -= a.ln();
    }
    Ok(IbPenalty {
        value: sum / alpha.len() as f64,
    })
}

/// `d mean(-log alpha) / d alpha = -1 / (N alpha)`.
pub fn ib_penalty_grad(alpha: &VarianceField) -> Vec<f64> {
    let n = alpha.len() as f64;
    alpha.alpha.iter().map(|a| -1.0 / (n * a)).collect()
}

/// Episodes over which the naive baseline anneals its drop probability
/// from 0 to 1.
pub const NAIVE_ANNEAL_EPISODES: usize = 3000;

/// `min(1, episode / anneal_episodes)`.
pub fn naive_drop_probability(episode: usize, anneal_episodes: usize) -> f64 {
    if anneal_episodes == 0 {
        return 1.0;
    }
    (episode as f64 / anneal_episodes as f64).min(1.0)
}

/// Bernoulli keep-mask with keep probability `1 - p`. No draws are made at
/// the endpoints `p = 0` and `p = 1`.
pub fn naive_dropout_mask(len: usize, p: f64, rng: &mut dyn RngCore) -> Vec<f64> {
    if p <= 0.0 {
        return vec![1.0; len];
    }
    if p >= 1.0 {
        return vec![0.0; len];
    }
    (0..len)
        .map(|_| if rng.random::<f64>() < p { 0.0 } else { 1.0 })
        .collect()
}

/// Unscaled Bernoulli masking with the annealed drop probability.
pub fn naive_dropout(features: &[f64], episode: usize, rng: &mut dyn RngCore) -> Vec<f64> {
    let p = naive_drop_probability(episode, NAIVE_ANNEAL_EPISODES);
    let mask = naive_dropout_mask(features.len(), p, rng);
    features.iter().zip(&mask).map(|(f, m)| f * m).collect()
}
