use serde::{Deserialize, Serialize};

use crate::agent::VariantParams;
use crate::error::{Error, Result};
use crate::stochastic::NAIVE_ANNEAL_EPISODES;

/// Every knob of a training run. All fields have defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub total_episodes: usize,
    pub gamma: f64,
    pub learning_rate: f64,
    /// Windows per gradient step.
    pub batch_size: usize,
    /// Leading window steps that only warm up the GRU.
    pub burn_in: usize,
    /// Window steps that enter the loss.
    pub train_len: usize,
    /// Episodes kept in replay.
    pub replay_capacity: usize,
    /// Episodes collected before the first update.
    pub min_fill: usize,
    pub tau: f64,
    pub updates_per_episode: usize,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_decay_episodes: usize,
    pub beta: f64,
    pub lambda_aux: f64,
    pub lambda_dis: f64,
    pub naive_anneal_episodes: usize,
    /// Greedy evaluation and checkpoint cadence, in episodes.
    pub eval_every: usize,
    /// Global gradient-norm clip; 0 disables it.
    pub grad_clip: f64,
    /// Sample PI-dropout noise (and the ND mask) while acting.
    pub noise_while_acting: bool,
    /// Keep only the newest checkpoint when set; otherwise keep them all.
    pub keep_last_checkpoint_only: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            total_episodes: 10_000,
            gamma: 0.99,
            learning_rate: 5e-4,
            batch_size: 32,
            burn_in: 4,
            train_len: 16,
            replay_capacity: 1000,
            min_fill: 50,
            tau: 0.005,
            updates_per_episode: 4,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_episodes: 4000,
            beta: 0.01,
            lambda_aux: 1.0,
            lambda_dis: 1.0,
            naive_anneal_episodes: NAIVE_ANNEAL_EPISODES,
            eval_every: 100,
            grad_clip: 10.0,
            noise_while_acting: true,
            keep_last_checkpoint_only: false,
        }
    }
}

impl TrainConfig {
    pub fn window(&self) -> usize {
        self.burn_in + self.train_len
    }

    pub fn variant_params(&self) -> VariantParams {
        VariantParams {
            beta: self.beta,
            lambda_aux: self.lambda_aux,
            lambda_dis: self.lambda_dis,
            naive_anneal_episodes: self.naive_anneal_episodes,
        }
    }

    /// Exploration rate for `episode`: linear from `epsilon_start` to
    /// `epsilon_end` over `epsilon_decay_episodes`, then flat.
    pub fn epsilon(&self, episode: usize) -> f64 {
        let frac = if self.epsilon_decay_episodes == 0 {
            1.0
        } else {
            (episode as f64 / self.epsilon_decay_episodes as f64).min(1.0)
        };
        if frac >= 1.0 {
            return self.epsilon_end;
        }
        (self.epsilon_start - (self.epsilon_start - self.epsilon_end) * frac).max(self.epsilon_end)
    }

    pub fn validate(&self, max_steps: usize) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.total_episodes == 0 {
            return bad("total_episodes must be positive");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.batch_size == 0 || self.train_len == 0 || self.replay_capacity == 0 || self.eval_every == 0 {
            return bad("batch_size, train_len, replay_capacity and eval_every must be positive");
        }
        if self.window() > max_steps {
            return Err(Error::Config(format!(
                "burn_in + train_len = {} exceeds the episode limit {max_steps}",
                self.window()
            )));
        }
        if self.min_fill == 0 || self.min_fill > self.replay_capacity {
            return bad("min_fill must lie in 1..=replay_capacity");
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad("tau must lie in (0, 1]");
        }
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        if !prob(self.epsilon_start) || !prob(self.epsilon_end) || self.epsilon_end > self.epsilon_start {
            return bad("need 0 <= epsilon_end <= epsilon_start <= 1");
        }
        for (name, v) in [("beta", self.beta), ("lambda_aux", self.lambda_aux), ("lambda_dis", self.lambda_dis)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be finite and non-negative")));
            }
        }
        if !(self.grad_clip >= 0.0) {
            return bad("grad_clip must be non-negative");
        }
        Ok(())
    }
}
