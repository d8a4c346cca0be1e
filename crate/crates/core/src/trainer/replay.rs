use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{Action, Cell, GridLayout, ObsKind};
use crate::error::{Error, Result};

/// One whole episode. Observations are a pure function of the agent cell,
/// so the record keeps the `T + 1` visited cells and renders any encoding
/// (ego view, full state, sub-goal view) on demand.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    /// `positions[t]` is the cell observed before action `t`; the last entry
    /// is the cell after the final action.
    pub positions: Vec<Cell>,
    pub actions: Vec<Action>,
    pub rewards: Vec<f64>,
    /// The final step entered the goal.
    pub terminated: bool,
    /// The final step hit the step limit without reaching the goal.
    pub truncated: bool,
}

impl EpisodeRecord {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn episode_return(&self) -> f64 {
        self.rewards.iter().sum()
    }

    pub fn terminated_at(&self, t: usize) -> bool {
        self.terminated && t + 1 == self.len()
    }

    pub fn truncated_at(&self, t: usize) -> bool {
        self.truncated && t + 1 == self.len()
    }

    /// Observation of `kind` seen at step `t` (`t == len()` gives the state
    /// after the last action).
    pub fn observation(&self, layout: &GridLayout, t: usize, kind: ObsKind) -> Result<Vec<f64>> {
        let pos = *self
            .positions
            .get(t)
            .ok_or_else(|| Error::Shape(format!("step {t} is past the end of a {}-step episode", self.len())))?;
        Ok(layout.observe(pos, kind)?.data)
    }

    /// Structural checks: lengths agree and done flags are consistent.
    pub fn validate(&self) -> Result<()> {
        let t = self.actions.len();
        if t == 0 || self.rewards.len() != t || self.positions.len() != t + 1 {
            return Err(Error::Shape(format!(
                "episode with {} actions, {} rewards and {} positions",
                t,
                self.rewards.len(),
                self.positions.len()
            )));
        }
        if self.terminated && self.truncated {
            return Err(Error::Value("episode both terminated and truncated".into()));
        }
        Ok(())
    }
}

/// FIFO of whole episodes.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    episodes: VecDeque<EpisodeRecord>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            episodes: VecDeque::with_capacity(capacity),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    /// Appends, evicting the oldest episode when full.
    pub fn push(&mut self, episode: EpisodeRecord) {
        if self.episodes.len() == self.capacity {
            self.episodes.pop_front();
        }
        self.episodes.push_back(episode);
    }

    pub fn get(&self, i: usize) -> Option<&EpisodeRecord> {
        self.episodes.get(i)
    }

    pub fn iter(&self) -> impl Iterator<Item = &EpisodeRecord> {
        self.episodes.iter()
    }
}

/// A contiguous slice `[start, start + len)` of stored episode `episode`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Window {
    pub episode: usize,
    pub start: usize,
    pub len: usize,
}

/// Draws `count` windows: an episode uniformly, then a start uniform in
/// `[0, max(0, T - window)]`. Episodes shorter than `window` yield a single
/// window covering the whole episode.
pub fn sample_windows<R: Rng + ?Sized>(
    buffer: &ReplayBuffer,
    count: usize,
    window: usize,
    rng: &mut R,
) -> Result<Vec<Window>> {
    if buffer.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    Ok((0..count)
        .map(|_| {
            let episode = rng.random_range(0..buffer.len());
            let t = buffer.episodes[episode].len();
            let start = rng.random_range(0..=t.saturating_sub(window));
            Window {
                episode,
                start,
                len: window.min(t),
            }
        })
        .collect())
}
