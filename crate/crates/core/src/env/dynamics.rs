use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layout::{Cell, GridLayout};
use crate::error::{Error, Result};

pub const STEP_REWARD: f64 = -0.1;
pub const GOAL_REWARD: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Up,
    Down,
    Left,
    Right,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::Up, Action::Down, Action::Left, Action::Right];
    pub const COUNT: usize = 4;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Self::ALL.get(i).copied()
    }

    pub(crate) fn delta(self) -> (isize, isize) {
        match self {
            Action::Up => (-1, 0),
            Action::Down => (1, 0),
            Action::Left => (0, -1),
            Action::Right => (0, 1),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvState {
    pub agent_pos: Cell,
    pub t: usize,
    pub episode_done: bool,
}

impl EnvState {
    /// Fresh state at `pos`; fails when `pos` is not floor.
    pub fn at(layout: &GridLayout, pos: Cell) -> Result<Self> {
        if layout.is_wall(pos) {
            return Err(Error::NotFloor {
                row: pos.row,
                col: pos.col,
            });
        }
        Ok(Self {
            agent_pos: pos,
            t: 0,
            episode_done: false,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepResult {
    pub reward: f64,
    pub terminated: bool,
    pub truncated: bool,
    pub next_state: EnvState,
}

impl GridLayout {
    /// Uniform start over [`enumerate_start_positions`](Self::enumerate_start_positions).
    pub fn reset<R: Rng + ?Sized>(&self, rng: &mut R) -> EnvState {
        let starts = self.enumerate_start_positions();
        let pos = starts[rng.random_range(0..starts.len())];
        EnvState {
            agent_pos: pos,
            t: 0,
            episode_done: false,
        }
    }

    pub fn step(&self, state: &EnvState, action: Action) -> Result<StepResult> {
        if state.episode_done || state.t >= self.max_steps {
            return Err(Error::EpisodeDone);
        }
        let (dr, dc) = action.delta();
        let pos = match state.agent_pos.offset(dr, dc) {
            Some(next) if self.is_floor(next) => next,
            _ => state.agent_pos,
        };
        let t = state.t + 1;
        let terminated = pos == self.goal_cell;
        let truncated = !terminated && t >= self.max_steps;
        let reward = if terminated {
            STEP_REWARD + GOAL_REWARD
        } else {
            STEP_REWARD
        };
        Ok(StepResult {
            reward,
            terminated,
            truncated,
            next_state: EnvState {
                agent_pos: pos,
                t,
                episode_done: terminated || truncated,
            },
        })
    }
}
