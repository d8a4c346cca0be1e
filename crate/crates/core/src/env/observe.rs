use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::layout::{Cell, GridLayout};
use crate::error::{Error, Result};

/// Side of the egocentric window.
pub const EGO_SIZE: usize = 5;

/// The three observation encoders.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ObsKind {
    /// 2x5x5 agent-centred window, channels {wall, goal}.
    #[serde(rename = "ego5")]
    Ego5,
    /// 3xHxW full grid, channels {wall, agent, goal}.
    #[serde(rename = "fs")]
    Fs,
    /// 4x(room+2)x(room+2) view of the current room, channels
    /// {wall, agent, goal, subgoal}.
    #[serde(rename = "sg")]
    Sg,
}

impl ObsKind {
    pub fn name(self) -> &'static str {
        match self {
            ObsKind::Ego5 => "ego5",
            ObsKind::Fs => "fs",
            ObsKind::Sg => "sg",
        }
    }
}

impl fmt::Display for ObsKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ObsKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ego5" | "5x5" | "ego" => Ok(ObsKind::Ego5),
            "fs" | "full" => Ok(ObsKind::Fs),
            // `hrg` is accepted as an alias
            "sg" | "hrg" => Ok(ObsKind::Sg),
            _ => Err(Error::UnknownObservation(s.to_string())),
        }
    }
}

/// A binary observation grid, channel-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub kind: ObsKind,
    pub shape: [usize; 3],
    pub data: Vec<f64>,
}

impl Observation {
    pub fn get(&self, channel: usize, row: usize, col: usize) -> f64 {
        let [_, h, w] = self.shape;
        self.data[(channel * h + row) * w + col]
    }

    /// Channel slice.
    pub fn channel(&self, channel: usize) -> &[f64] {
        let [_, h, w] = self.shape;
        &self.data[channel * h * w..(channel + 1) * h * w]
    }
}

/// All three encodings of one state.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservationSet {
    pub ego: Observation,
    pub full_state: Observation,
    pub subgoal_view: Observation,
}

impl GridLayout {
    pub fn obs_shape(&self, kind: ObsKind) -> [usize; 3] {
        match kind {
            ObsKind::Ego5 => [2, EGO_SIZE, EGO_SIZE],
            ObsKind::Fs => [3, self.height, self.width],
            ObsKind::Sg => [4, self.room_rows() + 2, self.room_cols() + 2],
        }
    }

    pub fn obs_len(&self, kind: ObsKind) -> usize {
        self.obs_shape(kind).iter().product()
    }

    pub fn observe(&self, pos: Cell, kind: ObsKind) -> Result<Observation> {
        let mut data = vec![0.0; self.obs_len(kind)];
        self.write_observation(pos, kind, &mut data)?;
        Ok(Observation {
            kind,
            shape: self.obs_shape(kind),
            data,
        })
    }

    pub fn observe_all(&self, pos: Cell) -> Result<ObservationSet> {
        Ok(ObservationSet {
            ego: self.observe(pos, ObsKind::Ego5)?,
            full_state: self.observe(pos, ObsKind::Fs)?,
            subgoal_view: self.observe(pos, ObsKind::Sg)?,
        })
    }

    /// Writes the encoding of the agent standing on `pos` into `out`, which
    /// must hold exactly `obs_len(kind)` values.
    pub fn write_observation(&self, pos: Cell, kind: ObsKind, out: &mut [f64]) -> Result<()> {
        if self.is_wall(pos) {
            return Err(Error::NotFloor {
                row: pos.row,
                col: pos.col,
            });
        }
        if out.len() != self.obs_len(kind) {
            return Err(Error::Shape(format!(
                "{kind} buffer holds {} values, expected {}",
                out.len(),
                self.obs_len(kind)
            )));
        }
        out.fill(0.0);
        match kind {
            ObsKind::Ego5 => self.write_ego(pos, out),
            ObsKind::Fs => self.write_full(pos, out),
            ObsKind::Sg => self.write_subgoal(pos, out),
        }
        Ok(())
    }

    fn write_ego(&self, pos: Cell, out: &mut [f64]) {
        let half = (EGO_SIZE / 2) as isize;
        let plane = EGO_SIZE * EGO_SIZE;
        for r in 0..EGO_SIZE {
            for c in 0..EGO_SIZE {
                let cell = pos.offset(r as isize - half, c as isize - half);
                let i = r * EGO_SIZE + c;
                match cell {
                    Some(cell) if self.in_bounds(cell) => {
                        if self.is_wall(cell) {
                            out[i] = 1.0;
                        }
                        if cell == self.goal_cell {
                            out[plane + i] = 1.0;
                        }
                    }
                    _ => out[i] = 1.0,
                }
            }
        }
    }

    fn write_full(&self, pos: Cell, out: &mut [f64]) {
        let plane = self.height * self.width;
        for (i, wall) in self.wall_mask().iter().enumerate() {
            if *wall {
                out[i] = 1.0;
            }
        }
        out[plane + self.idx(pos)] = 1.0;
        if self.mark_goal_in_pi {
            out[2 * plane + self.idx(self.goal_cell)] = 1.0;
        }
    }

    fn write_subgoal(&self, pos: Cell, out: &mut [f64]) {
        let room = self.room_of(pos).expect("floor cell has a room");
        let cols = self.room_window_cols(room);
        let [_, h, w] = self.obs_shape(ObsKind::Sg);
        let plane = h * w;
        let col0 = *cols.start();
        let local = |cell: Cell| -> Option<usize> {
            (cell.row < h && cols.contains(&cell.col)).then(|| cell.row * w + (cell.col - col0))
        };
        for r in 0..h {
            for c in 0..w {
                if self.is_wall(Cell::new(r, col0 + c)) {
                    out[r * w + c] = 1.0;
                }
            }
        }
        if let Some(i) = local(pos) {
            out[plane + i] = 1.0;
        }
        if let Some(i) = local(self.goal_cell) {
            out[2 * plane + i] = 1.0;
        }
        let sub = self.subgoal_for(pos).expect("floor cell has a subgoal");
        let i = local(sub).expect("subgoal lies on the room window");
        out[3 * plane + i] = 1.0;
    }
}
