//! Hidden-state datasets and their binary file format.
//!
//! ```text
//! offset  size  field
//! 0       8     magic "PIDRACTS"
//! 8       4     format version, u32 little-endian (currently 1)
//! 12      8     row count R, u64 little-endian
//! 20      4     hidden width W, u32 little-endian
//! 24      1     collection mode, 0 = test_time, 1 = train_time
//! 25      ...   R rows of: W little-endian f64 values, then the position
//!               class as a u32 little-endian
//! ```
//!
//! A plain-text sidecar (`<file>.txt`) repeats the header fields and the
//! class-to-cell table for humans.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{greedy_action, AgentNetwork, ForwardCtx};
use crate::env::{Action, EnvState, GridLayout};
use crate::error::{Error, Result};
use crate::stochastic::Mode;

pub const DATASET_MAGIC: &[u8; 8] = b"PIDRACTS";
pub const DATASET_VERSION: u32 = 1;

/// How the network runs while activations are recorded.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CollectionMode {
    /// Evaluation forward: no privileged input, no noise.
    TestTime,
    /// Training forward: privileged input read and noise sampled.
    TrainTime,
}

impl CollectionMode {
    pub fn name(self) -> &'static str {
        match self {
            CollectionMode::TestTime => "test_time",
            CollectionMode::TrainTime => "train_time",
        }
    }
}

impl FromStr for CollectionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "test_time" | "test" | "eval" => Ok(CollectionMode::TestTime),
            "train_time" | "train" => Ok(CollectionMode::TrainTime),
            _ => Err(Error::Value(format!("unknown collection mode `{s}` (expected test_time or train_time)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ActivationConfig {
    /// Random-action probability during the rollouts. Zero gives one
    /// deterministic rollout per start.
    pub epsilon: f64,
    /// Rollouts per start cell.
    pub rollouts_per_start: usize,
    /// Seeds exploration and, in train-time mode, the dropout noise.
    pub seed: u64,
}

impl Default for ActivationConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.0,
            rollouts_per_start: 1,
            seed: 0,
        }
    }
}

/// Rows of `(hidden state, position class)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ActivationDataset {
    pub mode: CollectionMode,
    pub width: usize,
    /// `rows x width`, row-major.
    pub features: Vec<f64>,
    /// Floor-cell class of each row.
    pub labels: Vec<u32>,
}

impl ActivationDataset {
    pub fn new(mode: CollectionMode, width: usize, features: Vec<f64>, labels: Vec<u32>) -> Result<Self> {
        if width == 0 || features.len() != labels.len() * width {
            return Err(Error::Shape(format!(
                "{} feature values for {} rows of width {width}",
                features.len(),
                labels.len()
            )));
        }
        Ok(Self {
            mode,
            width,
            features,
            labels,
        })
    }

    pub fn rows(&self) -> usize {
        self.labels.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.width..(i + 1) * self.width]
    }
}

/// Greedy rollouts from every start cell, recording the hidden state after
/// each observation together with the cell it was observed from.
pub fn collect_activations(
    net: &AgentNetwork,
    layout: &GridLayout,
    mode: CollectionMode,
    config: &ActivationConfig,
) -> Result<ActivationDataset> {
    let pi_kind = match mode {
        CollectionMode::TestTime => None,
        CollectionMode::TrainTime => Some(net.pi_len().and(net.variant.pi_kind).ok_or_else(|| {
            Error::Variant(format!(
                "{} has no privileged branch, so train-time activations are undefined",
                net.variant.label()
            ))
        })?),
    };
    let fmode = match mode {
        CollectionMode::TestTime => Mode::Eval,
        CollectionMode::TrainTime => Mode::Train,
    };
    let mut explore = ChaCha8Rng::seed_from_u64(config.seed);
    let mut noise = ChaCha8Rng::seed_from_u64(config.seed);
    noise.set_stream(1);
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for start in layout.enumerate_start_positions() {
        for _ in 0..config.rollouts_per_start {
            let mut state = EnvState::at(layout, *start)?;
            let mut h = net.initial_hidden(1);
            loop {
                let x = layout.observe(state.agent_pos, net.variant.x_kind)?;
                let pi = pi_kind.map(|k| layout.observe(state.agent_pos, k)).transpose()?;
                let mut ctx = ForwardCtx::new(fmode, usize::MAX, &mut noise);
                ctx.reconstruct = false;
                let out = net.forward(&x.data, pi.as_ref().map(|o| o.data.as_slice()), &h, &mut ctx)?;
                features.extend_from_slice(&out.h_next);
                labels.push(layout.floor_index(state.agent_pos).expect("agent on floor") as u32);
                h = out.h_next;
                let a = if config.epsilon > 0.0 && explore.random::<f64>() < config.epsilon {
                    explore.random_range(0..Action::COUNT)
                } else {
                    greedy_action(&out.q)
                };
                let step = layout.step(&state, Action::from_index(a).expect("index below COUNT"))?;
                state = step.next_state;
                if step.terminated || step.truncated {
                    break;
                }
            }
        }
    }
    ActivationDataset::new(mode, net.hidden_size(), features, labels)
}

pub fn encode_dataset(data: &ActivationDataset) -> Vec<u8> {
    let mut out = Vec::with_capacity(25 + data.rows() * (data.width * 8 + 4));
    out.extend_from_slice(DATASET_MAGIC);
    out.extend_from_slice(&DATASET_VERSION.to_le_bytes());
    out.extend_from_slice(&(data.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(data.width as u32).to_le_bytes());
    out.push(match data.mode {
        CollectionMode::TestTime => 0,
        CollectionMode::TrainTime => 1,
    });
    for (i, label) in data.labels.iter().enumerate() {
        for v in data.row(i) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&label.to_le_bytes());
    }
    out
}

pub fn decode_dataset(bytes: &[u8]) -> Result<ActivationDataset> {
    let bad = |m: &str| Error::Value(format!("activation dataset: {m}"));
    if bytes.len() < 25 || &bytes[..8] != DATASET_MAGIC {
        return Err(bad("bad magic"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != DATASET_VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let rows = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
    let width = u32::from_le_bytes(bytes[20..24].try_into().expect("4 bytes")) as usize;
    let mode = match bytes[24] {
        0 => CollectionMode::TestTime,
        1 => CollectionMode::TrainTime,
        m => return Err(bad(&format!("unknown mode byte {m}"))),
    };
    let stride = width * 8 + 4;
    if bytes.len() != 25 + rows * stride {
        return Err(bad("length does not match the header"));
    }
    let mut features = Vec::with_capacity(rows * width);
    let mut labels = Vec::with_capacity(rows);
    for r in bytes[25..].chunks_exact(stride) {
        features.extend(r[..width * 8].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))));
        labels.push(u32::from_le_bytes(r[width * 8..].try_into().expect("4 bytes")));
    }
    ActivationDataset::new(mode, width, features, labels)
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".txt");
    PathBuf::from(name)
}

/// Writes the binary table and its text sidecar.
pub fn save_dataset(path: &Path, data: &ActivationDataset, layout: &GridLayout) -> Result<()> {
    fs::write(path, encode_dataset(data)).map_err(|e| Error::io(path, e))?;
    let mut text = String::new();
    let _ = writeln!(text, "format: PIDRACTS version {DATASET_VERSION}");
    let _ = writeln!(text, "rows: {}", data.rows());
    let _ = writeln!(text, "width: {}", data.width);
    let _ = writeln!(text, "mode: {}", data.mode.name());
    let _ = writeln!(text, "row layout: {} x f64 LE hidden state, then u32 LE position class", data.width);
    let _ = writeln!(text, "classes (class row col room):");
    for (i, c) in layout.floor_cells().iter().enumerate() {
        let _ = writeln!(text, "{i} {} {} {}", c.row, c.col, layout.room_of(*c).unwrap_or(usize::MAX));
    }
    let side = sidecar_path(path);
    fs::write(&side, text).map_err(|e| Error::io(side, e))
}

pub fn load_dataset(path: &Path) -> Result<ActivationDataset> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_dataset(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_round_trip() {
        let d = ActivationDataset::new(CollectionMode::TrainTime, 3, vec![0.5, -1.0, 2.25, 0.0, 1e-300, -7.0], vec![4, 109])
            .unwrap();
        let bytes = encode_dataset(&d);
        assert_eq!(decode_dataset(&bytes).unwrap(), d);
        assert!(decode_dataset(&bytes[..bytes.len() - 1]).is_err());
    }
}
