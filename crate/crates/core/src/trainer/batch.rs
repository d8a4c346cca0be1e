use crate::env::{Cell, GridLayout, ObsKind};
use crate::error::{Error, Result};

use super::replay::{ReplayBuffer, Window};

/// Every observation encoding of every floor cell, rendered once.
#[derive(Clone, Debug)]
pub struct FrameCache {
    lens: [usize; 3],
    frames: [Vec<f64>; 3],
    floor_index: Vec<Option<usize>>,
    width: usize,
}

fn slot(kind: ObsKind) -> usize {
    match kind {
        ObsKind::Ego5 => 0,
        ObsKind::Fs => 1,
        ObsKind::Sg => 2,
    }
}

impl FrameCache {
    pub fn new(layout: &GridLayout) -> Result<Self> {
        let kinds = [ObsKind::Ego5, ObsKind::Fs, ObsKind::Sg];
        let lens = kinds.map(|k| layout.obs_len(k));
        let floor = layout.floor_cells();
        let mut frames: [Vec<f64>; 3] = Default::default();
        for (k, kind) in kinds.iter().enumerate() {
            let mut buf = vec![0.0; floor.len() * lens[k]];
            for (i, cell) in floor.iter().enumerate() {
                layout.write_observation(*cell, *kind, &mut buf[i * lens[k]..(i + 1) * lens[k]])?;
            }
            frames[k] = buf;
        }
        let floor_index = (0..layout.height * layout.width)
            .map(|i| layout.floor_index(Cell::new(i / layout.width, i % layout.width)))
            .collect();
        Ok(Self {
            lens,
            frames,
            floor_index,
            width: layout.width,
        })
    }

    pub fn len_of(&self, kind: ObsKind) -> usize {
        self.lens[slot(kind)]
    }

    pub fn get(&self, cell: Cell, kind: ObsKind) -> Result<&[f64]> {
        let idx = self
            .floor_index
            .get(cell.row * self.width + cell.col)
            .copied()
            .flatten()
            .ok_or(Error::NotFloor {
                row: cell.row,
                col: cell.col,
            })?;
        let len = self.lens[slot(kind)];
        Ok(&self.frames[slot(kind)][idx * len..(idx + 1) * len])
    }
}

/// Time-major tensors for a batch of replay windows, padded to the longest
/// window. Slot `s` of window `b` is step `start + s` of its episode; `x`
/// (and `pi`) carry one extra slot holding the next observation so the
/// target network can bootstrap from the last step.
#[derive(Clone, Debug)]
pub struct WindowBatch {
    pub batch: usize,
    /// Longest window length.
    pub steps: usize,
    pub lens: Vec<usize>,
    /// `(steps + 1) x batch x x_len`
    pub x: Vec<f64>,
    pub x_len: usize,
    /// `(steps + 1) x batch x pi_len`, present when requested.
    pub pi: Option<Vec<f64>>,
    pub pi_len: usize,
    /// Full-state frames `steps x batch x fs_len`, present when requested.
    pub fs: Option<Vec<f64>>,
    pub fs_len: usize,
    /// `steps x batch`, row-major by slot.
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub terminated: Vec<bool>,
    pub valid: Vec<bool>,
}

impl WindowBatch {
    /// Gathers `windows` from `buffer`. `pi_kind` selects the privileged
    /// encoding, `with_fs` adds full-state frames (reconstruction targets
    /// and teacher input).
    pub fn gather(
        buffer: &ReplayBuffer,
        windows: &[Window],
        cache: &FrameCache,
        x_kind: ObsKind,
        pi_kind: Option<ObsKind>,
        with_fs: bool,
    ) -> Result<Self> {
        let n = windows.len();
        if n == 0 {
            return Err(Error::Shape("empty window batch".into()));
        }
        let steps = windows.iter().map(|w| w.len).max().unwrap_or(0);
        let x_len = cache.len_of(x_kind);
        let pi_len = pi_kind.map(|k| cache.len_of(k)).unwrap_or(0);
        let fs_len = cache.len_of(ObsKind::Fs);
        let mut x = Vec::with_capacity((steps + 1) * n * x_len);
        let mut pi = pi_kind.map(|_| Vec::with_capacity((steps + 1) * n * pi_len));
        let mut fs = with_fs.then(|| Vec::with_capacity(steps * n * fs_len));
        let mut actions = Vec::with_capacity(steps * n);
        let mut rewards = Vec::with_capacity(steps * n);
        let mut terminated = Vec::with_capacity(steps * n);
        let mut valid = Vec::with_capacity(steps * n);
        let episodes: Vec<_> = windows
            .iter()
            .map(|w| {
                let ep = buffer.get(w.episode).ok_or(Error::EmptyBuffer)?;
                if w.start + w.len > ep.len() {
                    return Err(Error::Shape(format!(
                        "window {}..{} exceeds a {}-step episode",
                        w.start,
                        w.start + w.len,
                        ep.len()
                    )));
                }
                Ok(ep)
            })
            .collect::<Result<_>>()?;
        for s in 0..=steps {
            for (w, ep) in windows.iter().zip(&episodes) {
                // Slots past the window repeat its final observation; they
                // are masked out of every loss.
                let t = w.start + s.min(w.len);
                let cell = ep.positions[t];
                x.extend_from_slice(cache.get(cell, x_kind)?);
                if let (Some(buf), Some(kind)) = (pi.as_mut(), pi_kind) {
                    buf.extend_from_slice(cache.get(cell, kind)?);
                }
                if s == steps {
                    continue;
                }
                if let Some(buf) = fs.as_mut() {
                    buf.extend_from_slice(cache.get(cell, ObsKind::Fs)?);
                }
                let ok = s < w.len;
                let at = w.start + s.min(w.len - 1);
                actions.push(ep.actions[at].index());
                rewards.push(if ok { ep.rewards[at] } else { 0.0 });
                terminated.push(ok && ep.terminated_at(at));
                valid.push(ok);
            }
        }
        Ok(Self {
            batch: n,
            steps,
            lens: windows.iter().map(|w| w.len).collect(),
            x,
            x_len,
            pi,
            pi_len,
            fs,
            fs_len,
            actions,
            rewards,
            terminated,
            valid,
        })
    }

    /// `x` frames of slots `from..to`.
    pub fn x_slots(&self, from: usize, to: usize) -> &[f64] {
        &self.x[from * self.batch * self.x_len..to * self.batch * self.x_len]
    }

    pub fn pi_slots(&self, from: usize, to: usize) -> Option<&[f64]> {
        self.pi
            .as_ref()
            .map(|p| &p[from * self.batch * self.pi_len..to * self.batch * self.pi_len])
    }

    pub fn fs_slots(&self, from: usize, to: usize) -> Option<&[f64]> {
        self.fs
            .as_ref()
            .map(|p| &p[from * self.batch * self.fs_len..to * self.batch * self.fs_len])
    }
}
