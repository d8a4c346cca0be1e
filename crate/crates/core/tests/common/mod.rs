#![allow(dead_code)]

use std::collections::VecDeque;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use pidrop::agent::{AgentNetwork, AgentVariant, NetworkDims, VariantParams, VariantTag};
use pidrop::env::{Action, Cell, GridLayout, LayoutConfig};
use pidrop::nn::Parameterized;
use pidrop::stochastic::Mode;
use pidrop::trainer::{
    batch_kinds, collect_episode, sample_windows, total_loss, ActingRngs, FrameCache, LossSettings, Nets, ReplayBuffer,
    WindowBatch,
};

pub fn layout() -> GridLayout {
    GridLayout::build(&LayoutConfig::default()).unwrap()
}

pub fn tiny_dims() -> NetworkDims {
    NetworkDims {
        conv1: 2,
        conv2: 2,
        kernel: 3,
        embed: 6,
        hidden: 5,
        head: 4,
    }
}

pub fn net(variant: AgentVariant, dims: NetworkDims, params: VariantParams, seed: u64) -> AgentNetwork {
    AgentNetwork::build(variant, &layout(), dims, params, seed).unwrap()
}

pub fn tiny(tag: VariantTag, seed: u64) -> AgentNetwork {
    net(AgentVariant::standard(tag), tiny_dims(), VariantParams::default(), seed)
}

/// Breadth-first distances to the goal over 4-neighbour floor moves,
/// computed from the floor mask alone.
pub fn bfs_distances(layout: &GridLayout, goal: Cell) -> Vec<Option<usize>> {
    let w = layout.width;
    let h = layout.height;
    let mut dist = vec![None; w * h];
    dist[goal.row * w + goal.col] = Some(0);
    let mut queue = VecDeque::from([goal]);
    while let Some(c) = queue.pop_front() {
        let d = dist[c.row * w + c.col].unwrap();
        let mut nbrs = Vec::new();
        if c.row > 0 {
            nbrs.push(Cell::new(c.row - 1, c.col));
        }
        if c.row + 1 < h {
            nbrs.push(Cell::new(c.row + 1, c.col));
        }
        if c.col > 0 {
            nbrs.push(Cell::new(c.row, c.col - 1));
        }
        if c.col + 1 < w {
            nbrs.push(Cell::new(c.row, c.col + 1));
        }
        for n in nbrs {
            if layout.is_floor(n) && dist[n.row * w + n.col].is_none() {
                dist[n.row * w + n.col] = Some(d + 1);
                queue.push_back(n);
            }
        }
    }
    dist
}

/// Replay buffer of `episodes` episodes played by `net` with uniformly
/// random actions.
pub fn random_buffer(net: &AgentNetwork, episodes: usize, seed: u64) -> ReplayBuffer {
    let layout = layout();
    let cache = FrameCache::new(&layout).unwrap();
    let mut env = ChaCha8Rng::seed_from_u64(seed);
    let mut explore = ChaCha8Rng::seed_from_u64(seed + 1000);
    let mut noise = ChaCha8Rng::seed_from_u64(seed + 2000);
    let mut buf = ReplayBuffer::new(episodes);
    for ep in 0..episodes {
        let rec = collect_episode(
            &layout,
            &cache,
            net,
            1.0,
            ep,
            true,
            ActingRngs {
                env: &mut env,
                explore: &mut explore,
                noise: &mut noise,
            },
        )
        .unwrap();
        buf.push(rec);
    }
    buf
}

pub fn batch_for(net: &AgentNetwork, buffer: &ReplayBuffer, count: usize, window: usize, seed: u64) -> WindowBatch {
    let layout = layout();
    let cache = FrameCache::new(&layout).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let windows = sample_windows(buffer, count, window, &mut rng).unwrap();
    let (x, pi, fs) = batch_kinds(net);
    WindowBatch::gather(buffer, &windows, &cache, x, pi, fs).unwrap()
}

/// No burn-in: the burn-in prefix is a stop-gradient, which central
/// differences would see through.
pub fn settings(mode: Mode, episode: usize) -> LossSettings {
    LossSettings {
        gamma: 0.99,
        burn_in: 0,
        mode,
        episode,
    }
}

/// Total loss with the noise stream reset to `noise_seed`, so repeated
/// calls see the same draws.
pub fn loss_at(
    online: &AgentNetwork,
    target: &AgentNetwork,
    teacher: Option<&AgentNetwork>,
    batch: &WindowBatch,
    s: LossSettings,
    noise_seed: u64,
) -> f64 {
    let mut scratch = online.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
    total_loss(
        Nets {
            online: &mut scratch,
            target,
            teacher,
        },
        batch,
        s,
        &mut rng,
        false,
    )
    .unwrap()
    .unwrap()
    .total
}

/// Analytic parameter gradients of the total loss, flattened in
/// `params()` order.
pub fn analytic_grads(
    online: &AgentNetwork,
    target: &AgentNetwork,
    teacher: Option<&AgentNetwork>,
    batch: &WindowBatch,
    s: LossSettings,
    noise_seed: u64,
) -> Vec<f64> {
    let mut net = online.clone();
    net.zero_grad();
    let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
    total_loss(
        Nets {
            online: &mut net,
            target,
            teacher,
        },
        batch,
        s,
        &mut rng,
        true,
    )
    .unwrap()
    .unwrap();
    net.params().iter().flat_map(|p| p.grad.iter().copied()).collect()
}

pub struct FdReport {
    pub checked: usize,
    pub max_rel: f64,
    pub worst: String,
}

/// Central differences of the total loss against the analytic gradient for
/// every weight, at each of `steps`. Relative error is
/// `|a - n| / max(|a|, |n|, floor)`, and a weight keeps its best step:
/// large steps can cross ReLU kinks, small ones drown in round-off, and a
/// wrong analytic gradient disagrees at every step.
pub fn fd_check(
    online: &AgentNetwork,
    target: &AgentNetwork,
    teacher: Option<&AgentNetwork>,
    batch: &WindowBatch,
    s: LossSettings,
    noise_seed: u64,
    steps: &[f64],
    floor: f64,
) -> FdReport {
    let analytic = analytic_grads(online, target, teacher, batch, s, noise_seed);
    let mut report = FdReport {
        checked: 0,
        max_rel: 0.0,
        worst: String::new(),
    };
    let names: Vec<(String, usize)> = online.params().iter().map(|p| (p.name.clone(), p.len())).collect();
    let mut flat = 0;
    for (pi, (name, len)) in names.iter().enumerate() {
        for i in 0..*len {
            let a = analytic[flat];
            let mut best = (f64::INFINITY, 0.0);
            for &step in steps {
                let mut plus = online.clone();
                plus.params_mut()[pi].value[i] += step;
                let mut minus = online.clone();
                minus.params_mut()[pi].value[i] -= step;
                let num = (loss_at(&plus, target, teacher, batch, s, noise_seed)
                    - loss_at(&minus, target, teacher, batch, s, noise_seed))
                    / (2.0 * step);
                let rel = (a - num).abs() / a.abs().max(num.abs()).max(floor);
                if rel < best.0 {
                    best = (rel, num);
                }
            }
            if best.0 > report.max_rel {
                report.max_rel = best.0;
                report.worst = format!("{name}[{i}]: analytic {a:e}, numeric {:e}", best.1);
            }
            report.checked += 1;
            flat += 1;
        }
    }
    report
}

pub fn action_towards(from: Cell, to: Cell) -> Action {
    Action::ALL
        .into_iter()
        .find(|a| {
            let (dr, dc) = match a {
                Action::Up => (-1, 0),
                Action::Down => (1, 0),
                Action::Left => (0, -1),
                Action::Right => (0, 1),
            };
            from.row as isize + dr == to.row as isize && from.col as isize + dc == to.col as isize
        })
        .expect("adjacent cells")
}

/// Directory for long acceptance runs: `$PIDROP_ACCEPTANCE_DIR` when set
/// (runs found there are reused), else a fresh temporary directory.
pub fn acceptance_root() -> (PathBuf, Option<tempfile::TempDir>) {
    match std::env::var_os("PIDROP_ACCEPTANCE_DIR") {
        Some(d) => {
            let p = PathBuf::from(d);
            std::fs::create_dir_all(&p).unwrap();
            (p, None)
        }
        None => {
            let t = tempfile::tempdir().unwrap();
            (t.path().to_path_buf(), Some(t))
        }
    }
}

pub fn read_file(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}
