use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{save_checkpoint, AgentNetwork, AgentVariant, NetworkDims, VariantTag};
use crate::env::{GridLayout, LayoutConfig, ObsKind};
use crate::error::{Error, Result};
use crate::eval::{evaluate_greedy, StartOutcome};
use crate::nn::{Adam, Parameterized};
use crate::stochastic::Mode;

use super::batch::{FrameCache, WindowBatch};
use super::collect::{collect_episode, ActingRngs};
use super::config::TrainConfig;
use super::loss::{batch_kinds, polyak_update, total_loss, LossComponents, LossSettings, Nets};
use super::replay::{sample_windows, ReplayBuffer};

pub const METRICS_FILE: &str = "metrics.jsonl";
pub const EVAL_FILE: &str = "eval.jsonl";

/// One line of `metrics.jsonl`. Loss fields are means over the episode's
/// updates, weighted as they enter the total, and `null` before the first
/// update.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub episode: usize,
    #[serde(rename = "return")]
    pub ret: f64,
    pub length: usize,
    pub epsilon: f64,
    pub loss_total: Option<f64>,
    pub loss_td: Option<f64>,
    pub loss_pen: Option<f64>,
    pub loss_aux: Option<f64>,
    pub loss_dis: Option<f64>,
}

/// One line of `eval.jsonl`; `episode` counts completed training episodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub episode: usize,
    pub mean_return: f64,
    pub success_rate: f64,
    pub per_start: Vec<StartOutcome>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunMetrics {
    pub episodes: Vec<EpisodeMetrics>,
    pub evals: Vec<EvalRecord>,
}

pub struct RunOutput {
    pub metrics: RunMetrics,
    pub network: AgentNetwork,
}

/// Inputs of one training run.
pub struct RunSpec<'a> {
    pub layout: &'a LayoutConfig,
    pub train: &'a TrainConfig,
    pub variant: AgentVariant,
    pub dims: NetworkDims,
    pub seed: u64,
    /// Trained full-state oracle, required by DIS.
    pub teacher: Option<&'a AgentNetwork>,
    /// Where metrics and checkpoints go; nothing is written when unset.
    pub out_dir: Option<&'a Path>,
}

/// Independent random streams derived from the run seed. Network
/// initialisation uses the seed directly (stream 0).
struct Streams {
    env: ChaCha8Rng,
    explore: ChaCha8Rng,
    act_noise: ChaCha8Rng,
    replay: ChaCha8Rng,
    update_noise: ChaCha8Rng,
}

impl Streams {
    fn new(seed: u64) -> Self {
        let stream = |k: u64| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(k);
            r
        };
        Self {
            env: stream(1),
            explore: stream(2),
            act_noise: stream(3),
            replay: stream(4),
            update_noise: stream(5),
        }
    }
}

struct Sink {
    dir: PathBuf,
    metrics: BufWriter<File>,
    evals: BufWriter<File>,
    last_checkpoint: Option<PathBuf>,
}

impl Sink {
    fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let open = |name: &str| {
            let p = dir.join(name);
            File::create(&p).map(BufWriter::new).map_err(|e| Error::io(p, e))
        };
        Ok(Self {
            dir: dir.to_path_buf(),
            metrics: open(METRICS_FILE)?,
            evals: open(EVAL_FILE)?,
            last_checkpoint: None,
        })
    }

    fn line<T: Serialize>(w: &mut BufWriter<File>, path: PathBuf, row: &T) -> Result<()> {
        serde_json::to_writer(&mut *w, row)?;
        w.write_all(b"\n").map_err(|e| Error::io(&path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Name of the checkpoint written after `episode` completed episodes.
pub fn checkpoint_name(episode: usize) -> String {
    format!("ckpt_{episode}")
}

/// Runs the whole training loop: per episode, collect one epsilon-greedy
/// episode, then `updates_per_episode` gradient steps each followed by a
/// Polyak update of the target. Every `eval_every` episodes (and after the
/// last) the online network is evaluated greedily and checkpointed.
pub fn train_run(spec: RunSpec<'_>, mut on_eval: Option<&mut dyn FnMut(&EvalRecord)>) -> Result<RunOutput> {
    let cfg = spec.train;
    let layout = GridLayout::build(spec.layout)?;
    cfg.validate(layout.max_steps)?;
    let teacher = match (spec.variant.tag, spec.teacher) {
        (VariantTag::Dis, None) => {
            return Err(Error::MissingInput(
                "DIS needs a teacher checkpoint (a trained full-state oracle)".into(),
            ))
        }
        (VariantTag::Dis, Some(t)) => {
            if t.variant.x_kind != ObsKind::Fs || t.pi_len().is_some() {
                return Err(Error::Variant(format!(
                    "teacher must be a full-state network without privileged input, got {}",
                    t.variant.label()
                )));
            }
            Some(t)
        }
        _ => None,
    };

    let mut online = AgentNetwork::build(spec.variant, &layout, spec.dims, cfg.variant_params(), spec.seed)?;
    let mut target = online.clone();
    let mut adam = Adam::new(cfg.learning_rate);
    let cache = FrameCache::new(&layout)?;
    let mut buffer = ReplayBuffer::new(cfg.replay_capacity);
    let mut rngs = Streams::new(spec.seed);
    let (x_kind, pi_kind, with_fs) = batch_kinds(&online);
    let mut sink = spec.out_dir.map(Sink::create).transpose()?;
    let mut metrics = RunMetrics::default();

    for episode in 0..cfg.total_episodes {
        let epsilon = cfg.epsilon(episode);
        let record = collect_episode(
            &layout,
            &cache,
            &online,
            epsilon,
            episode,
            cfg.noise_while_acting,
            ActingRngs {
                env: &mut rngs.env,
                explore: &mut rngs.explore,
                noise: &mut rngs.act_noise,
            },
        )?;
        let ret = record.episode_return();
        let length = record.len();
        buffer.push(record);

        let mut sum = LossComponents::default();
        let mut updates = 0usize;
        if buffer.len() >= cfg.min_fill {
            for _ in 0..cfg.updates_per_episode {
                let windows = sample_windows(&buffer, cfg.batch_size, cfg.window(), &mut rngs.replay)?;
                let batch = WindowBatch::gather(&buffer, &windows, &cache, x_kind, pi_kind, with_fs)?;
                online.zero_grad();
                let parts = total_loss(
                    Nets {
                        online: &mut online,
                        target: &target,
                        teacher,
                    },
                    &batch,
                    LossSettings {
                        gamma: cfg.gamma,
                        burn_in: cfg.burn_in,
                        mode: Mode::Train,
                        episode,
                    },
                    &mut rngs.update_noise,
                    true,
                )?;
                let Some(parts) = parts else { continue };
                online.clip_grad_norm(cfg.grad_clip);
                adam.step(&mut online);
                polyak_update(&online, &mut target, cfg.tau)?;
                sum.total += parts.total;
                sum.td += parts.td;
                sum.pen += parts.pen;
                sum.aux += parts.aux;
                sum.dis += parts.dis;
                updates += 1;
            }
        }
        let mean = |v: f64| (updates > 0).then(|| v / updates as f64);
        let row = EpisodeMetrics {
            episode,
            ret,
            length,
            epsilon,
            loss_total: mean(sum.total),
            loss_td: mean(sum.td),
            loss_pen: mean(sum.pen),
            loss_aux: mean(sum.aux),
            loss_dis: mean(sum.dis),
        };
        if let Some(s) = sink.as_mut() {
            let path = s.dir.join(METRICS_FILE);
            Sink::line(&mut s.metrics, path, &row)?;
        }
        metrics.episodes.push(row);

        let completed = episode + 1;
        if completed % cfg.eval_every == 0 || completed == cfg.total_episodes {
            let report = evaluate_greedy(&online, &layout)?;
            let rec = EvalRecord {
                episode: completed,
                mean_return: report.mean_return,
                success_rate: report.success_rate,
                per_start: report.per_start,
            };
            if let Some(s) = sink.as_mut() {
                let path = s.dir.join(EVAL_FILE);
                Sink::line(&mut s.evals, path, &rec)?;
                let ckpt = s.dir.join(checkpoint_name(completed));
                save_checkpoint(&ckpt, &online, spec.layout, completed)?;
                if cfg.keep_last_checkpoint_only {
                    if let Some(old) = s.last_checkpoint.replace(ckpt) {
                        fs::remove_file(&old).map_err(|e| Error::io(old, e))?;
                    }
                }
            }
            if let Some(cb) = on_eval.as_mut() {
                cb(&rec);
            }
            metrics.evals.push(rec);
        }
    }
    Ok(RunOutput {
        metrics,
        network: online,
    })
}

/// Reads a line-delimited record file.
pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}
