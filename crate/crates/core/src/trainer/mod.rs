//! Recurrent Q-learning: epsilon-greedy collection of whole episodes, replay
//! of fixed-length windows with a GRU burn-in prefix, one-step TD targets
//! from a Polyak-averaged target network, and the per-variant extra loss
//! terms.

mod batch;
mod collect;
mod config;
mod loss;
mod replay;
mod run;

pub use batch::{FrameCache, WindowBatch};
pub use collect::{collect_episode, ActingRngs};
pub use config::TrainConfig;
pub use loss::{
    batch_kinds, polyak_update, td_loss, td_loss_from_q, td_target, total_loss, LossComponents, LossSettings, Nets,
};
pub use replay::{sample_windows, EpisodeRecord, ReplayBuffer, Window};
pub use run::{
    checkpoint_name, read_jsonl, train_run, EpisodeMetrics, EvalRecord, RunMetrics, RunOutput, RunSpec, EVAL_FILE,
    METRICS_FILE,
};
