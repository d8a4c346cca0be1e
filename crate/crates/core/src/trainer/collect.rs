use rand::{Rng, RngCore};

use crate::agent::{greedy_action, AgentNetwork, ForwardCtx};
use crate::env::{Action, GridLayout};
use crate::error::Result;
use crate::stochastic::Mode;

use super::batch::FrameCache;
use super::loss::batch_kinds;
use super::replay::EpisodeRecord;

/// Random streams used while acting.
pub struct ActingRngs<'a> {
    /// Start positions.
    pub env: &'a mut dyn RngCore,
    /// Exploration coin flips and random actions.
    pub explore: &'a mut dyn RngCore,
    /// Dropout noise inside the network.
    pub noise: &'a mut dyn RngCore,
}

/// Plays one episode with an epsilon-greedy policy over the network's
/// Q-values, carrying the hidden state from zeros. With `noisy` set the
/// forward runs in training mode (privileged input read, noise sampled).
pub fn collect_episode(
    layout: &GridLayout,
    cache: &FrameCache,
    net: &AgentNetwork,
    epsilon: f64,
    episode: usize,
    noisy: bool,
    rngs: ActingRngs<'_>,
) -> Result<EpisodeRecord> {
    let ActingRngs { env, explore, noise } = rngs;
    let (x_kind, pi_kind, _) = batch_kinds(net);
    let mode = if noisy { Mode::Train } else { Mode::Eval };
    let mut state = layout.reset(&mut *env);
    let mut h = net.initial_hidden(1);
    let mut record = EpisodeRecord {
        positions: vec![state.agent_pos],
        actions: Vec::new(),
        rewards: Vec::new(),
        terminated: false,
        truncated: false,
    };
    loop {
        let x = cache.get(state.agent_pos, x_kind)?;
        let pi = match (mode, pi_kind) {
            (Mode::Train, Some(kind)) => Some(cache.get(state.agent_pos, kind)?),
            _ => None,
        };
        let mut ctx = ForwardCtx::new(mode, episode, &mut *noise);
        ctx.reconstruct = false;
        let out = net.forward(x, pi, &h, &mut ctx)?;
        h = out.h_next;
        let greedy = greedy_action(&out.q);
        let a = if explore.random::<f64>() < epsilon {
            explore.random_range(0..Action::COUNT)
        } else {
            greedy
        };
        let action = Action::from_index(a).expect("index below COUNT");
        let step = layout.step(&state, action)?;
        record.actions.push(action);
        record.rewards.push(step.reward);
        record.positions.push(step.next_state.agent_pos);
        state = step.next_state;
        if step.terminated || step.truncated {
            record.terminated = step.terminated;
            record.truncated = step.truncated;
            return Ok(record);
        }
    }
}
