use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{greedy_action, AgentNetwork, ForwardCtx};
use crate::env::{Action, Cell, EnvState, GridLayout};
use crate::error::{Error, Result};
use crate::stochastic::Mode;

/// Something that picks actions along one episode.
pub trait Policy {
    /// Called before each episode.
    fn reset(&mut self);
    fn act(&mut self, layout: &GridLayout, state: &EnvState) -> Result<Action>;
}

/// Greedy action of a network in evaluation mode: no noise, no privileged
/// input.
pub struct GreedyNetworkPolicy<'a> {
    net: &'a AgentNetwork,
    h: Vec<f64>,
    rng: ChaCha8Rng,
}

impl<'a> GreedyNetworkPolicy<'a> {
    pub fn new(net: &'a AgentNetwork) -> Self {
        Self {
            net,
            h: net.initial_hidden(1),
            // Evaluation-mode forwards draw nothing; this only satisfies the
            // signature.
            rng: ChaCha8Rng::seed_from_u64(0),
        }
    }

    /// Hidden state after the last call to [`Policy::act`].
    pub fn hidden(&self) -> &[f64] {
        &self.h
    }
}

impl Policy for GreedyNetworkPolicy<'_> {
    fn reset(&mut self) {
        self.h = self.net.initial_hidden(1);
    }

    fn act(&mut self, layout: &GridLayout, state: &EnvState) -> Result<Action> {
        let x = layout.observe(state.agent_pos, self.net.variant.x_kind)?;
        let mut ctx = ForwardCtx::new(Mode::Eval, 0, &mut self.rng);
        ctx.reconstruct = false;
        let out = self.net.forward(&x.data, None, &self.h, &mut ctx)?;
        self.h = out.h_next;
        Ok(Action::from_index(greedy_action(&out.q)).expect("index below COUNT"))
    }
}

/// Steps to a neighbour one BFS step closer to the goal; among several,
/// the first in `Action::ALL` order.
#[derive(Clone, Copy, Debug, Default)]
pub struct ShortestPathPolicy;

impl Policy for ShortestPathPolicy {
    fn reset(&mut self) {}

    fn act(&mut self, layout: &GridLayout, state: &EnvState) -> Result<Action> {
        let d = layout.shortest_path_distance(state.agent_pos)?;
        for a in Action::ALL {
            let (dr, dc) = a.delta();
            let Some(next) = state.agent_pos.offset(dr, dc) else {
                continue;
            };
            if layout.is_floor(next) && layout.shortest_path_distance(next)? + 1 == d {
                return Ok(a);
            }
        }
        Err(Error::Value(format!("no move towards the goal from {}", state.agent_pos)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StartOutcome {
    pub start: Cell,
    #[serde(rename = "return")]
    pub ret: f64,
    pub reached_goal: bool,
    pub steps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mean_return: f64,
    pub success_rate: f64,
    pub per_start: Vec<StartOutcome>,
}

impl EvalReport {
    pub fn from_outcomes(per_start: Vec<StartOutcome>) -> Self {
        let n = per_start.len().max(1) as f64;
        Self {
            mean_return: per_start.iter().map(|o| o.ret).sum::<f64>() / n,
            success_rate: per_start.iter().filter(|o| o.reached_goal).count() as f64 / n,
            per_start,
        }
    }
}

/// Plays one episode from `start`, returning the outcome.
pub fn rollout<P: Policy + ?Sized>(layout: &GridLayout, policy: &mut P, start: Cell) -> Result<StartOutcome> {
    policy.reset();
    let mut state = EnvState::at(layout, start)?;
    let mut ret = 0.0;
    loop {
        let action = policy.act(layout, &state)?;
        let step = layout.step(&state, action)?;
        ret += step.reward;
        state = step.next_state;
        if step.terminated || step.truncated {
            return Ok(StartOutcome {
                start,
                ret,
                reached_goal: step.terminated,
                steps: state.t,
            });
        }
    }
}

/// One rollout from every start position, in enumeration order.
pub fn evaluate_policy<P: Policy + ?Sized>(layout: &GridLayout, policy: &mut P) -> Result<EvalReport> {
    let outcomes = layout
        .enumerate_start_positions()
        .iter()
        .map(|s| rollout(layout, policy, *s))
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport::from_outcomes(outcomes))
}

/// Deterministic greedy evaluation of `net` from every start position.
pub fn evaluate_greedy(net: &AgentNetwork, layout: &GridLayout) -> Result<EvalReport> {
    evaluate_policy(layout, &mut GreedyNetworkPolicy::new(net))
}
