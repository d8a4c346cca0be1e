use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::agent::{masked_reconstruction_loss, AgentNetwork, ForwardCtx, SeqGrads, SeqInput, VariantTag};
use crate::env::{Action, ObsKind};
use crate::error::{Error, Result};
use crate::nn::Parameterized;
use crate::stochastic::Mode;

use super::batch::WindowBatch;

/// Weighted loss terms of one update; `total` is their sum.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossComponents {
    pub total: f64,
    pub td: f64,
    /// `beta * mean(-log alpha)`
    pub pen: f64,
    /// `lambda_aux * BCE`
    pub aux: f64,
    /// `lambda_dis * MSE`
    pub dis: f64,
}

impl LossComponents {
    fn finish(mut self) -> Self {
        self.total = self.td + self.pen + self.aux + self.dis;
        self
    }
}

/// One-step Q-learning target. Truncated steps are not terminal and
/// bootstrap like any other step.
pub fn td_target(reward: f64, terminated: bool, gamma: f64, max_next_q: f64) -> f64 {
    if terminated {
        reward
    } else {
        reward + gamma * max_next_q
    }
}

fn max_q(q: &[f64]) -> f64 {
    q.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Mean squared TD error over the masked steps and its gradient with
/// respect to `q` (`frames x 4`). `next_q` holds the target network's
/// Q-values for the following observation of each frame.
pub fn td_loss_from_q(
    q: &[f64],
    next_q: &[f64],
    actions: &[usize],
    rewards: &[f64],
    terminated: &[bool],
    mask: &[bool],
    gamma: f64,
) -> (f64, Vec<f64>) {
    let a = Action::COUNT;
    let count = mask.iter().filter(|m| **m).count();
    let mut grad = vec![0.0; q.len()];
    if count == 0 {
        return (0.0, grad);
    }
    let mut sum = 0.0;
    for f in 0..mask.len() {
        if !mask[f] {
            continue;
        }
        let y = td_target(rewards[f], terminated[f], gamma, max_q(&next_q[f * a..(f + 1) * a]));
        let err = q[f * a + actions[f]] - y;
        sum += err * err;
        grad[f * a + actions[f]] = 2.0 * err / count as f64;
    }
    (sum / count as f64, grad)
}

/// The networks an update reads. Only `online` is trained.
pub struct Nets<'a> {
    pub online: &'a mut AgentNetwork,
    pub target: &'a AgentNetwork,
    /// Frozen full-state teacher, required by DIS.
    pub teacher: Option<&'a AgentNetwork>,
}

#[derive(Clone, Copy, Debug)]
pub struct LossSettings {
    pub gamma: f64,
    pub burn_in: usize,
    /// Mode of the online and target forwards. Training uses `Train`.
    pub mode: Mode,
    /// Episode counter for the naive-dropout schedule.
    pub episode: usize,
}

/// Observation kinds a batch must carry for `net`.
pub fn batch_kinds(net: &AgentNetwork) -> (ObsKind, Option<ObsKind>, bool) {
    let pi = match net.variant.tag {
        VariantTag::PiD | VariantTag::Nd => net.variant.pi_kind,
        _ => None,
    };
    let fs = matches!(net.variant.tag, VariantTag::Aux | VariantTag::Dis);
    (net.variant.x_kind, pi, fs)
}

/// Variant-specific total loss over the trained (post burn-in, valid) steps
/// of `batch`. With `backward` set, parameter gradients of `nets.online` are
/// accumulated (not zeroed first). Returns `None` when the batch has no
/// trained steps.
///
/// Both networks start from zero hidden states. The online network runs the
/// burn-in slots without a tape, then the trained slots with one; the target
/// network runs every slot plus the bootstrap slot.
pub fn total_loss(
    nets: Nets<'_>,
    batch: &WindowBatch,
    settings: LossSettings,
    rng: &mut dyn RngCore,
    backward: bool,
) -> Result<Option<LossComponents>> {
    let Nets {
        online,
        target,
        teacher,
    } = nets;
    if !online.same_architecture(target) {
        return Err(Error::Variant("online and target networks differ in architecture".into()));
    }
    let tag = online.variant.tag;
    let n = batch.batch;
    let steps = batch.steps;
    let burn = settings.burn_in.min(steps);
    if steps == burn {
        return Ok(None);
    }
    let mask = &batch.valid[burn * n..];
    let count = mask.iter().filter(|m| **m).count();
    if count == 0 {
        return Ok(None);
    }
    if batch.x_len != online.x_len() {
        return Err(Error::Shape(format!(
            "batch x frames have {} values, the network expects {}",
            batch.x_len,
            online.x_len()
        )));
    }
    let a = Action::COUNT;
    let hid = online.hidden_size();

    let mut tctx = ForwardCtx::new(settings.mode, settings.episode, &mut *rng);
    tctx.reconstruct = false;
    let (tout, _) = target.forward_seq(
        SeqInput {
            steps: steps + 1,
            batch: n,
            x: &batch.x,
            pi: batch.pi.as_deref(),
        },
        &target.initial_hidden(n),
        &mut tctx,
        false,
    )?;
    let next_q = &tout.q[(burn + 1) * n * a..];

    let mut ctx = ForwardCtx::new(settings.mode, settings.episode, &mut *rng);
    ctx.reconstruct = false;
    let h_burn = if burn > 0 {
        let (out, _) = online.forward_seq(
            SeqInput {
                steps: burn,
                batch: n,
                x: batch.x_slots(0, burn),
                pi: batch.pi_slots(0, burn),
            },
            &online.initial_hidden(n),
            &mut ctx,
            false,
        )?;
        out.last_hidden(n, hid).to_vec()
    } else {
        online.initial_hidden(n)
    };
    ctx.reconstruct = true;
    let (out, tape) = online.forward_seq(
        SeqInput {
            steps: steps - burn,
            batch: n,
            x: batch.x_slots(burn, steps),
            pi: batch.pi_slots(burn, steps),
        },
        &h_burn,
        &mut ctx,
        backward,
    )?;

    let mut parts = LossComponents::default();
    let (td, mut dq) = td_loss_from_q(
        &out.q,
        next_q,
        &batch.actions[burn * n..],
        &batch.rewards[burn * n..],
        &batch.terminated[burn * n..],
        mask,
        settings.gamma,
    );
    parts.td = td;

    let mut d_alpha = None;
    if let Some(alpha) = &out.alpha {
        let beta = online.params.beta;
        let e = alpha.len() / mask.len();
        let denom = (count * e) as f64;
        let mut raw = 0.0;
        let mut grad = vec![0.0; alpha.len()];
        for (f, keep) in mask.iter().enumerate() {
            if !keep {
                continue;
            }
            for i in f * e..(f + 1) * e {
                let v = alpha.values()[i];
                raw -= v.ln();
                grad[i] = -beta / (denom * v);
            }
        }
        parts.pen = beta * raw / denom;
        d_alpha = Some(grad);
    }

    let mut d_recon = None;
    if let Some(recon) = &out.reconstruction {
        let target_fs = batch
            .fs_slots(burn, steps)
            .ok_or_else(|| Error::MissingInput("AUX batch lacks full-state frames".into()))?;
        let (bce, mut grad) = masked_reconstruction_loss(recon, target_fs, mask, batch.fs_len);
        let lambda = online.params.lambda_aux;
        parts.aux = lambda * bce;
        for g in &mut grad {
            *g *= lambda;
        }
        d_recon = Some(grad);
    }

    if tag == VariantTag::Dis {
        let teacher =
            teacher.ok_or_else(|| Error::MissingInput("DIS needs a teacher network (a trained oracle)".into()))?;
        let fs = batch
            .fs_slots(0, steps)
            .ok_or_else(|| Error::MissingInput("DIS batch lacks full-state frames".into()))?;
        if teacher.x_len() != batch.fs_len {
            return Err(Error::Shape("the teacher must read full-state frames".into()));
        }
        let mut ectx = ForwardCtx::new(Mode::Eval, settings.episode, &mut *rng);
        ectx.reconstruct = false;
        let (teach, _) = teacher.forward_seq(
            SeqInput {
                steps,
                batch: n,
                x: fs,
                pi: None,
            },
            &teacher.initial_hidden(n),
            &mut ectx,
            false,
        )?;
        let tq = &teach.q[burn * n * a..];
        let lambda = online.params.lambda_dis;
        let denom = (count * a) as f64;
        let mut mse = 0.0;
        for (f, keep) in mask.iter().enumerate() {
            if !keep {
                continue;
            }
            for i in f * a..(f + 1) * a {
                let d = out.q[i] - tq[i];
                mse += d * d;
                dq[i] += lambda * 2.0 * d / denom;
            }
        }
        parts.dis = lambda * mse / denom;
    }

    if backward {
        online.backward_seq(
            tape.expect("tape recorded"),
            SeqGrads {
                dq: &dq,
                d_alpha: d_alpha.as_deref(),
                d_recon_logits: d_recon.as_deref(),
            },
        )?;
    }
    Ok(Some(parts.finish()))
}

/// TD part of [`total_loss`], leaving every gradient untouched.
pub fn td_loss(
    nets: (&AgentNetwork, &AgentNetwork, Option<&AgentNetwork>),
    batch: &WindowBatch,
    settings: LossSettings,
    rng: &mut dyn RngCore,
) -> Result<Option<f64>> {
    let (online, target, teacher) = nets;
    let mut scratch = online.clone();
    let parts = total_loss(
        Nets {
            online: &mut scratch,
            target,
            teacher,
        },
        batch,
        settings,
        rng,
        false,
    )?;
    Ok(parts.map(|p| p.td))
}

/// `target <- tau * online + (1 - tau) * target`, weight by weight.
pub fn polyak_update(online: &AgentNetwork, target: &mut AgentNetwork, tau: f64) -> Result<()> {
    if !online.same_architecture(target) {
        return Err(Error::Variant("polyak update between different architectures".into()));
    }
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::Value(format!("tau {tau} outside [0, 1]")));
    }
    for (src, dst) in online.params().into_iter().zip(target.params_mut()) {
        for (d, s) in dst.value.iter_mut().zip(&src.value) {
            *d = tau * s + (1.0 - tau) * *d;
        }
    }
    Ok(())
}
