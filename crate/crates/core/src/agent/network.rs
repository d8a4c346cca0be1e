use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::variant::{AgentVariant, VariantTag};
use crate::env::{Action, GridLayout, ObsKind};
use crate::error::{Error, Result};
use crate::nn::{
    relu_backward_inplace, relu_inplace, sigmoid, Conv2d, ConvTape, ConvTranspose2d, ConvTransposeTape, Gru,
    GruTape, Linear, Param, Parameterized,
};
use crate::stochastic::{
    apply_pi_dropout, ib_penalty, naive_drop_probability, naive_dropout_mask, pi_dropout_backward,
    variance_backward, variance_from_preactivation, Mode, NoiseSample, VarianceField, NAIVE_ANNEAL_EPISODES,
};

/// Layer widths. Identical across variants so comparisons are like for like.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkDims {
    pub conv1: usize,
    pub conv2: usize,
    pub kernel: usize,
    pub embed: usize,
    pub hidden: usize,
    pub head: usize,
}

impl Default for NetworkDims {
    fn default() -> Self {
        Self {
            conv1: 16,
            conv2: 32,
            kernel: 3,
            embed: 128,
            hidden: 128,
            head: 128,
        }
    }
}

/// Per-variant loss weights and schedules carried with the weights.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VariantParams {
    /// Weight of the information-bottleneck penalty (PI-D, I-D).
    pub beta: f64,
    /// Weight of the reconstruction loss (AUX).
    pub lambda_aux: f64,
    /// Weight of the distillation loss (DIS).
    pub lambda_dis: f64,
    /// Episodes over which ND's drop probability rises from 0 to 1.
    pub naive_anneal_episodes: usize,
}

impl Default for VariantParams {
    fn default() -> Self {
        Self {
            beta: 0.01,
            lambda_aux: 1.0,
            lambda_dis: 1.0,
            naive_anneal_episodes: NAIVE_ANNEAL_EPISODES,
        }
    }
}

/// conv -> ReLU -> conv -> ReLU -> linear [-> ReLU].
#[derive(Clone, Debug, PartialEq)]
pub struct ConvEncoder {
    pub conv1: Conv2d,
    pub conv2: Conv2d,
    pub fc: Linear,
    in_shape: [usize; 3],
    relu_out: bool,
}

#[derive(Debug)]
struct EncoderTape {
    c1: ConvTape,
    a1: Vec<f64>,
    c2: ConvTape,
    a2: Vec<f64>,
    out: Vec<f64>,
    n: usize,
}

impl ConvEncoder {
    fn new(name: &str, in_shape: [usize; 3], dims: &NetworkDims, relu_out: bool, rng: &mut ChaCha8Rng) -> Result<Self> {
        let [c, h, w] = in_shape;
        let shrink = 2 * (dims.kernel - 1);
        if h <= shrink || w <= shrink {
            return Err(Error::Shape(format!(
                "{name}: input {h}x{w} is too small for two {k}x{k} convolutions",
                k = dims.kernel
            )));
        }
        let conv1 = Conv2d::new(&format!("{name}.conv1"), c, dims.conv1, dims.kernel, rng);
        let conv2 = Conv2d::new(&format!("{name}.conv2"), dims.conv1, dims.conv2, dims.kernel, rng);
        let flat = dims.conv2 * (h - shrink) * (w - shrink);
        let fc = Linear::new(&format!("{name}.fc"), flat, dims.embed, rng);
        Ok(Self {
            conv1,
            conv2,
            fc,
            in_shape,
            relu_out,
        })
    }

    fn forward(&self, x: &[f64], n: usize) -> (Vec<f64>, EncoderTape) {
        let [_, h, w] = self.in_shape;
        let (mut a1, c1) = self.conv1.forward(x, n, h, w);
        relu_inplace(&mut a1);
        let (h1, w1) = self.conv1.output_hw(h, w);
        let (mut a2, c2) = self.conv2.forward(&a1, n, h1, w1);
        relu_inplace(&mut a2);
        let mut out = self.fc.forward(&a2, n);
        if self.relu_out {
            relu_inplace(&mut out);
        }
        let tape = EncoderTape {
            c1,
            a1,
            c2,
            a2,
            out: out.clone(),
            n,
        };
        (out, tape)
    }

    fn backward(&mut self, tape: &EncoderTape, d_out: &[f64]) {
        let mut d = d_out.to_vec();
        if self.relu_out {
            relu_backward_inplace(&tape.out, &mut d);
        }
        let mut da2 = self.fc.backward(&tape.a2, &d, tape.n, true).expect("dx requested");
        relu_backward_inplace(&tape.a2, &mut da2);
        let mut da1 = self.conv2.backward(&tape.c2, &da2, true).expect("dx requested");
        relu_backward_inplace(&tape.a1, &mut da1);
        self.conv1.backward(&tape.c1, &da1, false);
    }

    pub fn params(&self) -> Vec<&Param> {
        let mut v = self.conv1.params();
        v.extend(self.conv2.params());
        v.extend(self.fc.params());
        v
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut v = self.conv1.params_mut();
        v.extend(self.conv2.params_mut());
        v.extend(self.fc.params_mut());
        v
    }
}

/// linear -> ReLU -> transposed conv -> ReLU -> transposed conv -> sigmoid,
/// mirroring [`ConvEncoder`] back up to the full-state grid.
#[derive(Clone, Debug, PartialEq)]
pub struct AuxDecoder {
    pub fc: Linear,
    pub up1: ConvTranspose2d,
    pub up2: ConvTranspose2d,
    seed_shape: [usize; 3],
    out_shape: [usize; 3],
}

#[derive(Debug)]
struct DecoderTape {
    h: Vec<f64>,
    a0: Vec<f64>,
    t1: ConvTransposeTape,
    a1: Vec<f64>,
    t2: ConvTransposeTape,
    n: usize,
}

impl AuxDecoder {
    fn new(out_shape: [usize; 3], dims: &NetworkDims, rng: &mut ChaCha8Rng) -> Self {
        let [c, h, w] = out_shape;
        let shrink = 2 * (dims.kernel - 1);
        let seed_shape = [dims.conv2, h - shrink, w - shrink];
        let fc = Linear::new("decoder.fc", dims.hidden, seed_shape.iter().product(), rng);
        let up1 = ConvTranspose2d::new("decoder.up1", dims.conv2, dims.conv1, dims.kernel, rng);
        let up2 = ConvTranspose2d::new("decoder.up2", dims.conv1, c, dims.kernel, rng);
        Self {
            fc,
            up1,
            up2,
            seed_shape,
            out_shape,
        }
    }

    fn forward(&self, h: &[f64], n: usize) -> (Vec<f64>, DecoderTape) {
        let [_, sh, sw] = self.seed_shape;
        let mut a0 = self.fc.forward(h, n);
        relu_inplace(&mut a0);
        let (mut a1, t1) = self.up1.forward(&a0, n, sh, sw);
        relu_inplace(&mut a1);
        let (h1, w1) = self.up1.output_hw(sh, sw);
        let (mut y, t2) = self.up2.forward(&a1, n, h1, w1);
        for v in &mut y {
            *v = sigmoid(*v);
        }
        let tape = DecoderTape {
            h: h.to_vec(),
            a0,
            t1,
            a1,
            t2,
            n,
        };
        (y, tape)
    }

    /// Takes the gradient with respect to the pre-sigmoid logits.
    fn backward(&mut self, tape: &DecoderTape, d_logits: &[f64]) -> Vec<f64> {
        let mut da1 = self.up2.backward(&tape.t2, d_logits, true).expect("dx requested");
        relu_backward_inplace(&tape.a1, &mut da1);
        let mut da0 = self.up1.backward(&tape.t1, &da1, true).expect("dx requested");
        relu_backward_inplace(&tape.a0, &mut da0);
        self.fc.backward(&tape.h, &da0, tape.n, true).expect("dx requested")
    }

    pub fn output_shape(&self) -> [usize; 3] {
        self.out_shape
    }

    pub fn params(&self) -> Vec<&Param> {
        let mut v = self.fc.params();
        v.extend(self.up1.params());
        v.extend(self.up2.params());
        v
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut v = self.fc.params_mut();
        v.extend(self.up1.params_mut());
        v.extend(self.up2.params_mut());
        v
    }
}

/// Encoder(s) + GRU + Q-head, wired per variant.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentNetwork {
    pub variant: AgentVariant,
    pub dims: NetworkDims,
    pub params: VariantParams,
    x_shape: [usize; 3],
    branch_shape: Option<[usize; 3]>,
    pub x_encoder: ConvEncoder,
    /// Variance head (PI-D, I-D) or privileged feature encoder (ND).
    pub branch: Option<ConvEncoder>,
    /// ND only: folds `[x-embedding, masked privileged features]` back to
    /// the embedding width.
    pub fuse: Option<Linear>,
    pub gru: Gru,
    pub head_hidden: Linear,
    pub head_out: Linear,
    pub decoder: Option<AuxDecoder>,
}

/// Inputs for a time-major batch of `steps x batch` frames.
#[derive(Clone, Copy, Debug)]
pub struct SeqInput<'a> {
    pub steps: usize,
    pub batch: usize,
    pub x: &'a [f64],
    /// Privileged grids, same frame order. Ignored in evaluation mode.
    pub pi: Option<&'a [f64]>,
}

pub struct ForwardCtx<'a> {
    pub mode: Mode,
    /// Training episode, read by the naive-dropout schedule.
    pub episode: usize,
    pub rng: &'a mut dyn RngCore,
    /// Run the AUX decoder when present.
    pub reconstruct: bool,
}

impl<'a> ForwardCtx<'a> {
    pub fn new(mode: Mode, episode: usize, rng: &'a mut dyn RngCore) -> Self {
        Self {
            mode,
            episode,
            rng,
            reconstruct: true,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SeqOutput {
    /// `steps x batch x 4`
    pub q: Vec<f64>,
    /// `steps x batch x hidden`
    pub hidden: Vec<f64>,
    pub alpha: Option<VarianceField>,
    pub reconstruction: Option<Vec<f64>>,
    /// Mean of `-log alpha` over the whole batch.
    pub penalty: Option<f64>,
}

impl SeqOutput {
    /// Hidden state after the last step (`batch x hidden`).
    pub fn last_hidden(&self, batch: usize, hidden: usize) -> &[f64] {
        &self.hidden[self.hidden.len() - batch * hidden..]
    }
}

/// Diagnostics of a single-step forward.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ForwardDiagnostics {
    pub alpha: Option<Vec<f64>>,
    pub reconstruction: Option<Vec<f64>>,
    pub penalty: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutput {
    pub q: [f64; Action::COUNT],
    pub h_next: Vec<f64>,
    pub diag: ForwardDiagnostics,
}

enum BranchTape {
    None,
    Noise {
        x_emb: Vec<f64>,
        alpha: VarianceField,
        noise: NoiseSample,
        tape: EncoderTape,
    },
    Naive {
        concat: Vec<f64>,
        z: Vec<f64>,
        mask: Option<Vec<f64>>,
        tape: Option<EncoderTape>,
    },
}

/// Activations kept by [`AgentNetwork::forward_seq`] for the backward pass.
pub struct SeqTape {
    frames: usize,
    x_tape: EncoderTape,
    branch: BranchTape,
    gru: GruTape,
    hidden: Vec<f64>,
    head_act: Vec<f64>,
    decoder: Option<DecoderTape>,
}

/// Upstream gradients for [`AgentNetwork::backward_seq`].
#[derive(Clone, Copy, Debug, Default)]
pub struct SeqGrads<'a> {
    /// `dL/dq`, same layout as [`SeqOutput::q`].
    pub dq: &'a [f64],
    /// Extra `dL/dalpha` (e.g. from the penalty); the noise path is added
    /// internally.
    pub d_alpha: Option<&'a [f64]>,
    /// `dL/d logits` of the decoder output.
    pub d_recon_logits: Option<&'a [f64]>,
}

impl AgentNetwork {
    /// Builds the network for `variant`, drawing every weight from a ChaCha8
    /// stream seeded with `seed`. Linear and convolution weights and biases
    /// are uniform in `+-1/sqrt(fan_in)`; GRU weights in `+-1/sqrt(hidden)`.
    pub fn build(
        variant: AgentVariant,
        layout: &GridLayout,
        dims: NetworkDims,
        params: VariantParams,
        seed: u64,
    ) -> Result<Self> {
        variant.validate()?;
        if dims.kernel == 0 || dims.conv1 == 0 || dims.conv2 == 0 || dims.embed == 0 || dims.hidden == 0 || dims.head == 0 {
            return Err(Error::Shape("network widths must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x_shape = layout.obs_shape(variant.x_kind);
        let x_encoder = ConvEncoder::new("x_encoder", x_shape, &dims, true, &mut rng)?;
        let branch_shape = variant.branch_input().map(|k| layout.obs_shape(k));
        let branch = match branch_shape {
            Some(shape) => {
                let relu_out = variant.tag == VariantTag::Nd;
                Some(ConvEncoder::new("branch", shape, &dims, relu_out, &mut rng)?)
            }
            None => None,
        };
        let fuse = (variant.tag == VariantTag::Nd).then(|| Linear::new("fuse", 2 * dims.embed, dims.embed, &mut rng));
        let gru = Gru::new("gru", dims.embed, dims.hidden, &mut rng);
        let head_hidden = Linear::new("head.hidden", dims.hidden, dims.head, &mut rng);
        let head_out = Linear::new("head.out", dims.head, Action::COUNT, &mut rng);
        let decoder =
            (variant.tag == VariantTag::Aux).then(|| AuxDecoder::new(layout.obs_shape(ObsKind::Fs), &dims, &mut rng));
        Ok(Self {
            variant,
            dims,
            params,
            x_shape,
            branch_shape,
            x_encoder,
            branch,
            fuse,
            gru,
            head_hidden,
            head_out,
            decoder,
        })
    }

    pub fn x_len(&self) -> usize {
        self.x_shape.iter().product()
    }

    pub fn pi_len(&self) -> Option<usize> {
        match self.variant.tag {
            VariantTag::PiD | VariantTag::Nd => self.branch_shape.map(|s| s.iter().product()),
            _ => None,
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.dims.hidden
    }

    pub fn initial_hidden(&self, batch: usize) -> Vec<f64> {
        vec![0.0; batch * self.dims.hidden]
    }

    /// Parameters that only the privileged/variance branch reads.
    pub fn branch_params_mut(&mut self) -> Vec<&mut Param> {
        self.branch.as_mut().map(ConvEncoder::params_mut).unwrap_or_default()
    }

    /// Forward pass over `input.steps` time steps from `h0`. With `record`
    /// set, also returns the tape for [`backward_seq`](Self::backward_seq).
    pub fn forward_seq(
        &self,
        input: SeqInput<'_>,
        h0: &[f64],
        ctx: &mut ForwardCtx<'_>,
        record: bool,
    ) -> Result<(SeqOutput, Option<SeqTape>)> {
        let frames = input.steps * input.batch;
        let e = self.dims.embed;
        if input.x.len() != frames * self.x_len() {
            return Err(Error::Shape(format!(
                "x has {} values, expected {} frames of {}",
                input.x.len(),
                frames,
                self.x_len()
            )));
        }
        if h0.len() != input.batch * self.dims.hidden {
            return Err(Error::Shape(format!(
                "h0 has {} values, expected {}",
                h0.len(),
                input.batch * self.dims.hidden
            )));
        }
        let train = ctx.mode == Mode::Train;
        let pi = if train {
            match (self.pi_len(), input.pi) {
                (Some(len), Some(pi)) if pi.len() == frames * len => Some(pi),
                (Some(len), Some(pi)) => {
                    return Err(Error::Shape(format!(
                        "privileged input has {} values, expected {}",
                        pi.len(),
                        frames * len
                    )))
                }
                (Some(_), None) => {
                    return Err(Error::MissingInput(format!(
                        "{} needs privileged input in training mode",
                        self.variant.label()
                    )))
                }
                (None, _) => None,
            }
        } else {
            None
        };

        let (x_emb, x_tape) = self.x_encoder.forward(input.x, frames);
        let mut alpha_out = None;
        let mut penalty = None;
        let (z, branch_tape) = match (self.variant.tag, train) {
            (VariantTag::PiD | VariantTag::ID, true) => {
                let branch = self.branch.as_ref().expect("variance head present");
                let src = if self.variant.tag == VariantTag::ID { input.x } else { pi.expect("checked above") };
                let (s, tape) = branch.forward(src, frames);
                let alpha = variance_from_preactivation(&s);
                let (z, noise) = apply_pi_dropout(&x_emb, &alpha, Mode::Train, &mut *ctx.rng)?;
                penalty = Some(ib_penalty(&alpha)?.value);
                alpha_out = Some(alpha.clone());
                (
                    z,
                    BranchTape::Noise {
                        x_emb,
                        alpha,
                        noise: noise.expect("train mode samples noise"),
                        tape,
                    },
                )
            }
            (VariantTag::Nd, _) => {
                let (masked, mask, tape) = if train {
                    let branch = self.branch.as_ref().expect("privileged encoder present");
                    let (f, tape) = branch.forward(pi.expect("checked above"), frames);
                    let p = naive_drop_probability(ctx.episode, self.params.naive_anneal_episodes);
                    let mask = naive_dropout_mask(f.len(), p, &mut *ctx.rng);
                    let masked: Vec<f64> = f.iter().zip(&mask).map(|(a, m)| a * m).collect();
                    (masked, Some(mask), Some(tape))
                } else {
                    (vec![0.0; frames * e], None, None)
                };
                let mut concat = Vec::with_capacity(frames * 2 * e);
                for r in 0..frames {
                    concat.extend_from_slice(&x_emb[r * e..(r + 1) * e]);
                    concat.extend_from_slice(&masked[r * e..(r + 1) * e]);
                }
                let mut z = self.fuse.as_ref().expect("fuse present").forward(&concat, frames);
                relu_inplace(&mut z);
                let tape = BranchTape::Naive {
                    concat,
                    z: z.clone(),
                    mask,
                    tape,
                };
                (z, tape)
            }
            _ => (x_emb, BranchTape::None),
        };

        let (hidden, gru_tape) = self.gru.forward(&z, input.steps, input.batch, h0, record);
        let mut head_act = self.head_hidden.forward(&hidden, frames);
        relu_inplace(&mut head_act);
        let q = self.head_out.forward(&head_act, frames);

        let (reconstruction, decoder_tape) = match (&self.decoder, ctx.reconstruct) {
            (Some(dec), true) => {
                let (y, t) = dec.forward(&hidden, frames);
                (Some(y), Some(t))
            }
            _ => (None, None),
        };

        let out = SeqOutput {
            q,
            hidden: hidden.clone(),
            alpha: alpha_out,
            reconstruction,
            penalty,
        };
        let tape = record.then(|| SeqTape {
            frames,
            x_tape,
            branch: branch_tape,
            gru: gru_tape.expect("recorded"),
            hidden,
            head_act,
            decoder: decoder_tape,
        });
        Ok((out, tape))
    }

    /// Accumulates parameter gradients for the recorded forward pass.
    pub fn backward_seq(&mut self, tape: SeqTape, grads: SeqGrads<'_>) -> Result<()> {
        let frames = tape.frames;
        let e = self.dims.embed;
        if grads.dq.len() != frames * Action::COUNT {
            return Err(Error::Shape(format!("dq has {} values, expected {}", grads.dq.len(), frames * Action::COUNT)));
        }
        let mut d_act = self
            .head_out
            .backward(&tape.head_act, grads.dq, frames, true)
            .expect("dx requested");
        relu_backward_inplace(&tape.head_act, &mut d_act);
        let mut d_hidden = self
            .head_hidden
            .backward(&tape.hidden, &d_act, frames, true)
            .expect("dx requested");
        if let (Some(dec), Some(dt), Some(dl)) = (self.decoder.as_mut(), tape.decoder.as_ref(), grads.d_recon_logits) {
            let dh = dec.backward(dt, dl);
            for (a, b) in d_hidden.iter_mut().zip(&dh) {
                *a += b;
            }
        }
        let (dz, _dh0) = self.gru.backward(&tape.gru, &d_hidden);

        let dx_emb = match tape.branch {
            BranchTape::None => dz,
            BranchTape::Noise {
                x_emb,
                alpha,
                noise,
                tape: btape,
            } => {
                let (dx, mut d_alpha) = pi_dropout_backward(&x_emb, &noise, &dz);
                if let Some(extra) = grads.d_alpha {
                    if extra.len() != d_alpha.len() {
                        return Err(Error::Shape("d_alpha does not match the variance field".into()));
                    }
                    for (a, b) in d_alpha.iter_mut().zip(extra) {
                        *a += b;
                    }
                }
                let ds = variance_backward(&alpha, &d_alpha);
                self.branch.as_mut().expect("variance head present").backward(&btape, &ds);
                dx
            }
            BranchTape::Naive {
                concat,
                z,
                mask,
                tape: btape,
            } => {
                let mut d = dz;
                relu_backward_inplace(&z, &mut d);
                let d_concat = self
                    .fuse
                    .as_mut()
                    .expect("fuse present")
                    .backward(&concat, &d, frames, true)
                    .expect("dx requested");
                let mut dx = vec![0.0; frames * e];
                let mut df = vec![0.0; frames * e];
                for r in 0..frames {
                    dx[r * e..(r + 1) * e].copy_from_slice(&d_concat[r * 2 * e..r * 2 * e + e]);
                    df[r * e..(r + 1) * e].copy_from_slice(&d_concat[r * 2 * e + e..(r + 1) * 2 * e]);
                }
                if let (Some(mask), Some(btape)) = (mask, btape) {
                    for (g, m) in df.iter_mut().zip(&mask) {
                        *g *= m;
                    }
                    self.branch.as_mut().expect("privileged encoder present").backward(&btape, &df);
                }
                dx
            }
        };
        self.x_encoder.backward(&tape.x_tape, &dx_emb);
        Ok(())
    }

    /// One time step for a single environment.
    pub fn forward(&self, x: &[f64], pi: Option<&[f64]>, h_prev: &[f64], ctx: &mut ForwardCtx<'_>) -> Result<StepOutput> {
        let (out, _) = self.forward_seq(
            SeqInput {
                steps: 1,
                batch: 1,
                x,
                pi,
            },
            h_prev,
            ctx,
            false,
        )?;
        let mut q = [0.0; Action::COUNT];
        q.copy_from_slice(&out.q);
        Ok(StepOutput {
            q,
            h_next: out.hidden,
            diag: ForwardDiagnostics {
                alpha: out.alpha.map(VarianceField::into_values),
                reconstruction: out.reconstruction,
                penalty: out.penalty,
            },
        })
    }

    /// Same architecture (variant, widths and therefore every parameter shape).
    pub fn same_architecture(&self, other: &AgentNetwork) -> bool {
        self.variant == other.variant
            && self.dims == other.dims
            && self.params().iter().zip(other.params()).all(|(a, b)| a.name == b.name && a.shape == b.shape)
    }
}

impl Parameterized for AgentNetwork {
    fn params(&self) -> Vec<&Param> {
        let mut v = self.x_encoder.params();
        if let Some(b) = &self.branch {
            v.extend(b.params());
        }
        if let Some(f) = &self.fuse {
            v.extend(f.params());
        }
        v.extend(self.gru.params());
        v.extend(self.head_hidden.params());
        v.extend(self.head_out.params());
        if let Some(d) = &self.decoder {
            v.extend(d.params());
        }
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut v = self.x_encoder.params_mut();
        if let Some(b) = &mut self.branch {
            v.extend(b.params_mut());
        }
        if let Some(f) = &mut self.fuse {
            v.extend(f.params_mut());
        }
        v.extend(self.gru.params_mut());
        v.extend(self.head_hidden.params_mut());
        v.extend(self.head_out.params_mut());
        if let Some(d) = &mut self.decoder {
            v.extend(d.params_mut());
        }
        v
    }
}

/// Index of the largest Q-value; ties go to the lowest index.
pub fn greedy_action(q: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in q.iter().enumerate().skip(1) {
        if *v > q[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> NetworkDims {
        NetworkDims {
            conv1: 2,
            conv2: 3,
            kernel: 3,
            embed: 4,
            hidden: 5,
            head: 6,
        }
    }

    #[test]
    fn wiring_per_variant() {
        let layout = GridLayout::default();
        let build = |tag| AgentNetwork::build(AgentVariant::standard(tag), &layout, tiny(), VariantParams::default(), 0).unwrap();
        assert!(build(VariantTag::PiD).branch.is_some());
        assert!(build(VariantTag::Drqn).branch.is_none());
        assert!(build(VariantTag::Nd).fuse.is_some());
        assert_eq!(build(VariantTag::Aux).decoder.as_ref().unwrap().output_shape(), [3, 8, 22]);
        assert!(build(VariantTag::Dis).decoder.is_none());
    }

    #[test]
    fn same_seed_same_weights() {
        let layout = GridLayout::default();
        let v = AgentVariant::standard(VariantTag::PiD);
        let a = AgentNetwork::build(v, &layout, NetworkDims::default(), VariantParams::default(), 42).unwrap();
        let b = AgentNetwork::build(v, &layout, NetworkDims::default(), VariantParams::default(), 42).unwrap();
        assert_eq!(a, b);
        let c = AgentNetwork::build(v, &layout, NetworkDims::default(), VariantParams::default(), 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn missing_pi_in_training_is_an_error() {
        let layout = GridLayout::default();
        let net = AgentNetwork::build(AgentVariant::standard(VariantTag::PiD), &layout, tiny(), VariantParams::default(), 0)
            .unwrap();
        let x = vec![0.0; net.x_len()];
        let h = net.initial_hidden(1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut ctx = ForwardCtx::new(Mode::Train, 0, &mut rng);
        assert!(matches!(net.forward(&x, None, &h, &mut ctx), Err(Error::MissingInput(_))));
        let mut ctx = ForwardCtx::new(Mode::Eval, 0, &mut rng);
        assert!(net.forward(&x, None, &h, &mut ctx).is_ok());
        let mut ctx = ForwardCtx::new(Mode::Eval, 0, &mut rng);
        assert!(matches!(net.forward(&x[1..], None, &h, &mut ctx), Err(Error::Shape(_))));
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(greedy_action(&[1.0, 1.0, 0.0, 1.0]), 0);
        assert_eq!(greedy_action(&[0.0, 2.0, 2.0, 1.0]), 1);
        assert_eq!(greedy_action(&[0.0, 0.0, 0.0, 3.0]), 3);
    }
}
