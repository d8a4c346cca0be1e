use rand::Rng;

use super::param::Param;
use super::{sigmoid, Linear};

/// Gated recurrent unit, gate order `(reset, update, candidate)`:
///
/// ```text
/// r  = sigmoid(W_ir x + b_ir + W_hr h + b_hr)
/// u  = sigmoid(W_iu x + b_iu + W_hu h + b_hu)
/// n  = tanh(W_in x + b_in + r * (W_hn h + b_hn))
/// h' = (1 - u) * n + u * h
/// ```
#[derive(Clone, Debug, PartialEq)]
pub struct Gru {
    /// `3H x I`
    pub input: Linear,
    /// `3H x H`
    pub recurrent: Linear,
    pub hidden: usize,
}

#[derive(Clone, Debug)]
struct StepTape {
    h_prev: Vec<f64>,
    r: Vec<f64>,
    u: Vec<f64>,
    n: Vec<f64>,
    gh_n: Vec<f64>,
}

/// Everything [`Gru::backward`] needs from a sequence forward pass.
#[derive(Clone, Debug)]
pub struct GruTape {
    x: Vec<f64>,
    steps: Vec<StepTape>,
    batch: usize,
}

impl Gru {
    /// All weights uniform in `+-1/sqrt(H)`.
    pub fn new<R: Rng + ?Sized>(name: &str, input: usize, hidden: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        let layer = |suffix: &str, fan_in: usize, rng: &mut R| Linear {
            weight: Param::uniform(format!("{name}.weight_{suffix}"), &[3 * hidden, fan_in], bound, rng),
            bias: Param::uniform(format!("{name}.bias_{suffix}"), &[3 * hidden], bound, rng),
        };
        let input_layer = layer("ih", input, rng);
        let recurrent = layer("hh", hidden, rng);
        Self {
            input: input_layer,
            recurrent,
            hidden,
        }
    }

    /// Runs `steps` time steps over a time-major input (`steps x batch x I`).
    /// Returns every hidden state (`steps x batch x H`).
    pub fn forward(&self, x: &[f64], steps: usize, batch: usize, h0: &[f64], record: bool) -> (Vec<f64>, Option<GruTape>) {
        let hd = self.hidden;
        let gi = self.input.forward(x, steps * batch);
        let mut hs = Vec::with_capacity(steps * batch * hd);
        let mut h = h0.to_vec();
        let mut tapes = Vec::with_capacity(if record { steps } else { 0 });
        for t in 0..steps {
            let gh = self.recurrent.forward(&h, batch);
            let gi_t = &gi[t * batch * 3 * hd..(t + 1) * batch * 3 * hd];
            let mut r = vec![0.0; batch * hd];
            let mut u = vec![0.0; batch * hd];
            let mut n = vec![0.0; batch * hd];
            let mut gh_n = vec![0.0; batch * hd];
            let mut h_next = vec![0.0; batch * hd];
            for b in 0..batch {
                let gi_b = &gi_t[b * 3 * hd..(b + 1) * 3 * hd];
                let gh_b = &gh[b * 3 * hd..(b + 1) * 3 * hd];
                for j in 0..hd {
                    let i = b * hd + j;
                    let rj = sigmoid(gi_b[j] + gh_b[j]);
                    let uj = sigmoid(gi_b[hd + j] + gh_b[hd + j]);
                    let ghn = gh_b[2 * hd + j];
                    let nj = (gi_b[2 * hd + j] + rj * ghn).tanh();
                    r[i] = rj;
                    u[i] = uj;
                    n[i] = nj;
                    gh_n[i] = ghn;
                    h_next[i] = (1.0 - uj) * nj + uj * h[i];
                }
            }
            hs.extend_from_slice(&h_next);
            let h_prev = std::mem::replace(&mut h, h_next);
            if record {
                tapes.push(StepTape { h_prev, r, u, n, gh_n });
            }
        }
        let tape = record.then(|| GruTape {
            x: x.to_vec(),
            steps: tapes,
            batch,
        });
        (hs, tape)
    }

    /// Backpropagation through time. `d_hs` holds `dL/dh_t` for every output
    /// step. Returns `dL/dx` (time-major) and `dL/dh0`.
    pub fn backward(&mut self, tape: &GruTape, d_hs: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let hd = self.hidden;
        let batch = tape.batch;
        let steps = tape.steps.len();
        let mut d_gi = vec![0.0; steps * batch * 3 * hd];
        let mut carry = vec![0.0; batch * hd];
        for t in (0..steps).rev() {
            let st = &tape.steps[t];
            let mut d_gh = vec![0.0; batch * 3 * hd];
            let d_gi_t = &mut d_gi[t * batch * 3 * hd..(t + 1) * batch * 3 * hd];
            let mut dh_prev_direct = vec![0.0; batch * hd];
            for b in 0..batch {
                for j in 0..hd {
                    let i = b * hd + j;
                    let dh = d_hs[(t * batch + b) * hd + j] + carry[i];
                    let (r, u, n) = (st.r[i], st.u[i], st.n[i]);
                    let dn = dh * (1.0 - u);
                    let du = dh * (st.h_prev[i] - n);
                    dh_prev_direct[i] = dh * u;
                    let dn_pre = dn * (1.0 - n * n);
                    let dr = dn_pre * st.gh_n[i];
                    let dr_pre = dr * r * (1.0 - r);
                    let du_pre = du * u * (1.0 - u);
                    let o = b * 3 * hd;
                    d_gi_t[o + j] = dr_pre;
                    d_gi_t[o + hd + j] = du_pre;
                    d_gi_t[o + 2 * hd + j] = dn_pre;
                    d_gh[o + j] = dr_pre;
                    d_gh[o + hd + j] = du_pre;
                    d_gh[o + 2 * hd + j] = dn_pre * r;
                }
            }
            let dh_prev = self
                .recurrent
                .backward(&st.h_prev, &d_gh, batch, true)
                .expect("dx requested");
            for (c, (a, b)) in carry.iter_mut().zip(dh_prev.iter().zip(&dh_prev_direct)) {
                *c = a + b;
            }
        }
        let dx = self
            .input
            .backward(&tape.x, &d_gi, steps * batch, true)
            .expect("dx requested");
        (dx, carry)
    }

    pub fn params(&self) -> Vec<&Param> {
        let mut v = self.input.params();
        v.extend(self.recurrent.params());
        v
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut v = self.input.params_mut();
        v.extend(self.recurrent.params_mut());
        v
    }
}

/// Single-step reference used only to cross-check the batched sequence path.
#[cfg(test)]
fn reference_step(gru: &Gru, x: &[f64], h: &[f64]) -> Vec<f64> {
    let hd = gru.hidden;
    let i_dim = gru.input.input_dim();
    let row = |l: &Linear, v: &[f64], k: usize, dim: usize| -> f64 {
        l.bias.value[k] + (0..dim).map(|p| l.weight.value[k * dim + p] * v[p]).sum::<f64>()
    };
    (0..hd)
        .map(|j| {
            let r = sigmoid(row(&gru.input, x, j, i_dim) + row(&gru.recurrent, h, j, hd));
            let u = sigmoid(row(&gru.input, x, hd + j, i_dim) + row(&gru.recurrent, h, hd + j, hd));
            let n = (row(&gru.input, x, 2 * hd + j, i_dim) + r * row(&gru.recurrent, h, 2 * hd + j, hd)).tanh();
            (1.0 - u) * n + u * h[j]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn sequence_matches_scalar_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let gru = Gru::new("gru", 3, 4, &mut rng);
        let (steps, batch) = (5, 2);
        let x: Vec<f64> = (0..steps * batch * 3).map(|i| ((i as f64) * 0.7).sin()).collect();
        let h0 = vec![0.1, -0.2, 0.3, 0.0, 0.5, 0.5, -0.5, 0.2];
        let (hs, _) = gru.forward(&x, steps, batch, &h0, false);
        for b in 0..batch {
            let mut h = h0[b * 4..(b + 1) * 4].to_vec();
            for t in 0..steps {
                h = reference_step(&gru, &x[(t * batch + b) * 3..(t * batch + b + 1) * 3], &h);
                for j in 0..4 {
                    assert!((h[j] - hs[(t * batch + b) * 4 + j]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn bptt_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut gru = Gru::new("gru", 2, 3, &mut rng);
        let (steps, batch) = (4, 2);
        let x: Vec<f64> = (0..steps * batch * 2).map(|i| ((i as f64) * 1.3).cos()).collect();
        let h0 = vec![0.2; batch * 3];
        let c: Vec<f64> = (0..steps * batch * 3).map(|i| ((i as f64) * 0.31).sin()).collect();
        let loss = |g: &Gru, x: &[f64], h0: &[f64]| -> f64 {
            g.forward(x, steps, batch, h0, false).0.iter().zip(&c).map(|(a, b)| a * b).sum()
        };
        let (_, tape) = gru.forward(&x, steps, batch, &h0, true);
        let (dx, dh0) = gru.backward(&tape.unwrap(), &c);
        let eps = 1e-6;
        let names: Vec<String> = gru.params().iter().map(|p| p.name.clone()).collect();
        for (pi, name) in names.iter().enumerate() {
            let len = gru.params()[pi].len();
            for k in 0..len {
                let mut g = gru.clone();
                g.params_mut()[pi].value[k] += eps;
                let up = loss(&g, &x, &h0);
                g.params_mut()[pi].value[k] -= 2.0 * eps;
                let fd = (up - loss(&g, &x, &h0)) / (2.0 * eps);
                let an = gru.params()[pi].grad[k];
                assert!((fd - an).abs() < 1e-7, "{name}[{k}] fd={fd} an={an}");
            }
        }
        for k in 0..x.len() {
            let mut xp = x.clone();
            xp[k] += eps;
            let up = loss(&gru, &xp, &h0);
            xp[k] -= 2.0 * eps;
            assert!(((up - loss(&gru, &xp, &h0)) / (2.0 * eps) - dx[k]).abs() < 1e-7);
        }
        for k in 0..h0.len() {
            let mut hp = h0.clone();
            hp[k] += eps;
            let up = loss(&gru, &x, &hp);
            hp[k] -= 2.0 * eps;
            assert!(((up - loss(&gru, &x, &hp)) / (2.0 * eps) - dh0[k]).abs() < 1e-7);
        }
    }
}
