//! Multinomial logistic-regression probes of agent position from hidden
//! states, trained with inverse-class-frequency weights.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::activations::ActivationDataset;
use crate::error::{Error, Result};
use crate::nn::gemm;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeConfig {
    /// Full-batch gradient-descent iterations.
    pub iterations: usize,
    pub step_size: f64,
    /// Coefficient of `0.5 * ||W||^2` (biases are not penalised).
    pub l2: f64,
    /// Fraction of each class's rows used for training.
    pub train_fraction: f64,
    /// Seeds the split.
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            iterations: 500,
            step_size: 0.5,
            l2: 1e-4,
            train_fraction: 0.8,
            seed: 0,
        }
    }
}

/// `w_k = N / (K c_k)` for every class with `c_k > 0`, zero otherwise.
pub fn class_weights(counts: &[usize]) -> Vec<f64> {
    let n: usize = counts.iter().sum();
    let k = counts.iter().filter(|c| **c > 0).count();
    counts
        .iter()
        .map(|&c| if c == 0 { 0.0 } else { n as f64 / (k * c) as f64 })
        .collect()
}

pub fn class_counts(labels: &[u32], classes: usize) -> Vec<usize> {
    let mut counts = vec![0; classes];
    for &l in labels {
        counts[l as usize] += 1;
    }
    counts
}

/// Per-class split: each class with at least two rows puts
/// `round((1 - train_fraction) * c)` rows, clamped to `1..=c-1`, into the
/// held-out part; single-row classes go to training. Returns row indices
/// `(train, held_out)`, each sorted.
pub fn stratified_split(labels: &[u32], classes: usize, train_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l as usize].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for mut rows in by_class {
        let c = rows.len();
        if c < 2 {
            train.extend(rows);
            continue;
        }
        rows.shuffle(&mut rng);
        let held = (((1.0 - train_fraction) * c as f64).round() as usize).clamp(1, c - 1);
        test.extend_from_slice(&rows[..held]);
        train.extend_from_slice(&rows[held..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

/// Linear softmax classifier over position classes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeModel {
    pub classes: usize,
    pub width: usize,
    /// `classes x width`
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
    /// Training class weights.
    pub class_weights: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub model: ProbeModel,
    /// Class-weighted accuracy on the held-out rows, weights from held-out
    /// class counts.
    pub weighted_accuracy: f64,
    /// Plain accuracy on the held-out rows.
    pub accuracy: f64,
    pub train_rows: usize,
    pub held_out_rows: usize,
    pub train_indices: Vec<usize>,
    pub held_out_indices: Vec<usize>,
}

fn softmax_rows(logits: &mut [f64], classes: usize) {
    for row in logits.chunks_mut(classes) {
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut s = 0.0;
        for v in row.iter_mut() {
            *v = (*v - m).exp();
            s += *v;
        }
        for v in row.iter_mut() {
            *v /= s;
        }
    }
}

impl ProbeModel {
    /// Class probabilities for `rows` feature rows.
    pub fn predict_proba(&self, features: &[f64], rows: usize) -> Result<Vec<f64>> {
        if features.len() != rows * self.width {
            return Err(Error::Shape(format!(
                "probe of width {} got {} values for {rows} rows",
                self.width,
                features.len()
            )));
        }
        let mut logits = Vec::with_capacity(rows * self.classes);
        for _ in 0..rows {
            logits.extend_from_slice(&self.bias);
        }
        gemm(rows, self.width, self.classes, 1.0, features, false, &self.weight, true, 1.0, &mut logits);
        softmax_rows(&mut logits, self.classes);
        Ok(logits)
    }

    pub fn predict(&self, features: &[f64], rows: usize) -> Result<Vec<u32>> {
        let p = self.predict_proba(features, rows)?;
        Ok(p.chunks(self.classes)
            .map(|r| {
                let mut best = 0;
                for (i, v) in r.iter().enumerate() {
                    if *v > r[best] {
                        best = i;
                    }
                }
                best as u32
            })
            .collect())
    }
}

/// Class-weighted accuracy: `sum_i w_{y_i} [pred_i = y_i] / sum_i w_{y_i}`
/// with weights from the counts of `labels` themselves. This is the mean
/// per-class recall over the classes present.
pub fn weighted_accuracy(predicted: &[u32], labels: &[u32], classes: usize) -> f64 {
    let w = class_weights(&class_counts(labels, classes));
    let (mut hit, mut tot) = (0.0, 0.0);
    for (p, l) in predicted.iter().zip(labels) {
        let wi = w[*l as usize];
        tot += wi;
        if p == l {
            hit += wi;
        }
    }
    if tot == 0.0 {
        0.0
    } else {
        hit / tot
    }
}

/// Fits a probe on rows `rows` of `features` by full-batch gradient descent
/// on the class-weighted mean cross-entropy plus the L2 term.
pub fn fit_probe(
    features: &[f64],
    labels: &[u32],
    width: usize,
    classes: usize,
    config: &ProbeConfig,
) -> Result<ProbeModel> {
    let n = labels.len();
    if n == 0 || features.len() != n * width {
        return Err(Error::Shape(format!("{} values for {n} rows of width {width}", features.len())));
    }
    let cw = class_weights(&class_counts(labels, classes));
    let norm: f64 = labels.iter().map(|l| cw[*l as usize]).sum();
    let mut model = ProbeModel {
        classes,
        width,
        weight: vec![0.0; classes * width],
        bias: vec![0.0; classes],
        class_weights: cw,
    };
    let mut dlogits = vec![0.0; n * classes];
    let mut dw = vec![0.0; classes * width];
    for _ in 0..config.iterations {
        let p = model.predict_proba(features, n)?;
        for i in 0..n {
            let y = labels[i] as usize;
            let s = model.class_weights[y] / norm;
            for k in 0..classes {
                dlogits[i * classes + k] = s * (p[i * classes + k] - if k == y { 1.0 } else { 0.0 });
            }
        }
        gemm(classes, n, width, 1.0, &dlogits, true, features, false, 0.0, &mut dw);
        for k in 0..classes {
            let db: f64 = (0..n).map(|i| dlogits[i * classes + k]).sum();
            model.bias[k] -= config.step_size * db;
        }
        for (w, g) in model.weight.iter_mut().zip(&dw) {
            *w -= config.step_size * (g + config.l2 * *w);
        }
    }
    Ok(model)
}

fn gather(data: &ActivationDataset, idx: &[usize]) -> (Vec<f64>, Vec<u32>) {
    let mut f = Vec::with_capacity(idx.len() * data.width);
    let mut l = Vec::with_capacity(idx.len());
    for &i in idx {
        f.extend_from_slice(data.row(i));
        l.push(data.labels[i]);
    }
    (f, l)
}

/// Stratified split, fit on the training part, score on the held-out part.
pub fn train_linear_probe(data: &ActivationDataset, classes: usize, config: &ProbeConfig) -> Result<ProbeResult> {
    if data.rows() == 0 {
        return Err(Error::Value("empty activation dataset".into()));
    }
    if let Some(bad) = data.labels.iter().find(|l| **l as usize >= classes) {
        return Err(Error::Value(format!("label {bad} is outside {classes} classes")));
    }
    let present = class_counts(&data.labels, classes).iter().filter(|c| **c > 0).count();
    if present < 2 {
        return Err(Error::Value("a probe needs at least two position classes".into()));
    }
    let (train_idx, test_idx) = stratified_split(&data.labels, classes, config.train_fraction, config.seed);
    let (tf, tl) = gather(data, &train_idx);
    let model = fit_probe(&tf, &tl, data.width, classes, config)?;
    let (hf, hl) = gather(data, &test_idx);
    let (weighted_accuracy, accuracy) = if hl.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        let pred = model.predict(&hf, hl.len())?;
        let hits = pred.iter().zip(&hl).filter(|(a, b)| a == b).count();
        (weighted_accuracy(&pred, &hl, classes), hits as f64 / hl.len() as f64)
    };
    Ok(ProbeResult {
        model,
        weighted_accuracy,
        accuracy,
        train_rows: train_idx.len(),
        held_out_rows: test_idx.len(),
        train_indices: train_idx,
        held_out_indices: test_idx,
    })
}
