//! Auxiliary loss terms for the AUX and DIS baselines.

use crate::error::{Error, Result};

/// Mean binary cross-entropy between a sigmoid reconstruction and a binary
/// target grid. Every reconstruction value must lie strictly inside (0, 1).
pub fn aux_reconstruction_loss(reconstruction: &[f64], target: &[f64]) -> Result<f64> {
    if reconstruction.len() != target.len() {
        return Err(Error::Shape(format!(
            "reconstruction has {} values, target has {}",
            reconstruction.len(),
            target.len()
        )));
    }
    if reconstruction.is_empty() {
        return Err(Error::Shape("empty reconstruction".into()));
    }
    let mut sum = 0.0;
    for (y, t) in reconstruction.iter().zip(target) {
        if !(*y > 0.0 && *y < 1.0) {
            return Err(Error::Value(format!("reconstruction value {y} is outside (0, 1)")));
        }
        sum -= t * y.ln() + (1.0 - t) * (1.0 - y).ln();
    }
    Ok(sum / reconstruction.len() as f64)
}

/// BCE restricted to whole frames where `frame_mask` is set, with its
/// gradient taken with respect to the decoder logits (`(y - t) / count`).
/// Values are clamped to `[1e-7, 1 - 1e-7]` inside the log.
pub fn masked_reconstruction_loss(
    reconstruction: &[f64],
    target: &[f64],
    frame_mask: &[bool],
    frame_len: usize,
) -> (f64, Vec<f64>) {
    let count = frame_mask.iter().filter(|m| **m).count() * frame_len;
    let mut grad = vec![0.0; reconstruction.len()];
    if count == 0 {
        return (0.0, grad);
    }
    let mut sum = 0.0;
    for (f, keep) in frame_mask.iter().enumerate() {
        if !keep {
            continue;
        }
        for i in f * frame_len..(f + 1) * frame_len {
            let y = reconstruction[i].clamp(1e-7, 1.0 - 1e-7);
            let t = target[i];
            sum -= t * y.ln() + (1.0 - t) * (1.0 - y).ln();
            grad[i] = (reconstruction[i] - t) / count as f64;
        }
    }
    (sum / count as f64, grad)
}

/// Mean squared error between student and teacher Q-values, over actions and
/// batch.
pub fn distillation_loss(student_q: &[f64], teacher_q: &[f64]) -> Result<f64> {
    if student_q.len() != teacher_q.len() {
        return Err(Error::Shape(format!(
            "student has {} Q-values, teacher has {}",
            student_q.len(),
            teacher_q.len()
        )));
    }
    if student_q.is_empty() {
        return Err(Error::Shape("empty Q batch".into()));
    }
    let sum: f64 = student_q.iter().zip(teacher_q).map(|(s, t)| (s - t) * (s - t)).sum();
    Ok(sum / student_q.len() as f64)
}
