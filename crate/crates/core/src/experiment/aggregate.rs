use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trainer::{read_jsonl, EvalRecord, EVAL_FILE};

/// Mean and standard error of the greedy return across seeds, per eval
/// checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveAggregate {
    pub label: String,
    pub episodes: Vec<usize>,
    pub mean: Vec<f64>,
    /// Sample standard deviation (n - 1) over sqrt(n); zero when n = 1.
    pub se: Vec<f64>,
    /// Seeds contributing at each checkpoint.
    pub n: Vec<usize>,
    /// Some checkpoint rests on a single seed, so its error bar is
    /// meaningless.
    pub single_seed: bool,
}

/// `(mean, standard error)` with the `n - 1` sample deviation; the error is
/// zero for a single value.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Aggregates per-seed curves given as `(episode, value)` series. Every
/// series must follow the same checkpoint sequence (shorter series are
/// seeds that have not finished yet).
pub fn aggregate_series(label: &str, series: &[Vec<(usize, f64)>]) -> Result<CurveAggregate> {
    if series.is_empty() {
        return Err(Error::Value(format!("{label}: no runs to aggregate")));
    }
    let longest = series.iter().max_by_key(|s| s.len()).expect("non-empty");
    for s in series {
        if s.iter().zip(longest).any(|(a, b)| a.0 != b.0) {
            return Err(Error::Value(format!("{label}: runs disagree on the evaluation cadence")));
        }
    }
    let mut agg = CurveAggregate {
        label: label.to_string(),
        episodes: Vec::new(),
        mean: Vec::new(),
        se: Vec::new(),
        n: Vec::new(),
        single_seed: false,
    };
    for (i, (episode, _)) in longest.iter().enumerate() {
        let vals: Vec<f64> = series.iter().filter_map(|s| s.get(i).map(|p| p.1)).collect();
        let (m, se) = mean_se(&vals);
        agg.episodes.push(*episode);
        agg.mean.push(m);
        agg.se.push(se);
        agg.n.push(vals.len());
        agg.single_seed |= vals.len() == 1;
    }
    Ok(agg)
}

/// Reads `eval.jsonl` from each run directory and aggregates mean returns.
pub fn aggregate_curves(label: &str, run_dirs: &[PathBuf]) -> Result<CurveAggregate> {
    let series = run_dirs
        .iter()
        .map(|d| {
            let evals: Vec<EvalRecord> = read_jsonl(&d.join(EVAL_FILE))?;
            Ok(evals.iter().map(|e| (e.episode, e.mean_return)).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    aggregate_series(label, &series)
}

/// Mean greedy return over the evaluations taken after more than
/// `after_episode` training episodes.
pub fn late_mean_return(evals: &[EvalRecord], after_episode: usize) -> Option<f64> {
    let late: Vec<f64> = evals
        .iter()
        .filter(|e| e.episode > after_episode)
        .map(|e| e.mean_return)
        .collect();
    (!late.is_empty()).then(|| late.iter().sum::<f64>() / late.len() as f64)
}

/// Seed directories (numeric names) directly under `dir`, sorted by seed.
pub fn seed_dirs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<(u64, PathBuf)> = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if let Some(seed) = path.file_name().and_then(|n| n.to_str()).and_then(|n| n.parse::<u64>().ok()) {
            if path.join(EVAL_FILE).is_file() {
                out.push((seed, path));
            }
        }
    }
    out.sort();
    Ok(out.into_iter().map(|(_, p)| p).collect())
}

/// Run groups (`<dir>/<run name>/<seed>/eval.jsonl`) under `dir`, sorted by
/// run name.
pub fn run_groups(dir: &Path) -> Result<Vec<(String, Vec<PathBuf>)>> {
    let mut groups = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if !path.is_dir() {
            continue;
        }
        let seeds = seed_dirs(&path)?;
        if !seeds.is_empty() {
            groups.push((entry.file_name().to_string_lossy().into_owned(), seeds));
        }
    }
    groups.sort();
    Ok(groups)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn five_seeds() {
        let (m, se) = mean_se(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(m, 3.0);
        assert!((se - (2.5f64).sqrt() / 5f64.sqrt()).abs() < 1e-12);
        assert!((se - 0.7071).abs() < 1e-4);
    }

    #[test]
    fn single_seed_is_flagged() {
        let a = aggregate_series("x", &[vec![(100, 1.0), (200, 2.0)]]).unwrap();
        assert!(a.single_seed);
        assert_eq!(a.se, vec![0.0, 0.0]);
    }

    #[test]
    fn cadence_mismatch_is_rejected() {
        let r = aggregate_series("x", &[vec![(100, 1.0), (200, 2.0)], vec![(100, 1.0), (250, 2.0)]]);
        assert!(r.is_err());
        let ok = aggregate_series("x", &[vec![(100, 1.0), (200, 2.0)], vec![(100, 3.0)]]).unwrap();
        assert_eq!(ok.n, vec![2, 1]);
        assert!(ok.single_seed);
    }
}
