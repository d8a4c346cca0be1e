use std::fs;
use std::path::{Path, PathBuf};

use super::aggregate::{aggregate_curves, run_groups, CurveAggregate};
use super::config::{ExperimentConfig, CONFIG_SNAPSHOT};
use super::plots::{beta_file, confusion_file, curves_file, plot_confusion, plot_curves};
use crate::error::{Error, Result};
use crate::eval::ConfusionOutputs;

/// Everything a figure pass draws.
#[derive(Clone, Debug, Default)]
pub struct PlotInputs {
    /// `(tag, curves)` -> `curves_<tag>.svg`
    pub curves: Vec<(String, Vec<CurveAggregate>)>,
    /// `(privileged form, one curve per beta)` -> `beta_<pi>.svg`
    pub betas: Vec<(String, Vec<CurveAggregate>)>,
    /// `(variant, mode, matrix)` -> `confusion_<variant>_<mode>.svg`
    pub confusions: Vec<(String, String, ConfusionOutputs)>,
}

impl PlotInputs {
    pub fn is_empty(&self) -> bool {
        self.curves.is_empty() && self.betas.is_empty() && self.confusions.is_empty()
    }
}

/// Legend label of a run group: the variant label from the first seed's
/// snapshot, else the directory name.
fn group_label(name: &str, seeds: &[PathBuf]) -> String {
    seeds
        .first()
        .and_then(|d| ExperimentConfig::load(&d.join(CONFIG_SNAPSHOT)).ok())
        .and_then(|c| c.agent_variant().ok())
        .map(|v| v.label())
        .unwrap_or_else(|| name.to_string())
}

fn privileged_form(seeds: &[PathBuf]) -> Option<String> {
    let cfg = ExperimentConfig::load(&seeds.first()?.join(CONFIG_SNAPSHOT)).ok()?;
    Some(cfg.agent_variant().ok()?.pi_kind?.name().to_string())
}

fn find_confusions(dir: &Path, depth: usize, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_dir() && depth > 0 {
            find_confusions(&path, depth - 1, out)?;
        } else if path.extension().is_some_and(|e| e == "json")
            && path.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with("confusion_"))
        {
            out.push(path);
        }
    }
    Ok(())
}

/// Splits `confusion_<variant>_<mode>.json` into `(variant, mode)`; the
/// mode is `test_time` or `train_time`.
pub fn parse_confusion_name(path: &Path) -> Option<(String, String)> {
    let stem = path.file_stem()?.to_str()?.strip_prefix("confusion_")?;
    for mode in ["test_time", "train_time"] {
        if let Some(v) = stem.strip_suffix(mode).and_then(|v| v.strip_suffix('_')) {
            return Some((v.to_string(), mode.to_string()));
        }
    }
    None
}

/// Scans `root` for run groups (`<root>/<run>/<seed>`), beta sweeps
/// (`<root>/beta_<b>/<run>/<seed>`) and saved confusion matrices.
pub fn collect_plot_inputs(root: &Path, tag: &str) -> Result<PlotInputs> {
    let mut inputs = PlotInputs::default();
    let groups = run_groups(root)?;
    if !groups.is_empty() {
        let curves = groups
            .iter()
            .map(|(name, seeds)| aggregate_curves(&group_label(name, seeds), seeds))
            .collect::<Result<Vec<_>>>()?;
        inputs.curves.push((tag.to_string(), curves));
    }

    let mut beta_dirs: Vec<(f64, PathBuf)> = Vec::new();
    for entry in fs::read_dir(root).map_err(|e| Error::io(root, e))? {
        let path = entry.map_err(|e| Error::io(root, e))?.path();
        let beta = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.strip_prefix("beta_"))
            .and_then(|b| b.parse::<f64>().ok());
        if let (Some(b), true) = (beta, path.is_dir()) {
            beta_dirs.push((b, path));
        }
    }
    beta_dirs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut by_form: Vec<(String, Vec<CurveAggregate>)> = Vec::new();
    for (beta, dir) in &beta_dirs {
        for (name, seeds) in run_groups(dir)? {
            let form = privileged_form(&seeds).unwrap_or(name.clone());
            let curve = aggregate_curves(&format!("beta = {beta}"), &seeds)?;
            match by_form.iter_mut().find(|(f, _)| *f == form) {
                Some((_, v)) => v.push(curve),
                None => by_form.push((form, vec![curve])),
            }
        }
    }
    inputs.betas = by_form;

    let mut files = Vec::new();
    find_confusions(root, 4, &mut files)?;
    files.sort();
    for f in files {
        if let Some((variant, mode)) = parse_confusion_name(&f) {
            inputs.confusions.push((variant, mode, ConfusionOutputs::load(&f)?));
        }
    }
    Ok(inputs)
}

/// Draws every figure in `inputs` into `out_dir`, returning the paths.
pub fn emit_plots(inputs: &PlotInputs, out_dir: &Path) -> Result<Vec<PathBuf>> {
    if inputs.is_empty() {
        return Err(Error::MissingInput(
            "nothing to plot: no run directories with eval.jsonl, no beta_* sweeps, no confusion_*.json".into(),
        ));
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    for (tag, curves) in &inputs.curves {
        let path = out_dir.join(curves_file(tag));
        plot_curves(curves, "Mean greedy return (shaded: one standard error)", &path)?;
        written.push(path);
    }
    for (pi, curves) in &inputs.betas {
        let path = out_dir.join(beta_file(pi));
        plot_curves(curves, &format!("PI-D with {} privileged input across beta", pi.to_uppercase()), &path)?;
        written.push(path);
    }
    for (variant, mode, conf) in &inputs.confusions {
        let path = out_dir.join(confusion_file(variant, mode));
        plot_confusion(conf, &format!("{variant}, {mode}: predicted position mass"), &path)?;
        written.push(path);
    }
    Ok(written)
}
