//! Config files, run orchestration over seeds and beta values, curve
//! aggregation, figures, and the `pidrop` command line.
//!
//! Layout of an output root:
//!
//! ```text
//! <out>/<run name>/<seed>/{config.toml, metrics.jsonl, eval.jsonl, ckpt_<episode>}
//! <out>/beta_<b>/<run name>/<seed>/...      (sweep)
//! <out>/probe/{activations,probe,confusion}_<name>_<mode>.*
//! <out>/plots/{curves_<tag>, beta_<pi>, confusion_<name>_<mode>}.svg
//! ```

mod aggregate;
mod cli;
mod config;
mod plots;
mod report;

use std::fs;
use std::path::Path;

pub use aggregate::{aggregate_curves, aggregate_series, late_mean_return, mean_se, run_groups, seed_dirs, CurveAggregate};
pub use cli::{
    dispatch, probe_name, run_experiment, ProbeModes, run_seeds, sweep_configs, train_config, Cli, Command, ProbeReport,
};
pub use config::{
    beta_dir_name, ExperimentConfig, SweepConfig, CONFIG_SNAPSHOT, DEFAULT_BETAS, DEFAULT_SEEDS, OUT_ENV,
};
pub use plots::{beta_file, confusion_color, confusion_file, curves_file, plot_confusion, plot_curves, ZERO_MASS};
pub use report::{collect_plot_inputs, emit_plots, parse_confusion_name, PlotInputs};

use crate::error::{Error, Result};
use crate::trainer::{EVAL_FILE, METRICS_FILE};

/// Checks that a run directory holds the config snapshot, both record
/// files, at least one checkpoint, and nothing else.
pub fn check_run_manifest(dir: &Path) -> Result<()> {
    let mut seen = [false; 3];
    let mut checkpoints = 0;
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        match name.as_str() {
            CONFIG_SNAPSHOT => seen[0] = true,
            METRICS_FILE => seen[1] = true,
            EVAL_FILE => seen[2] = true,
            n if n.strip_prefix("ckpt_").is_some_and(|e| e.parse::<usize>().is_ok()) => checkpoints += 1,
            _ => return Err(Error::Value(format!("unexpected entry {name} in {}", dir.display()))),
        }
    }
    if seen.contains(&false) || checkpoints == 0 {
        return Err(Error::Value(format!("{} is missing part of a run", dir.display())));
    }
    Ok(())
}
