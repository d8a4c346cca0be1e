use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use super::config::{beta_dir_name, ExperimentConfig};
use super::report::{collect_plot_inputs, emit_plots};
use crate::agent::{load_checkpoint, AgentNetwork, VariantTag};
use crate::env::{GridLayout, ObsKind};
use crate::error::{Error, Result};
use crate::eval::{
    collect_activations, confusion_outputs, evaluate_greedy, save_dataset, train_linear_probe, ActivationDataset,
    CollectionMode,
};
use crate::trainer::{train_run, EvalRecord, RunSpec};

#[derive(Debug, Parser)]
#[command(name = "pidrop", version, about = "Recurrent Q-learning agents in a three-room gridworld")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one variant for every seed in the list.
    Train(TrainArgs),
    /// Greedy evaluation of a checkpoint from every start cell.
    Eval(EvalArgs),
    /// Collect hidden states from a checkpoint and fit a position probe.
    Probe(ProbeArgs),
    /// Draw learning curves, beta sweeps and confusion heatmaps.
    Plot(PlotArgs),
    /// PI-D over a grid of beta values and privileged forms.
    Sweep(SweepArgs),
}

fn parse_variant(s: &str) -> std::result::Result<VariantTag, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_obs(s: &str) -> std::result::Result<ObsKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Collection modes selected by `--mode`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProbeModes(pub Vec<CollectionMode>);

fn parse_mode(s: &str) -> std::result::Result<ProbeModes, String> {
    if s.eq_ignore_ascii_case("both") {
        return Ok(ProbeModes(vec![CollectionMode::TestTime, CollectionMode::TrainTime]));
    }
    s.parse().map(|m| ProbeModes(vec![m])).map_err(|e: Error| e.to_string())
}

/// Flags shared by `train` and `sweep`. Each overrides the config file.
#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// TOML config file; absent keys take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Regular input: ego5, fs or sg.
    #[arg(long, value_parser = parse_obs)]
    pub x: Option<ObsKind>,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',')]
    pub seed: Option<Vec<u64>>,
    #[arg(long)]
    pub episodes: Option<usize>,
    #[arg(long)]
    pub eval_every: Option<usize>,
    /// Output root [default: $PIDROP_OUT or ./runs].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// No progress lines on stderr.
    #[arg(long, short)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// drqn, oracle, pi_d, aux, dis, nd or i_d.
    #[arg(long, value_parser = parse_variant)]
    pub variant: Option<VariantTag>,
    /// Privileged input: fs or sg.
    #[arg(long, value_parser = parse_obs)]
    pub pi: Option<ObsKind>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Oracle checkpoint used as the DIS teacher.
    #[arg(long)]
    pub teacher: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Print the full report as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// test_time, train_time or both.
    #[arg(long, default_value = "test_time", value_parser = parse_mode)]
    pub mode: ProbeModes,
    /// Directory for datasets, probe reports and confusion matrices
    /// [default: <out>/probe].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Config file supplying the `[probe]` and `[activations]` tables.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Directory holding run groups, beta_* sweeps and confusion files
    /// [default: $PIDROP_OUT or ./runs].
    #[arg(long)]
    pub root: Option<PathBuf>,
    /// Figure directory [default: <root>/plots].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Suffix of the learning-curve figure name.
    #[arg(long, default_value = "main")]
    pub tag: String,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Comma-separated beta values.
    #[arg(long, value_delimiter = ',')]
    pub betas: Option<Vec<f64>>,
    /// Comma-separated privileged forms.
    #[arg(long, value_delimiter = ',', value_parser = parse_obs)]
    pub pis: Option<Vec<ObsKind>>,
}

fn base_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::default()),
    }
}

fn apply_run_args(cfg: &mut ExperimentConfig, a: &RunArgs) {
    if let Some(x) = a.x {
        cfg.x = Some(x);
    }
    if let Some(s) = &a.seed {
        cfg.seeds = s.clone();
    }
    if let Some(e) = a.episodes {
        cfg.train.total_episodes = e;
    }
    if let Some(e) = a.eval_every {
        cfg.train.eval_every = e;
    }
    if let Some(o) = &a.out {
        cfg.out = o.clone();
    }
}

/// Config file, then flags on top, then validation.
pub fn train_config(args: &TrainArgs) -> Result<ExperimentConfig> {
    let mut cfg = base_config(args.run.config.as_deref())?;
    apply_run_args(&mut cfg, &args.run);
    if let Some(v) = args.variant {
        // A new variant invalidates inputs chosen for the old one.
        if v != cfg.variant && args.run.x.is_none() {
            cfg.x = None;
        }
        if v != cfg.variant {
            cfg.pi = None;
        }
        cfg.variant = v;
    }
    if let Some(pi) = args.pi {
        cfg.pi = Some(pi);
    }
    if let Some(b) = args.beta {
        cfg.train.beta = b;
    }
    if let Some(t) = &args.teacher {
        cfg.teacher = Some(t.clone());
    }
    cfg.resolved()
}

fn load_teacher(cfg: &ExperimentConfig) -> Result<Option<AgentNetwork>> {
    if cfg.variant != VariantTag::Dis {
        return Ok(None);
    }
    let path = cfg.teacher.as_ref().ok_or_else(|| {
        Error::MissingInput("dis needs a trained oracle checkpoint: pass --teacher <path> or set `teacher`".into())
    })?;
    if !path.is_file() {
        return Err(Error::MissingInput(format!("teacher checkpoint {} does not exist", path.display())));
    }
    let ckpt = load_checkpoint(path)?;
    if ckpt.layout != cfg.layout {
        return Err(Error::Config(format!(
            "teacher checkpoint {} was trained on a different layout",
            path.display()
        )));
    }
    Ok(Some(ckpt.network))
}

fn clear_stale_checkpoints(dir: &Path) -> Result<()> {
    let Ok(entries) = fs::read_dir(dir) else {
        return Ok(());
    };
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with("ckpt_")) {
            fs::remove_file(&path).map_err(|e| Error::io(&path, e))?;
        }
    }
    Ok(())
}

/// Trains `cfg` (already resolved) for each of its seeds, writing each run
/// under `cfg.run_dir(seed)`. Returns the run directories.
pub fn run_seeds(cfg: &ExperimentConfig, quiet: bool) -> Result<Vec<PathBuf>> {
    let teacher = load_teacher(cfg)?;
    let variant = cfg.agent_variant()?;
    let mut dirs = Vec::new();
    for &seed in &cfg.seeds {
        let dir = cfg.run_dir(seed)?;
        clear_stale_checkpoints(&dir)?;
        cfg.write_snapshot(&dir, seed)?;
        let label = format!("{} seed {seed}", variant.label());
        let mut progress = |e: &EvalRecord| {
            if !quiet {
                eprintln!(
                    "{label}: episode {:>6}  mean return {:>7.3}  success {:>5.1}%",
                    e.episode,
                    e.mean_return,
                    100.0 * e.success_rate
                );
            }
        };
        let out = train_run(
            RunSpec {
                layout: &cfg.layout,
                train: &cfg.train,
                variant,
                dims: cfg.network,
                seed,
                teacher: teacher.as_ref(),
                out_dir: Some(&dir),
            },
            Some(&mut progress),
        )?;
        if let Some(last) = out.metrics.evals.last() {
            println!(
                "{}: episodes {} mean_return {:.4} success_rate {:.4}",
                dir.display(),
                last.episode,
                last.mean_return,
                last.success_rate
            );
        }
        dirs.push(dir);
    }
    Ok(dirs)
}

fn cmd_train(args: &TrainArgs) -> Result<()> {
    let cfg = train_config(args)?;
    run_seeds(&cfg, args.run.quiet).map(|_| ())
}

/// Resolved configs of every run in a sweep, in execution order.
pub fn sweep_configs(args: &SweepArgs) -> Result<Vec<ExperimentConfig>> {
    let mut base = base_config(args.run.config.as_deref())?;
    apply_run_args(&mut base, &args.run);
    base.variant = VariantTag::PiD;
    if let Some(b) = &args.betas {
        base.sweep.betas = b.clone();
    }
    if let Some(p) = &args.pis {
        base.sweep.pis = p.clone();
    }
    if base.sweep.betas.is_empty() || base.sweep.pis.is_empty() {
        return Err(Error::Config("sweep needs at least one beta and one privileged form".into()));
    }
    let root = base.out.clone();
    let mut out = Vec::new();
    for &pi in &base.sweep.pis {
        for &beta in &base.sweep.betas {
            let mut cfg = base.clone();
            cfg.pi = Some(pi);
            cfg.train.beta = beta;
            cfg.out = root.join(beta_dir_name(beta));
            out.push(cfg.resolved()?);
        }
    }
    Ok(out)
}

fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    for cfg in sweep_configs(args)? {
        run_seeds(&cfg, args.run.quiet)?;
    }
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let ckpt = load_checkpoint(&args.checkpoint)?;
    let layout = GridLayout::build(&ckpt.layout)?;
    let report = evaluate_greedy(&ckpt.network, &layout)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        println!(
            "{} after {} episodes: mean_return {:.4} success_rate {:.4} over {} starts",
            ckpt.network.variant.label(),
            ckpt.episode,
            report.mean_return,
            report.success_rate,
            report.per_start.len()
        );
    }
    Ok(())
}

/// Contents of `probe_<name>_<mode>.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub name: String,
    pub variant: String,
    pub mode: CollectionMode,
    pub checkpoint_episode: usize,
    pub rows: usize,
    pub classes: usize,
    pub train_rows: usize,
    pub held_out_rows: usize,
    pub weighted_accuracy: f64,
    pub accuracy: f64,
    /// Mean predicted mass inside the true room, held-out rows.
    pub room_identification: f64,
}

/// `<variant run name>_s<seed>` when the checkpoint sits in a seed
/// directory, else the run name alone.
pub fn probe_name(checkpoint: &Path, net: &AgentNetwork) -> String {
    let run = net.variant.run_name();
    let seed = checkpoint
        .parent()
        .and_then(|d| d.file_name())
        .and_then(|n| n.to_str())
        .and_then(|n| n.parse::<u64>().ok());
    match seed {
        Some(s) => format!("{run}_s{s}"),
        None => run,
    }
}

fn cmd_probe(args: &ProbeArgs) -> Result<()> {
    let cfg = base_config(args.config.as_deref())?;
    let ckpt = load_checkpoint(&args.checkpoint)?;
    let layout = GridLayout::build(&ckpt.layout)?;
    let net = &ckpt.network;
    let name = probe_name(&args.checkpoint, net);
    let out_dir = args.out.clone().unwrap_or_else(|| cfg.out.join("probe"));
    fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
    let classes = layout.floor_cells().len();
    for &mode in &args.mode.0 {
        let data = collect_activations(net, &layout, mode, &cfg.activations)?;
        let stem = format!("{name}_{}", mode.name());
        save_dataset(&out_dir.join(format!("activations_{stem}.bin")), &data, &layout)?;
        let probe = train_linear_probe(&data, classes, &cfg.probe)?;
        let held = &probe.held_out_indices;
        let mut features = Vec::with_capacity(held.len() * data.width);
        for &i in held {
            features.extend_from_slice(data.row(i));
        }
        let labels = held.iter().map(|&i| data.labels[i]).collect();
        let held_data = ActivationDataset::new(mode, data.width, features, labels)?;
        let conf = confusion_outputs(&probe.model, &held_data, &layout)?;
        conf.save(&out_dir.join(format!("confusion_{stem}.json")))?;
        let report = ProbeReport {
            name: name.clone(),
            variant: net.variant.label(),
            mode,
            checkpoint_episode: ckpt.episode,
            rows: data.rows(),
            classes,
            train_rows: probe.train_rows,
            held_out_rows: probe.held_out_rows,
            weighted_accuracy: probe.weighted_accuracy,
            accuracy: probe.accuracy,
            room_identification: conf.room_identification(),
        };
        let path = out_dir.join(format!("probe_{stem}.json"));
        let mut f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::to_writer_pretty(&mut f, &report)?;
        f.write_all(b"\n").map_err(|e| Error::io(&path, e))?;
        println!(
            "{stem}: weighted accuracy {:.4}, room identification {:.4} ({} rows)",
            report.weighted_accuracy, report.room_identification, report.rows
        );
    }
    Ok(())
}

fn cmd_plot(args: &PlotArgs) -> Result<()> {
    let root = args.root.clone().unwrap_or_else(|| ExperimentConfig::default().out);
    if !root.is_dir() {
        return Err(Error::MissingInput(format!("plot root {} is not a directory", root.display())));
    }
    let out = args.out.clone().unwrap_or_else(|| root.join("plots"));
    let inputs = collect_plot_inputs(&root, &args.tag)?;
    for path in emit_plots(&inputs, &out)? {
        println!("{}", path.display());
    }
    Ok(())
}

pub fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Probe(a) => cmd_probe(a),
        Command::Plot(a) => cmd_plot(a),
        Command::Sweep(a) => cmd_sweep(a),
    }
}

/// Parses `argv` (program name first) and runs the subcommand. Usage errors
/// exit with 2, run failures with 1.
pub fn run_experiment<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
