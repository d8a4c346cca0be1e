use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agent::{AgentVariant, NetworkDims, VariantTag};
use crate::env::{LayoutConfig, ObsKind};
use crate::error::{Error, Result};
use crate::eval::{ActivationConfig, ProbeConfig};
use crate::trainer::TrainConfig;

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "PIDROP_OUT";
pub const CONFIG_SNAPSHOT: &str = "config.toml";

pub const DEFAULT_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
pub const DEFAULT_BETAS: [f64; 4] = [0.001, 0.01, 0.1, 1.0];

fn default_out() -> PathBuf {
    std::env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub betas: Vec<f64>,
    /// Privileged input forms swept, one figure each.
    pub pis: Vec<ObsKind>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            betas: DEFAULT_BETAS.to_vec(),
            pis: vec![ObsKind::Fs, ObsKind::Sg],
        }
    }
}

/// Everything one invocation needs. Every key is optional in the file;
/// unknown keys are an error.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub variant: VariantTag,
    /// Regular input; the variant's default when absent.
    pub x: Option<ObsKind>,
    /// Privileged input; the variant's default when absent.
    pub pi: Option<ObsKind>,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    /// Oracle checkpoint used as the DIS teacher.
    pub teacher: Option<PathBuf>,
    pub layout: LayoutConfig,
    pub train: TrainConfig,
    pub network: NetworkDims,
    pub sweep: SweepConfig,
    pub probe: ProbeConfig,
    pub activations: ActivationConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            variant: VariantTag::PiD,
            x: None,
            pi: None,
            seeds: DEFAULT_SEEDS.to_vec(),
            out: default_out(),
            teacher: None,
            layout: LayoutConfig::default(),
            train: TrainConfig::default(),
            network: NetworkDims::default(),
            sweep: SweepConfig::default(),
            probe: ProbeConfig::default(),
            activations: ActivationConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn agent_variant(&self) -> Result<AgentVariant> {
        AgentVariant::new(
            self.variant,
            self.x.unwrap_or(self.variant.default_x()),
            self.pi.or(self.variant.default_pi()),
        )
    }

    /// Same configuration with every defaulted choice written out, after
    /// validation. Resolving twice changes nothing.
    pub fn resolved(&self) -> Result<Self> {
        let v = self.agent_variant()?;
        let mut r = self.clone();
        r.x = Some(v.x_kind);
        r.pi = v.pi_kind;
        if r.seeds.is_empty() {
            return Err(Error::Config("seed list is empty".into()));
        }
        crate::env::GridLayout::build(&r.layout)?;
        r.train.validate(r.layout.max_steps)?;
        Ok(r)
    }

    /// `<out>/<run name>/<seed>`
    pub fn run_dir(&self, seed: u64) -> Result<PathBuf> {
        Ok(self.out.join(self.agent_variant()?.run_name()).join(seed.to_string()))
    }

    /// Writes the snapshot for a run with this single `seed`.
    pub fn write_snapshot(&self, dir: &Path, seed: u64) -> Result<()> {
        let mut snap = self.resolved()?;
        snap.seeds = vec![seed];
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(CONFIG_SNAPSHOT);
        fs::write(&path, snap.to_toml()?).map_err(|e| Error::io(path, e))
    }
}

/// Directory name of one sweep value, e.g. `beta_0.01`.
pub fn beta_dir_name(beta: f64) -> String {
    format!("beta_{beta}")
}
