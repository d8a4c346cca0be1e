use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::env::ObsKind;
use crate::error::{Error, Result};

/// The agent families under comparison.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VariantTag {
    /// Recurrent Q-network on the regular input only.
    #[serde(rename = "drqn")]
    Drqn,
    /// Recurrent Q-network given the full state as its regular input.
    #[serde(rename = "oracle")]
    Oracle,
    /// Privileged input drives the noise scale on the regular embedding.
    #[serde(rename = "pi_d")]
    PiD,
    /// Decoder on the recurrent state reconstructs the full state.
    #[serde(rename = "aux")]
    Aux,
    /// Student regressed onto a frozen oracle teacher's Q-values.
    #[serde(rename = "dis")]
    Dis,
    /// Privileged features concatenated and removed by an annealed mask.
    #[serde(rename = "nd")]
    Nd,
    /// Information dropout whose noise scale is read from the regular input.
    #[serde(rename = "i_d")]
    ID,
}

impl VariantTag {
    pub const ALL: [VariantTag; 7] = [
        VariantTag::Drqn,
        VariantTag::Oracle,
        VariantTag::PiD,
        VariantTag::Aux,
        VariantTag::Dis,
        VariantTag::Nd,
        VariantTag::ID,
    ];

    pub fn slug(self) -> &'static str {
        match self {
            VariantTag::Drqn => "drqn",
            VariantTag::Oracle => "oracle",
            VariantTag::PiD => "pi_d",
            VariantTag::Aux => "aux",
            VariantTag::Dis => "dis",
            VariantTag::Nd => "nd",
            VariantTag::ID => "i_d",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            VariantTag::Drqn | VariantTag::Oracle => "DRQN",
            VariantTag::PiD => "PI-D",
            VariantTag::Aux => "AUX",
            VariantTag::Dis => "DIS",
            VariantTag::Nd => "ND",
            VariantTag::ID => "I-D",
        }
    }

    /// Regular input when none is given explicitly.
    pub fn default_x(self) -> ObsKind {
        match self {
            VariantTag::Oracle => ObsKind::Fs,
            _ => ObsKind::Ego5,
        }
    }

    /// Privileged input when none is given explicitly.
    pub fn default_pi(self) -> Option<ObsKind> {
        match self {
            VariantTag::PiD | VariantTag::Nd => Some(ObsKind::Fs),
            _ => None,
        }
    }
}

impl fmt::Display for VariantTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl FromStr for VariantTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace('-', "_");
        VariantTag::ALL
            .into_iter()
            .find(|t| t.slug() == norm || t.slug().replace('_', "") == norm)
            .ok_or_else(|| {
                Error::Variant(format!(
                    "unknown variant `{s}` (expected one of drqn, oracle, pi_d, aux, dis, nd, i_d)"
                ))
            })
    }
}

/// A validated (tag, regular input, privileged input) combination.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AgentVariant {
    pub tag: VariantTag,
    pub x_kind: ObsKind,
    pub pi_kind: Option<ObsKind>,
}

impl AgentVariant {
    pub fn new(tag: VariantTag, x_kind: ObsKind, pi_kind: Option<ObsKind>) -> Result<Self> {
        let v = Self { tag, x_kind, pi_kind };
        v.validate()?;
        Ok(v)
    }

    /// The tag with its default inputs.
    pub fn standard(tag: VariantTag) -> Self {
        Self {
            tag,
            x_kind: tag.default_x(),
            pi_kind: tag.default_pi(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let err = |msg: &str| Err(Error::Variant(format!("{}: {msg}", self.label())));
        match self.tag {
            VariantTag::Oracle => {
                if self.pi_kind.is_some() {
                    return err("the oracle takes no privileged input");
                }
                if self.x_kind != ObsKind::Fs {
                    return err("the oracle's regular input is the full state");
                }
            }
            VariantTag::ID => {
                if self.pi_kind.is_some() {
                    return err("information dropout reads its noise scale from x, not from privileged input");
                }
            }
            VariantTag::PiD | VariantTag::Nd => {
                if self.pi_kind.is_none() {
                    return err("needs a privileged input (fs or sg)");
                }
            }
            VariantTag::Drqn | VariantTag::Aux | VariantTag::Dis => {
                if self.pi_kind.is_some() {
                    return err("does not take privileged input");
                }
            }
        }
        Ok(())
    }

    /// Input kind feeding the secondary encoder, if any.
    pub fn branch_input(&self) -> Option<ObsKind> {
        match self.tag {
            VariantTag::PiD | VariantTag::Nd => self.pi_kind,
            VariantTag::ID => Some(self.x_kind),
            _ => None,
        }
    }

    /// Whether train-mode forwards need the privileged grid supplied.
    pub fn needs_pi_in_training(&self) -> bool {
        self.pi_kind.is_some()
    }

    pub fn has_variance_head(&self) -> bool {
        matches!(self.tag, VariantTag::PiD | VariantTag::ID)
    }

    /// Name in the `NAME[x,x*]` notation, e.g. `PI-D[5x5,FS]`.
    pub fn label(&self) -> String {
        let obs = |k: ObsKind| match k {
            ObsKind::Ego5 => "5x5",
            ObsKind::Fs => "FS",
            ObsKind::Sg => "SG",
        };
        let second = match self.tag {
            VariantTag::ID => obs(self.x_kind).to_string(),
            _ => self.pi_kind.map_or("-".to_string(), |k| obs(k).to_string()),
        };
        format!("{}[{},{}]", self.tag.display_name(), obs(self.x_kind), second)
    }

    /// Directory-safe name: the tag slug, suffixed with any non-default
    /// input kinds (`pi_d`, `pi_d_sg`, `drqn_xfs`).
    pub fn run_name(&self) -> String {
        let mut name = self.tag.slug().to_string();
        if self.pi_kind != self.tag.default_pi() {
            if let Some(pi) = self.pi_kind {
                name.push('_');
                name.push_str(pi.name());
            }
        }
        if self.x_kind != self.tag.default_x() {
            name.push_str("_x");
            name.push_str(self.x_kind.name());
        }
        name
    }
}

impl fmt::Display for AgentVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}
