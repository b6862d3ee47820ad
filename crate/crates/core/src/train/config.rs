use crate::basis::BasisSpec;
use crate::error::{Error, Result};
use crate::graph::GraphMatrixKind;
use crate::ops::DropoutRates;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelVariant {
    Full,
    Cp,
    Tucker,
    Tucker1,
    Tucker2,
    ScalarFixedGcn,
    ScalarFixedAppnp,
    ScalarLearned,
    ScalarChebii,
    PerOutput,
    PerInput,
}

impl ModelVariant {
    pub const ALL: [ModelVariant; 11] = [
        ModelVariant::Full,
        ModelVariant::Cp,
        ModelVariant::Tucker,
        ModelVariant::Tucker1,
        ModelVariant::Tucker2,
        ModelVariant::ScalarFixedGcn,
        ModelVariant::ScalarFixedAppnp,
        ModelVariant::ScalarLearned,
        ModelVariant::ScalarChebii,
        ModelVariant::PerOutput,
        ModelVariant::PerInput,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ModelVariant::Full => "full",
            ModelVariant::Cp => "cp",
            ModelVariant::Tucker => "tucker",
            ModelVariant::Tucker1 => "tucker1",
            ModelVariant::Tucker2 => "tucker2",
            ModelVariant::ScalarFixedGcn => "scalar-fixed-gcn",
            ModelVariant::ScalarFixedAppnp => "scalar-fixed-appnp",
            ModelVariant::ScalarLearned => "scalar-learned",
            ModelVariant::ScalarChebii => "scalar-chebii",
            ModelVariant::PerOutput => "per-output",
            ModelVariant::PerInput => "per-input",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.name() == name)
            .ok_or_else(|| Error::param(format!("unknown model variant '{name}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Architecture {
    /// Features go straight into the spectral layer.
    Linear,
    /// Dense layer and ReLU before the spectral layer.
    Hybrid,
}

impl Architecture {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "linear" => Ok(Architecture::Linear),
            "hybrid" => Ok(Architecture::Hybrid),
            other => Err(Error::param(format!("unknown architecture '{other}'"))),
        }
    }
}

/// How bias vectors are initialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BiasInit {
    /// Uniform with the owning layer's fan-in, like the weights.
    #[default]
    Uniform,
    Zero,
}

impl BiasInit {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "uniform" => Ok(BiasInit::Uniform),
            "zero" => Ok(BiasInit::Zero),
            other => Err(Error::param(format!("unknown bias init '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ranks {
    /// CP rank, and the M-mode rank of Tucker.
    pub r: usize,
    pub p_dim: usize,
    pub q: usize,
}

impl Default for Ranks {
    fn default() -> Self {
        Ranks { r: 32, p_dim: 32, q: 32 }
    }
}

/// Parameter groups; each has its own learning rate and weight decay.
pub const GROUPS: [&str; 8] = ["feat", "C", "G", "P", "M", "W", "alpha", "basis"];

/// A default value with per-group overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupValues {
    pub default: f64,
    #[serde(default)]
    pub overrides: BTreeMap<String, f64>,
}

impl GroupValues {
    pub fn uniform(default: f64) -> Self {
        GroupValues { default, overrides: BTreeMap::new() }
    }

    pub fn get(&self, group: &str) -> f64 {
        self.overrides.get(group).copied().unwrap_or(self.default)
    }

    pub fn set(&mut self, group: &str, value: f64) -> Result<()> {
        if !GROUPS.contains(&group) {
            return Err(Error::param(format!("unknown parameter group '{group}'")));
        }
        self.overrides.insert(group.to_string(), value);
        Ok(())
    }

    fn values(&self) -> impl Iterator<Item = f64> + '_ {
        std::iter::once(self.default).chain(self.overrides.values().copied())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub variant: ModelVariant,
    pub architecture: Architecture,
    pub basis: BasisSpec,
    pub graph_matrix: GraphMatrixKind,
    #[serde(rename = "K")]
    pub k: usize,
    pub ranks: Ranks,
    pub hidden_dim: usize,
    pub learning_rate: GroupValues,
    pub weight_decay: GroupValues,
    pub dropout: DropoutRates,
    pub epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub teleport: f64,
    /// Per-output variant propagates its bias with the signal.
    pub strict_per_output: bool,
    pub row_normalize: bool,
    #[serde(default)]
    pub bias_init: BiasInit,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            variant: ModelVariant::Cp,
            architecture: Architecture::Linear,
            basis: BasisSpec::jacobi_default(),
            graph_matrix: GraphMatrixKind::AdjNorm,
            k: 10,
            ranks: Ranks::default(),
            hidden_dim: 64,
            learning_rate: GroupValues::uniform(0.01),
            weight_decay: GroupValues::uniform(0.0),
            dropout: DropoutRates::default(),
            epochs: 1000,
            patience: 200,
            seed: 0,
            teleport: 0.1,
            strict_per_output: false,
            row_normalize: false,
            bias_init: BiasInit::Uniform,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.dropout.validate()?;
        if self.epochs == 0 || self.patience == 0 {
            return Err(Error::param("epochs and patience must be at least 1"));
        }
        if self.learning_rate.values().any(|v| !(v >= 0.0 && v.is_finite())) {
            return Err(Error::param("learning rates must be finite and non-negative"));
        }
        if self.weight_decay.values().any(|v| !(v >= 0.0 && v.is_finite())) {
            return Err(Error::param("weight decay must be finite and non-negative"));
        }
        for key in self.learning_rate.overrides.keys().chain(self.weight_decay.overrides.keys()) {
            if !GROUPS.contains(&key.as_str()) {
                return Err(Error::param(format!("unknown parameter group '{key}'")));
            }
        }
        if self.ranks.r == 0 || self.ranks.p_dim == 0 || self.ranks.q == 0 {
            return Err(Error::param("ranks must be positive"));
        }
        if self.architecture == Architecture::Hybrid && self.hidden_dim == 0 {
            return Err(Error::param("hybrid architecture needs hidden_dim >= 1"));
        }
        if self.variant == ModelVariant::ScalarFixedGcn && self.k == 0 {
            return Err(Error::param("scalar-fixed-gcn needs K >= 1"));
        }
        if self.variant == ModelVariant::ScalarFixedAppnp && !(self.teleport > 0.0 && self.teleport <= 1.0) {
            return Err(Error::param(format!("teleport {} outside (0, 1]", self.teleport)));
        }
        self.basis.validate(self.k)
    }
}
