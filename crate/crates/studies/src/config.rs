use std::path::{Path, PathBuf};

use rbmlab_core::{preset, Confinement, Drift, InitialLaw, Kernel, ModelSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, StudyError};

/// Interaction kernel of a custom model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelConfig {
    Zero,
    Linear(f64),
    Sine(f64),
    Tanh(f64),
}

/// One-dimensional model with polynomial drift `sum_m drift[m] x^m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomModel {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub drift: Vec<f64>,
    pub kernel: KernelConfig,
    pub sigma: f64,
    /// Required unless the drift is affine.
    #[serde(default)]
    pub confinement: Option<Confinement<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelConfig {
    Preset(String),
    Custom(CustomModel),
}

impl ModelConfig {
    pub fn build(&self) -> Result<ModelSpec<f64>> {
        match self {
            ModelConfig::Preset(name) => Ok(preset(name)?),
            ModelConfig::Custom(c) => {
                let (kernel, lip) = match c.kernel {
                    KernelConfig::Zero => (Kernel::Zero, 0.0),
                    KernelConfig::Linear(s) => (Kernel::Linear(s), s.abs()),
                    KernelConfig::Sine(s) => (Kernel::Sine(s), s.abs()),
                    KernelConfig::Tanh(s) => (Kernel::Tanh(s), s.abs()),
                };
                let confinement = match c.confinement {
                    Some(conf) => conf,
                    None if c.drift.len() <= 2 => {
                        let slope = c.drift.get(1).copied().unwrap_or(0.0);
                        if -slope > 2.0 * lip {
                            Confinement::Strong(-slope)
                        } else {
                            Confinement::OneSided(slope)
                        }
                    }
                    None => {
                        return Err(StudyError::Config(
                            "a non-affine drift needs an explicit confinement".into(),
                        ))
                    }
                };
                let drift = if c.drift.iter().all(|&a| a == 0.0) {
                    Drift::Zero
                } else {
                    Drift::Polynomial(c.drift.clone())
                };
                let m = ModelSpec::new(1, drift, kernel, c.sigma, confinement, lip)?;
                Ok(m.with_name(c.name.clone().unwrap_or_else(|| "custom".into())))
            }
        }
    }
}

/// Study-specific knobs; each study documents the ones it reads.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyOptions {
    /// Acceptance window for the main fitted slope.
    #[serde(default)]
    pub slope_min: Option<f64>,
    #[serde(default)]
    pub slope_max: Option<f64>,
    /// Number of divisions for clean-particle estimates.
    #[serde(default)]
    pub k: Option<usize>,
    /// Reference grid `[-half_width, half_width]` with `n_cells` cells.
    #[serde(default)]
    pub half_width: Option<f64>,
    #[serde(default)]
    pub n_cells: Option<usize>,
    /// Batch sizes for the batch-force study.
    #[serde(default)]
    pub p_list: Option<Vec<usize>>,
    /// Snapshots pooled per invariant-measure sample.
    #[serde(default)]
    pub snapshots: Option<usize>,
    /// Offset of the second initial law in the contraction study.
    #[serde(default)]
    pub shift: Option<f64>,
    /// Replicates for clean-particle Monte Carlo.
    #[serde(default)]
    pub replicates: Option<u64>,
}

fn default_initial() -> InitialLaw<f64> {
    InitialLaw::gaussian(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub study: String,
    pub model: ModelConfig,
    #[serde(default = "default_initial")]
    pub initial: InitialLaw<f64>,
    pub n_list: Vec<usize>,
    pub tau_list: Vec<f64>,
    pub p: usize,
    pub t_final: f64,
    pub m: usize,
    pub n_substeps: usize,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub options: StudyOptions,
}

impl StudyConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(StudyError::Config(m.into()));
        if self.n_list.is_empty() || self.tau_list.is_empty() || self.seeds.is_empty() {
            return bad("N list, tau list and seeds must be non-empty");
        }
        if self.tau_list.iter().any(|&t| !(t > 0.0) || !t.is_finite()) {
            return bad("every tau must be positive");
        }
        let max_tau = self.tau_list.iter().copied().fold(0.0, f64::max);
        if !(self.t_final >= max_tau) {
            return bad("T must be at least the largest tau");
        }
        if self.p < 2 {
            return bad("p must be at least 2");
        }
        if self.m == 0 || self.n_substeps == 0 || self.n_list.contains(&0) {
            return bad("M, N and n_substeps must be positive");
        }
        self.initial.validate()?;
        self.model.build()?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON serialization.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn slope_window(&self, default: (f64, f64)) -> (f64, f64) {
        (
            self.options.slope_min.unwrap_or(default.0),
            self.options.slope_max.unwrap_or(default.1),
        )
    }
}
