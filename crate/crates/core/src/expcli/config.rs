use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cellpde::DiscountedSolveConfig;
use crate::error::{Error, Result};
use crate::hamiltonian::schema::ProblemDoc;

/// Environment variable that overrides the configured seed (the `--seed` flag wins over both).
pub const SEED_ENV: &str = "HJ_HOMOG_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Hbar,
    PeriodicSweep,
    RandomSweep,
    Weakkam,
    ChiInfty,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::Hbar => "hbar",
            ExperimentKind::PeriodicSweep => "periodic-sweep",
            ExperimentKind::RandomSweep => "random-sweep",
            ExperimentKind::Weakkam => "weakkam",
            ExperimentKind::ChiInfty => "chi-infty",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeakKamParams {
    pub x0: Vec<f64>,
    pub horizon: f64,
    pub step: f64,
    pub bins: usize,
    /// Keep every `stride`-th trajectory sample in the dump.
    pub stride: usize,
    /// Horizon of the value-identity check.
    pub identity_horizon: f64,
}

impl Default for WeakKamParams {
    fn default() -> Self {
        Self {
            x0: Vec::new(),
            horizon: 1000.0,
            step: 1e-3,
            bins: 128,
            stride: 100,
            identity_horizon: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChiInftyParams {
    pub r_large: Vec<u64>,
    /// Far-field threshold on `⟨x, ê⟩`.
    pub far_k: f64,
    pub k_eps: Vec<f64>,
}

impl Default for ChiInftyParams {
    fn default() -> Self {
        Self {
            r_large: vec![8],
            far_k: 2.0,
            k_eps: vec![1.0, 2.0, 3.0],
        }
    }
}

fn default_grid_n() -> u64 {
    256
}
fn default_samples() -> usize {
    64
}
fn default_torus_n() -> usize {
    2000
}
fn default_panels() -> usize {
    64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemDoc,
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub r_values: Vec<u64>,
    #[serde(default)]
    pub eta_values: Vec<f64>,
    /// Grid nodes per unit length.
    #[serde(default = "default_grid_n")]
    pub grid_n: u64,
    #[serde(default)]
    pub solver: DiscountedSolveConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_torus_n")]
    pub torus_n: usize,
    /// Window for the grid Monte Carlo estimate; the grid estimate is skipped when absent.
    #[serde(default)]
    pub mc_grid_window: Option<u64>,
    #[serde(default = "default_panels")]
    pub quadrature_panels: usize,
    #[serde(default)]
    pub weakkam: WeakKamParams,
    #[serde(default)]
    pub chi_infty: ChiInftyParams,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(format!("experiment config: {e}")))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn dim(&self) -> usize {
        self.problem.pbar.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(1..=2).contains(&self.dim()) {
            return bad(format!("dimension must be 1 or 2, got {}", self.dim()));
        }
        self.problem.hamiltonian()?;
        self.problem.bump()?;
        self.solver.validate()?;
        if self.grid_n < 4 {
            return bad("grid_n must be at least 4".into());
        }
        match self.experiment {
            ExperimentKind::PeriodicSweep => {
                if self.r_values.is_empty() {
                    return bad("periodic-sweep needs a nonempty r_values list".into());
                }
                if let Some(r) = self.r_values.iter().find(|r| **r < 2) {
                    return bad(format!("R values must be integers >= 2, got {r}"));
                }
            }
            ExperimentKind::RandomSweep => {
                if self.eta_values.is_empty() {
                    return bad("random-sweep needs a nonempty eta_values list".into());
                }
                // 0 is accepted as a sentinel row
                if let Some(e) = self.eta_values.iter().find(|e| !(**e >= 0.0 && **e < 1.0)) {
                    return bad(format!("eta values must lie in (0, 1), got {e}"));
                }
                if self.samples < 2 {
                    return bad("samples must be at least 2".into());
                }
                if self.torus_n == 0 {
                    return bad("torus_n must be positive".into());
                }
            }
            ExperimentKind::Weakkam => {
                let w = &self.weakkam;
                if !w.x0.is_empty() && w.x0.len() != self.dim() {
                    return bad("weakkam.x0 has the wrong dimension".into());
                }
                if !(w.horizon >= 0.0 && w.step > 0.0 && w.bins > 0 && w.stride > 0) {
                    return bad("weakkam needs horizon >= 0, step > 0, bins > 0, stride > 0".into());
                }
            }
            ExperimentKind::ChiInfty => {
                if self.dim() != 2 {
                    return bad("chi-infty needs d = 2".into());
                }
                if self.chi_infty.r_large.is_empty() {
                    return bad("chi_infty.r_large must be nonempty".into());
                }
            }
            ExperimentKind::Hbar => {}
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON of this configuration.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// `--seed` beats `HJ_HOMOG_SEED`, which beats the config file.
pub fn resolve_seed(config_seed: u64, env: Option<&str>, flag: Option<u64>) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match env {
        Some(v) => v.trim().parse().map_err(|_| Error::Config(format!("{SEED_ENV} must be a u64, got {v:?}"))),
        None => Ok(config_seed),
    }
}
