//! Run configuration: a single JSON file describing the instance, the
//! inputs, and the analysis plan.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use heislift::whitney::BoxRegion;
use heislift::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetConfig {
    /// Euclidean target of the given dimension.
    Euclidean { dim: usize },
    /// Heisenberg group; the group index equals the top-level `n`.
    Heisenberg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    Whitney,
    Complex,
    HeisCore,
    Skeleton,
    Trace,
    Sobolev,
    Blowup,
    Contact,
    Domination,
    Determinism,
}

impl CheckKind {
    pub fn name(&self) -> &'static str {
        match self {
            CheckKind::Whitney => "whitney",
            CheckKind::Complex => "complex",
            CheckKind::HeisCore => "heis_core",
            CheckKind::Skeleton => "skeleton",
            CheckKind::Trace => "trace",
            CheckKind::Sobolev => "sobolev",
            CheckKind::Blowup => "blowup",
            CheckKind::Contact => "contact",
            CheckKind::Domination => "domination",
            CheckKind::Determinism => "determinism",
        }
    }
}

fn default_eps_sing() -> f64 {
    1e-6
}

fn default_checks() -> Vec<CheckKind> {
    vec![
        CheckKind::Whitney,
        CheckKind::Complex,
        CheckKind::HeisCore,
        CheckKind::Skeleton,
        CheckKind::Trace,
        CheckKind::Sobolev,
        CheckKind::Blowup,
        CheckKind::Contact,
        CheckKind::Domination,
    ]
}

fn default_p_list() -> Vec<f64> {
    vec![1.0, 1.5, 1.9]
}

fn default_samples() -> usize {
    100_000
}

fn default_seed() -> u64 {
    7
}

fn default_contact_lines() -> usize {
    100
}

fn default_trace_samples() -> usize {
    10_000
}

fn default_phis() -> usize {
    10
}

fn default_domination_samples() -> usize {
    10_000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalysisPlan {
    #[serde(default = "default_checks")]
    pub checks: Vec<CheckKind>,
    #[serde(default = "default_p_list")]
    pub p_list: Vec<f64>,
    /// Exponent for the blow-up refinement diagnostic (default n+1).
    #[serde(default)]
    pub blowup_p: Option<f64>,
    #[serde(default = "default_samples")]
    pub n_samples: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_contact_lines")]
    pub contact_lines: usize,
    /// Contact-residual step (default 1e-3 * diam(omega)).
    #[serde(default)]
    pub contact_h: Option<f64>,
    #[serde(default = "default_trace_samples")]
    pub trace_samples: usize,
    #[serde(default = "default_phis")]
    pub domination_phis: usize,
    #[serde(default = "default_domination_samples")]
    pub domination_samples: usize,
}

impl Default for AnalysisPlan {
    fn default() -> Self {
        AnalysisPlan {
            checks: default_checks(),
            p_list: default_p_list(),
            blowup_p: None,
            n_samples: default_samples(),
            seed: default_seed(),
            contact_lines: default_contact_lines(),
            contact_h: None,
            trace_samples: default_trace_samples(),
            domination_phis: default_phis(),
            domination_samples: default_domination_samples(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub m: usize,
    pub n: usize,
    pub omega: BoxRegion,
    pub target: TargetConfig,
    /// Boundary rows: m site coordinates then the target coordinates.
    pub boundary_csv: PathBuf,
    pub max_generation: u32,
    #[serde(default = "default_eps_sing")]
    pub eps_sing: f64,
    #[serde(default)]
    pub collar_radius: Option<f64>,
    #[serde(default)]
    pub analysis: AnalysisPlan,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| Error::parse("cli", e.to_string()))?;
        Ok(cfg)
    }

    /// Resolve the boundary path relative to the config file location.
    pub fn boundary_path(&self, config_path: &Path) -> PathBuf {
        if self.boundary_csv.is_absolute() {
            self.boundary_csv.clone()
        } else {
            config_path
                .parent()
                .unwrap_or_else(|| Path::new("."))
                .join(&self.boundary_csv)
        }
    }

    pub fn target_space(&self) -> heislift::oracle::TargetSpace {
        match self.target {
            TargetConfig::Euclidean { dim } => heislift::oracle::TargetSpace::euclidean(dim),
            TargetConfig::Heisenberg => heislift::oracle::TargetSpace::heisenberg(self.n),
        }
    }

    pub fn target_dim(&self) -> usize {
        match self.target {
            TargetConfig::Euclidean { dim } => dim,
            TargetConfig::Heisenberg => 2 * self.n + 1,
        }
    }
}
