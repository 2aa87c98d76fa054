//! Run configuration: a flat TOML file overlaid by command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use cldigdt::evaluate::{DEFAULT_SCENARIOS, OOS_SEED};
use cldigdt::ingest::{HOLDOUT_FRACTION, IEEE33_DAYS, IEEE33_SEED};
use cldigdt::robust::DEFAULT_EPSILON;
use cldigdt::uset::DEFAULT_SEGMENTS;

pub const DEFAULT_SIGMA: f64 = 0.3;
pub const DEFAULT_GAMMA: f64 = 0.95;
pub const DEFAULT_LAMBDA: f64 = 1.0;
pub const DEFAULT_SEED: u64 = IEEE33_SEED;
pub const DEFAULT_EVAL_SEED: u64 = OOS_SEED;
pub const DEFAULT_DAYS: u32 = IEEE33_DAYS;
pub const DEFAULT_HOLDOUT: f64 = HOLDOUT_FRACTION;
pub const DEFAULT_SWEEP: [f64; 6] = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5];

/// Every key is optional; missing keys fall back to defaults.
#[derive(Debug, Clone, Default, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PartialConfig {
    pub case: Option<PathBuf>,
    pub history: Option<PathBuf>,
    /// `""` selects the built-in generator spec.
    pub synthetic: Option<String>,
    pub days: Option<u32>,
    pub sigma: Option<f64>,
    pub epsilon: Option<f64>,
    pub gamma: Option<f64>,
    pub lambda: Option<f64>,
    pub grid: Option<usize>,
    pub seed: Option<u64>,
    pub eval_seed: Option<u64>,
    pub scenarios: Option<usize>,
    pub holdout: Option<f64>,
    pub sigmas: Option<Vec<f64>>,
    pub out: Option<PathBuf>,
    pub enforce_corners: Option<bool>,
}

impl PartialConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Fields set in `over` win.
    pub fn overlay(self, over: PartialConfig) -> PartialConfig {
        PartialConfig {
            case: over.case.or(self.case),
            history: over.history.or(self.history),
            synthetic: over.synthetic.or(self.synthetic),
            days: over.days.or(self.days),
            sigma: over.sigma.or(self.sigma),
            epsilon: over.epsilon.or(self.epsilon),
            gamma: over.gamma.or(self.gamma),
            lambda: over.lambda.or(self.lambda),
            grid: over.grid.or(self.grid),
            seed: over.seed.or(self.seed),
            eval_seed: over.eval_seed.or(self.eval_seed),
            scenarios: over.scenarios.or(self.scenarios),
            holdout: over.holdout.or(self.holdout),
            sigmas: over.sigmas.or(self.sigmas),
            out: over.out.or(self.out),
            enforce_corners: over.enforce_corners.or(self.enforce_corners),
        }
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub enum HistorySource {
    File(PathBuf),
    /// `None` is the built-in generator spec.
    Synthetic(Option<PathBuf>),
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct RunConfig {
    /// `None` is the bundled IEEE 33-bus case.
    pub case: Option<PathBuf>,
    pub history: HistorySource,
    pub days: u32,
    pub sigma: f64,
    pub epsilon: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub grid: usize,
    pub seed: u64,
    pub eval_seed: u64,
    pub scenarios: usize,
    pub holdout: f64,
    pub sigmas: Vec<f64>,
    pub out: PathBuf,
    pub enforce_corners: bool,
}

impl RunConfig {
    pub fn resolve(p: PartialConfig) -> Result<Self> {
        let history = match (p.history, p.synthetic) {
            (Some(_), Some(_)) => bail!("--history and --synthetic are mutually exclusive"),
            (Some(h), None) => HistorySource::File(h),
            (None, Some(s)) if s.is_empty() => HistorySource::Synthetic(None),
            (None, Some(s)) => HistorySource::Synthetic(Some(PathBuf::from(s))),
            (None, None) => bail!("one of --history or --synthetic is required"),
        };
        let cfg = RunConfig {
            case: p.case,
            history,
            days: p.days.unwrap_or(DEFAULT_DAYS),
            sigma: p.sigma.unwrap_or(DEFAULT_SIGMA),
            epsilon: p.epsilon.unwrap_or(DEFAULT_EPSILON),
            gamma: p.gamma.unwrap_or(DEFAULT_GAMMA),
            lambda: p.lambda.unwrap_or(DEFAULT_LAMBDA),
            grid: p.grid.unwrap_or(DEFAULT_SEGMENTS),
            seed: p.seed.unwrap_or(DEFAULT_SEED),
            eval_seed: p.eval_seed.unwrap_or(DEFAULT_EVAL_SEED),
            scenarios: p.scenarios.unwrap_or(DEFAULT_SCENARIOS),
            holdout: p.holdout.unwrap_or(DEFAULT_HOLDOUT),
            sigmas: p.sigmas.unwrap_or_else(|| DEFAULT_SWEEP.to_vec()),
            out: p.out.unwrap_or_else(|| PathBuf::from("run")),
            enforce_corners: p.enforce_corners.unwrap_or(false),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            bail!("sigma must be >= 0, got {}", self.sigma);
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            bail!("gamma must lie in (0, 1), got {}", self.gamma);
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            bail!("lambda must be > 0, got {}", self.lambda);
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            bail!("epsilon must lie in (0, 1), got {}", self.epsilon);
        }
        if self.grid < 2 {
            bail!("grid must be at least 2 segments");
        }
        if !(self.holdout > 0.0 && self.holdout < 1.0) {
            bail!("holdout must lie in (0, 1)");
        }
        if self.days < 2 {
            bail!("days must be at least 2");
        }
        if self.scenarios == 0 {
            bail!("scenarios must be positive");
        }
        if self.sigmas.iter().any(|s| s.is_nan() || *s < 0.0) || self.sigmas.windows(2).any(|w| w[1] < w[0]) {
            bail!("sigmas must be ascending and >= 0");
        }
        for p in self.case.iter().chain(match &self.history {
            HistorySource::File(p) => Some(p),
            HistorySource::Synthetic(p) => p.as_ref(),
        }) {
            if !p.exists() {
                bail!("input file {} does not exist", p.display());
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
