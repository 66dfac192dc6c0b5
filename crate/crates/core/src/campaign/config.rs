use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::acquisition::AcquisitionKind;
use crate::error::{Error, Result};
use crate::generation::{Encoding, GeneratorConfig};
use crate::surrogate::GpConfig;

use super::oracle::OracleSpec;

/// How the reference point is fixed at initialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum RefPointRule {
    /// Componentwise minimum of the initial objectives, shifted down by the
    /// default margin (1e-6 of each objective's range, or 1e-6 when flat).
    #[default]
    NadirOfInitial,
    /// Nadir shifted down by `epsilon` in every component.
    NadirMinusEpsilon { epsilon: f64 },
    Explicit { point: Vec<f64> },
}


/// Where each iteration's candidate pool comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PoolSource {
    Generator(GeneratorConfig),
    /// A fixed pool file reused every iteration.
    Static { path: PathBuf },
}

/// Initial labeled data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialDesign {
    /// `count` candidates drawn uniformly: from the static pool, or random
    /// genomes when the pool is generated. Labeled by the oracle.
    Sample { count: usize },
    /// A pool file; objective columns are used when present, otherwise the
    /// oracle labels it.
    File { path: PathBuf },
}

fn default_samples() -> usize {
    256
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub iterations: usize,
    pub batch_size: usize,
    #[serde(default = "default_samples")]
    pub mc_samples: usize,
    pub objectives: usize,
    #[serde(default)]
    pub ref_point: RefPointRule,
    pub acquisition: AcquisitionKind,
    pub encoding: Encoding,
    pub pool: PoolSource,
    pub initial: InitialDesign,
    pub oracle: OracleSpec,
    /// Surrogate settings; the kernel defaults to one matching the
    /// featurizer.
    #[serde(default)]
    pub surrogate: Option<GpConfig>,
    #[serde(default)]
    pub seed: u64,
}

impl CampaignConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::invalid(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json(&text)?;
        if let Some(dir) = path.parent() {
            cfg.resolve_paths(dir);
        }
        Ok(cfg)
    }

    /// Makes relative file paths relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let PoolSource::Static { path } = &mut self.pool {
            fix(path);
        }
        if let InitialDesign::File { path } = &mut self.initial {
            fix(path);
        }
        self.oracle.resolve_paths(base);
    }

    /// Checks every field that can be checked without touching files.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("iterations", self.iterations),
            ("batch_size", self.batch_size),
            ("mc_samples", self.mc_samples),
            ("objectives", self.objectives),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::invalid(format!("{name} must be at least 1")));
            }
        }
        if self.objectives > crate::pareto::MAX_EXACT_DIM {
            return Err(Error::invalid(format!(
                "objectives must be at most {}, got {}",
                crate::pareto::MAX_EXACT_DIM,
                self.objectives
            )));
        }
        if self.acquisition == AcquisitionKind::Qpo && self.objectives != 1 {
            return Err(Error::invalid("acquisition qpo needs objectives = 1"));
        }
        self.encoding.validate()?;
        if let PoolSource::Generator(g) = &self.pool {
            g.validate()?;
            if self.batch_size > g.pool_size {
                return Err(Error::invalid(format!(
                    "batch_size ({}) exceeds generator.pool_size ({})",
                    self.batch_size, g.pool_size
                )));
            }
        }
        match &self.ref_point {
            RefPointRule::NadirMinusEpsilon { epsilon } if !(*epsilon >= 0.0 && epsilon.is_finite()) => {
                return Err(Error::invalid("ref_point.epsilon must be finite and non-negative"));
            }
            RefPointRule::Explicit { point } if point.len() != self.objectives || point.iter().any(|v| !v.is_finite()) => {
                return Err(Error::invalid(format!(
                    "ref_point.point must hold {} finite values",
                    self.objectives
                )));
            }
            _ => {}
        }
        if let InitialDesign::Sample { count } = self.initial {
            if count < 2 {
                return Err(Error::invalid("initial.count must be at least 2"));
            }
        }
        self.oracle.validate(self)?;
        Ok(())
    }

    pub fn gp_config(&self) -> GpConfig {
        self.surrogate
            .clone()
            .unwrap_or_else(|| GpConfig::for_features(self.encoding.feature_kind()))
    }

    /// Hex digest of the canonical JSON form.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().take(16).map(|b| format!("{b:02x}")).collect()
    }
}
