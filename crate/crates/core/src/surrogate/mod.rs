//! Probabilistic surrogate: one exact GP per objective, fitted by
//! maximizing the log marginal likelihood, with joint posterior sampling
//! over candidate pools.

mod gp;
mod kernel;
mod linalg;
mod optim;
mod posterior;

pub use gp::{fit, GpConfig, GpModel};
pub use kernel::{Hyperparameters, KernelKind};
pub use posterior::{posterior, sample_joint, DiscretePosterior, Posterior, PosteriorSampler, Sample};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pareto::ObjectiveVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    DenseReal,
    Binary,
}

/// Labeled training data `D`: `(id, features, objectives)` rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub feature_kind: FeatureKind,
    ids: Vec<String>,
    features: Vec<Vec<f64>>,
    objectives: Vec<ObjectiveVector>,
}

impl Dataset {
    pub fn new(feature_kind: FeatureKind) -> Self {
        Self {
            feature_kind,
            ids: Vec::new(),
            features: Vec::new(),
            objectives: Vec::new(),
        }
    }

    pub fn push(&mut self, id: impl Into<String>, features: Vec<f64>, y: ObjectiveVector) -> Result<()> {
        let id = id.into();
        if let Some(first) = self.features.first() {
            crate::pareto::check_dims(first.len(), features.len())?;
            crate::pareto::check_dims(self.objectives[0].dim(), y.dim())?;
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite feature for {id}")));
        }
        if self.ids.contains(&id) {
            return Err(Error::invalid(format!("duplicate candidate id {id}")));
        }
        self.ids.push(id);
        self.features.push(features);
        self.objectives.push(y);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn objectives(&self) -> &[ObjectiveVector] {
        &self.objectives
    }

    pub fn n_objectives(&self) -> usize {
        self.objectives.first().map_or(0, |y| y.dim())
    }

    pub fn feature_dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }
}
