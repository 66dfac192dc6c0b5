use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generation::{Candidate, Encoding};
use crate::pareto::{FrontDocument, MetricRecord, ObjectiveVector, ParetoFront};

use super::config::{CampaignConfig, RefPointRule};

/// Where the seeded streams stand: every iteration's randomness is derived
/// from `seed` and the iteration number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: u64,
    pub next_iteration: usize,
}

/// Everything needed to continue a campaign.
#[derive(Debug, Clone, PartialEq)]
pub struct CampaignState {
    pub config: CampaignConfig,
    pub config_hash: String,
    /// Labeled candidates in labeling order, aligned with `objectives`.
    pub data: Vec<Candidate>,
    pub objectives: Vec<ObjectiveVector>,
    pub front: ParetoFront,
    /// Completed iterations.
    pub iteration: usize,
    pub rng: RngState,
    /// Metrics of the initial data (iteration 0).
    pub baseline: MetricRecord,
    pub history: Vec<MetricRecord>,
    /// Oracle calls spent after initialization.
    pub queries: usize,
    /// Known Pareto-optimal ids, when the pool is fully labeled.
    pub true_pareto: Option<Vec<String>>,
    key_index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct LabeledEntry {
    id: String,
    genome: String,
    objectives: ObjectiveVector,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    config: CampaignConfig,
    config_hash: String,
    dataset: Vec<LabeledEntry>,
    front: FrontDocument,
    iteration: usize,
    rng: RngState,
    baseline: MetricRecord,
    history: Vec<MetricRecord>,
    queries: usize,
    #[serde(default)]
    true_pareto: Option<Vec<String>>,
}

/// Componentwise minimum.
pub fn nadir(points: &[ObjectiveVector]) -> Vec<f64> {
    let m = points[0].dim();
    (0..m)
        .map(|k| points.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min))
        .collect()
}

/// Reference point for `rule` given the initial objectives.
pub fn reference_point(rule: &RefPointRule, initial: &[ObjectiveVector]) -> Result<ObjectiveVector> {
    let low = nadir(initial);
    let r = match rule {
        RefPointRule::Explicit { point } => point.clone(),
        RefPointRule::NadirMinusEpsilon { epsilon } => low.iter().map(|v| v - epsilon).collect(),
        RefPointRule::NadirOfInitial => low
            .iter()
            .enumerate()
            .map(|(k, v)| {
                let high = initial.iter().map(|p| p[k]).fold(f64::NEG_INFINITY, f64::max);
                let range = high - v;
                v - if range > 0.0 { 1e-6 * range } else { 1e-6 }
            })
            .collect(),
    };
    ObjectiveVector::new(r)
}

/// Builds the starting state: deduplicates the initial data by genome, fixes
/// the reference point and builds the front.
pub fn init_campaign(cfg: &CampaignConfig, initial: Vec<(Candidate, ObjectiveVector)>) -> Result<CampaignState> {
    cfg.validate()?;
    let mut data = Vec::new();
    let mut objectives = Vec::new();
    let mut key_index = HashMap::new();
    for (c, y) in initial {
        crate::pareto::check_dims(cfg.objectives, y.dim())?;
        if key_index.contains_key(&c.key) {
            log::info!("initial data: dropping repeated genome {}", c.id);
            continue;
        }
        key_index.insert(c.key.clone(), data.len());
        data.push(c);
        objectives.push(y);
    }
    if data.len() < 2 {
        return Err(Error::invalid(format!(
            "initial data needs at least 2 labeled candidates, got {}",
            data.len()
        )));
    }
    if objectives.iter().all(|y| y == &objectives[0]) {
        return Err(Error::DegenerateData("all initial objective vectors are identical".into()));
    }
    let r = reference_point(&cfg.ref_point, &objectives)?;
    let mut front = ParetoFront::new(r.clone());
    for (c, y) in data.iter().zip(&objectives) {
        if !y.iter().zip(r.iter()).all(|(a, b)| a > b) {
            log::warn!("initial point {} does not dominate the reference point; left out of the front", c.id);
        }
        front.insert(y.clone(), Some(c.id.clone()))?;
    }
    let hv = front.hypervolume()?;
    let baseline = MetricRecord {
        iteration: 0,
        hv,
        relative_hvi: (hv > 0.0).then_some(0.0),
        fraction_recovered: None,
        batch_ids: Vec::new(),
    };
    Ok(CampaignState {
        config_hash: cfg.hash(),
        config: cfg.clone(),
        data,
        objectives,
        front,
        iteration: 0,
        rng: RngState {
            seed: cfg.seed,
            next_iteration: 1,
        },
        baseline,
        history: Vec::new(),
        queries: 0,
        true_pareto: None,
        key_index,
    })
}

impl CampaignState {
    pub fn encoding(&self) -> &Encoding {
        &self.config.encoding
    }

    /// Index into `data` of the labeled candidate with this genome key.
    pub fn labeled(&self, key: &str) -> Option<usize> {
        self.key_index.get(key).copied()
    }

    pub(crate) fn push(&mut self, c: Candidate, y: ObjectiveVector) -> Result<()> {
        self.front.insert(y.clone(), Some(c.id.clone()))?;
        self.key_index.insert(c.key.clone(), self.data.len());
        self.data.push(c);
        self.objectives.push(y);
        Ok(())
    }

    pub fn hv0(&self) -> f64 {
        self.baseline.hv
    }

    /// Recovered share of the known Pareto set, if one is known.
    pub fn fraction_recovered(&self) -> Result<Option<f64>> {
        let Some(truth) = &self.true_pareto else {
            return Ok(None);
        };
        let truth: std::collections::HashSet<&str> = truth.iter().map(String::as_str).collect();
        let found: std::collections::HashSet<&str> = self.data.iter().map(|c| c.id.as_str()).collect();
        crate::pareto::fraction_recovered(&found, &truth).map(Some)
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = Checkpoint {
            config: self.config.clone(),
            config_hash: self.config_hash.clone(),
            dataset: self
                .data
                .iter()
                .zip(&self.objectives)
                .map(|(c, y)| LabeledEntry {
                    id: c.id.clone(),
                    genome: c.genome.to_string(),
                    objectives: y.clone(),
                })
                .collect(),
            front: self.front.to_document(),
            iteration: self.iteration,
            rng: self.rng,
            baseline: self.baseline.clone(),
            history: self.history.clone(),
            queries: self.queries,
            true_pareto: self.true_pareto.clone(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Checkpoint = serde_json::from_str(text)?;
        doc.config.validate()?;
        if doc.config.hash() != doc.config_hash {
            return Err(Error::invalid("checkpoint config hash does not match its config"));
        }
        let enc = &doc.config.encoding;
        let mut data = Vec::with_capacity(doc.dataset.len());
        let mut objectives = Vec::with_capacity(doc.dataset.len());
        let mut key_index = HashMap::new();
        for e in doc.dataset {
            let c = enc.parse_candidate(e.id, &e.genome)?;
            key_index.insert(c.key.clone(), data.len());
            data.push(c);
            objectives.push(e.objectives);
        }
        Ok(Self {
            front: ParetoFront::from_document(&doc.front)?,
            config: doc.config,
            config_hash: doc.config_hash,
            data,
            objectives,
            iteration: doc.iteration,
            rng: doc.rng,
            baseline: doc.baseline,
            history: doc.history,
            queries: doc.queries,
            true_pareto: doc.true_pareto,
            key_index,
        })
    }

    /// Writes the checkpoint through a temporary file so a crash never
    /// leaves a truncated document behind.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, self.to_json()?).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
