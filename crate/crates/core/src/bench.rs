//! Acquisition ablations over a fully labeled pool: every
//! (acquisition, seed) cell runs a campaign, then results are averaged.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::acquisition::{random_select, AcquisitionKind};
use crate::campaign::{
    metrics_csv, true_pareto_ids, BuiltinOracle, Campaign, CampaignConfig, InitialDesign, OracleSpec, PoolSource,
    RefPointRule,
};
use crate::error::{Error, Result};
use crate::generation::{load_pool, Candidate, Encoding, Featurizer, Genome, GenomeSpace};
use crate::par;
use crate::pareto::{MetricRecord, ObjectiveVector};
use crate::rng;
use crate::surrogate::GpConfig;

fn default_samples() -> usize {
    256
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSpec {
    /// Labeled pool CSV.
    pub pool: PathBuf,
    pub encoding: Encoding,
    pub acquisitions: Vec<AcquisitionKind>,
    pub seeds: Vec<u64>,
    pub iterations: usize,
    pub batch_size: usize,
    #[serde(default = "default_samples")]
    pub mc_samples: usize,
    /// Initial labeled sample drawn from the pool per seed.
    pub initial_count: usize,
    #[serde(default)]
    pub ref_point: RefPointRule,
    #[serde(default)]
    pub surrogate: Option<GpConfig>,
    /// Expected Pareto-optimal ids; checked against the pool labels.
    #[serde(default)]
    pub true_pareto: Option<Vec<String>>,
    pub output_dir: PathBuf,
}

impl BenchSpec {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut spec: Self = serde_json::from_str(&text).map_err(|e| Error::invalid(format!("bench spec: {e}")))?;
        if let Some(dir) = path.parent() {
            for p in [&mut spec.pool, &mut spec.output_dir] {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.acquisitions.is_empty() {
            return Err(Error::invalid("acquisitions must list at least one method"));
        }
        if self.seeds.is_empty() {
            return Err(Error::invalid("seeds must list at least one seed"));
        }
        let mut seen = BTreeSet::new();
        if !self.acquisitions.iter().all(|a| seen.insert(a.name())) {
            return Err(Error::invalid("acquisitions has repeated entries"));
        }
        let mut seeds = BTreeSet::new();
        if !self.seeds.iter().all(|s| seeds.insert(*s)) {
            return Err(Error::invalid("seeds has repeated entries"));
        }
        Ok(())
    }

    /// Campaign configuration for one cell.
    pub fn cell_config(&self, acquisition: AcquisitionKind, seed: u64, objectives: usize) -> CampaignConfig {
        CampaignConfig {
            iterations: self.iterations,
            batch_size: self.batch_size,
            mc_samples: self.mc_samples,
            objectives,
            ref_point: self.ref_point.clone(),
            acquisition,
            encoding: self.encoding.clone(),
            pool: PoolSource::Static { path: self.pool.clone() },
            initial: InitialDesign::Sample {
                count: self.initial_count,
            },
            oracle: OracleSpec::Table { path: None },
            surrogate: self.surrogate.clone(),
            seed,
        }
    }
}

/// Metrics of one (acquisition, seed) run, iteration 0 first.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub acquisition: AcquisitionKind,
    pub seed: u64,
    pub records: Vec<MetricRecord>,
}

/// Per-iteration mean and 95% half-width over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub acquisition: String,
    pub iteration: usize,
    pub n: usize,
    pub hv_mean: f64,
    pub hv_ci95: f64,
    pub fraction_recovered_mean: f64,
    pub fraction_recovered_ci95: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub true_pareto: Vec<String>,
    pub cells: Vec<CellResult>,
    pub aggregate: Vec<AggregateRow>,
}

impl BenchReport {
    pub fn series(&self, acquisition: AcquisitionKind) -> Vec<&AggregateRow> {
        self.aggregate.iter().filter(|r| r.acquisition == acquisition.name()).collect()
    }
}

/// Mean and normal-approximation 95% half-width (1.96 · sd / √n, sample sd).
pub fn mean_ci(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, 1.96 * var.sqrt() / n.sqrt())
}

pub fn aggregate(cells: &[CellResult], acquisitions: &[AcquisitionKind]) -> Vec<AggregateRow> {
    let mut rows = Vec::new();
    for &acq in acquisitions {
        let group: Vec<&CellResult> = cells.iter().filter(|c| c.acquisition == acq).collect();
        let len = group.iter().map(|c| c.records.len()).min().unwrap_or(0);
        for k in 0..len {
            let hv: Vec<f64> = group.iter().map(|c| c.records[k].hv).collect();
            let fr: Vec<f64> = group
                .iter()
                .map(|c| c.records[k].fraction_recovered.unwrap_or(0.0))
                .collect();
            let (hv_mean, hv_ci95) = mean_ci(&hv);
            let (fraction_recovered_mean, fraction_recovered_ci95) = mean_ci(&fr);
            rows.push(AggregateRow {
                acquisition: acq.name().to_string(),
                iteration: group[0].records[k].iteration,
                n: group.len(),
                hv_mean,
                hv_ci95,
                fraction_recovered_mean,
                fraction_recovered_ci95,
            });
        }
    }
    rows
}

/// Runs every cell, up to `workers` at a time (0 = all available cores),
/// and writes `<acq>_seed<s>.csv`, `aggregate.csv` and `true_pareto.json`
/// into the output directory.
pub fn run_bench(spec: &BenchSpec, workers: usize) -> Result<BenchReport> {
    spec.validate()?;
    let pool = load_pool(&spec.pool, &spec.encoding)?;
    let objectives = pool
        .objectives
        .as_ref()
        .ok_or_else(|| Error::invalid(format!("bench pool {} has no objective columns", spec.pool.display())))?;
    if objectives.is_empty() {
        return Err(Error::invalid("bench pool is empty"));
    }
    let m = objectives[0].dim();
    let truth = true_pareto_ids(&pool.candidates, objectives);
    if let Some(expected) = &spec.true_pareto {
        let a: BTreeSet<&str> = expected.iter().map(String::as_str).collect();
        let b: BTreeSet<&str> = truth.iter().map(String::as_str).collect();
        if a != b {
            return Err(Error::invalid(format!(
                "true_pareto lists {} ids but the pool labels give {} different ones",
                a.len(),
                b.symmetric_difference(&a).count()
            )));
        }
    }
    let cells: Vec<(AcquisitionKind, u64)> = spec
        .acquisitions
        .iter()
        .flat_map(|&a| spec.seeds.iter().map(move |&s| (a, s)))
        .collect();
    for &(a, s) in &cells {
        spec.cell_config(a, s, m).validate()?;
    }
    std::fs::create_dir_all(&spec.output_dir).map_err(|e| Error::io(&spec.output_dir, e))?;

    let outcomes = par::with_workers(workers, || {
        par::map_range(cells.len(), |i| {
            let (acq, seed) = cells[i];
            let mut campaign = Campaign::start(spec.cell_config(acq, seed, m))?;
            campaign.run()?;
            let csv = metrics_csv(campaign.state(), true)?;
            let path = spec.output_dir.join(format!("{}_seed{seed}.csv", acq.name()));
            std::fs::write(&path, csv).map_err(|e| Error::io(&path, e))?;
            let state = campaign.into_state();
            let mut records = vec![state.baseline];
            records.extend(state.history);
            log::info!("bench cell {} seed {seed} done", acq.name());
            Ok(CellResult {
                acquisition: acq,
                seed,
                records,
            })
        })
    });
    let cells = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
    let aggregate = aggregate(&cells, &spec.acquisitions);
    write_aggregate(&spec.output_dir.join("aggregate.csv"), &aggregate)?;
    let truth_path = spec.output_dir.join("true_pareto.json");
    std::fs::write(&truth_path, serde_json::to_string_pretty(&truth)?).map_err(|e| Error::io(&truth_path, e))?;
    Ok(BenchReport {
        true_pareto: truth,
        cells,
        aggregate,
    })
}

fn write_aggregate(path: &Path, rows: &[AggregateRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// A labeled synthetic pool: `size` distinct random `bits`-long genomes
/// scored by a builtin oracle decoded in `groups`.
pub fn synthetic_pool(
    oracle: BuiltinOracle,
    bits: usize,
    groups: usize,
    size: usize,
    seed: u64,
) -> Result<(Vec<Candidate>, Vec<ObjectiveVector>)> {
    if bits == 0 || bits > 30 {
        return Err(Error::invalid("synthetic pools use 1 to 30 bits"));
    }
    if oracle != BuiltinOracle::LinearTradeoff && (groups == 0 || !bits.is_multiple_of(groups)) {
        return Err(Error::invalid("groups must divide the bit length"));
    }
    let space = 1usize << bits;
    if size > space {
        return Err(Error::invalid(format!("cannot draw {size} distinct genomes from {space}")));
    }
    let featurizer = match oracle {
        BuiltinOracle::LinearTradeoff => Featurizer::Identity,
        _ => Featurizer::BinaryDecode { groups },
    };
    let enc = Encoding::new(GenomeSpace::Bits { length: bits }, featurizer)?;
    let picks = random_select(space, size, rng::derive(seed, 0xB0, 0))?;
    let width = size.to_string().len();
    let mut candidates = Vec::with_capacity(size);
    let mut objectives = Vec::with_capacity(size);
    for (k, &code) in picks.iter().enumerate() {
        let genome: Vec<bool> = (0..bits).rev().map(|b| (code >> b) & 1 == 1).collect();
        objectives.push(ObjectiveVector::new(oracle.eval_bits(&genome, groups))?);
        candidates.push(enc.candidate_with_id(format!("p{k:0width$}"), Genome::Bits(genome)));
    }
    Ok((candidates, objectives))
}
