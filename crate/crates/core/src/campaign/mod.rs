//! The optimization loop: fit, generate, acquire, evaluate, record.

mod config;
mod oracle;
mod state;

pub use config::{CampaignConfig, InitialDesign, PoolSource, RefPointRule};
pub use oracle::{
    build_oracle, builtin_encoding, evaluate_oracle, zdt1, BuiltinOracle, ExternalOracle, Oracle, OracleSpec,
    TableOracle,
};
pub use state::{init_campaign, nadir, reference_point, CampaignState, RngState};

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use crate::acquisition::{
    estimate_qpmhi, estimate_qpo, qehvi_mc, random_select, select_batch_masked, thompson_hvi, AcquisitionKind,
    AcquisitionResult,
};
use crate::error::{Error, Result};
use crate::generation::{load_pool, propose_pool, random_genome, Candidate, ParentSelection, ParentSet};
use crate::pareto::{non_dominated_indices, write_metrics_csv, MetricRecord, ObjectiveVector};
use crate::rng;
use crate::surrogate::{fit, posterior, Dataset, GpModel, PosteriorSampler, Sample};

const ITERATION_LABEL: u64 = 0x17E4;
const INIT_LABEL: u64 = 0x1417;
const POOL_LABEL: u64 = 1;
const ACQUISITION_LABEL: u64 = 2;

/// Decides whether a campaign should stop before its next iteration.
pub trait StopRule {
    fn should_stop(&self, state: &CampaignState) -> bool;
}

/// Stops once the configured number of iterations has run.
#[derive(Debug, Clone, Copy, Default)]
pub struct FixedIterations;

impl StopRule for FixedIterations {
    fn should_stop(&self, state: &CampaignState) -> bool {
        state.iteration >= state.config.iterations
    }
}

impl<F: Fn(&CampaignState) -> bool> StopRule for F {
    fn should_stop(&self, state: &CampaignState) -> bool {
        self(state)
    }
}

/// A campaign with its oracle and, for static pools, the loaded pool.
pub struct Campaign {
    state: CampaignState,
    oracle: Box<dyn Oracle>,
    static_pool: Option<Vec<Candidate>>,
    checkpoint: Option<PathBuf>,
}

struct StaticPool {
    candidates: Vec<Candidate>,
    objectives: Option<Vec<ObjectiveVector>>,
}

fn load_static(cfg: &CampaignConfig) -> Result<Option<StaticPool>> {
    let PoolSource::Static { path } = &cfg.pool else {
        return Ok(None);
    };
    let pool = load_pool(path, &cfg.encoding)?;
    if pool.is_empty() {
        return Err(Error::invalid(format!("pool {} is empty", path.display())));
    }
    if pool.duplicates > 0 {
        log::info!("pool {}: dropped {} repeated genomes", path.display(), pool.duplicates);
    }
    if cfg.batch_size > pool.len() {
        return Err(Error::invalid(format!(
            "batch_size ({}) exceeds the pool size ({})",
            cfg.batch_size,
            pool.len()
        )));
    }
    if let Some(objs) = &pool.objectives {
        crate::pareto::check_dims(cfg.objectives, objs[0].dim())?;
    }
    Ok(Some(StaticPool {
        candidates: pool.candidates,
        objectives: pool.objectives,
    }))
}

/// Ids of the non-dominated members of a labeled pool.
pub fn true_pareto_ids(candidates: &[Candidate], objectives: &[ObjectiveVector]) -> Vec<String> {
    non_dominated_indices(objectives, false)
        .into_iter()
        .map(|i| candidates[i].id.clone())
        .collect()
}

fn initial_candidates(cfg: &CampaignConfig, pool: Option<&StaticPool>) -> Result<(Vec<Candidate>, Option<Vec<ObjectiveVector>>)> {
    let seed = rng::derive(cfg.seed, INIT_LABEL, 0);
    match (&cfg.initial, pool) {
        (InitialDesign::File { path }, _) => {
            let p = load_pool(path, &cfg.encoding)?;
            Ok((p.candidates, p.objectives))
        }
        (InitialDesign::Sample { count }, Some(pool)) => {
            let idx = random_select(pool.candidates.len(), *count, seed)?;
            let objs = pool
                .objectives
                .as_ref()
                .map(|o| idx.iter().map(|&i| o[i].clone()).collect());
            Ok((idx.iter().map(|&i| pool.candidates[i].clone()).collect(), objs))
        }
        (InitialDesign::Sample { count }, None) => {
            let constraints = match &cfg.pool {
                PoolSource::Generator(g) => g.constraints.clone(),
                PoolSource::Static { .. } => Vec::new(),
            };
            let mut rng = rng::stream(seed, 0);
            let mut keys = HashSet::new();
            let mut out = Vec::with_capacity(*count);
            let mut attempts = 0;
            while out.len() < *count {
                if attempts >= 50 * count {
                    return Err(Error::GenerationStarvation {
                        requested: *count,
                        accepted: out.len(),
                        attempts,
                        rate: out.len() as f64 / attempts as f64,
                    });
                }
                attempts += 1;
                let g = random_genome(&cfg.encoding.space, &mut rng);
                if !constraints.iter().all(|c| crate::generation::Constraint::admits(c, &g)) {
                    continue;
                }
                let c = cfg.encoding.candidate(g);
                if keys.insert(c.key.clone()) {
                    out.push(c);
                }
            }
            Ok((out, None))
        }
    }
}

impl Campaign {
    /// Loads the pool, builds the oracle, labels the initial design and
    /// initializes the state.
    pub fn start(cfg: CampaignConfig) -> Result<Self> {
        cfg.validate()?;
        let pool = load_static(&cfg)?;
        let labels = pool
            .as_ref()
            .and_then(|p| p.objectives.as_ref().map(|o| (p.candidates.as_slice(), o.as_slice())));
        let oracle = build_oracle(&cfg, labels)?;
        let (initial, labels) = initial_candidates(&cfg, pool.as_ref())?;
        if initial.len() < 2 {
            return Err(Error::invalid(format!(
                "initial data needs at least 2 candidates, got {}",
                initial.len()
            )));
        }
        let objectives = match labels {
            Some(o) => o,
            None => evaluate_oracle(oracle.as_ref(), &initial)?,
        };
        let mut state = init_campaign(&cfg, initial.into_iter().zip(objectives).collect())?;
        if let Some(StaticPool {
            candidates,
            objectives: Some(objs),
        }) = &pool
        {
            state.true_pareto = Some(true_pareto_ids(candidates, objs));
            state.baseline.fraction_recovered = state.fraction_recovered()?;
        }
        Ok(Self {
            state,
            oracle,
            static_pool: pool.map(|p| p.candidates),
            checkpoint: None,
        })
    }

    /// Continues from a checkpoint written by [`Campaign::save`].
    pub fn resume(path: &Path) -> Result<Self> {
        let state = CampaignState::load(path)?;
        let pool = load_static(&state.config)?;
        let labels = pool
            .as_ref()
            .and_then(|p| p.objectives.as_ref().map(|o| (p.candidates.as_slice(), o.as_slice())));
        let oracle = build_oracle(&state.config, labels)?;
        Ok(Self {
            state,
            oracle,
            static_pool: pool.map(|p| p.candidates),
            checkpoint: Some(path.to_path_buf()),
        })
    }

    /// Replaces the oracle (for callers with their own evaluator).
    pub fn with_oracle(mut self, oracle: Box<dyn Oracle>) -> Self {
        self.oracle = oracle;
        self
    }

    /// Save the state to `path` after every iteration.
    pub fn with_checkpoint(mut self, path: impl Into<PathBuf>) -> Self {
        self.checkpoint = Some(path.into());
        self
    }

    pub fn state(&self) -> &CampaignState {
        &self.state
    }

    pub fn into_state(self) -> CampaignState {
        self.state
    }

    pub fn save(&self) -> Result<()> {
        match &self.checkpoint {
            Some(p) => self.state.save(p),
            None => Ok(()),
        }
    }

    /// Runs until the configured iteration count.
    pub fn run(&mut self) -> Result<()> {
        self.run_until(&FixedIterations)
    }

    /// Runs until the iteration count is reached or `stop` fires.
    pub fn run_until(&mut self, stop: &dyn StopRule) -> Result<()> {
        self.save()?;
        while !FixedIterations.should_stop(&self.state) && !stop.should_stop(&self.state) {
            self.step()?;
        }
        Ok(())
    }

    /// One iteration. On failure the state is left as it was before the
    /// iteration and the error carries the iteration number.
    pub fn step(&mut self) -> Result<&MetricRecord> {
        let t = self.state.iteration + 1;
        self.step_inner(t).map_err(|e| Error::Iteration {
            iteration: t,
            source: Box::new(e),
        })?;
        self.save()?;
        Ok(self.state.history.last().expect("record pushed"))
    }

    fn step_inner(&mut self, t: usize) -> Result<()> {
        let cfg = &self.state.config;
        let seed_t = rng::derive(self.state.rng.seed, ITERATION_LABEL, t as u64);
        let needs_model = cfg.acquisition != AcquisitionKind::Random
            || matches!(&cfg.pool, PoolSource::Generator(g) if g.parent_selection == ParentSelection::SurrogateWeighted);
        let model = if needs_model { Some(fit_model(&self.state)?) } else { None };

        let generated;
        let pool: &[Candidate] = match (&self.static_pool, &cfg.pool) {
            (Some(p), _) => p,
            (None, PoolSource::Generator(g)) => {
                let parents = ParentSet {
                    candidates: &self.state.data,
                    objectives: &self.state.objectives,
                    front: &self.state.front,
                    encoding: &cfg.encoding,
                };
                let proposal = propose_pool(&parents, model.as_ref(), g, rng::derive(seed_t, POOL_LABEL, 0))?;
                log::debug!(
                    "iteration {t}: pool of {} ({} elites, {} attempts)",
                    proposal.candidates.len(),
                    proposal.stats.elites,
                    proposal.stats.attempts
                );
                generated = proposal.candidates;
                &generated
            }
            (None, PoolSource::Static { .. }) => unreachable!("static pool is loaded at start"),
        };

        let result = acquire(&self.state, pool, model.as_ref(), rng::derive(seed_t, ACQUISITION_LABEL, 0))?;
        let batch: Vec<Candidate> = result.selected.iter().map(|&i| pool[i].clone()).collect();
        let fresh: Vec<Candidate> = batch
            .iter()
            .filter(|c| self.state.labeled(&c.key).is_none())
            .cloned()
            .collect();
        let repeats = batch.len() - fresh.len();
        if repeats > 0 {
            log::info!("iteration {t}: {repeats} selected candidates were already labeled; not re-queried");
        }
        let values = if fresh.is_empty() {
            Vec::new()
        } else {
            evaluate_oracle(self.oracle.as_ref(), &fresh)?
        };

        self.state.queries += fresh.len();
        for (c, y) in fresh.into_iter().zip(values) {
            self.state.push(c, y)?;
        }
        let hv = self.state.front.hypervolume()?;
        let hv0 = self.state.hv0();
        let record = MetricRecord {
            iteration: t,
            hv,
            relative_hvi: (hv0 > 0.0).then(|| (hv - hv0) / hv0),
            fraction_recovered: self.state.fraction_recovered()?,
            batch_ids: batch.iter().map(|c| c.id.clone()).collect(),
        };
        log::info!("iteration {t}: hv {hv}");
        self.state.history.push(record);
        self.state.iteration = t;
        self.state.rng.next_iteration = t + 1;
        Ok(())
    }

    /// Metric log as CSV; with `baseline`, the iteration-0 row comes first.
    pub fn metrics_csv(&self, baseline: bool) -> Result<String> {
        metrics_csv(&self.state, baseline)
    }
}

pub fn metrics_csv(state: &CampaignState, baseline: bool) -> Result<String> {
    let mut rows = Vec::with_capacity(state.history.len() + 1);
    if baseline {
        rows.push(state.baseline.clone());
    }
    rows.extend(state.history.iter().cloned());
    let mut buf = Vec::new();
    write_metrics_csv(&mut buf, &rows)?;
    Ok(String::from_utf8(buf).expect("csv is utf-8"))
}

/// Fits the surrogate to the state's labeled data.
pub fn fit_model(state: &CampaignState) -> Result<GpModel> {
    let mut data = Dataset::new(state.encoding().feature_kind());
    for (c, y) in state.data.iter().zip(&state.objectives) {
        data.push(c.id.clone(), c.features.clone(), y.clone())?;
    }
    fit(&data, &state.config.gp_config())
}

/// Runs the configured acquisition over `pool` and returns the result with
/// `selected` filled.
/// Posterior whose draws for already-labeled candidates are their observed
/// values, so re-proposing a labeled design never shows an improvement.
struct Pinned<'a, P> {
    inner: &'a P,
    observed: Vec<Option<&'a [f64]>>,
    labeled: Vec<usize>,
}

impl<'a, P: PosteriorSampler> Pinned<'a, P> {
    fn new(inner: &'a P, observed: Vec<Option<&'a [f64]>>) -> Self {
        let labeled = (0..observed.len()).filter(|&i| observed[i].is_some()).collect();
        Self { inner, observed, labeled }
    }

    fn pin(&self, s: &mut Sample) {
        for &i in &self.labeled {
            if let Some(y) = self.observed[i] {
                s.set_row(i, y);
            }
        }
    }
}

impl<P: PosteriorSampler> PosteriorSampler for Pinned<'_, P> {
    fn pool_size(&self) -> usize {
        self.inner.pool_size()
    }

    fn n_objectives(&self) -> usize {
        self.inner.n_objectives()
    }

    fn mean(&self, i: usize) -> &[f64] {
        self.observed[i].unwrap_or_else(|| self.inner.mean(i))
    }

    fn draw(&self, seed: u64, index: u64) -> Sample {
        let mut s = self.inner.draw(seed, index);
        self.pin(&mut s);
        s
    }

    fn draw_many(&self, seed: u64, start: u64, count: usize) -> Vec<Sample> {
        let mut out = self.inner.draw_many(seed, start, count);
        out.iter_mut().for_each(|s| self.pin(s));
        out
    }
}

/// View of a posterior restricted to the pool indices in `keep`.
struct Subset<'a, P> {
    inner: &'a P,
    keep: &'a [usize],
}

impl<P: PosteriorSampler> PosteriorSampler for Subset<'_, P> {
    fn pool_size(&self) -> usize {
        self.keep.len()
    }

    fn n_objectives(&self) -> usize {
        self.inner.n_objectives()
    }

    fn mean(&self, i: usize) -> &[f64] {
        self.inner.mean(self.keep[i])
    }

    fn draw(&self, seed: u64, index: u64) -> Sample {
        let full = self.inner.draw(seed, index);
        let rows: Vec<Vec<f64>> = self.keep.iter().map(|&i| full.row(i).to_vec()).collect();
        Sample::from_rows(&rows)
    }
}

pub fn acquire(
    state: &CampaignState,
    pool: &[Candidate],
    model: Option<&GpModel>,
    seed: u64,
) -> Result<AcquisitionResult> {
    let cfg = &state.config;
    let q = cfg.batch_size;
    if pool.is_empty() {
        return Err(Error::invalid("candidate pool is empty"));
    }
    let unlabeled: Vec<bool> = pool.iter().map(|c| state.labeled(&c.key).is_none()).collect();
    if cfg.acquisition == AcquisitionKind::Random {
        // Uniform over unlabeled candidates; labeled ones only pad a short pool.
        let (fresh, seen): (Vec<usize>, Vec<usize>) = (0..pool.len()).partition(|&i| unlabeled[i]);
        let mut sel: Vec<usize> = if fresh.is_empty() {
            Vec::new()
        } else {
            random_select(fresh.len(), q, seed)?.into_iter().map(|k| fresh[k]).collect()
        };
        sel.extend(seen.into_iter().take(q.saturating_sub(sel.len())));
        return Ok(AcquisitionResult::selection_only(pool.len(), sel, seed));
    }
    let model = model.ok_or_else(|| Error::invalid("acquisition needs a fitted surrogate"))?;
    let ids: Vec<String> = pool.iter().map(|c| c.id.clone()).collect();
    let features: Vec<Vec<f64>> = pool.iter().map(|c| c.features.clone()).collect();
    let inner = posterior(model, ids, &features)?;
    let observed: Vec<Option<&[f64]>> = pool
        .iter()
        .map(|c| state.labeled(&c.key).map(|j| state.objectives[j].as_slice()))
        .collect();
    let post = Pinned::new(&inner, observed);
    let l = cfg.mc_samples;
    let mut result = match cfg.acquisition {
        AcquisitionKind::Qpmhi => estimate_qpmhi(&post, &state.front, l, seed)?,
        AcquisitionKind::Qpo => {
            let best = state.objectives.iter().map(|y| y[0]).fold(f64::NEG_INFINITY, f64::max);
            estimate_qpo(&post, best, l, seed)?
        }
        AcquisitionKind::QehviMc | AcquisitionKind::Thompson => {
            // Greedy batches run on the unlabeled designs; labeled ones only pad.
            let (fresh, seen): (Vec<usize>, Vec<usize>) = (0..pool.len()).partition(|&i| unlabeled[i]);
            let mut sel = Vec::with_capacity(q);
            if !fresh.is_empty() {
                let sub = Subset { inner: &inner, keep: &fresh };
                let picked = if cfg.acquisition == AcquisitionKind::QehviMc {
                    qehvi_mc(&sub, &state.front, q, l, seed)?
                } else {
                    thompson_hvi(&sub, &state.front, q, seed)?
                };
                sel.extend(picked.into_iter().map(|k| fresh[k]));
            }
            sel.extend(seen.into_iter().take(q.saturating_sub(sel.len())));
            return Ok(AcquisitionResult::selection_only(pool.len(), sel, seed));
        }
        AcquisitionKind::Random => unreachable!(),
    };
    let selection = select_batch_masked(&result, q, Some(&unlabeled))?;
    if selection.truncated {
        log::warn!("batch truncated to the pool size {}", pool.len());
    }
    result.selected = selection.indices;
    Ok(result)
}
