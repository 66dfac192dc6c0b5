use std::collections::HashSet;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::pareto::{non_dominated_indices, HviEvaluator, ObjectiveVector, ParetoFront};
use crate::rng;
use crate::surrogate::GpModel;

use super::constraints::{admits_all, KnownConstraint};
use super::genome::{Candidate, Encoding, Genome, GenomeSpace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Crossover {
    OnePoint,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParentSelection {
    Uniform,
    /// Softmax over standardized posterior-mean improvement.
    SurrogateWeighted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub pool_size: usize,
    /// Per-position mutation probability.
    pub mutation_rate: f64,
    pub crossover: Crossover,
    #[serde(default)]
    pub elite_fraction: f64,
    pub parent_selection: ParentSelection,
    #[serde(default)]
    pub random_fraction: f64,
    #[serde(default)]
    pub constraints: Vec<KnownConstraint>,
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pool_size == 0 {
            return Err(Error::invalid("generator.pool_size must be at least 1"));
        }
        for (name, v) in [
            ("generator.mutation_rate", self.mutation_rate),
            ("generator.elite_fraction", self.elite_fraction),
            ("generator.random_fraction", self.random_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if self.elite_fraction + self.random_fraction > 1.0 + 1e-12 {
            return Err(Error::invalid(
                "generator.elite_fraction + generator.random_fraction must not exceed 1",
            ));
        }
        Ok(())
    }
}

/// Labeled designs the generator draws parents and elites from.
#[derive(Debug, Clone, Copy)]
pub struct ParentSet<'a> {
    pub candidates: &'a [Candidate],
    pub objectives: &'a [ObjectiveVector],
    /// Observed front, with point ids matching candidate ids.
    pub front: &'a ParetoFront,
    pub encoding: &'a Encoding,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub elites: usize,
    /// Genomes generated for the non-elite slots, accepted or not.
    pub attempts: usize,
    pub constraint_rejections: usize,
    pub duplicate_rejections: usize,
}

impl GenerationStats {
    /// Fraction of generated genomes that passed every constraint.
    pub fn constraint_acceptance(&self) -> f64 {
        if self.attempts == 0 {
            return 1.0;
        }
        (self.attempts - self.constraint_rejections) as f64 / self.attempts as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub candidates: Vec<Candidate>,
    pub stats: GenerationStats,
}

#[derive(Debug, Clone, Copy)]
enum Slot {
    Random,
    Offspring,
}

const SLOT_LABEL: u64 = 0x5107;
const MAX_ATTEMPTS_PER_SLOT: usize = 50;

/// Builds a pool of exactly `cfg.pool_size` distinct candidates: elites from
/// the labeled non-dominated set, uniform random genomes, and offspring of
/// crossover plus mutation. Every candidate satisfies `cfg.constraints`.
pub fn propose_pool(
    parents: &ParentSet,
    model: Option<&GpModel>,
    cfg: &GeneratorConfig,
    seed: u64,
) -> Result<Proposal> {
    cfg.validate()?;
    crate::pareto::check_dims(parents.candidates.len(), parents.objectives.len())?;
    if parents.candidates.is_empty() {
        return Err(Error::invalid("pool generation needs at least one labeled genome"));
    }
    let n = cfg.pool_size;
    let enc = parents.encoding;
    let mut keys = HashSet::new();
    let mut out: Vec<Candidate> = Vec::with_capacity(n);

    let elite_target = ((cfg.elite_fraction * n as f64).round() as usize).min(n);
    for i in non_dominated_indices(parents.objectives, true) {
        if out.len() >= elite_target {
            break;
        }
        let c = &parents.candidates[i];
        if admits_all(&c.genome, &cfg.constraints) && keys.insert(c.key.clone()) {
            out.push(c.clone());
        }
    }
    let mut stats = GenerationStats {
        elites: out.len(),
        ..GenerationStats::default()
    };

    let n_random = ((cfg.random_fraction * n as f64).round() as usize).min(n - out.len());
    let n_generated = n - out.len();
    let weights = parent_weights(parents, model, cfg.parent_selection);
    let picker = WeightedIndex::new(&weights).map_err(|e| Error::Numerical(format!("parent weights: {e}")))?;

    // (slot, kind, attempt) for every slot not yet filled.
    let mut pending: Vec<(usize, Slot, u64)> = (0..n_generated)
        .map(|s| (s, if s < n_random { Slot::Random } else { Slot::Offspring }, 0))
        .collect();
    let mut filled: Vec<Option<Candidate>> = vec![None; n_generated];
    let cap = MAX_ATTEMPTS_PER_SLOT * n;
    while !pending.is_empty() {
        if stats.attempts >= cap {
            let accepted = n - pending.len();
            return Err(Error::GenerationStarvation {
                requested: n,
                accepted,
                attempts: stats.attempts,
                rate: (n_generated - pending.len()) as f64 / stats.attempts as f64,
            });
        }
        let genomes = par::map_slice(&pending, |&(slot, kind, attempt)| {
            let mut rng = rng::stream(rng::derive(seed, SLOT_LABEL, slot as u64), attempt);
            match kind {
                Slot::Random => random_genome(&enc.space, &mut rng),
                Slot::Offspring => {
                    let a = &parents.candidates[picker.sample(&mut rng)].genome;
                    let b = &parents.candidates[picker.sample(&mut rng)].genome;
                    let child = crossover(a, b, cfg.crossover, &mut rng);
                    mutate(child, &enc.space, cfg.mutation_rate, &mut rng)
                }
            }
        });
        let mut still = Vec::new();
        for (&(slot, kind, attempt), g) in pending.iter().zip(genomes) {
            stats.attempts += 1;
            if !admits_all(&g, &cfg.constraints) {
                stats.constraint_rejections += 1;
                still.push((slot, kind, attempt + 1));
                continue;
            }
            let cand = enc.candidate(g);
            if !keys.insert(cand.key.clone()) {
                stats.duplicate_rejections += 1;
                still.push((slot, kind, attempt + 1));
                continue;
            }
            filled[slot] = Some(cand);
        }
        pending = still;
    }
    out.extend(filled.into_iter().flatten());
    Ok(Proposal { candidates: out, stats })
}

fn parent_weights(parents: &ParentSet, model: Option<&GpModel>, mode: ParentSelection) -> Vec<f64> {
    let n = parents.candidates.len();
    let model = match (mode, model) {
        (ParentSelection::SurrogateWeighted, Some(m)) => m,
        _ => return vec![1.0; n],
    };
    let r = parents.front.ref_point().as_slice();
    let scores: Vec<f64> = par::map_slice(parents.candidates, |c| {
        let mean: Vec<f64> = (0..model.n_objectives()).map(|m| model.predict_one(m, &c.features).0).collect();
        // Score against the front without the parent's own point, otherwise
        // every labeled design would score zero.
        let others = parents
            .front
            .points()
            .iter()
            .filter(|p| p.id.as_deref() != Some(c.id.as_str()))
            .map(|p| p.values.as_slice());
        HviEvaluator::from_parts(r, others).eval(&mean)
    });
    let mu = scores.iter().sum::<f64>() / n as f64;
    let sd = (scores.iter().map(|s| (s - mu).powi(2)).sum::<f64>() / n as f64).sqrt();
    if !(sd > 0.0 && sd.is_finite()) {
        return vec![1.0; n];
    }
    scores.iter().map(|s| ((s - mu) / sd).exp()).collect()
}

pub(crate) fn random_genome(space: &GenomeSpace, rng: &mut rng::Rng) -> Genome {
    match space {
        GenomeSpace::Bits { length } => Genome::Bits((0..*length).map(|_| rng.random()).collect()),
        GenomeSpace::Tokens { max_len, .. } => {
            let alphabet = space.alphabet();
            let len = rng.random_range(1..=*max_len);
            Genome::Tokens((0..len).map(|_| alphabet[rng.random_range(0..alphabet.len())]).collect())
        }
    }
}

fn crossover(a: &Genome, b: &Genome, kind: Crossover, rng: &mut rng::Rng) -> Genome {
    fn mix<T: Copy>(a: &[T], b: &[T], kind: Crossover, rng: &mut rng::Rng) -> Vec<T> {
        match kind {
            Crossover::OnePoint => {
                let cut = rng.random_range(0..=a.len().min(b.len()));
                a[..cut].iter().chain(&b[cut..]).copied().collect()
            }
            Crossover::Uniform => (0..a.len())
                .map(|i| if i < b.len() && rng.random::<bool>() { b[i] } else { a[i] })
                .collect(),
        }
    }
    match (a, b) {
        (Genome::Bits(x), Genome::Bits(y)) => Genome::Bits(mix(x, y, kind, rng)),
        (Genome::Tokens(x), Genome::Tokens(y)) => Genome::Tokens(mix(x, y, kind, rng)),
        _ => a.clone(),
    }
}

fn mutate(g: Genome, space: &GenomeSpace, rate: f64, rng: &mut rng::Rng) -> Genome {
    if rate <= 0.0 {
        return g;
    }
    match g {
        Genome::Bits(bits) => Genome::Bits(bits.into_iter().map(|b| if rng.random_bool(rate) { !b } else { b }).collect()),
        Genome::Tokens(tokens) => {
            let alphabet = space.alphabet();
            Genome::Tokens(
                tokens
                    .into_iter()
                    .map(|t| {
                        if alphabet.len() < 2 || !rng.random_bool(rate) {
                            return t;
                        }
                        let others: Vec<char> = alphabet.iter().copied().filter(|&c| c != t).collect();
                        others[rng.random_range(0..others.len())]
                    })
                    .collect(),
            )
        }
    }
}
