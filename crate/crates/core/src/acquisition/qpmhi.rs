use crate::error::{Error, Result};
use crate::par;
use crate::pareto::{check_dims, dominates_unchecked, HviEvaluator, ParetoFront, MAX_EXACT_DIM};
use crate::rng;
use crate::surrogate::PosteriorSampler;

use super::AcquisitionResult;

/// Draws handled per parallel task.
const BLOCK: usize = 16;
/// Stream label separating constraint draws from objective draws.
const CONSTRAINT_LABEL: u64 = 0xC0_57A1;

type Gain<'a> = &'a (dyn Fn(&[f64]) -> f64 + Sync);
type Member<'a> = &'a (dyn Fn(&[f64]) -> bool + Sync);

struct Constraints<'a> {
    post: &'a dyn PosteriorSampler,
    thresholds: &'a [f64],
}

struct Tally {
    counts: Vec<u64>,
    member: Vec<u64>,
    improving: u64,
}

/// One pass over `draws` joint samples. Per draw, the feasible candidate with
/// the largest strictly positive gain wins (lowest index on ties); a draw with
/// no positive gain credits nobody.
fn tally<S: PosteriorSampler + ?Sized>(
    post: &S,
    draws: usize,
    seed: u64,
    gain: Gain,
    member: Member,
    constraints: Option<&Constraints>,
) -> Tally {
    let n = post.pool_size();
    let blocks = draws.div_ceil(BLOCK);
    let constraint_seed = rng::derive(seed, CONSTRAINT_LABEL, 0);
    let partial = par::map_range(blocks, |b| {
        let start = b * BLOCK;
        let count = BLOCK.min(draws - start);
        let samples = post.draw_many(seed, start as u64, count);
        let csamples = constraints.map(|c| c.post.draw_many(constraint_seed, start as u64, count));
        let mut winners = Vec::with_capacity(count);
        let mut member_counts = vec![0u32; n];
        for (k, sample) in samples.iter().enumerate() {
            let feasible = |i: usize| match (constraints, &csamples) {
                (Some(c), Some(cs)) => cs[k].row(i).iter().zip(c.thresholds).all(|(v, t)| v >= t),
                _ => true,
            };
            let mut best: Option<(usize, f64)> = None;
            for (i, members) in member_counts.iter_mut().enumerate() {
                if !feasible(i) {
                    continue;
                }
                let y = sample.row(i);
                if member(y) {
                    *members += 1;
                }
                let g = gain(y);
                if g > 0.0 && best.is_none_or(|(_, b)| g > b) {
                    best = Some((i, g));
                }
            }
            winners.push(best.map(|(i, _)| i));
        }
        (winners, member_counts)
    });
    let mut out = Tally {
        counts: vec![0; n],
        member: vec![0; n],
        improving: 0,
    };
    for (winners, members) in partial {
        for w in winners.into_iter().flatten() {
            out.counts[w] += 1;
            out.improving += 1;
        }
        for (acc, c) in out.member.iter_mut().zip(members) {
            *acc += u64::from(c);
        }
    }
    out
}

fn finish<S: PosteriorSampler + ?Sized>(post: &S, t: Tally, draws: usize, seed: u64, gain: Gain) -> AcquisitionResult {
    let l = draws as f64;
    AcquisitionResult {
        probs: t.counts.iter().map(|&c| c as f64 / l).collect(),
        pareto_membership: t.member.iter().map(|&c| c as f64 / l).collect(),
        mean_improvement: (0..post.pool_size()).map(|i| gain(post.mean(i))).collect(),
        counts: t.counts,
        improving_fraction: t.improving as f64 / l,
        improving_draws: t.improving,
        draws,
        seed,
        selected: Vec::new(),
    }
}

fn check_inputs<S: PosteriorSampler + ?Sized>(post: &S, front: &ParetoFront, draws: usize) -> Result<()> {
    if draws == 0 {
        return Err(Error::invalid("number of Monte Carlo draws must be at least 1"));
    }
    if post.pool_size() == 0 {
        return Err(Error::invalid("candidate pool is empty"));
    }
    check_dims(front.dim(), post.n_objectives())?;
    if front.dim() > MAX_EXACT_DIM {
        return Err(Error::UnsupportedDimension {
            got: front.dim(),
            max: MAX_EXACT_DIM,
        });
    }
    Ok(())
}

fn not_dominated_by(front: &ParetoFront) -> impl Fn(&[f64]) -> bool + Sync + '_ {
    move |y: &[f64]| !front.values().any(|p| dominates_unchecked(p, y))
}

/// Monte Carlo estimate of each candidate's probability of attaining the
/// pool-wide maximum hypervolume improvement over `front`. Also records
/// per-candidate Pareto membership from the same draws.
pub fn estimate_qpmhi<S: PosteriorSampler + ?Sized>(
    post: &S,
    front: &ParetoFront,
    draws: usize,
    seed: u64,
) -> Result<AcquisitionResult> {
    check_inputs(post, front, draws)?;
    let eval = HviEvaluator::new(front);
    let gain = |y: &[f64]| eval.eval(y);
    let member = not_dominated_by(front);
    let t = tally(post, draws, seed, &gain, &member, None);
    Ok(finish(post, t, draws, seed, &gain))
}

/// Fraction of draws in which each candidate is not dominated by any point of
/// the observed front.
pub fn pareto_membership_prob<S: PosteriorSampler + ?Sized>(
    post: &S,
    front: &ParetoFront,
    draws: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    check_inputs(post, front, draws)?;
    let member = not_dominated_by(front);
    let t = tally(post, draws, seed, &|_| 0.0, &member, None);
    Ok(t.member.iter().map(|&c| c as f64 / draws as f64).collect())
}

/// Single-objective reduction: the gain is `max(0, f - best_observed)`.
pub fn estimate_qpo<S: PosteriorSampler + ?Sized>(
    post: &S,
    best_observed: f64,
    draws: usize,
    seed: u64,
) -> Result<AcquisitionResult> {
    if post.n_objectives() != 1 {
        return Err(Error::invalid(format!(
            "qPO needs exactly one objective, got {}",
            post.n_objectives()
        )));
    }
    if !best_observed.is_finite() {
        return Err(Error::invalid("best observed value must be finite"));
    }
    if draws == 0 {
        return Err(Error::invalid("number of Monte Carlo draws must be at least 1"));
    }
    if post.pool_size() == 0 {
        return Err(Error::invalid("candidate pool is empty"));
    }
    let gain = |y: &[f64]| (y[0] - best_observed).max(0.0);
    let member = |y: &[f64]| y[0] >= best_observed;
    let t = tally(post, draws, seed, &gain, &member, None);
    Ok(finish(post, t, draws, seed, &gain))
}

/// qPMHI where, within each draw, a candidate whose sampled constraint values
/// fall below any threshold (`c_k < thresholds[k]`) is excluded. Use
/// `f64::NEG_INFINITY` for an inactive constraint.
pub fn constrained_qpmhi<S, C>(
    post: &S,
    constraint_post: &C,
    thresholds: &[f64],
    front: &ParetoFront,
    draws: usize,
    seed: u64,
) -> Result<AcquisitionResult>
where
    S: PosteriorSampler + ?Sized,
    C: PosteriorSampler,
{
    check_inputs(post, front, draws)?;
    check_dims(post.pool_size(), constraint_post.pool_size())?;
    check_dims(constraint_post.n_objectives(), thresholds.len())?;
    if thresholds.iter().any(|t| t.is_nan()) {
        return Err(Error::invalid("constraint thresholds must not be NaN"));
    }
    let eval = HviEvaluator::new(front);
    let gain = |y: &[f64]| eval.eval(y);
    let member = not_dominated_by(front);
    let constraints = Constraints {
        post: constraint_post,
        thresholds,
    };
    let t = tally(post, draws, seed, &gain, &member, Some(&constraints));
    Ok(finish(post, t, draws, seed, &gain))
}
