use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::seq::index;

use crate::error::{Error, Result};
use crate::par;
use crate::pareto::{check_dims, dominates_unchecked, strictly_above, HviEvaluator, ParetoFront, MAX_EXACT_DIM};
use crate::rng;
use crate::surrogate::{sample_joint, PosteriorSampler};

fn check<S: PosteriorSampler + ?Sized>(post: &S, front: &ParetoFront, q: usize) -> Result<()> {
    if q == 0 {
        return Err(Error::invalid("batch size must be at least 1"));
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

/// Adds `y` to a mutually non-dominated set, keeping it that way.
fn absorb(pts: &mut Vec<Vec<f64>>, y: &[f64], r: &[f64]) {
    if !strictly_above(y, r) || pts.iter().any(|p| p.iter().zip(y).all(|(a, b)| a >= b)) {
        return;
    }
    pts.retain(|p| !dominates_unchecked(y, p));
    pts.push(y.to_vec());
}

fn evaluator(r: &[f64], pts: &[Vec<f64>]) -> HviEvaluator {
    HviEvaluator::from_parts(r, pts.iter().map(Vec::as_slice))
}

#[derive(PartialEq)]
struct Entry {
    gain: f64,
    index: usize,
    round: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.gain
            .total_cmp(&other.gain)
            .then_with(|| other.index.cmp(&self.index))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Greedy Monte Carlo qEHVI over one shared set of `draws` joint samples.
///
/// Each step adds the candidate with the largest mean increase in joint
/// hypervolume improvement (lowest index on ties). Marginal gains only shrink
/// as the batch grows, so stale gains are valid upper bounds and candidates
/// are re-scored lazily.
pub fn qehvi_mc<S: PosteriorSampler + ?Sized>(
    post: &S,
    front: &ParetoFront,
    q: usize,
    draws: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    check(post, front, q)?;
    let samples = sample_joint(post, draws, seed)?;
    let n = post.pool_size();
    let r = front.ref_point().as_slice();
    let base: Vec<Vec<f64>> = front.values().map(<[f64]>::to_vec).collect();
    let mut fronts = vec![base; draws];
    let mut evals: Vec<HviEvaluator> = fronts.iter().map(|f| evaluator(r, f)).collect();

    let mean_gain = |evals: &[HviEvaluator], i: usize| -> f64 {
        evals.iter().zip(&samples).map(|(e, s)| e.eval(s.row(i))).sum::<f64>() / draws as f64
    };
    let initial = par::map_range(n, |i| mean_gain(&evals, i));
    let mut heap: BinaryHeap<Entry> = initial
        .into_iter()
        .enumerate()
        .map(|(index, gain)| Entry { gain, index, round: 0 })
        .collect();

    let target = q.min(n);
    let mut batch = Vec::with_capacity(target);
    while batch.len() < target {
        let Some(top) = heap.pop() else { break };
        if top.round == batch.len() {
            let i = top.index;
            batch.push(i);
            for ((f, e), s) in fronts.iter_mut().zip(evals.iter_mut()).zip(&samples) {
                absorb(f, s.row(i), r);
                *e = evaluator(r, f);
            }
        } else {
            heap.push(Entry {
                gain: mean_gain(&evals, top.index),
                index: top.index,
                round: batch.len(),
            });
        }
    }
    Ok(batch)
}

/// How far `y` sits from being dominated: the smallest, over front points,
/// of the largest coordinate by which `y` exceeds that point. With an empty
/// front, the smallest gap above the reference point.
fn margin(y: &[f64], pts: &[Vec<f64>], r: &[f64]) -> f64 {
    if pts.is_empty() {
        return y.iter().zip(r).map(|(a, b)| a - b).fold(f64::INFINITY, f64::min);
    }
    pts.iter()
        .map(|p| y.iter().zip(p).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max))
        .fold(f64::INFINITY, f64::min)
}

/// Thompson sampling with fantasized fronts. Pick `j` uses draw `j`: the
/// unselected candidate with the largest improvement against the front plus
/// the sampled values of earlier picks. When nothing improves, the candidate
/// with the largest sampled non-domination margin is taken.
pub fn thompson_hvi<S: PosteriorSampler + ?Sized>(
    post: &S,
    front: &ParetoFront,
    q: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    check(post, front, q)?;
    let n = post.pool_size();
    let r = front.ref_point().as_slice();
    let mut fantasy: Vec<Vec<f64>> = front.values().map(<[f64]>::to_vec).collect();
    let mut taken = vec![false; n];
    let mut batch = Vec::with_capacity(q.min(n));
    for j in 0..q.min(n) {
        let sample = post.draw(seed, j as u64);
        let eval = evaluator(r, &fantasy);
        let mut best: Option<(usize, f64)> = None;
        for i in (0..n).filter(|&i| !taken[i]) {
            let g = eval.eval(sample.row(i));
            if g > 0.0 && best.is_none_or(|(_, b)| g > b) {
                best = Some((i, g));
            }
        }
        let pick = match best {
            Some((i, _)) => i,
            None => {
                let mut fallback: Option<(usize, f64)> = None;
                for i in (0..n).filter(|&i| !taken[i]) {
                    let m = margin(sample.row(i), &fantasy, r);
                    if fallback.is_none_or(|(_, b)| m > b) {
                        fallback = Some((i, m));
                    }
                }
                fallback.map(|(i, _)| i).expect("an unselected candidate remains")
            }
        };
        taken[pick] = true;
        batch.push(pick);
        absorb(&mut fantasy, sample.row(pick), r);
    }
    Ok(batch)
}

/// Uniform sample of `min(q, pool_size)` distinct indices, in random order.
pub fn random_select(pool_size: usize, q: usize, seed: u64) -> Result<Vec<usize>> {
    if q == 0 {
        return Err(Error::invalid("batch size must be at least 1"));
    }
    let mut rng = rng::stream(seed, 0);
    Ok(index::sample(&mut rng, pool_size, q.min(pool_size)).into_vec())
}
