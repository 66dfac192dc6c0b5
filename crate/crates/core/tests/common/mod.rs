//! Independent reference implementations used by the integration tests.
//! Nothing here calls into the crate's numerical code.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `a` dominates `b` (maximization).
pub fn dom(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x >= y) && a.iter().zip(b).any(|(x, y)| x > y)
}

/// Hypervolume by inclusion-exclusion over all non-empty subsets.
pub fn hv_inclusion_exclusion(points: &[Vec<f64>], r: &[f64]) -> f64 {
    let pts: Vec<&Vec<f64>> = points.iter().filter(|p| p.iter().zip(r).all(|(a, b)| a > b)).collect();
    let n = pts.len();
    let mut total = 0.0;
    for mask in 1u32..(1 << n) {
        let members: Vec<&Vec<f64>> = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| pts[i]).collect();
        let vol: f64 = (0..r.len())
            .map(|k| members.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min) - r[k])
            .product();
        if members.len() % 2 == 1 {
            total += vol;
        } else {
            total -= vol;
        }
    }
    total
}

/// Hypervolume on the grid induced by the point coordinates: sums every
/// cell covered by at least one box. Exact, exponential in M.
pub fn hv_grid(points: &[Vec<f64>], r: &[f64]) -> f64 {
    let m = r.len();
    let pts: Vec<&Vec<f64>> = points.iter().filter(|p| p.iter().zip(r).all(|(a, b)| a > b)).collect();
    if pts.is_empty() {
        return 0.0;
    }
    let axes: Vec<Vec<f64>> = (0..m)
        .map(|k| {
            let mut v: Vec<f64> = pts.iter().map(|p| p[k]).chain([r[k]]).collect();
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            v.dedup();
            v
        })
        .collect();
    let mut idx = vec![0usize; m];
    let mut total = 0.0;
    loop {
        let upper: Vec<f64> = (0..m).map(|k| axes[k][idx[k] + 1]).collect();
        if pts.iter().any(|p| p.iter().zip(&upper).all(|(a, b)| a >= b)) {
            total += (0..m).map(|k| axes[k][idx[k] + 1] - axes[k][idx[k]]).product::<f64>();
        }
        let mut k = 0;
        loop {
            if k == m {
                return total;
            }
            idx[k] += 1;
            if idx[k] + 1 < axes[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// Rejection-sampling hypervolume estimate with its standard error.
pub fn hv_monte_carlo(points: &[Vec<f64>], r: &[f64], samples: usize, seed: u64) -> (f64, f64) {
    let m = r.len();
    let upper: Vec<f64> = (0..m)
        .map(|k| points.iter().map(|p| p[k]).fold(r[k], f64::max))
        .collect();
    let volume: f64 = (0..m).map(|k| upper[k] - r[k]).product();
    if volume <= 0.0 {
        return (0.0, 0.0);
    }
    let mut g = rng(seed);
    let mut hits = 0usize;
    let mut z = vec![0.0; m];
    for _ in 0..samples {
        for k in 0..m {
            z[k] = r[k] + g.random::<f64>() * (upper[k] - r[k]);
        }
        if points.iter().any(|p| p.iter().zip(&z).all(|(a, b)| a >= b)) {
            hits += 1;
        }
    }
    let p = hits as f64 / samples as f64;
    (p * volume, volume * (p * (1.0 - p) / samples as f64).sqrt())
}

/// A candidate's discrete outcome distribution.
#[derive(Clone, Debug)]
pub struct Atoms {
    pub probs: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

/// Every joint outcome of independent discrete candidates as
/// `(probability, choice per candidate)`.
pub fn joint_outcomes(cands: &[Atoms]) -> Vec<(f64, Vec<usize>)> {
    let mut out = vec![(1.0, Vec::new())];
    for c in cands {
        let mut next = Vec::new();
        for (p, choice) in &out {
            for (k, q) in c.probs.iter().enumerate() {
                let mut ch = choice.clone();
                ch.push(k);
                next.push((p * q, ch));
            }
        }
        out = next;
    }
    out
}

/// Exact probability of attaining the maximum strictly positive HVI, lowest
/// index on ties. `scenarios` lists independent feasibility patterns with
/// their probabilities; the second value returned is the probability that
/// some feasible candidate improves.
pub fn exact_pmhi(
    cands: &[Atoms],
    front: &[Vec<f64>],
    r: &[f64],
    scenarios: &[(f64, Vec<bool>)],
) -> (Vec<f64>, f64) {
    let base = hv_grid(front, r);
    let n = cands.len();
    let mut probs = vec![0.0; n];
    let mut improving = 0.0;
    for (p, choice) in joint_outcomes(cands) {
        let gains: Vec<f64> = (0..n)
            .map(|i| {
                let y = &cands[i].values[choice[i]];
                let mut pts = front.to_vec();
                pts.push(y.clone());
                hv_grid(&pts, r) - base
            })
            .collect();
        for (pc, mask) in scenarios {
            let mut best: Option<(usize, f64)> = None;
            for i in 0..n {
                if mask[i] && gains[i] > 0.0 && best.is_none_or(|(_, b)| gains[i] > b) {
                    best = Some((i, gains[i]));
                }
            }
            if let Some((i, _)) = best {
                probs[i] += p * pc;
                improving += p * pc;
            }
        }
    }
    (probs, improving)
}

/// No constraints: a single always-feasible scenario.
pub fn all_feasible(n: usize) -> Vec<(f64, Vec<bool>)> {
    vec![(1.0, vec![true; n])]
}

/// Exact probability that each candidate is not dominated by any front point.
pub fn exact_membership(cands: &[Atoms], front: &[Vec<f64>]) -> Vec<f64> {
    cands
        .iter()
        .map(|c| {
            c.probs
                .iter()
                .zip(&c.values)
                .filter(|(_, y)| !front.iter().any(|f| dom(f, y)))
                .map(|(p, _)| p)
                .sum()
        })
        .collect()
}

/// Best q-subset by summed score (first in lexicographic order on ties).
pub fn best_subset(scores: &[f64], q: usize) -> (Vec<usize>, f64) {
    let n = scores.len();
    let mut best = (Vec::new(), f64::NEG_INFINITY);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != q {
            continue;
        }
        let set: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        let s: f64 = set.iter().map(|&i| scores[i]).sum();
        if s > best.1 {
            best = (set, s);
        }
    }
    best
}

/// Dense inverse by Gauss-Jordan elimination with partial pivoting.
pub fn invert(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| m[x][col].abs().partial_cmp(&m[y][col].abs()).unwrap())
            .unwrap();
        m.swap(col, pivot);
        let d = m[col][col];
        for v in m[col].iter_mut() {
            *v /= d;
        }
        for row in 0..n {
            if row != col {
                let f = m[row][col];
                if f != 0.0 {
                    for k in 0..2 * n {
                        m[row][k] -= f * m[col][k];
                    }
                }
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}

pub fn rbf(a: &[f64], b: &[f64], lengthscale: f64, variance: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    variance * (-0.5 * d2 / (lengthscale * lengthscale)).exp()
}

/// Closed-form GP posterior with noise `noise` on the training diagonal:
/// mean `k*ᵀ (K + σ²I)⁻¹ y` and covariance `K** − k*ᵀ (K + σ²I)⁻¹ k*`.
pub fn gp_oracle(
    train: &[Vec<f64>],
    y: &[f64],
    test: &[Vec<f64>],
    lengthscale: f64,
    variance: f64,
    noise: f64,
) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = train.len();
    let k: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| rbf(&train[i], &train[j], lengthscale, variance) + if i == j { noise } else { 0.0 })
                .collect()
        })
        .collect();
    let kinv = invert(&k);
    let ks: Vec<Vec<f64>> = test
        .iter()
        .map(|t| train.iter().map(|x| rbf(x, t, lengthscale, variance)).collect())
        .collect();
    let w: Vec<Vec<f64>> = ks
        .iter()
        .map(|kt| (0..n).map(|i| (0..n).map(|j| kinv[i][j] * kt[j]).sum()).collect())
        .collect();
    let mean = w.iter().map(|wt| wt.iter().zip(y).map(|(a, b)| a * b).sum()).collect();
    let cov = (0..test.len())
        .map(|a| {
            (0..test.len())
                .map(|b| rbf(&test[a], &test[b], lengthscale, variance) - w[a].iter().zip(&ks[b]).map(|(x, y)| x * y).sum::<f64>())
                .collect()
        })
        .collect();
    (mean, cov)
}

/// A random dyadic value in `[lo, hi]` with step 1/4, so HV arithmetic is
/// exact and ties resolve the same way everywhere.
pub fn dyadic(g: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    let steps = ((hi - lo) * 4.0).round() as u32;
    lo + g.random_range(0..=steps) as f64 / 4.0
}

/// Random probabilities summing to one, as multiples of 1/16.
pub fn simplex(g: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    loop {
        let mut cuts: Vec<u32> = (0..k - 1).map(|_| g.random_range(0..=16)).collect();
        cuts.sort_unstable();
        let mut prev = 0;
        let mut out = Vec::with_capacity(k);
        for c in cuts.into_iter().chain([16]) {
            out.push((c - prev) as f64 / 16.0);
            prev = c;
        }
        if out.iter().all(|&p| p > 0.0) {
            return out;
        }
    }
}
