//! Batch acquisition over a finite pool.
//!
//! qPMHI estimates, for every candidate, the probability that it attains the
//! pool-wide maximum hypervolume improvement. Those events are disjoint, so
//! a batch's score is the sum of its members' probabilities and the top-q
//! ranking is the exact maximizer. Baselines: greedy Monte Carlo qEHVI,
//! Thompson sampling with fantasized fronts, and uniform random selection.

mod baselines;
mod qpmhi;

pub use baselines::{qehvi_mc, random_select, thompson_hvi};
pub use qpmhi::{
    constrained_qpmhi, estimate_qpmhi, estimate_qpo, pareto_membership_prob,
};

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-candidate Monte Carlo estimates for one pool.
#[derive(Debug, Clone, PartialEq)]
pub struct AcquisitionResult {
    /// `counts[i] / draws`: estimated probability that candidate `i` is the
    /// unique maximizer of the improvement.
    pub probs: Vec<f64>,
    /// Draws won by each candidate.
    pub counts: Vec<u64>,
    /// Fraction of draws in which candidate `i` is not dominated by the
    /// current front.
    pub pareto_membership: Vec<f64>,
    /// Improvement of each candidate's posterior mean.
    pub mean_improvement: Vec<f64>,
    /// Draws with at least one strictly positive improvement.
    pub improving_draws: u64,
    pub improving_fraction: f64,
    pub draws: usize,
    pub seed: u64,
    /// Filled by [`select_batch`].
    pub selected: Vec<usize>,
}

impl AcquisitionResult {
    pub fn pool_size(&self) -> usize {
        self.probs.len()
    }

    /// Rank-only result for acquisitions that do not produce probabilities.
    pub fn selection_only(pool_size: usize, selected: Vec<usize>, seed: u64) -> Self {
        Self {
            probs: Vec::new(),
            counts: vec![0; pool_size],
            pareto_membership: Vec::new(),
            mean_improvement: Vec::new(),
            improving_draws: 0,
            improving_fraction: 0.0,
            draws: 0,
            seed,
            selected,
        }
    }

    pub fn summary(&self) -> AcquisitionSummary {
        AcquisitionSummary {
            improving_fraction: self.improving_fraction,
            l: self.draws,
            seed: self.seed,
        }
    }
}

/// JSON sidecar for the result CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionSummary {
    pub improving_fraction: f64,
    #[serde(rename = "L")]
    pub l: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Selection {
    pub indices: Vec<usize>,
    /// `q` exceeded the pool size and the batch was cut to `N`.
    pub truncated: bool,
}

fn descending(values: &[f64], candidates: impl Iterator<Item = usize>) -> Vec<usize> {
    let mut idx: Vec<usize> = candidates.collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx
}

/// Top-q by estimated probability, then fallbacks.
///
/// 1. candidates with `p > 0`, descending `p`;
/// 2. remaining candidates with positive Pareto membership, descending;
/// 3. remaining candidates by descending posterior-mean improvement.
///
/// Ties go to the lowest index.
pub fn select_batch(result: &AcquisitionResult, q: usize) -> Result<Selection> {
    select_batch_masked(result, q, None)
}

/// [`select_batch`] where tiers 2 and 3 skip candidates with
/// `fill_eligible[i] == false`. Ineligible candidates are used only if the
/// eligible ones run out.
pub fn select_batch_masked(
    result: &AcquisitionResult,
    q: usize,
    fill_eligible: Option<&[bool]>,
) -> Result<Selection> {
    if q == 0 {
        return Err(Error::invalid("batch size must be at least 1"));
    }
    let n = result.pool_size();
    if let Some(mask) = fill_eligible {
        crate::pareto::check_dims(n, mask.len())?;
    }
    let target = q.min(n);
    let mut taken = vec![false; n];
    let mut out = Vec::with_capacity(target);
    let take = |order: Vec<usize>, out: &mut Vec<usize>, taken: &mut Vec<bool>| {
        for i in order {
            if out.len() >= target {
                break;
            }
            if !taken[i] {
                taken[i] = true;
                out.push(i);
            }
        }
    };
    take(descending(&result.probs, (0..n).filter(|&i| result.counts[i] > 0)), &mut out, &mut taken);
    let eligible = |i: usize| fill_eligible.is_none_or(|m| m[i]);
    if out.len() < target && result.pareto_membership.len() == n {
        let order = descending(
            &result.pareto_membership,
            (0..n).filter(|&i| !taken[i] && eligible(i) && result.pareto_membership[i] > 0.0),
        );
        take(order, &mut out, &mut taken);
    }
    if out.len() < target {
        let score: Vec<f64> = if result.mean_improvement.len() == n {
            result.mean_improvement.clone()
        } else {
            vec![0.0; n]
        };
        let order = descending(&score, (0..n).filter(|&i| !taken[i] && eligible(i)));
        take(order, &mut out, &mut taken);
        let order = descending(&score, (0..n).filter(|&i| !taken[i]));
        take(order, &mut out, &mut taken);
    }
    Ok(Selection {
        indices: out,
        truncated: q > n,
    })
}

/// `candidate_id,prob,pareto_membership,selected_rank`; rank is 1-based and
/// blank for unselected candidates.
pub fn write_result_csv<W: Write>(out: W, ids: &[String], result: &AcquisitionResult) -> Result<()> {
    crate::pareto::check_dims(ids.len(), result.counts.len())?;
    let mut rank = vec![None; ids.len()];
    for (r, &i) in result.selected.iter().enumerate() {
        rank[i] = Some(r + 1);
    }
    let cell = |v: &[f64], i: usize| v.get(i).map(|x| x.to_string()).unwrap_or_default();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["candidate_id", "prob", "pareto_membership", "selected_rank"])?;
    for (i, id) in ids.iter().enumerate() {
        w.write_record([
            id.clone(),
            cell(&result.probs, i),
            cell(&result.pareto_membership, i),
            rank[i].map(|r| r.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<acquisition>", e))?;
    Ok(())
}

/// Which acquisition drives batch selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcquisitionKind {
    Qpmhi,
    QehviMc,
    Thompson,
    Random,
    Qpo,
}

impl AcquisitionKind {
    pub fn name(self) -> &'static str {
        match self {
            AcquisitionKind::Qpmhi => "qpmhi",
            AcquisitionKind::QehviMc => "qehvi_mc",
            AcquisitionKind::Thompson => "thompson",
            AcquisitionKind::Random => "random",
            AcquisitionKind::Qpo => "qpo",
        }
    }
}

impl std::str::FromStr for AcquisitionKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "qpmhi" => Self::Qpmhi,
            "qehvi_mc" | "qehvi" => Self::QehviMc,
            "thompson" => Self::Thompson,
            "random" => Self::Random,
            "qpo" => Self::Qpo,
            _ => return Err(Error::invalid(format!("unknown acquisition {s:?}"))),
        })
    }
}
