//! Exact hypervolume (maximization, reference point below the front).
//!
//! M = 1 is a max, M = 2 a coordinate sweep, 3 <= M <= 6 the WFG recursion
//! (exclusive contributions against limit sets). Points that do not strictly
//! dominate the reference point contribute nothing.

use std::cmp::Ordering;

use super::{check_dims, dominates_unchecked, strictly_above, weakly_dominates, ParetoFront};
use crate::error::{Error, Result};

pub const MAX_EXACT_DIM: usize = 6;

fn check_ref(m: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::invalid("reference point must have at least one component"));
    }
    if m > MAX_EXACT_DIM {
        return Err(Error::UnsupportedDimension {
            got: m,
            max: MAX_EXACT_DIM,
        });
    }
    Ok(())
}

/// Lebesgue measure of the union of boxes `[r, y]` over `points`.
pub fn hypervolume<P: AsRef<[f64]>>(points: &[P], r: &[f64]) -> Result<f64> {
    let m = r.len();
    check_ref(m)?;
    for p in points {
        check_dims(m, p.as_ref().len())?;
    }
    let active: Vec<&[f64]> = points
        .iter()
        .map(|p| p.as_ref())
        .filter(|p| strictly_above(p, r))
        .collect();
    Ok(match m {
        1 => active.iter().map(|p| p[0] - r[0]).fold(0.0, f64::max),
        2 => sweep_2d(active, r),
        _ => {
            let shifted: Vec<Vec<f64>> = active
                .iter()
                .map(|p| p.iter().zip(r).map(|(a, b)| a - b).collect())
                .collect();
            wfg(nondominated(shifted))
        }
    })
}

fn sweep_2d(mut pts: Vec<&[f64]>, r: &[f64]) -> f64 {
    // x descending, ties by y descending so the dominated twin is skipped
    pts.sort_by(|a, b| {
        b[0].partial_cmp(&a[0])
            .unwrap_or(Ordering::Equal)
            .then(b[1].partial_cmp(&a[1]).unwrap_or(Ordering::Equal))
    });
    let mut hv = 0.0;
    let mut floor = r[1];
    for p in pts {
        if p[1] > floor {
            hv += (p[0] - r[0]) * (p[1] - floor);
            floor = p[1];
        }
    }
    hv
}

fn nondominated(mut pts: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    pts.sort_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
    pts.dedup();
    let keep: Vec<bool> = (0..pts.len())
        .map(|i| !pts.iter().any(|q| dominates_unchecked(q, &pts[i])))
        .collect();
    pts.into_iter()
        .zip(keep)
        .filter_map(|(p, k)| k.then_some(p))
        .collect()
}

fn box_volume(p: &[f64]) -> f64 {
    p.iter().product()
}

/// WFG on a non-dominated set translated so the reference point is 0.
fn wfg(mut pts: Vec<Vec<f64>>) -> f64 {
    match pts.len() {
        0 => return 0.0,
        1 => return box_volume(&pts[0]),
        _ => {}
    }
    if pts[0].len() == 2 {
        let refs: Vec<&[f64]> = pts.iter().map(|p| p.as_slice()).collect();
        return sweep_2d(refs, &[0.0, 0.0]);
    }
    let last = pts[0].len() - 1;
    pts.sort_by(|a, b| b[last].partial_cmp(&a[last]).unwrap_or(Ordering::Equal));
    (0..pts.len())
        .map(|i| exclusive(&pts[i], &pts[i + 1..]))
        .sum()
}

fn exclusive(p: &[f64], rest: &[Vec<f64>]) -> f64 {
    let limited: Vec<Vec<f64>> = rest
        .iter()
        .map(|q| q.iter().zip(p).map(|(a, b)| a.min(*b)).collect::<Vec<f64>>())
        .filter(|q| q.iter().all(|v| *v > 0.0))
        .collect();
    box_volume(p) - wfg(nondominated(limited))
}

/// Hypervolume improvement of `y` over `front`: `HV(P + y) - HV(P)`.
pub fn hvi(y: &[f64], front: &ParetoFront) -> Result<f64> {
    check_ref(front.dim())?;
    check_dims(front.dim(), y.len())?;
    Ok(HviEvaluator::new(front).eval(y))
}

/// Front preprocessed for repeated HVI queries.
#[derive(Debug, Clone)]
pub struct HviEvaluator {
    r: Vec<f64>,
    /// M = 2: sorted by first objective ascending (second strictly descending).
    /// Otherwise insertion order.
    pts: Vec<Vec<f64>>,
    /// M = 1: best incumbent (or the reference point).
    best: f64,
}

impl HviEvaluator {
    pub fn new(front: &ParetoFront) -> Self {
        Self::from_parts(front.ref_point().as_slice(), front.values())
    }

    /// `pts` must already be mutually non-dominated and strictly above `r`.
    pub(crate) fn from_parts<'a>(r: &[f64], pts: impl Iterator<Item = &'a [f64]>) -> Self {
        let mut pts: Vec<Vec<f64>> = pts.map(|p| p.to_vec()).collect();
        let best = pts.iter().map(|p| p[0]).fold(r[0], f64::max);
        if r.len() == 2 {
            pts.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap_or(Ordering::Equal));
        }
        Self {
            r: r.to_vec(),
            pts,
            best,
        }
    }

    pub fn dim(&self) -> usize {
        self.r.len()
    }

    /// Whether `y` adds nothing: it fails to strictly dominate the reference
    /// point or an incumbent weakly dominates it.
    #[inline]
    pub fn is_covered(&self, y: &[f64]) -> bool {
        !strictly_above(y, &self.r) || self.pts.iter().any(|p| weakly_dominates(p, y))
    }

    /// HVI of `y`. Callers guarantee `y.len() == self.dim()`.
    pub fn eval(&self, y: &[f64]) -> f64 {
        match self.r.len() {
            1 => (y[0] - self.best).max(0.0),
            2 => self.eval_2d(y),
            _ => {
                if self.is_covered(y) {
                    return 0.0;
                }
                let shifted: Vec<f64> = y.iter().zip(&self.r).map(|(a, b)| a - b).collect();
                let limited: Vec<Vec<f64>> = self
                    .pts
                    .iter()
                    .map(|p| {
                        p.iter()
                            .zip(&self.r)
                            .zip(&shifted)
                            .map(|((a, b), s)| (a - b).min(*s))
                            .collect::<Vec<f64>>()
                    })
                    .filter(|q| q.iter().all(|v| *v > 0.0))
                    .collect();
                (box_volume(&shifted) - wfg(nondominated(limited))).max(0.0)
            }
        }
    }

    fn eval_2d(&self, y: &[f64]) -> f64 {
        let (r0, r1) = (self.r[0], self.r[1]);
        if y[0] <= r0 || y[1] <= r1 {
            return 0.0;
        }
        // Staircase: over x in (x_{j-1}, x_j] the covered height is y_j.
        // Points with y_j >= y[1] cover that strip completely.
        let start = self.pts.partition_point(|p| p[1] >= y[1]);
        if start > 0 && self.pts[start - 1][0] >= y[0] {
            return 0.0;
        }
        let mut left = if start == 0 { r0 } else { self.pts[start - 1][0].max(r0) };
        let mut total = 0.0;
        for p in &self.pts[start..] {
            if left >= y[0] {
                break;
            }
            let right = p[0].min(y[0]);
            if right > left {
                total += (right - left) * (y[1] - p[1].max(r1));
            }
            left = left.max(p[0]);
        }
        if left < y[0] {
            total += (y[0] - left) * (y[1] - r1);
        }
        total
    }
}
