//! Objective-space primitives: dominance, the incumbent Pareto front,
//! exact hypervolume and hypervolume improvement, and campaign metrics.
//!
//! All objectives are maximized. Callers negate minimized properties before
//! they enter the crate.

mod hypervolume;
mod metrics;

pub use hypervolume::{hvi, hypervolume, HviEvaluator, MAX_EXACT_DIM};
pub use metrics::{
    fraction_recovered, read_metrics_csv, relative_hvi, write_metrics_csv, MetricRecord,
};

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in M-dimensional outcome space. Non-empty, every entry finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ObjectiveVector(Vec<f64>);

impl ObjectiveVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("objective vector must have at least one component"));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("objective value {v} is not finite")));
        }
        Ok(Self(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ObjectiveVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl AsRef<[f64]> for ObjectiveVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for ObjectiveVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ObjectiveVector> for Vec<f64> {
    fn from(v: ObjectiveVector) -> Self {
        v.0
    }
}

pub(crate) fn check_dims(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

/// `a` dominates `b`: at least as good everywhere, strictly better somewhere.
pub fn dominates(a: &[f64], b: &[f64]) -> Result<bool> {
    check_dims(a.len(), b.len())?;
    Ok(dominates_unchecked(a, b))
}

#[inline]
pub(crate) fn dominates_unchecked(a: &[f64], b: &[f64]) -> bool {
    let mut strict = false;
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return false;
        }
        if x > y {
            strict = true;
        }
    }
    strict
}

/// `a >= b` in every component (includes equality).
#[inline]
pub(crate) fn weakly_dominates(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x >= y)
}

#[inline]
pub(crate) fn strictly_above(a: &[f64], r: &[f64]) -> bool {
    a.iter().zip(r).all(|(x, y)| x > y)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontPoint {
    pub id: Option<String>,
    pub values: ObjectiveVector,
}

/// Mutually non-dominated incumbents, each strictly dominating `ref_point`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParetoFront {
    ref_point: ObjectiveVector,
    points: Vec<FrontPoint>,
}

impl ParetoFront {
    pub fn new(ref_point: ObjectiveVector) -> Self {
        Self {
            ref_point,
            points: Vec::new(),
        }
    }

    /// Build a front by inserting every point in order.
    pub fn from_points<I>(ref_point: ObjectiveVector, points: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Option<String>, ObjectiveVector)>,
    {
        let mut front = Self::new(ref_point);
        for (id, y) in points {
            front.insert(y, id)?;
        }
        Ok(front)
    }

    pub fn ref_point(&self) -> &ObjectiveVector {
        &self.ref_point
    }

    pub fn dim(&self) -> usize {
        self.ref_point.dim()
    }

    pub fn points(&self) -> &[FrontPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn values(&self) -> impl Iterator<Item = &[f64]> {
        self.points.iter().map(|p| p.values.as_slice())
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.points.iter().filter_map(|p| p.id.as_deref())
    }

    /// Insert `y` if it strictly dominates the reference point and no
    /// incumbent weakly dominates it; incumbents it dominates are dropped.
    /// Returns whether `y` entered the front.
    pub fn insert(&mut self, y: ObjectiveVector, id: Option<String>) -> Result<bool> {
        check_dims(self.dim(), y.dim())?;
        if !strictly_above(&y, &self.ref_point) {
            return Ok(false);
        }
        if self.points.iter().any(|p| weakly_dominates(&p.values, &y)) {
            return Ok(false);
        }
        self.points.retain(|p| !dominates_unchecked(&y, &p.values));
        self.points.push(FrontPoint { id, values: y });
        Ok(true)
    }

    /// Whether `y` would be rejected by [`insert`](Self::insert) because an
    /// incumbent weakly dominates it.
    pub fn covers(&self, y: &[f64]) -> bool {
        self.points.iter().any(|p| weakly_dominates(&p.values, y))
    }

    pub fn hypervolume(&self) -> Result<f64> {
        hypervolume(&self.points.iter().map(|p| p.values.as_slice()).collect::<Vec<_>>(), &self.ref_point)
    }

    pub fn hvi(&self, y: &[f64]) -> Result<f64> {
        hvi(y, self)
    }

    pub fn to_document(&self) -> FrontDocument {
        FrontDocument {
            ref_point: self.ref_point.as_slice().to_vec(),
            points: self
                .points
                .iter()
                .map(|p| DocumentPoint {
                    id: p.id.clone(),
                    values: p.values.as_slice().to_vec(),
                })
                .collect(),
        }
    }

    /// Rebuild from a document; points that would not survive `insert` are
    /// dropped.
    pub fn from_document(doc: &FrontDocument) -> Result<Self> {
        let r = ObjectiveVector::new(doc.ref_point.clone())?;
        let pts = doc
            .points
            .iter()
            .map(|p| Ok((p.id.clone(), ObjectiveVector::new(p.values.clone())?)))
            .collect::<Result<Vec<_>>>()?;
        Self::from_points(r, pts)
    }
}

/// Functional form of [`ParetoFront::insert`].
pub fn update_front(front: &ParetoFront, y: ObjectiveVector, id: Option<String>) -> Result<ParetoFront> {
    let mut next = front.clone();
    next.insert(y, id)?;
    Ok(next)
}

/// On-disk front: `{"ref_point":[...], "points":[{"id":..., "values":[...]}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontDocument {
    pub ref_point: Vec<f64>,
    pub points: Vec<DocumentPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentPoint {
    #[serde(default)]
    pub id: Option<String>,
    pub values: Vec<f64>,
}

impl FrontDocument {
    pub fn hypervolume(&self, ref_override: Option<&[f64]>) -> Result<f64> {
        let r = ref_override.unwrap_or(&self.ref_point);
        let pts: Vec<&[f64]> = self.points.iter().map(|p| p.values.as_slice()).collect();
        hypervolume(&pts, r)
    }
}

/// Indices of the non-dominated members of `points` (exact duplicates keep
/// the first occurrence only when `dedup` is set).
pub fn non_dominated_indices<P: AsRef<[f64]>>(points: &[P], dedup: bool) -> Vec<usize> {
    (0..points.len())
        .filter(|&i| {
            let pi = points[i].as_ref();
            !points.iter().enumerate().any(|(j, pj)| {
                let pj = pj.as_ref();
                dominates_unchecked(pj, pi) || (dedup && j < i && pj == pi)
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ov(v: &[f64]) -> ObjectiveVector {
        ObjectiveVector::new(v.to_vec()).unwrap()
    }

    fn front(r: &[f64], pts: &[&[f64]]) -> ParetoFront {
        ParetoFront::from_points(ov(r), pts.iter().map(|p| (None, ov(p)))).unwrap()
    }

    fn sorted_values(f: &ParetoFront) -> Vec<Vec<f64>> {
        let mut v: Vec<Vec<f64>> = f.values().map(|p| p.to_vec()).collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    }

    #[test]
    fn dominance_examples() {
        assert!(dominates(&[2.0, 2.0], &[1.0, 1.0]).unwrap());
        assert!(!dominates(&[1.0, 1.0], &[1.0, 1.0]).unwrap());
        assert!(!dominates(&[2.0, 0.0], &[1.0, 1.0]).unwrap());
        assert!(matches!(
            dominates(&[1.0], &[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn objective_vector_rejects_non_finite() {
        assert!(ObjectiveVector::new(vec![]).is_err());
        assert!(ObjectiveVector::new(vec![1.0, f64::NAN]).is_err());
        assert!(ObjectiveVector::new(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn update_front_examples() {
        let f = front(&[0.0, 0.0], &[&[1.0, 1.0]]);
        let f = update_front(&f, ov(&[2.0, 2.0]), None).unwrap();
        assert_eq!(sorted_values(&f), vec![vec![2.0, 2.0]]);

        let f = front(&[0.0, 0.0], &[&[1.0, 2.0], &[2.0, 1.0]]);
        let f = update_front(&f, ov(&[1.5, 1.5]), None).unwrap();
        assert_eq!(
            sorted_values(&f),
            vec![vec![1.0, 2.0], vec![1.5, 1.5], vec![2.0, 1.0]]
        );

        let f = front(&[0.0, 0.0], &[&[2.0, 2.0]]);
        let f = update_front(&f, ov(&[1.0, 1.0]), None).unwrap();
        assert_eq!(sorted_values(&f), vec![vec![2.0, 2.0]]);
    }

    #[test]
    fn equal_point_and_non_dominating_ref_are_rejected() {
        let mut f = front(&[0.0, 0.0], &[&[1.0, 1.0]]);
        assert!(!f.insert(ov(&[1.0, 1.0]), Some("dup".into())).unwrap());
        assert!(!f.insert(ov(&[5.0, 0.0]), None).unwrap());
        assert_eq!(f.len(), 1);
        // tie in one coordinate, incomparable: both kept
        assert!(f.insert(ov(&[0.5, 3.0]), None).unwrap());
        assert!(f.insert(ov(&[1.0, 0.5]), None).is_ok());
        assert_eq!(f.len(), 2);
    }

    #[test]
    fn document_round_trip() {
        let mut f = ParetoFront::new(ov(&[0.0, 0.0]));
        f.insert(ov(&[1.0, 2.0]), Some("a".into())).unwrap();
        f.insert(ov(&[2.0, 1.0]), None).unwrap();
        let json = serde_json::to_string(&f.to_document()).unwrap();
        assert!(json.contains("\"ref_point\""));
        let doc: FrontDocument = serde_json::from_str(&json).unwrap();
        assert_eq!(ParetoFront::from_document(&doc).unwrap(), f);
        assert_eq!(doc.hypervolume(None).unwrap(), 3.0);
    }

    #[test]
    fn non_dominated_indices_dedups() {
        let pts = vec![vec![1.0, 1.0], vec![1.0, 1.0], vec![0.5, 0.5], vec![0.0, 2.0]];
        assert_eq!(non_dominated_indices(&pts, true), vec![0, 3]);
        assert_eq!(non_dominated_indices(&pts, false), vec![0, 1, 3]);
    }
}
