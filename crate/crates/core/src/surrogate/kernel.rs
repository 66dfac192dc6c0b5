use serde::{Deserialize, Serialize};

/// Covariance functions on feature vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    /// Isotropic squared exponential, for dense real features.
    Rbf,
    /// Tanimoto (Jaccard on binary vectors, MinMax-like on counts).
    Tanimoto,
}

/// Kernel hyperparameters for one objective, in the checkpoint's JSON shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub objective: usize,
    pub kernel: KernelKind,
    /// Absent for Tanimoto.
    pub lengthscale: Option<f64>,
    pub signal_variance: f64,
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Unscaled Tanimoto similarity `<a,b> / (|a|^2 + |b|^2 - <a,b>)`, 1 for two
/// zero vectors.
pub(crate) fn tanimoto(a: &[f64], b: &[f64]) -> f64 {
    let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    let denom = aa + bb - ab;
    if denom <= 0.0 {
        1.0
    } else {
        ab / denom
    }
}

impl Hyperparameters {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match self.kernel {
            KernelKind::Rbf => {
                let l = self.lengthscale.unwrap_or(1.0);
                self.signal_variance * (-0.5 * sq_dist(a, b) / (l * l)).exp()
            }
            KernelKind::Tanimoto => self.signal_variance * tanimoto(a, b),
        }
    }

    /// Kernel value from a precomputed base quantity (squared distance for
    /// RBF, raw similarity for Tanimoto).
    pub(crate) fn scale_base(&self, base: f64) -> f64 {
        match self.kernel {
            KernelKind::Rbf => {
                let l = self.lengthscale.unwrap_or(1.0);
                self.signal_variance * (-0.5 * base / (l * l)).exp()
            }
            KernelKind::Tanimoto => self.signal_variance * base,
        }
    }
}

impl KernelKind {
    pub(crate) fn base(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            KernelKind::Rbf => sq_dist(a, b),
            KernelKind::Tanimoto => tanimoto(a, b),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tani(s: f64) -> Hyperparameters {
        Hyperparameters {
            objective: 0,
            kernel: KernelKind::Tanimoto,
            lengthscale: None,
            signal_variance: s,
        }
    }

    #[test]
    fn tanimoto_known_values() {
        let k = tani(1.0);
        assert_eq!(k.eval(&[1.0, 1.0, 0.0], &[1.0, 0.0, 1.0]), 1.0 / 3.0);
        assert_eq!(k.eval(&[0.0, 0.0], &[0.0, 0.0]), 1.0);
        assert_eq!(k.eval(&[1.0, 0.0], &[0.0, 1.0]), 0.0);
    }

    #[test]
    fn rbf_decays_with_distance() {
        let k = Hyperparameters {
            objective: 0,
            kernel: KernelKind::Rbf,
            lengthscale: Some(2.0),
            signal_variance: 3.0,
        };
        assert_eq!(k.eval(&[1.0], &[1.0]), 3.0);
        assert!((k.eval(&[0.0], &[2.0]) - 3.0 * (-0.5f64).exp()).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn tanimoto_bounds_on_binary(
            a in prop::collection::vec(prop::bool::ANY, 12),
            b in prop::collection::vec(prop::bool::ANY, 12),
            s in 1e-3f64..1e3,
        ) {
            let a: Vec<f64> = a.into_iter().map(|x| x as u8 as f64).collect();
            let b: Vec<f64> = b.into_iter().map(|x| x as u8 as f64).collect();
            let k = tani(s);
            prop_assert!((k.eval(&a, &a) - s).abs() <= 1e-12 * s);
            let v = k.eval(&a, &b);
            prop_assert!(v >= 0.0 && v <= s * (1.0 + 1e-12));
        }
    }
}
