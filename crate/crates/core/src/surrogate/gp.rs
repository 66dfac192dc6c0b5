use faer::Mat;
use serde::{Deserialize, Serialize};

use super::kernel::{Hyperparameters, KernelKind};
use super::linalg;
use super::optim::{halton, nelder_mead, Bounds};
use super::{Dataset, FeatureKind};
use crate::error::{Error, Result};

const LENGTHSCALE_BOUNDS: (f64, f64) = (1e-2, 1e3);
const VARIANCE_BOUNDS: (f64, f64) = (1e-3, 1e3);
const MAX_NUGGET: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GpConfig {
    pub kernel: KernelKind,
    /// Multi-start count for the likelihood search (at least 8 are used).
    pub restarts: usize,
    /// Training points used by the likelihood search; the fitted model
    /// still conditions on every point.
    pub max_fit_points: usize,
    pub max_evals_per_start: usize,
    pub normalize_outputs: bool,
    /// Noise variance as a fraction of the signal variance.
    pub nugget: f64,
    /// Skip the search and use these `(lengthscale, signal_variance)`.
    pub fixed: Option<(f64, f64)>,
}

impl Default for GpConfig {
    fn default() -> Self {
        Self {
            kernel: KernelKind::Rbf,
            restarts: 8,
            max_fit_points: 256,
            max_evals_per_start: 60,
            normalize_outputs: true,
            nugget: 1e-6,
            fixed: None,
        }
    }
}

impl GpConfig {
    pub fn for_features(kind: FeatureKind) -> Self {
        Self {
            kernel: match kind {
                FeatureKind::Binary => KernelKind::Tanimoto,
                FeatureKind::DenseReal => KernelKind::Rbf,
            },
            ..Self::default()
        }
    }
}

/// One fitted GP.
#[derive(Debug, Clone)]
pub(crate) struct ObjectiveGp {
    pub hyper: Hyperparameters,
    /// Noise variance actually used (after any escalation), normalized scale.
    pub noise: f64,
    pub y_mean: f64,
    pub y_std: f64,
    pub chol: Mat<f64>,
    pub alpha: Vec<f64>,
}

/// Independent GPs, one per objective, sharing the training inputs.
#[derive(Debug, Clone)]
pub struct GpModel {
    pub(crate) feature_kind: FeatureKind,
    pub(crate) train: Vec<Vec<f64>>,
    pub(crate) objectives: Vec<ObjectiveGp>,
}

impl GpModel {
    pub fn hyperparameters(&self) -> Vec<Hyperparameters> {
        self.objectives.iter().map(|o| o.hyper.clone()).collect()
    }

    pub fn n_objectives(&self) -> usize {
        self.objectives.len()
    }

    pub fn feature_kind(&self) -> FeatureKind {
        self.feature_kind
    }

    pub fn n_train(&self) -> usize {
        self.train.len()
    }

    /// Diagonal noise used for objective `m` after any escalation, in
    /// original units.
    pub fn noise_variance(&self, m: usize) -> f64 {
        let o = &self.objectives[m];
        o.noise * o.y_std * o.y_std
    }

    /// Posterior mean and variance of objective `m` at a single point,
    /// in original units.
    pub fn predict_one(&self, m: usize, x: &[f64]) -> (f64, f64) {
        let o = &self.objectives[m];
        let kx = linalg::col(&self.train.iter().map(|t| o.hyper.eval(t, x)).collect::<Vec<_>>());
        let mean: f64 = kx.col(0).iter().zip(&o.alpha).map(|(a, b)| a * b).sum();
        let mut v = kx;
        linalg::solve_lower_in_place(&o.chol, &mut v);
        let vv: f64 = v.col(0).iter().map(|a| a * a).sum();
        let var = (o.hyper.eval(x, x) - vv).max(0.0);
        (o.y_mean + o.y_std * mean, o.y_std * o.y_std * var)
    }
}

fn gram(kind: KernelKind, xs: &[&[f64]]) -> Vec<f64> {
    let n = xs.len();
    let mut base = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let v = kind.base(xs[i], xs[j]);
            base[i * n + j] = v;
            base[j * n + i] = v;
        }
    }
    base
}

fn kernel_matrix(h: &Hyperparameters, base: &[f64], n: usize, noise: f64) -> Mat<f64> {
    Mat::from_fn(n, n, |i, j| h.scale_base(base[i * n + j]) + if i == j { noise } else { 0.0 })
}

/// Factor `K + nugget*s*I`, doubling the nugget up to 1e-2 on failure.
fn factor(h: &Hyperparameters, base: &[f64], n: usize, nugget: f64) -> Option<(Mat<f64>, f64)> {
    let mut nug = nugget;
    loop {
        let noise = nug * h.signal_variance;
        if let Some(l) = linalg::cholesky(&kernel_matrix(h, base, n, noise)) {
            return Some((l, noise));
        }
        if nug >= MAX_NUGGET {
            return None;
        }
        nug = (nug * 2.0).min(MAX_NUGGET);
    }
}

fn log_marginal(h: &Hyperparameters, base: &[f64], y: &[f64], nugget: f64) -> f64 {
    let n = y.len();
    let Some((l, _)) = factor(h, base, n, nugget) else {
        return f64::NEG_INFINITY;
    };
    let mut a = linalg::col(y);
    linalg::solve_lower_in_place(&l, &mut a);
    let quad: f64 = a.col(0).iter().map(|v| v * v).sum();
    let logdet: f64 = (0..n).map(|i| l[(i, i)].ln()).sum();
    -0.5 * quad - logdet - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln()
}

fn normalization(y: &[f64], normalize: bool) -> (f64, f64) {
    if !normalize {
        return (0.0, 1.0);
    }
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    (mean, if std > 1e-12 * mean.abs().max(1.0) { std } else { 1.0 })
}

fn median_distance(xs: &[&[f64]]) -> f64 {
    let mut d: Vec<f64> = Vec::new();
    for i in 0..xs.len() {
        for j in 0..i {
            d.push(super::kernel::sq_dist(xs[i], xs[j]).sqrt());
        }
    }
    d.retain(|v| *v > 0.0);
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(f64::total_cmp);
    d[d.len() / 2]
}

fn search(cfg: &GpConfig, objective: usize, xs: &[&[f64]], y: &[f64]) -> Hyperparameters {
    let make = |p: &[f64]| match cfg.kernel {
        KernelKind::Rbf => Hyperparameters {
            objective,
            kernel: KernelKind::Rbf,
            lengthscale: Some(p[0].exp()),
            signal_variance: p[1].exp(),
        },
        KernelKind::Tanimoto => Hyperparameters {
            objective,
            kernel: KernelKind::Tanimoto,
            lengthscale: None,
            signal_variance: p[0].exp(),
        },
    };
    if let Some((l, s)) = cfg.fixed {
        return make(&match cfg.kernel {
            KernelKind::Rbf => vec![l.ln(), s.ln()],
            KernelKind::Tanimoto => vec![s.ln()],
        });
    }
    let base = gram(cfg.kernel, xs);
    let bounds = match cfg.kernel {
        KernelKind::Rbf => Bounds {
            lo: vec![LENGTHSCALE_BOUNDS.0.ln(), VARIANCE_BOUNDS.0.ln()],
            hi: vec![LENGTHSCALE_BOUNDS.1.ln(), VARIANCE_BOUNDS.1.ln()],
        },
        KernelKind::Tanimoto => Bounds {
            lo: vec![VARIANCE_BOUNDS.0.ln()],
            hi: vec![VARIANCE_BOUNDS.1.ln()],
        },
    };
    let mut starts = vec![match cfg.kernel {
        KernelKind::Rbf => vec![median_distance(xs).ln(), 0.0],
        KernelKind::Tanimoto => vec![0.0],
    }];
    let restarts = cfg.restarts.max(8);
    starts.extend((0..restarts - 1).map(|i| halton(i, &bounds)));

    let neg_lml = |p: &[f64]| -log_marginal(&make(p), &base, y, cfg.nugget);
    let mut best: Option<(Vec<f64>, f64)> = None;
    for s in &starts {
        let m = nelder_mead(neg_lml, s, &bounds, cfg.max_evals_per_start);
        if best.as_ref().is_none_or(|(_, v)| m.value < *v) {
            best = Some((m.x, m.value));
        }
    }
    make(&best.expect("at least one start").0)
}

/// Evenly spaced subset of at most `k` indices.
fn subsample(n: usize, k: usize) -> Vec<usize> {
    if n <= k {
        return (0..n).collect();
    }
    (0..k).map(|i| i * n / k).collect()
}

fn fit_objective(cfg: &GpConfig, data: &Dataset, m: usize) -> Result<ObjectiveGp> {
    let raw: Vec<f64> = data.objectives().iter().map(|y| y[m]).collect();
    let (y_mean, y_std) = normalization(&raw, cfg.normalize_outputs);
    let y: Vec<f64> = raw.iter().map(|v| (v - y_mean) / y_std).collect();

    let idx = subsample(data.len(), cfg.max_fit_points.max(2));
    let xs_sub: Vec<&[f64]> = idx.iter().map(|&i| data.features()[i].as_slice()).collect();
    let y_sub: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
    let hyper = search(cfg, m, &xs_sub, &y_sub);

    let xs: Vec<&[f64]> = data.features().iter().map(Vec::as_slice).collect();
    let base = gram(cfg.kernel, &xs);
    let (chol, noise) = factor(&hyper, &base, xs.len(), cfg.nugget).ok_or_else(|| {
        Error::FitFailure(format!(
            "objective {m}: kernel matrix singular even with nugget {MAX_NUGGET}"
        ))
    })?;
    let mut a = linalg::col(&y);
    linalg::solve_lower_in_place(&chol, &mut a);
    linalg::solve_upper_transpose_in_place(&chol, &mut a);
    let alpha = a.col(0).iter().copied().collect();
    Ok(ObjectiveGp {
        hyper,
        noise,
        y_mean,
        y_std,
        chol,
        alpha,
    })
}

/// Fit one GP per objective. Objectives are fitted independently (and in
/// parallel when enabled).
pub fn fit(data: &Dataset, cfg: &GpConfig) -> Result<GpModel> {
    if data.len() < 2 {
        return Err(Error::invalid(format!("need at least 2 training points, got {}", data.len())));
    }
    let m = data.n_objectives();
    if m == 0 {
        return Err(Error::invalid("dataset has no objectives"));
    }
    if cfg.kernel == KernelKind::Rbf && cfg.fixed.is_some_and(|(l, _)| !(l > 0.0)) {
        return Err(Error::invalid("lengthscale must be positive"));
    }
    if cfg.fixed.is_some_and(|(_, s)| !(s > 0.0)) {
        return Err(Error::invalid("signal variance must be positive"));
    }
    let objectives = crate::par::map_range(m, |j| fit_objective(cfg, data, j))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(GpModel {
        feature_kind: data.feature_kind,
        train: data.features().to_vec(),
        objectives,
    })
}
