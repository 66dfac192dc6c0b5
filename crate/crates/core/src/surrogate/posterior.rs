use faer::Mat;
use rand::Rng as _;
use rand_distr::StandardNormal;

use super::gp::GpModel;
use super::linalg;
use crate::error::{Error, Result};
use crate::pareto::ObjectiveVector;
use crate::rng;

const JITTER_START: f64 = 1e-8;
const JITTER_MAX: f64 = 1e-4;
const DRAW_BLOCK: usize = 16;

/// One joint draw over the pool: an `N x M` matrix, row `i` is candidate `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    n: usize,
    m: usize,
    values: Vec<f64>,
}

impl Sample {
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let m = rows.first().map_or(0, Vec::len);
        Self {
            n: rows.len(),
            m,
            values: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub(crate) fn set_row(&mut self, i: usize, row: &[f64]) {
        self.values[i * self.m..(i + 1) * self.m].copy_from_slice(row);
    }

    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.m..(i + 1) * self.m]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.m.max(1))
    }
}

/// Anything that can produce seeded joint draws over a pool. Draw `index`
/// under `seed` must be a pure function of `(seed, index)`.
pub trait PosteriorSampler: Sync {
    fn pool_size(&self) -> usize;
    fn n_objectives(&self) -> usize;
    /// Posterior mean objective vector of candidate `i`.
    fn mean(&self, i: usize) -> &[f64];
    fn draw(&self, seed: u64, index: u64) -> Sample;

    /// Draws `start..start+count`; identical to calling [`draw`](Self::draw)
    /// for each index.
    fn draw_many(&self, seed: u64, start: u64, count: usize) -> Vec<Sample> {
        (0..count as u64).map(|k| self.draw(seed, start + k)).collect()
    }
}

/// Gaussian posterior over a pool, objectives independent.
#[derive(Debug, Clone)]
pub struct Posterior {
    ids: Vec<String>,
    n: usize,
    m: usize,
    /// `N x M`, row-major.
    mean: Vec<f64>,
    /// Per objective, `N x N` row-major (symmetrized, jittered if needed).
    cov: Vec<Vec<f64>>,
    /// Per objective, packed lower-triangular rows of the sampling factor.
    factor: Vec<Vec<f64>>,
}

#[inline]
fn packed_row(factor: &[f64], i: usize) -> &[f64] {
    let start = i * (i + 1) / 2;
    &factor[start..start + i + 1]
}

/// Dot product with four fixed lanes; the summation order depends only on
/// the length, so every caller gets bit-identical results.
#[inline]
fn dot4(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (mut s0, mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0, 0.0);
    let chunks = n / 4;
    for c in 0..chunks {
        let k = 4 * c;
        s0 += a[k] * b[k];
        s1 += a[k + 1] * b[k + 1];
        s2 += a[k + 2] * b[k + 2];
        s3 += a[k + 3] * b[k + 3];
    }
    for k in 4 * chunks..n {
        s0 += a[k] * b[k];
    }
    (s0 + s1) + (s2 + s3)
}

/// Symmetrize `c`, then factor it. Rows that are identically zero are
/// deterministic and get zero factor rows; the rest is factored with plain
/// Cholesky, falling back to jitter 1e-8, 1e-7, ..., 1e-4. On return `c`
/// holds the matrix that was actually factored.
fn factor_psd(c: &mut Mat<f64>, scale: f64) -> Result<Vec<f64>> {
    let n = c.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (c[(i, j)] + c[(j, i)]);
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    let active: Vec<usize> = (0..n)
        .filter(|&i| (0..n).any(|j| c[(i, j)] != 0.0))
        .collect();
    let sub = Mat::from_fn(active.len(), active.len(), |a, b| c[(active[a], active[b])]);
    let (l, jitter) = linalg::cholesky_escalating(&sub, JITTER_START, 10.0, JITTER_MAX, true)
        .ok_or_else(|| {
            Error::Numerical(format!(
                "posterior covariance not factorizable with jitter up to {JITTER_MAX}"
            ))
        })?;
    let mut packed = vec![0.0; n * (n + 1) / 2];
    for (a, &i) in active.iter().enumerate() {
        c[(i, i)] += jitter;
        let start = i * (i + 1) / 2;
        for (b, &j) in active.iter().enumerate().take(a + 1) {
            packed[start + j] = scale * l[(a, b)];
        }
    }
    Ok(packed)
}

impl Posterior {
    /// Build from explicit moments: `mean[i]` is candidate `i`'s mean vector,
    /// `cov[m]` the `N x N` row-major covariance of objective `m`.
    pub fn from_moments(ids: Vec<String>, mean: Vec<Vec<f64>>, cov: Vec<Vec<f64>>) -> Result<Self> {
        let n = mean.len();
        if n == 0 {
            return Err(Error::invalid("posterior over an empty pool"));
        }
        let m = mean[0].len();
        if ids.len() != n || mean.iter().any(|r| r.len() != m) || cov.len() != m {
            return Err(Error::invalid("inconsistent posterior shapes"));
        }
        if mean.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("posterior mean must be finite"));
        }
        let mut covs = Vec::with_capacity(m);
        let mut factors = Vec::with_capacity(m);
        for c in cov {
            if c.len() != n * n {
                return Err(Error::invalid("covariance must be N x N"));
            }
            let mut mat = Mat::from_fn(n, n, |i, j| c[i * n + j]);
            factors.push(factor_psd(&mut mat, 1.0)?);
            covs.push(dense(&mat, 1.0));
        }
        Ok(Self {
            ids,
            n,
            m,
            mean: mean.into_iter().flatten().collect(),
            cov: covs,
            factor: factors,
        })
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn mean_row(&self, i: usize) -> &[f64] {
        &self.mean[i * self.m..(i + 1) * self.m]
    }

    /// Covariance entry `(i, j)` of objective `m`.
    pub fn cov(&self, m: usize, i: usize, j: usize) -> f64 {
        self.cov[m][i * self.n + j]
    }

    pub fn variance(&self, m: usize, i: usize) -> f64 {
        self.cov(m, i, i)
    }

    fn fill(&self, z: &[f64], out: &mut [f64]) {
        let n = self.n;
        for (j, f) in self.factor.iter().enumerate() {
            let zj = &z[j * n..(j + 1) * n];
            for i in 0..n {
                out[i * self.m + j] = self.mean[i * self.m + j] + dot4(packed_row(f, i), &zj[..=i]);
            }
        }
    }

    fn normals(&self, seed: u64, index: u64) -> Vec<f64> {
        let mut r = rng::stream(seed, index);
        (0..self.n * self.m).map(|_| r.sample(StandardNormal)).collect()
    }
}

fn dense(mat: &Mat<f64>, scale: f64) -> Vec<f64> {
    let n = mat.nrows();
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = scale * mat[(i, j)];
        }
    }
    out
}

impl PosteriorSampler for Posterior {
    fn pool_size(&self) -> usize {
        self.n
    }

    fn n_objectives(&self) -> usize {
        self.m
    }

    fn mean(&self, i: usize) -> &[f64] {
        self.mean_row(i)
    }

    fn draw(&self, seed: u64, index: u64) -> Sample {
        let z = self.normals(seed, index);
        let mut values = vec![0.0; self.n * self.m];
        self.fill(&z, &mut values);
        Sample {
            n: self.n,
            m: self.m,
            values,
        }
    }

    fn draw_many(&self, seed: u64, start: u64, count: usize) -> Vec<Sample> {
        let n = self.n;
        let zs: Vec<Vec<f64>> = (0..count as u64).map(|k| self.normals(seed, start + k)).collect();
        let mut out: Vec<Vec<f64>> = vec![vec![0.0; n * self.m]; count];
        // Row-outer loop so each factor row is read once per block.
        for (j, f) in self.factor.iter().enumerate() {
            for i in 0..n {
                let row = packed_row(f, i);
                let mu = self.mean[i * self.m + j];
                for (z, o) in zs.iter().zip(out.iter_mut()) {
                    o[i * self.m + j] = mu + dot4(row, &z[j * n..j * n + i + 1]);
                }
            }
        }
        out.into_iter()
            .map(|values| Sample {
                n,
                m: self.m,
                values,
            })
            .collect()
    }
}

/// Exact GP posterior over a pool: predictive mean and full covariance per
/// objective.
pub fn posterior(model: &GpModel, ids: Vec<String>, pool: &[Vec<f64>]) -> Result<Posterior> {
    let n = pool.len();
    if n == 0 {
        return Err(Error::invalid("posterior over an empty pool"));
    }
    if ids.len() != n {
        return Err(Error::invalid("pool ids and features differ in length"));
    }
    let dim = model.train.first().map_or(0, Vec::len);
    if let Some(bad) = pool.iter().find(|x| x.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: bad.len(),
        });
    }
    let m = model.objectives.len();
    let per_objective = crate::par::map_range(m, |j| -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let o = &model.objectives[j];
        let h = &o.hyper;
        let ks = Mat::from_fn(model.train.len(), n, |a, b| h.eval(&model.train[a], &pool[b]));
        let alpha = linalg::col(&o.alpha);
        let mu = linalg::at_b(&ks, &alpha);
        let mut v = ks;
        linalg::solve_lower_in_place(&o.chol, &mut v);
        let vtv = linalg::at_b(&v, &v);
        drop(v);
        let mut c = Mat::from_fn(n, n, |a, b| {
            if b > a {
                0.0
            } else {
                h.eval(&pool[a], &pool[b]) - vtv[(a, b)]
            }
        });
        for a in 0..n {
            for b in a + 1..n {
                c[(a, b)] = c[(b, a)];
            }
        }
        let factor = factor_psd(&mut c, o.y_std)?;
        let var_scale = o.y_std * o.y_std;
        let mean: Vec<f64> = (0..n).map(|a| o.y_mean + o.y_std * mu[(a, 0)]).collect();
        Ok((mean, dense(&c, var_scale), factor))
    });
    let mut mean = vec![0.0; n * m];
    let mut cov = Vec::with_capacity(m);
    let mut factor = Vec::with_capacity(m);
    for (j, res) in per_objective.into_iter().enumerate() {
        let (mu, c, f) = res?;
        for (i, v) in mu.into_iter().enumerate() {
            mean[i * m + j] = v;
        }
        cov.push(c);
        factor.push(f);
    }
    Ok(Posterior {
        ids,
        n,
        m,
        mean,
        cov,
        factor,
    })
}

/// `L` joint draws, `sample_joint(..)[l] == post.draw(seed, l)`.
pub fn sample_joint<S: PosteriorSampler + ?Sized>(post: &S, count: usize, seed: u64) -> Result<Vec<Sample>> {
    if count == 0 {
        return Err(Error::invalid("need at least one sample"));
    }
    let blocks = count.div_ceil(DRAW_BLOCK);
    Ok(crate::par::map_range(blocks, |b| {
        let start = b * DRAW_BLOCK;
        post.draw_many(seed, start as u64, DRAW_BLOCK.min(count - start))
    })
    .into_iter()
    .flatten()
    .collect())
}

/// Independent per-candidate discrete distributions (finite atoms). Useful
/// for ensembles of parametric surrogates and for exactly enumerable tests.
#[derive(Debug, Clone)]
pub struct DiscretePosterior {
    m: usize,
    /// Per candidate: cumulative probabilities and atom values.
    cumulative: Vec<Vec<f64>>,
    atoms: Vec<Vec<Vec<f64>>>,
    probs: Vec<Vec<f64>>,
    means: Vec<Vec<f64>>,
}

impl DiscretePosterior {
    /// `atoms[i]` lists `(probability, value)` pairs for candidate `i`;
    /// probabilities must be non-negative and sum to 1.
    pub fn new(atoms: Vec<Vec<(f64, ObjectiveVector)>>) -> Result<Self> {
        let m = atoms
            .first()
            .and_then(|a| a.first())
            .map(|(_, y)| y.dim())
            .ok_or_else(|| Error::invalid("discrete posterior needs at least one atom"))?;
        let mut cumulative = Vec::new();
        let mut values = Vec::new();
        let mut probs = Vec::new();
        let mut means = Vec::new();
        for (i, list) in atoms.into_iter().enumerate() {
            if list.is_empty() {
                return Err(Error::invalid(format!("candidate {i} has no atoms")));
            }
            let total: f64 = list.iter().map(|(p, _)| *p).sum();
            if list.iter().any(|(p, y)| !(*p >= 0.0) || y.dim() != m) || (total - 1.0).abs() > 1e-9 {
                return Err(Error::invalid(format!("candidate {i}: atoms must be {m}-dimensional with probabilities summing to 1")));
            }
            let mut acc = 0.0;
            let mut cum = Vec::with_capacity(list.len());
            let mut mean = vec![0.0; m];
            for (p, y) in &list {
                acc += p;
                cum.push(acc);
                for (mu, v) in mean.iter_mut().zip(y.iter()) {
                    *mu += p * v;
                }
            }
            cumulative.push(cum);
            probs.push(list.iter().map(|(p, _)| *p).collect());
            values.push(list.into_iter().map(|(_, y)| y.into_inner()).collect());
            means.push(mean);
        }
        Ok(Self {
            m,
            cumulative,
            atoms: values,
            probs,
            means,
        })
    }

    /// `(probabilities, values)` of candidate `i`'s atoms.
    pub fn atoms(&self, i: usize) -> (&[f64], &[Vec<f64>]) {
        (&self.probs[i], &self.atoms[i])
    }
}

impl PosteriorSampler for DiscretePosterior {
    fn pool_size(&self) -> usize {
        self.atoms.len()
    }

    fn n_objectives(&self) -> usize {
        self.m
    }

    fn mean(&self, i: usize) -> &[f64] {
        &self.means[i]
    }

    fn draw(&self, seed: u64, index: u64) -> Sample {
        let mut r = rng::stream(seed, index);
        let mut values = Vec::with_capacity(self.atoms.len() * self.m);
        for (cum, atoms) in self.cumulative.iter().zip(&self.atoms) {
            let u: f64 = r.random::<f64>() * cum[cum.len() - 1];
            let k = cum.partition_point(|c| *c <= u).min(atoms.len() - 1);
            values.extend_from_slice(&atoms[k]);
        }
        Sample {
            n: self.atoms.len(),
            m: self.m,
            values,
        }
    }
}
