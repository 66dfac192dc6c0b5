//! Thin wrappers over faer, always sequential so results do not depend on
//! the thread count.

use faer::{Mat, Par, Side};

/// Lower Cholesky factor, or `None` if `a` is not numerically positive definite.
pub(crate) fn cholesky(a: &Mat<f64>) -> Option<Mat<f64>> {
    a.llt(Side::Lower).ok().map(|c| c.L().to_owned())
}

/// Overwrite `rhs` with `L^{-1} rhs`.
pub(crate) fn solve_lower_in_place(l: &Mat<f64>, rhs: &mut Mat<f64>) {
    faer::linalg::triangular_solve::solve_lower_triangular_in_place(l.as_ref(), rhs.as_mut(), Par::Seq);
}

/// `L^{-T} rhs`, in place.
pub(crate) fn solve_upper_transpose_in_place(l: &Mat<f64>, rhs: &mut Mat<f64>) {
    faer::linalg::triangular_solve::solve_upper_triangular_in_place(
        l.transpose(),
        rhs.as_mut(),
        Par::Seq,
    );
}

/// `a^T b`.
pub(crate) fn at_b(a: &Mat<f64>, b: &Mat<f64>) -> Mat<f64> {
    let mut out = Mat::<f64>::zeros(a.ncols(), b.ncols());
    faer::linalg::matmul::matmul(
        out.as_mut(),
        faer::Accum::Replace,
        a.transpose(),
        b.as_ref(),
        1.0,
        Par::Seq,
    );
    out
}

pub(crate) fn col(v: &[f64]) -> Mat<f64> {
    Mat::from_fn(v.len(), 1, |i, _| v[i])
}

/// Cholesky with diagonal jitter escalation: `start`, `start*growth`, ...,
/// up to `max`. Returns the factor and the jitter that succeeded (0 if none
/// was needed).
pub(crate) fn cholesky_escalating(
    a: &Mat<f64>,
    start: f64,
    growth: f64,
    max: f64,
    try_plain: bool,
) -> Option<(Mat<f64>, f64)> {
    if try_plain {
        if let Some(l) = cholesky(a) {
            return Some((l, 0.0));
        }
    }
    let mut jitter = start;
    while jitter <= max * (1.0 + 1e-12) {
        let mut b = a.clone();
        for i in 0..b.nrows() {
            b[(i, i)] += jitter;
        }
        if let Some(l) = cholesky(&b) {
            return Some((l, jitter));
        }
        jitter *= growth;
    }
    None
}
