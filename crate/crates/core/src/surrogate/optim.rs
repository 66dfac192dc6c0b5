//! Box-bounded Nelder-Mead minimizer for the low-dimensional hyperparameter
//! search. Points are clamped into the box after every move.

pub(crate) struct Bounds {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Bounds {
    fn clamp(&self, x: &mut [f64]) {
        for ((v, lo), hi) in x.iter_mut().zip(&self.lo).zip(&self.hi) {
            *v = v.clamp(*lo, *hi);
        }
    }
}

pub(crate) struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
}

pub(crate) fn nelder_mead<F>(f: F, start: &[f64], bounds: &Bounds, max_evals: usize) -> Minimum
where
    F: Fn(&[f64]) -> f64,
{
    let d = start.len();
    let eval = |x: &[f64]| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut x0 = start.to_vec();
    bounds.clamp(&mut x0);
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(d + 1);
    let v0 = eval(&x0);
    simplex.push((x0.clone(), v0));
    for k in 0..d {
        let mut x = x0.clone();
        let span = 0.1 * (bounds.hi[k] - bounds.lo[k]);
        x[k] = if x[k] + span <= bounds.hi[k] { x[k] + span } else { x[k] - span };
        bounds.clamp(&mut x);
        let v = eval(&x);
        simplex.push((x, v));
    }
    let mut evals = d + 1;

    while evals < max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[d].1;
        let size = simplex[1..]
            .iter()
            .map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if (worst - best).abs() <= 1e-10 * (1.0 + best.abs()) && size < 1e-6 {
            break;
        }
        let centroid: Vec<f64> = (0..d)
            .map(|k| simplex[..d].iter().map(|(x, _)| x[k]).sum::<f64>() / d as f64)
            .collect();
        let along = |t: f64| {
            let mut x: Vec<f64> = centroid
                .iter()
                .zip(&simplex[d].0)
                .map(|(c, w)| c + t * (w - c))
                .collect();
            bounds.clamp(&mut x);
            x
        };
        let xr = along(-1.0);
        let fr = eval(&xr);
        evals += 1;
        if fr < simplex[0].1 {
            let xe = along(-2.0);
            let fe = eval(&xe);
            evals += 1;
            simplex[d] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[d - 1].1 {
            simplex[d] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[d].1 {
                let x = along(-0.5);
                let v = eval(&x);
                (x, v)
            } else {
                let x = along(0.5);
                let v = eval(&x);
                (x, v)
            };
            evals += 1;
            if fc < simplex[d].1.min(fr) {
                simplex[d] = (xc, fc);
            } else {
                let head = simplex[0].0.clone();
                for s in simplex.iter_mut().skip(1) {
                    let mut x: Vec<f64> = head.iter().zip(&s.0).map(|(h, v)| h + 0.5 * (v - h)).collect();
                    bounds.clamp(&mut x);
                    s.1 = eval(&x);
                    s.0 = x;
                    evals += 1;
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, value) = simplex.swap_remove(0);
    Minimum { x, value }
}

/// Radical-inverse (Halton) point `i` in `[lo, hi]^d` for the given bases.
pub(crate) fn halton(i: usize, bounds: &Bounds) -> Vec<f64> {
    const BASES: [usize; 4] = [2, 3, 5, 7];
    (0..bounds.lo.len())
        .map(|k| {
            let base = BASES[k % BASES.len()];
            let (mut f, mut r, mut n) = (1.0, 0.0, i + 1);
            while n > 0 {
                f /= base as f64;
                r += f * (n % base) as f64;
                n /= base;
            }
            bounds.lo[k] + r * (bounds.hi[k] - bounds.lo[k])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_interior_minimum() {
        let b = Bounds {
            lo: vec![-5.0, -5.0],
            hi: vec![5.0, 5.0],
        };
        let m = nelder_mead(|x| (x[0] - 1.0).powi(2) + 3.0 * (x[1] + 2.0).powi(2), &[4.0, 4.0], &b, 500);
        assert!((m.x[0] - 1.0).abs() < 1e-3 && (m.x[1] + 2.0).abs() < 1e-3, "{:?}", m.x);
    }

    #[test]
    fn respects_bounds() {
        let b = Bounds {
            lo: vec![0.0],
            hi: vec![1.0],
        };
        let m = nelder_mead(|x| -x[0], &[0.2], &b, 200);
        assert!((m.x[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn halton_stays_in_box() {
        let b = Bounds {
            lo: vec![-1.0, 10.0],
            hi: vec![1.0, 20.0],
        };
        for i in 0..50 {
            let p = halton(i, &b);
            assert!(p[0] >= -1.0 && p[0] <= 1.0 && p[1] >= 10.0 && p[1] <= 20.0);
        }
    }
}
