//! Dense BFGS with backtracking line search.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BfgsOptions {
    pub max_iter: usize,
    /// Stop when `|grad|_inf <= gtol (1 + |f|)`.
    pub gtol: f64,
    /// Stop when the relative decrease of one step is below `ftol`.
    pub ftol: f64,
    /// Largest Euclidean norm of the first trial step.
    pub initial_step: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self { max_iter: 200, gtol: 1e-7, ftol: 1e-12, initial_step: 0.05 }
    }
}

#[derive(Clone, Debug)]
pub struct BfgsResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimizes `f`; `obj(x)` returns the value and gradient and may return a
/// non-finite value to reject a point.
pub fn bfgs(mut obj: impl FnMut(&[f64]) -> (f64, Vec<f64>), x0: &[f64], opts: &BfgsOptions) -> BfgsResult {
    let n = x0.len();
    let mut x = x0.to_vec();
    let (mut f, mut g) = obj(&x);
    if n == 0 || !f.is_finite() {
        return BfgsResult { x, f, iterations: 0, converged: n == 0 };
    }
    let mut h = nalgebra::DMatrix::<f64>::identity(n, n);
    let gmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if gmax > 0.0 {
        let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        h *= opts.initial_step / gn;
    }
    let mut first = true;
    for it in 0..opts.max_iter {
        let gmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if gmax <= opts.gtol * (1.0 + f.abs()) {
            return BfgsResult { x, f, iterations: it, converged: true };
        }
        let gv = nalgebra::DVector::from_column_slice(&g);
        let mut p = -(&h * &gv);
        let mut slope = p.dot(&gv);
        if slope >= 0.0 {
            // lost positive definiteness: restart along steepest descent
            h = nalgebra::DMatrix::identity(n, n) * (opts.initial_step / gv.norm());
            p = -(&h * &gv);
            slope = p.dot(&gv);
        }
        let mut alpha = 1.0;
        let mut next = None;
        for _ in 0..40 {
            let xt: Vec<f64> = x.iter().zip(p.iter()).map(|(a, b)| a + alpha * b).collect();
            let (ft, gt) = obj(&xt);
            if ft.is_finite() && ft <= f + 1e-4 * alpha * slope {
                next = Some((xt, ft, gt));
                break;
            }
            alpha *= 0.5;
        }
        let Some((xn, fnew, gn)) = next else {
            return BfgsResult { x, f, iterations: it, converged: false };
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        let decrease = f - fnew;
        (x, f, g) = (xn, fnew, gn);
        if decrease <= opts.ftol * f.abs().max(1e-300) {
            return BfgsResult { x, f, iterations: it + 1, converged: true };
        }
        if sy > 1e-12 * s.iter().map(|v| v * v).sum::<f64>().sqrt() * y.iter().map(|v| v * v).sum::<f64>().sqrt() {
            let sv = nalgebra::DVector::from_vec(s);
            let yv = nalgebra::DVector::from_vec(y);
            if first {
                h = nalgebra::DMatrix::identity(n, n) * (sy / yv.dot(&yv));
                first = false;
            }
            let rho = 1.0 / sy;
            let hy = &h * &yv;
            let yhy = yv.dot(&hy);
            // H+ = H - rho (s hy^T + hy s^T) + (rho^2 yHy + rho) s s^T
            h -= rho * (&sv * hy.transpose() + &hy * sv.transpose());
            h += (rho * rho * yhy + rho) * (&sv * sv.transpose());
        }
    }
    BfgsResult { x, f, iterations: opts.max_iter, converged: false }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let r = bfgs(
            |x| {
                let (a, b) = (x[0], x[1]);
                let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
                (f, vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)])
            },
            &[-1.2, 1.0],
            &BfgsOptions { max_iter: 500, gtol: 1e-10, ftol: 0.0, initial_step: 0.1 },
        );
        assert!((r.x[0] - 1.0).abs() < 1e-5 && (r.x[1] - 1.0).abs() < 1e-5, "{r:?}");
    }

    #[test]
    fn rejects_infeasible_region() {
        // minimum of (x-2)^2 but x >= 1 is infeasible
        let r = bfgs(
            |x| if x[0] >= 1.0 { (f64::INFINITY, vec![0.0]) } else { ((x[0] - 2.0).powi(2), vec![2.0 * (x[0] - 2.0)]) },
            &[0.0],
            &BfgsOptions::default(),
        );
        assert!(r.x[0] < 1.0 && r.x[0] > 0.9);
    }
}
