//! Damped Gauss-Newton for reduced least-squares problems and damped Newton
//! for square reduced systems.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GnOptions {
    pub max_iter: usize,
    /// Stationarity tolerance on the gradient of `1/2 |r|^2`.
    pub gtol: f64,
    pub max_backtracks: usize,
}

impl Default for GnOptions {
    fn default() -> Self {
        Self { max_iter: 30, gtol: 1e-9, max_backtracks: 20 }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct RomSolution {
    pub alpha: Vec<f64>,
    /// Norm of the minimized residual (square root of twice the objective).
    pub residual_norm: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Value `1/2 |r|^2` and, when requested, gradient and Gauss-Newton Hessian.
pub type LsqEval = (f64, Option<(DVector<f64>, DMatrix<f64>)>);

fn solve_spd(h: &DMatrix<f64>, g: &DVector<f64>) -> DVector<f64> {
    let scale = h.diagonal().amax().max(1e-300);
    let mut reg = 0.0;
    for _ in 0..8 {
        let m = h + DMatrix::identity(h.nrows(), h.ncols()) * reg;
        if let Some(c) = m.cholesky() {
            return -c.solve(g);
        }
        reg = if reg == 0.0 { 1e-12 * scale } else { reg * 100.0 };
    }
    -crate::linalg::lstsq(h, g)
}

/// Minimizes a least-squares objective; `eval(alpha, want_grad)`. Evaluation
/// errors during the line search count as rejected steps.
pub fn gauss_newton(mut eval: impl FnMut(&[f64], bool) -> Result<LsqEval>, alpha0: &[f64], opts: &GnOptions) -> Result<RomSolution> {
    let mut alpha = DVector::from_column_slice(alpha0);
    let (mut f, first) = eval(alpha.as_slice(), true)?;
    let (mut g, mut h) = first.expect("gradient requested");
    let mut it = 0;
    while it < opts.max_iter && g.norm() > opts.gtol {
        let step = solve_spd(&h, &g);
        let slope = step.dot(&g);
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..opts.max_backtracks {
            let trial = &alpha + t * &step;
            if let Ok((ft, _)) = eval(trial.as_slice(), false) {
                if ft.is_finite() && ft <= f + 1e-4 * t * slope {
                    accepted = Some(trial);
                    break;
                }
            }
            t *= 0.5;
        }
        let Some(next) = accepted else { break };
        it += 1;
        alpha = next;
        let (fn_, gh) = eval(alpha.as_slice(), true)?;
        f = fn_;
        (g, h) = gh.expect("gradient requested");
    }
    let gn = g.norm();
    Ok(RomSolution {
        alpha: alpha.iter().copied().collect(),
        residual_norm: (2.0 * f).max(0.0).sqrt(),
        grad_norm: gn,
        iterations: it,
        converged: gn <= opts.gtol,
    })
}

/// Newton for `r(alpha) = 0` with backtracking on `|r|`; `tol` is absolute.
pub fn newton_square(
    mut eval: impl FnMut(&[f64], bool) -> Result<(DVector<f64>, Option<DMatrix<f64>>)>,
    alpha0: &[f64],
    tol: f64,
    opts: &GnOptions,
) -> Result<RomSolution> {
    let mut alpha = DVector::from_column_slice(alpha0);
    let (mut r, j) = eval(alpha.as_slice(), true)?;
    let mut jac = j.expect("jacobian requested");
    let mut it = 0;
    while it < opts.max_iter && r.norm() > tol {
        let Some(step) = jac.clone().lu().solve(&(-&r)) else { break };
        let f0 = r.norm();
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..opts.max_backtracks {
            let trial = &alpha + t * &step;
            if let Ok((rt, _)) = eval(trial.as_slice(), false) {
                if rt.iter().all(|v| v.is_finite()) && rt.norm() <= (1.0 - 1e-4 * t) * f0 {
                    accepted = Some(trial);
                    break;
                }
            }
            t *= 0.5;
        }
        let Some(next) = accepted else { break };
        it += 1;
        alpha = next;
        let (rn, jn) = eval(alpha.as_slice(), true)?;
        r = rn;
        jac = jn.expect("jacobian requested");
    }
    let rn = r.norm();
    Ok(RomSolution {
        alpha: alpha.iter().copied().collect(),
        residual_norm: rn,
        grad_norm: (jac.transpose() * &r).norm(),
        iterations: it,
        converged: rn <= tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_newton_solves_nonlinear_least_squares() {
        // r = (a^2 - 1, b - 2, a b - 2): consistent at (1, 2)
        let eval = |x: &[f64], g: bool| -> Result<LsqEval> {
            let r = DVector::from_vec(vec![x[0] * x[0] - 1.0, x[1] - 2.0, x[0] * x[1] - 2.0]);
            let j = DMatrix::from_row_slice(3, 2, &[2.0 * x[0], 0.0, 0.0, 1.0, x[1], x[0]]);
            Ok((0.5 * r.norm_squared(), g.then(|| (j.transpose() * &r, j.transpose() * &j))))
        };
        let s = gauss_newton(eval, &[3.0, -1.0], &GnOptions::default()).unwrap();
        assert!(s.converged);
        assert!((s.alpha[0] - 1.0).abs() < 1e-9 && (s.alpha[1] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn newton_square_converges() {
        let eval = |x: &[f64], _: bool| -> Result<(DVector<f64>, Option<DMatrix<f64>>)> {
            let r = DVector::from_vec(vec![x[0].powi(3) - 8.0]);
            Ok((r, Some(DMatrix::from_element(1, 1, 3.0 * x[0] * x[0]))))
        };
        let s = newton_square(eval, &[1.0], 1e-12, &GnOptions::default()).unwrap();
        assert!(s.converged && (s.alpha[0] - 2.0).abs() < 1e-12);
    }
}
