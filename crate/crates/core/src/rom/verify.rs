//! Numerical checks of the approximate-minimum-residual stability and error
//! bounds on linear problems, and of the quadrature-error residual bound.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use serde::Serialize;

use crate::error::{invalid, Result, StrobeError};

#[derive(Clone, Debug, Serialize)]
pub struct AmrReport {
    pub beta: f64,
    pub gamma: f64,
    pub beta_nj: f64,
    pub delta_test: f64,
    /// `|u_hat|_X` and `|F|_{Y'} / beta_nj`.
    pub stability: (f64, f64),
    /// `|u_hat - u*|_X` and `gamma / (delta beta) inf_Z |u* - z|_X`.
    pub error: (f64, f64),
    /// `|u_hat - u*|_X` against `gamma / beta_nj` times the best-fit error.
    pub error_nj: (f64, f64),
    pub u_hat: Vec<f64>,
}

impl AmrReport {
    /// All inequalities hold up to a relative slack `rtol`.
    pub fn holds(&self, rtol: f64) -> bool {
        let le = |a: f64, b: f64| a <= b * (1.0 + rtol) + 1e-14;
        le(self.stability.0, self.stability.1)
            && le(self.error.0, self.error.1)
            && le(self.error_nj.0, self.error_nj.1)
            && le(self.delta_test * self.beta, self.beta_nj)
    }
}

fn chol(m: &DMatrix<f64>, what: &str) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(m.clone()).ok_or_else(|| StrobeError::FactorizationFailure(format!("{what} is not SPD")))
}

/// Orthonormal basis of the column span of `b` in the inner product `m`.
fn orthonormal(b: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let g = b.transpose() * m * b;
    let c = chol(&g, "basis Gramian")?;
    let l_inv_t = c.l().transpose().try_inverse().ok_or_else(|| invalid("singular basis"))?;
    Ok(b * l_inv_t)
}

fn sym_eigs(m: &DMatrix<f64>) -> Vec<f64> {
    let mut e: Vec<f64> = SymmetricEigen::new((m + m.transpose()) * 0.5).eigenvalues.iter().copied().collect();
    e.sort_by(f64::total_cmp);
    e
}

/// `a(w, v) = v^T A w`, `F(v) = v^T f`, `X`/`Y` SPD Gram matrices; trial
/// basis `z` (columns) and test basis `yj` are orthonormalized internally.
pub fn verify_amr_bounds(
    a: &DMatrix<f64>,
    f: &DVector<f64>,
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    z: &DMatrix<f64>,
    yj: &DMatrix<f64>,
) -> Result<AmrReport> {
    let (ny, nx) = a.shape();
    if ny != nx || x.shape() != (nx, nx) || y.shape() != (ny, ny) || z.nrows() != nx || yj.nrows() != ny || f.len() != ny {
        return Err(invalid("inconsistent dense problem dimensions"));
    }
    let lx = chol(x, "X")?;
    let ly = chol(y, "Y")?;
    let lx_inv = lx.l().try_inverse().ok_or_else(|| invalid("singular X"))?;
    let ly_inv = ly.l().try_inverse().ok_or_else(|| invalid("singular Y"))?;
    let ahat = &ly_inv * a * lx_inv.transpose();
    let sv = ahat.singular_values();
    let beta = sv.min();
    let gamma = sv.max();
    if !(beta > 1e-14 * gamma) {
        return Err(StrobeError::NotInfSupStable(format!("beta = {beta:.3e}")));
    }
    let z = orthonormal(z, x)?;
    let yj = orthonormal(yj, y)?;
    let red = yj.transpose() * a * &z;
    let beta_nj = red.singular_values().min();
    if !(beta_nj > 0.0) {
        return Err(StrobeError::NotInfSupStable(format!("beta_NJ = {beta_nj:.3e}")));
    }
    // delta^2 = min generalized eigenvalue of (red^T red, (AZ)^T Y^{-1} AZ)
    let az = a * &z;
    let b2 = az.transpose() * ly.solve(&az);
    let c2 = chol(&b2, "supremizer Gramian")?;
    let l2_inv = c2.l().try_inverse().ok_or_else(|| invalid("singular supremizers"))?;
    let c = &l2_inv * (red.transpose() * &red) * l2_inv.transpose();
    let delta_test = sym_eigs(&c)[0].max(0.0).sqrt().min(1.0);

    let u_star = a.clone().lu().solve(f).ok_or_else(|| invalid("singular A"))?;
    let alpha = crate::linalg::lstsq(&red, &(yj.transpose() * f));
    let u_hat = &z * &alpha;
    let xnorm = |v: &DVector<f64>| (v.transpose() * x * v)[(0, 0)].max(0.0).sqrt();
    let f_dual = (f.transpose() * ly.solve(f))[(0, 0)].max(0.0).sqrt();
    let proj = &z * (z.transpose() * x * &u_star);
    let best = xnorm(&(&u_star - proj));
    let err = xnorm(&(&u_hat - &u_star));
    Ok(AmrReport {
        beta,
        gamma,
        beta_nj,
        delta_test,
        stability: (xnorm(&u_hat), f_dual / beta_nj),
        error: (err, gamma / (delta_test * beta) * best),
        error_nj: (err, gamma / beta_nj * best),
        u_hat: u_hat.iter().copied().collect(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct BrrReport {
    /// `|J_hf^T R_hf|` at the quadrature-reduced optimum.
    pub n_norm: f64,
    /// `|J_hf - J_eq|_2`.
    pub term_i: f64,
    pub r_eq_norm: f64,
    /// `|J_hf^T (R_hf - R_eq)|`.
    pub term_ii: f64,
    pub alpha: Vec<f64>,
}

impl BrrReport {
    pub fn bound(&self) -> f64 {
        self.term_i * self.r_eq_norm + self.term_ii
    }

    pub fn holds(&self) -> bool {
        self.n_norm <= self.bound() * (1.0 + 1e-10) + 1e-13
    }
}

/// Affine element residuals `r_e(alpha) = A_e alpha - b_e`: the full
/// residual sums all elements, the quadrature residual weights them by `rho`.
pub fn verify_brr_residual_bound(blocks: &[(DMatrix<f64>, DVector<f64>)], rho: &[f64]) -> Result<BrrReport> {
    if blocks.is_empty() || blocks.len() != rho.len() {
        return Err(invalid("one weight per element block required"));
    }
    let (j, n) = blocks[0].0.shape();
    let mut a_hf = DMatrix::zeros(j, n);
    let mut b_hf = DVector::zeros(j);
    let mut a_eq = DMatrix::zeros(j, n);
    let mut b_eq = DVector::zeros(j);
    for ((a, b), r) in blocks.iter().zip(rho) {
        if a.shape() != (j, n) || b.len() != j {
            return Err(invalid("inconsistent block sizes"));
        }
        a_hf += a;
        b_hf += b;
        a_eq += *r * a;
        b_eq += *r * b;
    }
    let alpha = crate::linalg::lstsq(&a_eq, &b_eq);
    let r_hf = &a_hf * &alpha - &b_hf;
    let r_eq = &a_eq * &alpha - &b_eq;
    Ok(BrrReport {
        n_norm: (a_hf.transpose() * &r_hf).norm(),
        term_i: (&a_hf - &a_eq).singular_values().max(),
        r_eq_norm: r_eq.norm(),
        term_ii: (a_hf.transpose() * (&r_hf - &r_eq)).norm(),
        alpha: alpha.iter().copied().collect(),
    })
}
