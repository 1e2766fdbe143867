//! Projection-based ROMs in the mapped configuration: Galerkin, minimum
//! residual, approximate minimum residual with an empirical test space, and
//! empirical-quadrature hyper-reduction.

mod local;
mod model;
mod nnls;
mod solve;
pub mod verify;

pub use local::{local_residual, restrict, Linearization, LocalBases};
pub use model::{MapPrediction, MapPredictor, OnlineResult, OnlineRom, ReducedModel};
pub use nnls::{nnls, NnlsResult};
pub use solve::{gauss_newton, newton_square, GnOptions, LsqEval, RomSolution};
pub use verify::{verify_amr_bounds, verify_brr_residual_bound, AmrReport, BrrReport};

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dg::pod::{pod_with, Inner, PodSize};
use crate::dg::{to_continuous, NormPair};
use crate::error::{invalid, Result, StrobeError};
use crate::hf::{Discretization, MapGeometry};
use crate::models::ConservationLaw;

/// One training or test configuration: the problem, its map and a state.
#[derive(Clone)]
pub struct MappedCase {
    pub law: Arc<dyn ConservationLaw>,
    pub geo: MapGeometry,
    pub state: Vec<f64>,
}

fn basis_matrix(v: &[Vec<f64>]) -> DMatrix<f64> {
    let n = v.first().map_or(0, |c| c.len());
    DMatrix::from_fn(n, v.len(), |i, j| v[j][i])
}

/// `sum_n alpha_n zeta_n`.
pub fn expand(z: &[Vec<f64>], alpha: &[f64]) -> Vec<f64> {
    let mut w = vec![0.0; z.first().map_or(0, |c| c.len())];
    for (a, zn) in alpha.iter().zip(z) {
        crate::linalg::axpy(*a, zn, &mut w);
    }
    w
}

fn full_jacobian(
    disc: &Discretization,
    law: &dyn ConservationLaw,
    geo: &MapGeometry,
    w: &[f64],
    lin: Linearization,
) -> Result<(Vec<f64>, crate::linalg::SparseMatrix)> {
    match lin {
        Linearization::Exact => disc.jacobian(law, geo, w),
        Linearization::Frozen => {
            let eps = disc.viscosity(law, w);
            disc.jacobian_with(law, geo, w, &eps)
        }
    }
}

/// Galerkin ROM: Newton on `Z^T R(Z alpha) = 0`.
pub fn galerkin_solve(
    disc: &Discretization,
    law: &dyn ConservationLaw,
    geo: &MapGeometry,
    z: &[Vec<f64>],
    alpha0: &[f64],
    lin: Linearization,
    opts: &GnOptions,
) -> Result<RomSolution> {
    let lb = LocalBases::full(disc, z, z)?;
    newton_square(|a, j| lb.evaluate(disc, law, geo, a, lin, j), alpha0, opts.gtol, opts)
}

/// Minimum residual ROM: Gauss-Newton on `R^T Y^{-1} R`.
pub fn minres_solve(
    disc: &Discretization,
    norms: &NormPair,
    law: &dyn ConservationLaw,
    geo: &MapGeometry,
    z: &[Vec<f64>],
    alpha0: &[f64],
    lin: Linearization,
    opts: &GnOptions,
) -> Result<RomSolution> {
    let zm = basis_matrix(z);
    let eval = |a: &[f64], want: bool| -> Result<LsqEval> {
        let w = expand(z, a);
        if !want {
            let r = disc.residual(law, geo, &w)?;
            let yr = norms.riesz(&r)?;
            return Ok((0.5 * crate::linalg::dot(&r, &yr), None));
        }
        let (r, jac) = full_jacobian(disc, law, geo, &w, lin)?;
        let yr = norms.riesz(&r)?;
        let jz = jac.mul_dense(&zm);
        let yjz = norms.riesz_many(&jz)?;
        let rv = DVector::from_vec(r);
        let g = yjz.transpose() * &rv;
        let h = jz.transpose() * &yjz;
        let h = (&h + h.transpose()) * 0.5;
        Ok((0.5 * crate::linalg::dot(rv.as_slice(), &yr), Some((g, h))))
    };
    gauss_newton(eval, alpha0, opts)
}

/// Approximate minimum residual (tested against `Y_J`), optionally with
/// quadrature weights through `lb`.
pub fn amr_solve(
    lb: &LocalBases,
    disc: &Discretization,
    law: &dyn ConservationLaw,
    geo: &MapGeometry,
    alpha0: &[f64],
    lin: Linearization,
    opts: &GnOptions,
) -> Result<RomSolution> {
    let eval = |a: &[f64], want: bool| -> Result<LsqEval> {
        let (r, j) = lb.evaluate(disc, law, geo, a, lin, want)?;
        let f = 0.5 * r.norm_squared();
        Ok((f, j.map(|j| (j.transpose() * &r, j.transpose() * &j))))
    };
    gauss_newton(eval, alpha0, opts)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum TestSize {
    /// Energy criterion with this tolerance.
    Tolerance(f64),
    /// `J = c N`.
    Multiple(usize),
    Fixed(usize),
}

/// Empirical test space: Y-Riesz representers of `DR[U^k](zeta_n, .)`
/// compressed by POD in the Y inner product. Returns the basis and the
/// POD eigenvalues.
pub fn build_test_space(
    disc: &Discretization,
    norms: &NormPair,
    cases: &[MappedCase],
    z: &[Vec<f64>],
    size: TestSize,
    continuous: bool,
    lin: Linearization,
) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    if cases.is_empty() || z.is_empty() {
        return Err(StrobeError::EmptyInput("test space needs training cases and a trial basis".into()));
    }
    let zm = basis_matrix(z);
    let blocks: Vec<DMatrix<f64>> = cases
        .par_iter()
        .map(|c| {
            let (_, jac) = full_jacobian(disc, c.law.as_ref(), &c.geo, &c.state, lin)?;
            norms.riesz_many(&jac.mul_dense(&zm))
        })
        .collect::<Result<_>>()?;
    let mut etas: Vec<Vec<f64>> = Vec::with_capacity(blocks.len() * z.len());
    for b in &blocks {
        for c in 0..b.ncols() {
            let v: Vec<f64> = b.column(c).iter().copied().collect();
            etas.push(if continuous { to_continuous(&disc.space, &v) } else { v });
        }
    }
    let psize = match size {
        TestSize::Tolerance(t) => {
            if !(t > 0.0 && t < 1.0) {
                return Err(invalid(format!("test-space tolerance {t} outside (0, 1)")));
            }
            PodSize::Tolerance(t)
        }
        TestSize::Multiple(c) => PodSize::Fixed(c * z.len()),
        TestSize::Fixed(j) => PodSize::Fixed(j),
    };
    let res = pod_with(&etas, psize, Inner::Matrix(&norms.y))?;
    Ok((res.modes, res.eigenvalues))
}

/// Constraint matrix and right-hand side of the empirical quadrature
/// problem. Row 0 reproduces the domain area; each training case adds `N`
/// rows `J_hf^T r_e` (element columns), scaled by the norm of its rhs.
pub fn eqp_system(
    disc: &Discretization,
    cases: &[MappedCase],
    alphas: &[Vec<f64>],
    z: &[Vec<f64>],
    y: &[Vec<f64>],
    lin: Linearization,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    if cases.len() != alphas.len() {
        return Err(invalid("one coefficient vector per case required"));
    }
    let mesh = &disc.space.mesh;
    let ne = mesh.n_elements();
    let n = z.len();
    let lb = LocalBases::full(disc, z, y)?;
    let blocks: Vec<(DMatrix<f64>, DVector<f64>)> = cases
        .par_iter()
        .zip(alphas)
        .map(|(c, a)| {
            let (cols, jac) = lb.contributions(disc, c.law.as_ref(), &c.geo, a, lin)?;
            let g = jac.transpose() * cols;
            let b: DVector<f64> = g.column_sum();
            let s = b.norm();
            let s = if s > 0.0 { 1.0 / s } else { 1.0 };
            Ok((g * s, b * s))
        })
        .collect::<Result<_>>()?;
    let rows = 1 + n * cases.len();
    let mut g = DMatrix::zeros(rows, ne);
    let mut b = DVector::zeros(rows);
    let area = mesh.area();
    for k in 0..ne {
        g[(0, k)] = mesh.geometry[k].area() / area;
    }
    b[0] = 1.0;
    for (i, (gb, bb)) in blocks.iter().enumerate() {
        g.view_mut((1 + i * n, 0), (n, ne)).copy_from(gb);
        b.rows_mut(1 + i * n, n).copy_from(bb);
    }
    Ok((g, b))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EqpResult {
    pub elements: Vec<usize>,
    pub weights: Vec<f64>,
    /// `|G rho - b|_2` of the scaled system.
    pub residual: f64,
    pub iterations: usize,
}

/// Sparse nonnegative weights by Lawson-Hanson with step and dual tolerance
/// `tol`.
pub fn build_eqp(g: &DMatrix<f64>, b: &DVector<f64>, tol: f64) -> Result<EqpResult> {
    if !(tol > 0.0) {
        return Err(invalid("EQP tolerance must be positive"));
    }
    let r = nnls(g, b, tol, 10 * g.ncols());
    let (elements, weights): (Vec<usize>, Vec<f64>) =
        r.x.iter().enumerate().filter(|(_, w)| **w > 0.0).map(|(k, w)| (k, *w)).unzip();
    Ok(EqpResult { elements, weights, residual: r.residual, iterations: r.iterations })
}
