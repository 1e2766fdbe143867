//! Newton solver for the space-time DG system.

use serde::{Deserialize, Serialize};

use super::geometry::MapGeometry;
use super::march::{initial_guess, MarchOptions};
use super::residual::Discretization;
use crate::error::{Result, StrobeError};
use crate::linalg::norm2;
use crate::models::ConservationLaw;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(default)]
pub struct NewtonOptions {
    pub max_iter: usize,
    /// Stop when `|R| <= max(rtol sqrt(N), atol)`.
    pub rtol: f64,
    pub atol: f64,
    pub armijo: f64,
    pub max_backtracks: usize,
    /// Iterations with the viscosity recomputed from the iterate before it is
    /// frozen for the rest of the solve.
    pub adaptive_iter: usize,
    /// Include the derivative of the viscosity in the Jacobian during the
    /// adaptive phase.
    pub linearize_viscosity: bool,
    pub march_cells: usize,
    pub march_cfl: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            max_iter: 50,
            rtol: 1e-8,
            atol: 1e-10,
            armijo: 1e-4,
            max_backtracks: 12,
            adaptive_iter: 15,
            linearize_viscosity: false,
            march_cells: 200,
            march_cfl: 0.3,
        }
    }
}

impl NewtonOptions {
    pub fn tolerance(&self, n: usize) -> f64 {
        (self.rtol * (n as f64).sqrt()).max(self.atol)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// Residual norm with the returned viscosity.
    pub residual: f64,
    /// Residual norm with the viscosity recomputed from the solution.
    pub adaptive_residual: f64,
    /// Iteration at which the viscosity was frozen, if it was.
    pub frozen_at: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub w: Vec<f64>,
    /// Element viscosity the returned state satisfies the residual with.
    pub eps: Vec<f64>,
    pub report: SolveReport,
}

pub enum Start<'a> {
    Cold,
    Warm(&'a [f64]),
}

/// Damped Newton for `R(W; eps) = 0`. The viscosity follows the iterate
/// (`eps = eps(W)`) until the line search fails or `adaptive_iter` is reached;
/// it is then frozen and the remaining iterations solve the fixed-viscosity
/// system.
pub fn newton(
    disc: &Discretization,
    law: &dyn ConservationLaw,
    geo: &MapGeometry,
    w0: Vec<f64>,
    opts: &NewtonOptions,
) -> Result<Solution> {
    let n = w0.len();
    let tol = opts.tolerance(n);
    let mut w = w0;
    let mut frozen: Option<(usize, Vec<f64>)> = None;
    let eps_of = |w: &[f64], frozen: &Option<(usize, Vec<f64>)>| match frozen {
        Some((_, e)) => e.clone(),
        None => disc.viscosity(law, w),
    };
    let mut eps = eps_of(&w, &frozen);
    let mut r = disc.residual_with(law, geo, &w, &eps)?;
    let mut rn = norm2(&r);
    let mut it = 0;
    loop {
        log::debug!("newton {it}: |R| = {rn:.3e}{}", if frozen.is_some() { " (frozen viscosity)" } else { "" });
        if rn <= tol {
            let adaptive = norm2(&disc.residual(law, geo, &w)?);
            let report = SolveReport { iterations: it, residual: rn, adaptive_residual: adaptive, frozen_at: frozen.as_ref().map(|f| f.0) };
            return Ok(Solution { w, eps, report });
        }
        if it >= opts.max_iter {
            return Err(StrobeError::NonConvergence { iterations: it, residual: rn, last: Some(w) });
        }
        let (_, jac) = if frozen.is_none() && opts.linearize_viscosity {
            disc.jacobian(law, geo, &w)?
        } else {
            disc.jacobian_with(law, geo, &w, &eps)?
        };
        let step = jac.lu()?.solve(&r)?;
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_backtracks {
            let trial: Vec<f64> = w.iter().zip(&step).map(|(a, s)| a - alpha * s).collect();
            let te = eps_of(&trial, &frozen);
            if let Ok(rt) = disc.residual_with(law, geo, &trial, &te) {
                let tn = norm2(&rt);
                if tn.is_finite() && tn <= (1.0 - opts.armijo * alpha) * rn {
                    accepted = Some((trial, te, rt, tn));
                    break;
                }
            }
            alpha *= 0.5;
        }
        it += 1;
        match accepted {
            Some((tw, te, rt, tn)) => {
                (w, eps, r, rn) = (tw, te, rt, tn);
                if frozen.is_none() && it >= opts.adaptive_iter {
                    frozen = Some((it, eps.clone()));
                }
            }
            None if frozen.is_none() => {
                frozen = Some((it, eps.clone()));
            }
            None => return Err(StrobeError::NonConvergence { iterations: it, residual: rn, last: Some(w) }),
        }
    }
}

/// High-fidelity solve on the reference (unmapped) mesh.
pub fn solve_hf(disc: &Discretization, law: &dyn ConservationLaw, start: Start<'_>, opts: &NewtonOptions) -> Result<Solution> {
    let geo = MapGeometry::identity(&disc.space);
    let w0 = match start {
        Start::Warm(w) => {
            disc.space.check_len(w)?;
            w.to_vec()
        }
        Start::Cold => initial_guess(&disc.space, law, &MarchOptions { cells: opts.march_cells, cfl: opts.march_cfl })?,
    };
    newton(disc, law, &geo, w0, opts)
}
