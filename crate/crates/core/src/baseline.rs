//! Space-only registration baseline: per-time-slice snapshots of one
//! high-fidelity solution registered with x-only displacements.

use std::sync::Arc;

use log::info;
use rayon::prelude::*;

use crate::dg::best_fit::{best_fit_error, registered_best_fit_error};
use crate::dg::pod::{pod, Inner};
use crate::dg::DgSpace;
use crate::error::Result;
use crate::hf::solve_one;
use crate::io::Container;
use crate::maps::{MapSpace, ReducedMapBasis};
use crate::mesh::SpaceTimeMesh;
use crate::models::ModelKind;
use crate::offline::Setup;
use crate::registration::{greedy_registration_in, repod, RegistrationParams};
use crate::study::{f, ratios, Table};

/// Number of time slices.
pub const SLICES: usize = 50;
/// Legendre degree bound of the x-only displacements.
pub const MAP_DEGREE: usize = 16;
const N_MAX: usize = 5;
const XI: f64 = 1e-2;
const TOL_POD: f64 = 1e-4;
const ROWS: usize = 10;

/// Reference parameter: the lower box corner for Burgers, the centroid otherwise.
pub fn reference_parameter(s: &Setup) -> Vec<f64> {
    let b = &s.family.param_box;
    match s.family.kind {
        ModelKind::Burgers => b.iter().map(|r| r[0]).collect(),
        _ => b.iter().map(|r| 0.5 * (r[0] + r[1])).collect(),
    }
}

/// Sensor component of `u` at times `t_k = k T / (SLICES - 1)` on a strip of
/// one element row.
pub fn time_slices(s: &Setup, u: &[f64]) -> Result<(DgSpace, Vec<Vec<f64>>)> {
    let space = s.space();
    let (length, time) = (s.family.length, s.family.time);
    let tau = time / s.config.mesh.nt as f64;
    let strip_mesh = Arc::new(SpaceTimeMesh::generate(length, tau, 2 * s.config.mesh.nx, 1, s.config.mesh.p)?);
    let strip = DgSpace::new(strip_mesh, 1)?;
    let eps = 1e-12 * time;
    let slices = (0..SLICES)
        .into_par_iter()
        .map(|k| {
            let t = (time * k as f64 / (SLICES - 1) as f64).clamp(eps, time - eps);
            strip.project(|x| vec![space.eval_point(u, [x[0].clamp(0.0, length), t])[0]])
        })
        .collect();
    Ok((strip, slices))
}

/// x-only displacements vanishing at both ends: the first `MAP_DEGREE` modes of
/// the map space.
pub fn x_only_basis(space: MapSpace) -> ReducedMapBasis {
    let modes = (0..space.mbar)
        .map(|i| {
            let mut e = vec![0.0; space.dim()];
            e[i] = 1.0;
            e
        })
        .collect();
    ReducedMapBasis { space, modes }
}

pub fn space_only_baseline(s: &Setup, _c: &Container) -> Result<Table> {
    let mu = reference_parameter(s);
    let sol = solve_one(&s.family, &s.disc, &mu, &s.config.hf)?;
    let (strip, slices) = time_slices(s, &sol.w)?;
    let tau = strip.mesh.time;
    let ms = MapSpace::new(MAP_DEGREE, s.family.length, tau)?;
    let cfg = &s.config.registration;
    let mut params = RegistrationParams::new(&ms, s.config.mesh.p, N_MAX);
    params.xi = XI;
    params.tol_pod = TOL_POD;
    params.tol = cfg.tol;
    params.bfgs.max_iter = cfg.bfgs_max_iter;
    let init = vec![slices[0].clone(), slices[SLICES - 1].clone()];
    let g = greedy_registration_in(&strip, &slices, &init, x_only_basis(ms), &params)?;
    info!("space-only baseline: {} templates, M = {}", g.templates.len(), g.basis.dim());
    let plain = pod(&slices, 1e-14, Inner::L2(&strip))?;
    let rp = repod(&strip, &slices, &g.basis, &g.coeffs, 1e-14)?;
    let (u, r) = (ratios(&plain.eigenvalues), ratios(&rp.pod.eigenvalues));
    let phis: Vec<_> = g.coeffs.iter().map(|a| g.basis.displacement(a)).collect();
    let mut t = Table::new(
        "space-only registration of time slices: normalized POD eigenvalues and maximum in-sample relative best-fit error against n",
        &["n", "unregistered [-]", "registered [-]", "bf_unregistered [-]", "bf_registered [-]"],
    );
    let rows = ROWS.min(plain.modes.len()).min(rp.pod.modes.len());
    for n in 1..=rows {
        let e_u = slices
            .par_iter()
            .map(|v| best_fit_error(&strip, v, &plain.modes[..n]))
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        let e_r = slices
            .par_iter()
            .zip(&phis)
            .map(|(v, phi)| registered_best_fit_error(&strip, v, &rp.pod.modes[..n], phi))
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        t.push(vec![n.to_string(), f(u[n - 1]), f(r[n - 1]), f(e_u), f(e_r)]);
    }
    Ok(t)
}
