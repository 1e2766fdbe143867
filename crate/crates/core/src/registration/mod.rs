//! Registration: maps `Phi = id + phi` that align a sensor field with a small
//! template space, the greedy template/map-space construction, and POD of
//! the mapped snapshots.

mod bfgs;
mod sensor;

pub use bfgs::{bfgs, BfgsOptions, BfgsResult};
pub use sensor::{extract_sensor, filter_sensor, FieldEvaluator};

use log::{debug, info, warn};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dg::pod::{orthonormalize, pod, Inner, PodResult};
use crate::dg::DgSpace;
use crate::error::{invalid, Result, StrobeError};
use crate::maps::{BijectivityGrid, BijectivityParams, Displacement, MapSpace, MapTable, ReducedMapBasis};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegistrationParams {
    /// Weight of the H2 seminorm penalty.
    pub xi: f64,
    pub bijectivity: BijectivityParams,
    /// The bijectivity grid has `grid_cells^2` cells.
    pub grid_cells: usize,
    /// Gauss points per direction and grid cell.
    pub grid_points: usize,
    /// Greedy stopping tolerance on the relative proximity `f / ||s||^2`.
    pub tol: f64,
    /// Largest template-space dimension.
    pub n_max: usize,
    /// POD tolerance of the map-space compression.
    pub tol_pod: f64,
    /// Legendre degree bound of the full displacement space.
    pub mbar: usize,
    /// Odd moving-average window (lattice nodes) of the sensor filter.
    pub filter_window: usize,
    pub bfgs: BfgsOptions,
}

impl RegistrationParams {
    pub fn new(map_space: &MapSpace, dg_degree: usize, n_max: usize) -> Self {
        Self {
            xi: 1e-4,
            bijectivity: BijectivityParams::standard(map_space.area()),
            grid_cells: 16,
            grid_points: 2 * (dg_degree + 1),
            tol: 1e-3,
            n_max,
            tol_pod: 1e-4,
            mbar: map_space.mbar,
            filter_window: 5,
            bfgs: BfgsOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.xi >= 0.0) || !(self.tol > 0.0) || !(self.tol_pod > 0.0 && self.tol_pod < 1.0) {
            return Err(invalid("registration tolerances out of range"));
        }
        if self.n_max == 0 || self.grid_cells == 0 || self.grid_points == 0 || self.mbar == 0 {
            return Err(invalid("registration sizes must be positive"));
        }
        if self.filter_window.is_multiple_of(2) {
            return Err(invalid(format!("filter window {} must be odd", self.filter_window)));
        }
        Ok(())
    }
}

/// Value and gradient of the registration objective at one point.
#[derive(Clone, Debug)]
pub struct Objective {
    pub total: f64,
    pub proximity: f64,
    pub bijectivity: f64,
    pub penalty: f64,
    pub grad: Vec<f64>,
    /// Smallest Jacobian determinant on the bijectivity grid.
    pub min_det: f64,
    /// Mapped quadrature points that fell outside the domain.
    pub clamped: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RegistrationResult {
    /// Coefficients in the reduced map basis used for the solve.
    pub a: Vec<f64>,
    /// The same displacement in full-space coefficients.
    pub full: Vec<f64>,
    pub proximity: f64,
    /// `proximity / ||s||^2`.
    pub relative: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Bijectivity functional below `delta` and positive Jacobian on the grid.
    pub admissible: bool,
    pub clamped: usize,
}

/// Everything that does not depend on the snapshot being registered.
pub struct Registrar<'a> {
    space: &'a DgSpace,
    pub basis: ReducedMapBasis,
    weights: Vec<f64>,
    table: MapTable,
    /// Template values at the quadrature points.
    templates: Vec<Vec<f64>>,
    grid: BijectivityGrid,
    a_reg: DMatrix<f64>,
    params: RegistrationParams,
}

impl<'a> Registrar<'a> {
    /// `templates` must be scalar fields of `space`, L2-orthonormal.
    pub fn new(space: &'a DgSpace, templates: &[Vec<f64>], basis: ReducedMapBasis, params: &RegistrationParams) -> Result<Self> {
        params.validate()?;
        if space.n_comp != 1 {
            return Err(invalid("registration works on scalar sensor fields"));
        }
        for t in templates {
            space.check_len(t)?;
        }
        let a_reg = basis.reduce_matrix(&basis.space.h2_penalty_matrix()?);
        let grid = BijectivityGrid::new(&basis, params.grid_cells, params.grid_points)?;
        let table = MapTable::new(&basis, space.quad_points());
        Ok(Self {
            space,
            weights: space.quad_weights(),
            table,
            templates: templates.iter().map(|t| space.values_at_quad(t, 0)).collect(),
            grid,
            a_reg,
            basis,
            params: params.clone(),
        })
    }

    pub fn params(&self) -> &RegistrationParams {
        &self.params
    }

    /// `int s^2` by the volume rule.
    pub fn sensor_energy(&self, s: &[f64]) -> f64 {
        self.space.values_at_quad(s, 0).iter().zip(&self.weights).map(|(v, w)| w * v * v).sum()
    }

    /// Proximity of `s o Phi` to the template span, plus bijectivity
    /// functional and H2 penalty, with gradient in the reduced coefficients.
    pub fn objective(&self, s: &[f64], a: &[f64]) -> Objective {
        let nm = self.basis.dim();
        let nq = self.weights.len();
        let mut ev = FieldEvaluator::new(self.space, s);
        let mut vals = Vec::with_capacity(nq);
        let mut grads = Vec::with_capacity(nq);
        let mut clamped = 0;
        for q in 0..nq {
            let (y, _) = self.table.eval(a, q);
            let (v, g, c) = ev.eval(y);
            clamped += c as usize;
            vals.push(v);
            grads.push(g);
        }
        let mut r = vals;
        for t in &self.templates {
            let c: f64 = t.iter().zip(&r).zip(&self.weights).map(|((t, v), w)| w * t * v).sum();
            for (ri, ti) in r.iter_mut().zip(t) {
                *ri -= c * ti;
            }
        }
        let proximity: f64 = r.iter().zip(&self.weights).map(|(v, w)| w * v * v).sum();
        let mut grad = vec![0.0; nm];
        for q in 0..nq {
            let c = 2.0 * self.weights[q] * r[q];
            if c == 0.0 {
                continue;
            }
            for (m, gm) in grad.iter_mut().enumerate() {
                let e = self.table.entry(q, m);
                *gm += c * (grads[q][0] * e[0] + grads[q][1] * e[1]);
            }
        }
        let (bij, gb, min_det) = self.grid.evaluate(a, &self.params.bijectivity, true);
        let av = DVector::from_column_slice(a);
        let aa = &self.a_reg * &av;
        let penalty = self.params.xi * av.dot(&aa);
        for m in 0..nm {
            grad[m] += gb[m] + 2.0 * self.params.xi * aa[m];
        }
        let mut total = proximity + bij + penalty;
        if !(min_det > 0.0) {
            total = f64::INFINITY;
        }
        Objective { total, proximity, bijectivity: bij, penalty, grad, min_det, clamped }
    }

    fn admissible(&self, o: &Objective) -> bool {
        o.total.is_finite() && o.min_det > 0.0 && o.bijectivity <= self.params.bijectivity.delta
    }

    /// Registers one sensor field starting from reduced coefficients `a0`
    /// (replaced by the identity if inadmissible).
    pub fn register(&self, s: &[f64], a0: &[f64]) -> Result<RegistrationResult> {
        self.space.check_len(s)?;
        if a0.len() != self.basis.dim() {
            return Err(invalid("warm start has the wrong dimension"));
        }
        let energy = self.sensor_energy(s);
        if energy <= 0.0 {
            return Err(StrobeError::UndefinedRatio("registration of a zero sensor".into()));
        }
        let zero = vec![0.0; a0.len()];
        let start = if self.admissible(&self.objective(s, a0)) { a0 } else { &zero[..] };
        let res = bfgs(
            |a| {
                let o = self.objective(s, a);
                (o.total, o.grad)
            },
            start,
            &self.params.bfgs,
        );
        let mut a = res.x;
        let mut o = self.objective(s, &a);
        let mut admissible = self.admissible(&o);
        if !admissible {
            warn!("registration ended at an inadmissible map (min det {:.3e}); falling back to the start", o.min_det);
            a = start.to_vec();
            o = self.objective(s, &a);
            admissible = self.admissible(&o);
        }
        if o.clamped > 0 {
            debug!("{} mapped points clamped to the domain", o.clamped);
        }
        Ok(RegistrationResult {
            full: self.basis.displacement(&a).coeffs,
            a,
            proximity: o.proximity,
            relative: o.proximity / energy,
            iterations: res.iterations,
            converged: res.converged,
            admissible,
            clamped: o.clamped,
        })
    }
}


/// L2 projection of `U o Phi` (all components), and the number of mapped
/// quadrature points clamped to the domain.
pub fn compose(space: &DgSpace, u: &[f64], phi: &Displacement) -> Result<(Vec<f64>, usize)> {
    space.check_len(u)?;
    let scalar = space.with_components(1);
    let pts: Vec<[f64; 2]> = space.quad_points().iter().map(|x| phi.map(*x).0).collect();
    let mut clamped = 0;
    let vals: Vec<Vec<f64>> = (0..space.n_comp)
        .map(|d| {
            let field = space.component(u, d);
            let mut ev = FieldEvaluator::new(&scalar, &field);
            pts.iter()
                .map(|y| {
                    let (v, _, c) = ev.eval(*y);
                    clamped += c as usize;
                    v
                })
                .collect()
        })
        .collect();
    Ok((space.project_quad_values(&vals), clamped / space.n_comp))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GreedyStep {
    pub n_templates: usize,
    pub map_dim: usize,
    pub max_relative: f64,
    pub mean_relative: f64,
}

#[derive(Clone, Debug)]
pub struct GreedyResult {
    /// L2-orthonormal scalar template fields.
    pub templates: Vec<Vec<f64>>,
    /// The compressed map space `W_M`.
    pub basis: ReducedMapBasis,
    /// `a^k` in `W_M` for every snapshot.
    pub coeffs: Vec<Vec<f64>>,
    /// Final registrations in the full space.
    pub results: Vec<RegistrationResult>,
    /// POD eigenvalues of the displacement coefficients.
    pub map_eigenvalues: Vec<f64>,
    pub history: Vec<GreedyStep>,
}

/// Greedy construction of the templates and of `W_M` from scalar sensors.
pub fn greedy_registration(
    space: &DgSpace,
    sensors: &[Vec<f64>],
    initial_templates: &[Vec<f64>],
    map_space: MapSpace,
    params: &RegistrationParams,
) -> Result<GreedyResult> {
    greedy_registration_in(space, sensors, initial_templates, ReducedMapBasis::full(map_space), params)
}

/// [`greedy_registration`] with the maps restricted to a subspace of `W_hf`
/// (orthonormal coefficient vectors).
pub fn greedy_registration_in(
    space: &DgSpace,
    sensors: &[Vec<f64>],
    initial_templates: &[Vec<f64>],
    full: ReducedMapBasis,
    params: &RegistrationParams,
) -> Result<GreedyResult> {
    params.validate()?;
    let map_space = full.space;
    if sensors.is_empty() {
        return Err(StrobeError::EmptyInput("no sensors to register".into()));
    }
    if initial_templates.is_empty() {
        return Err(StrobeError::EmptyInput("no initial templates".into()));
    }
    let mut templates = initial_templates.to_vec();
    orthonormalize(&mut templates, Inner::L2(space));
    let mut warm: Vec<Vec<f64>> = vec![vec![0.0; full.dim()]; sensors.len()];
    let mut history = Vec::new();
    loop {
        let reg = Registrar::new(space, &templates, full.clone(), params)?;
        let results: Vec<RegistrationResult> = sensors
            .par_iter()
            .zip(&warm)
            .map(|(s, w)| reg.register(s, w))
            .collect::<Result<_>>()?;
        let displacements: Vec<Vec<f64>> = results.iter().map(|r| r.full.clone()).collect();
        let (basis, coeffs, eig) = compress_maps(map_space, &displacements, params.tol_pod)?;
        let rel: Vec<f64> = results.iter().map(|r| r.relative).collect();
        let (kmax, max_relative) =
            rel.iter().copied().enumerate().fold((0, f64::NEG_INFINITY), |b, (k, v)| if v > b.1 { (k, v) } else { b });
        let step = GreedyStep {
            n_templates: templates.len(),
            map_dim: basis.dim(),
            max_relative,
            mean_relative: rel.iter().sum::<f64>() / rel.len() as f64,
        };
        info!(
            "greedy N={} M={} max rel proximity {:.3e} mean {:.3e}",
            step.n_templates, step.map_dim, step.max_relative, step.mean_relative
        );
        history.push(step);
        if max_relative < params.tol || templates.len() >= params.n_max {
            return Ok(GreedyResult { templates, basis, coeffs, results, map_eigenvalues: eig, history });
        }
        let phi = Displacement::new(map_space, results[kmax].full.clone())?;
        let (mapped, _) = compose(space, &sensors[kmax], &phi)?;
        let before = templates.len();
        templates.push(mapped);
        orthonormalize(&mut templates, Inner::L2(space));
        if templates.len() == before {
            warn!("new template is linearly dependent; stopping the greedy loop");
            return Ok(GreedyResult { templates, basis, coeffs, results, map_eigenvalues: eig, history });
        }
        // warm start from the maps projected onto the current W_M
        warm = coeffs.iter().map(|a| full.project(&basis.displacement(a).coeffs)).collect();
    }
}

/// Euclidean POD of full displacement coefficients: `W_M`, `a^k`, eigenvalues.
pub fn compress_maps(map_space: MapSpace, displacements: &[Vec<f64>], tol_pod: f64) -> Result<(ReducedMapBasis, Vec<Vec<f64>>, Vec<f64>)> {
    let res = pod(displacements, tol_pod, Inner::Euclidean)?;
    let basis = ReducedMapBasis { space: map_space, modes: res.modes };
    let coeffs = displacements.iter().map(|d| basis.project(d)).collect();
    Ok((basis, coeffs, res.eigenvalues))
}

#[derive(Clone, Debug)]
pub struct RepodResult {
    pub pod: PodResult,
    /// `U^k o Phi^k` projected onto the DG space.
    pub mapped: Vec<Vec<f64>>,
    pub clamped: usize,
}

/// L2 POD of the mapped snapshots `U^k o Phi(a^k)`.
pub fn repod(space: &DgSpace, snapshots: &[Vec<f64>], basis: &ReducedMapBasis, coeffs: &[Vec<f64>], tol_pod: f64) -> Result<RepodResult> {
    if snapshots.len() != coeffs.len() {
        return Err(invalid("one map per snapshot required"));
    }
    let composed: Vec<(Vec<f64>, usize)> = snapshots
        .par_iter()
        .zip(coeffs)
        .map(|(u, a)| compose(space, u, &basis.displacement(a)))
        .collect::<Result<_>>()?;
    let clamped = composed.iter().map(|c| c.1).sum();
    let mapped: Vec<Vec<f64>> = composed.into_iter().map(|c| c.0).collect();
    let pod = pod(&mapped, tol_pod, Inner::L2(space))?;
    Ok(RepodResult { pod, mapped, clamped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::SpaceTimeMesh;
    use std::sync::Arc;

    fn setup(mbar: usize) -> (DgSpace, MapSpace, RegistrationParams) {
        let mesh = Arc::new(SpaceTimeMesh::generate(1.0, 1.0, 12, 8, 2).unwrap());
        let space = DgSpace::new(mesh, 1).unwrap();
        let ms = MapSpace::new(mbar, 1.0, 1.0).unwrap();
        let mut p = RegistrationParams::new(&ms, 2, 2);
        p.grid_cells = 6;
        (space, ms, p)
    }

    fn front(space: &DgSpace, x0: f64, speed: f64) -> Vec<f64> {
        space.interpolate(|x| vec![1.0 + (((x0 + speed * x[1]) - x[0]) / 0.05).tanh()])
    }

    #[test]
    fn objective_gradient_matches_fd() {
        let (space, ms, p) = setup(3);
        let mut t = vec![front(&space, 0.5, 0.0)];
        orthonormalize(&mut t, Inner::L2(&space));
        let reg = Registrar::new(&space, &t, ReducedMapBasis::full(ms), &p).unwrap();
        let s = front(&space, 0.45, 0.1);
        let a: Vec<f64> = (0..ms.dim()).map(|m| 0.02 * ((m as f64) * 0.7).sin()).collect();
        let o = reg.objective(&s, &a);
        for m in [0, 3, 9, ms.dim() - 1] {
            let h = 1e-6;
            let mut ap = a.clone();
            ap[m] += h;
            let mut am = a.clone();
            am[m] -= h;
            let fd = (reg.objective(&s, &ap).total - reg.objective(&s, &am).total) / (2.0 * h);
            assert!((fd - o.grad[m]).abs() < 1e-4 * (1.0 + fd.abs()), "mode {m}: {fd} vs {}", o.grad[m]);
        }
    }

    #[test]
    fn registration_aligns_a_moving_front() {
        let (space, ms, p) = setup(3);
        let mut t = vec![front(&space, 0.5, 0.0)];
        orthonormalize(&mut t, Inner::L2(&space));
        let reg = Registrar::new(&space, &t, ReducedMapBasis::full(ms), &p).unwrap();
        let s = front(&space, 0.45, 0.1);
        let before = reg.objective(&s, &vec![0.0; ms.dim()]).proximity / reg.sensor_energy(&s);
        let r = reg.register(&s, &vec![0.0; ms.dim()]).unwrap();
        assert!(r.admissible);
        assert!(r.relative < 0.1 * before, "{} vs {before}", r.relative);
    }

    #[test]
    fn greedy_and_repod_on_a_front_family() {
        let (space, ms, p) = setup(2);
        let sensors: Vec<Vec<f64>> = (0..4).map(|k| front(&space, 0.4 + 0.05 * k as f64, 0.1)).collect();
        let g = greedy_registration(&space, &sensors, &sensors[1..2], ms, &p).unwrap();
        assert_eq!(g.coeffs.len(), 4);
        assert!(g.basis.dim() >= 1 && g.basis.dim() <= ms.dim());
        let first = g.history[0].max_relative;
        assert!(g.history.last().unwrap().max_relative <= first * 1.0001);
        let rp = repod(&space, &sensors, &g.basis, &g.coeffs, 1e-4).unwrap();
        let plain = pod(&sensors, 1e-4, Inner::L2(&space)).unwrap();
        assert!(rp.pod.n_modes() <= plain.n_modes());
        let z = &rp.pod.modes;
        for i in 0..z.len() {
            for j in 0..z.len() {
                let e = space.l2_inner(&z[i], &z[j]);
                assert!((e - if i == j { 1.0 } else { 0.0 }).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn identity_map_reduces_to_plain_pod() {
        let (space, ms, _) = setup(2);
        let sensors: Vec<Vec<f64>> = (0..3).map(|k| front(&space, 0.4 + 0.1 * k as f64, 0.0)).collect();
        let basis = ReducedMapBasis { space: ms, modes: vec![] };
        let coeffs = vec![vec![]; 3];
        let rp = repod(&space, &sensors, &basis, &coeffs, 1e-6).unwrap();
        let plain = pod(&sensors, 1e-6, Inner::L2(&space)).unwrap();
        for (a, b) in rp.pod.eigenvalues.iter().zip(&plain.eigenvalues) {
            assert!((a - b).abs() < 1e-10 * plain.eigenvalues[0]);
        }
    }
}
