//! Element-local space-time DG residual on a mapped reference mesh.
//!
//! Element `k` owns the convective volume/facet terms and source tested on
//! its own basis, its volume diffusion, half of each interior BR2 facet term
//! (rows on both sides) and all of its boundary BR2 terms. Summing the local
//! residuals over all elements gives the global residual. The stencil of `k`
//! is slot 0 (itself) and slot `l + 1` (the neighbour across local edge `l`).

use std::sync::Arc;

use rayon::prelude::*;

use super::geometry::MapGeometry;
use crate::dg::{Br2, DgSpace, FacetOperator, BR2_ETA};
use crate::error::Result;
use crate::linalg::SparseMatrix;
use crate::models::{element_viscosity, element_viscosity_grad, rusanov_flux, rusanov_flux_jacobian, ConservationLaw, ViscosityParams, MAX_COMP};

/// Mesh, DG space and the precomputed (map-independent) diffusion operators.
#[derive(Clone, Debug)]
pub struct Discretization {
    pub space: DgSpace,
    pub br2: Arc<Br2>,
}

impl Discretization {
    pub fn new(space: DgSpace) -> Self {
        let br2 = Arc::new(Br2::new(&space, BR2_ETA));
        Self { space, br2 }
    }

    /// Number of local unknowns in the stencil of one element.
    pub fn stencil_len(&self) -> usize {
        4 * self.space.n_comp * self.space.n_local()
    }

    pub fn stencil(&self, k: usize) -> [Option<usize>; 4] {
        let nb = self.space.mesh.neighbors[k];
        [Some(k), nb[0], nb[1], nb[2]]
    }

    /// Global indices of the stencil unknowns (`None` for absent neighbours).
    pub fn stencil_dofs(&self, k: usize) -> Vec<Option<usize>> {
        let s = &self.space;
        let nl = s.n_local();
        let mut out = Vec::with_capacity(self.stencil_len());
        for e in self.stencil(k) {
            for d in 0..s.n_comp {
                for i in 0..nl {
                    out.push(e.map(|e| s.index(i, e, d)));
                }
            }
        }
        out
    }

    pub fn gather(&self, k: usize, w: &[f64]) -> Vec<f64> {
        self.stencil_dofs(k).iter().map(|j| j.map_or(0.0, |j| w[j])).collect()
    }

    /// Element viscosity of the whole field.
    pub fn viscosity(&self, law: &dyn ConservationLaw, w: &[f64]) -> Vec<f64> {
        let p = law.viscosity();
        let s = &self.space;
        let nl = s.n_local();
        let c = law.sensor_component();
        (0..s.n_elements())
            .map(|k| {
                let b = s.index(0, k, c);
                element_viscosity(s, &w[b..b + nl], &p)
            })
            .collect()
    }

    /// Viscosity of the stencil elements computed from local unknowns.
    pub fn local_viscosity(&self, law: &dyn ConservationLaw, k: usize, local: &[f64]) -> [f64; 4] {
        let p: ViscosityParams = law.viscosity();
        let nl = self.space.n_local();
        let nc = self.space.n_comp;
        let c = law.sensor_component();
        let st = self.stencil(k);
        let mut eps = [0.0; 4];
        for s in 0..4 {
            if st[s].is_some() {
                let b = (s * nc + c) * nl;
                eps[s] = element_viscosity(&self.space, &local[b..b + nl], &p);
            }
        }
        eps
    }

    /// Local residual of element `k` (length [`Discretization::stencil_len`])
    /// and, optionally, its dense row-major Jacobian with respect to the local
    /// unknowns. Viscosity is held fixed.
    pub fn element_residual(
        &self,
        law: &dyn ConservationLaw,
        geo: &MapGeometry,
        k: usize,
        w: &[f64],
        eps: &[f64; 4],
        r: &mut [f64],
        mut jac: Option<&mut [f64]>,
    ) -> Result<()> {
        let s = &self.space;
        let t = &s.tables;
        let mesh = &s.mesh;
        let nc = s.n_comp;
        let nl = s.n_local();
        let nf = t.n_edge();
        let ns = self.stencil_len();
        let idx = |slot: usize, d: usize, i: usize| (slot * nc + d) * nl + i;
        r.iter_mut().for_each(|v| *v = 0.0);
        if let Some(j) = jac.as_deref_mut() {
            j.iter_mut().for_each(|v| *v = 0.0);
        }
        let egeo = &mesh.geometry[k];

        let mut u = [0.0; MAX_COMP];
        let mut f = [0.0; MAX_COMP];
        let mut a = [0.0; MAX_COMP * MAX_COMP];
        let mut src = [0.0; MAX_COMP];
        let mut dsrc = [0.0; MAX_COMP * MAX_COMP];
        let mut grads = vec![[0.0; 2]; nl];
        let source = law.has_source();

        // convective volume term and source
        for q in 0..t.n_vol() {
            let phi = &t.vol_phi[q * nl..(q + 1) * nl];
            for i in 0..nl {
                grads[i] = egeo.grad_to_physical(t.vol_dphi[q * nl + i]);
            }
            for d in 0..nc {
                u[d] = (0..nl).map(|i| phi[i] * w[idx(0, d, i)]).sum();
            }
            law.check_state(&u[..nc])?;
            let pm = geo.vol_point(k, q);
            let cof = pm.cof;
            let wq = t.vol.weights[q] * egeo.det;
            law.flux(&u[..nc], &mut f[..nc]);
            if source {
                law.source(&u[..nc], pm.x, &mut src[..nc]);
            }
            for d in 0..nc {
                let fm = [f[d] * cof[0][0] + u[d] * cof[1][0], f[d] * cof[0][1] + u[d] * cof[1][1]];
                for i in 0..nl {
                    let mut v = fm[0] * grads[i][0] + fm[1] * grads[i][1];
                    if source {
                        v += pm.det * src[d] * phi[i];
                    }
                    r[idx(0, d, i)] -= wq * v;
                }
            }
            if let Some(jm) = jac.as_deref_mut() {
                law.flux_jacobian(&u[..nc], &mut a[..nc * nc]);
                if source {
                    law.source_jacobian(&u[..nc], pm.x, &mut dsrc[..nc * nc]);
                }
                for d in 0..nc {
                    for e in 0..nc {
                        let id = if d == e { 1.0 } else { 0.0 };
                        let ad = a[d * nc + e];
                        let dfm = [ad * cof[0][0] + id * cof[1][0], ad * cof[0][1] + id * cof[1][1]];
                        let ds = if source { pm.det * dsrc[d * nc + e] } else { 0.0 };
                        for i in 0..nl {
                            let c = wq * (dfm[0] * grads[i][0] + dfm[1] * grads[i][1] + ds * phi[i]);
                            let row = idx(0, d, i) * ns;
                            for jj in 0..nl {
                                jm[row + idx(0, e, jj)] -= c * phi[jj];
                            }
                        }
                    }
                }
            }
        }

        // convective facet terms
        let mut ue = [0.0; MAX_COMP];
        let mut h = [0.0; MAX_COMP];
        let mut da = [0.0; MAX_COMP * MAX_COMP];
        let mut db = [0.0; MAX_COMP * MAX_COMP];
        let mut gd = [0.0; MAX_COMP];
        for l in 0..3 {
            let fc = &mesh.facets[mesh.element_facets[k][l]];
            let is_plus = fc.plus == (k, l);
            let nrm = if is_plus { fc.normal } else { [-fc.normal[0], -fc.normal[1]] };
            let nb_edge = fc.minus.map(|m| if is_plus { m.1 } else { fc.plus.1 });
            for q in 0..nf {
                let phi = &t.edge_phi[l][q * nl..(q + 1) * nl];
                for d in 0..nc {
                    u[d] = (0..nl).map(|i| phi[i] * w[idx(0, d, i)]).sum();
                }
                let pm = geo.edge_point(k, l, q);
                let cof = pm.cof;
                let m = [cof[0][0] * nrm[0] + cof[0][1] * nrm[1], cof[1][0] * nrm[0] + cof[1][1] * nrm[1]];
                let mut mask = 0u32;
                let phe = match nb_edge {
                    Some(le) => {
                        let qq = nf - 1 - q;
                        let phe = &t.edge_phi[le][qq * nl..(qq + 1) * nl];
                        for d in 0..nc {
                            ue[d] = (0..nl).map(|i| phe[i] * w[idx(l + 1, d, i)]).sum();
                        }
                        Some(phe)
                    }
                    None => {
                        mask = law.dirichlet(fc.boundary.expect("boundary facet"), pm.x, &mut gd[..nc]);
                        for d in 0..nc {
                            ue[d] = if mask >> d & 1 == 1 { gd[d] } else { u[d] };
                        }
                        None
                    }
                };
                law.check_state(&ue[..nc])?;
                rusanov_flux(law, &ue[..nc], &u[..nc], m, &mut h[..nc]);
                let wq = t.edge_w[q] * fc.length;
                for d in 0..nc {
                    for i in 0..nl {
                        r[idx(0, d, i)] += wq * phi[i] * h[d];
                    }
                }
                if let Some(jm) = jac.as_deref_mut() {
                    rusanov_flux_jacobian(law, &ue[..nc], &u[..nc], m, &mut da[..nc * nc], &mut db[..nc * nc]);
                    for d in 0..nc {
                        for e in 0..nc {
                            let mut dint = db[d * nc + e];
                            if phe.is_none() && mask >> e & 1 == 0 {
                                dint += da[d * nc + e];
                            }
                            for i in 0..nl {
                                let row = idx(0, d, i) * ns;
                                let c = wq * phi[i];
                                for jj in 0..nl {
                                    jm[row + idx(0, e, jj)] += c * dint * phi[jj];
                                }
                                if let Some(phe) = phe {
                                    let dext = da[d * nc + e];
                                    for jj in 0..nl {
                                        jm[row + idx(l + 1, e, jj)] += c * dext * phe[jj];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }

        self.diffusion(law, geo, k, w, eps, r, jac);
        Ok(())
    }

    /// BR2 diffusion part of the local residual (linear in `w` and in `eps`);
    /// adds to `r` and `jac`.
    fn diffusion(
        &self,
        law: &dyn ConservationLaw,
        geo: &MapGeometry,
        k: usize,
        w: &[f64],
        eps: &[f64; 4],
        r: &mut [f64],
        mut jac: Option<&mut [f64]>,
    ) {
        let s = &self.space;
        let t = &s.tables;
        let mesh = &s.mesh;
        let nc = s.n_comp;
        let nl = s.n_local();
        let nf = t.n_edge();
        let ns = self.stencil_len();
        let idx = |slot: usize, d: usize, i: usize| (slot * nc + d) * nl + i;
        let mut gd = [0.0; MAX_COMP];
        // volume diffusion
        let kk = &self.br2.stiffness[k];
        for d in 0..nc {
            for i in 0..nl {
                let mut v = 0.0;
                for jj in 0..nl {
                    v += kk[(i, jj)] * w[idx(0, d, jj)];
                }
                r[idx(0, d, i)] += eps[0] * v;
            }
            if let Some(jm) = jac.as_deref_mut() {
                for i in 0..nl {
                    for jj in 0..nl {
                        jm[idx(0, d, i) * ns + idx(0, d, jj)] += eps[0] * kk[(i, jj)];
                    }
                }
            }
        }

        // facet diffusion
        let mut gq = vec![0.0; nf * nc];
        for l in 0..3 {
            let fid = mesh.element_facets[k][l];
            let fc = &mesh.facets[fid];
            match &self.br2.facets[fid] {
                FacetOperator::Interior { by_plus, by_minus } => {
                    let is_plus = fc.plus == (k, l);
                    let (sp, sm) = if is_plus { (0, l + 1) } else { (l + 1, 0) };
                    let (ep, em) = (eps[sp], eps[sm]);
                    let slot = |a: usize| if a < nl { (sp, a) } else { (sm, a - nl) };
                    for d in 0..nc {
                        for ra in 0..2 * nl {
                            let (rs, ri) = slot(ra);
                            let mut v = 0.0;
                            for cb in 0..2 * nl {
                                let (cs, ci) = slot(cb);
                                let op = 0.5 * (ep * by_plus[(ra, cb)] + em * by_minus[(ra, cb)]);
                                v += op * w[idx(cs, d, ci)];
                                if let Some(jm) = jac.as_deref_mut() {
                                    jm[idx(rs, d, ri) * ns + idx(cs, d, ci)] += op;
                                }
                            }
                            r[idx(rs, d, ri)] += v;
                        }
                    }
                }
                FacetOperator::Boundary { op, data } => {
                    let tag = fc.boundary.expect("boundary facet");
                    let mut mask = 0u32;
                    for q in 0..nf {
                        mask = law.dirichlet(tag, geo.edge_point(k, l, q).x, &mut gd[..nc]);
                        for d in 0..nc {
                            gq[d * nf + q] = gd[d];
                        }
                    }
                    for d in 0..nc {
                        if mask >> d & 1 == 0 {
                            continue;
                        }
                        for i in 0..nl {
                            let mut v = 0.0;
                            for jj in 0..nl {
                                v += op[(i, jj)] * w[idx(0, d, jj)];
                            }
                            for q in 0..nf {
                                v += data[(i, q)] * gq[d * nf + q];
                            }
                            r[idx(0, d, i)] += eps[0] * v;
                            if let Some(jm) = jac.as_deref_mut() {
                                for jj in 0..nl {
                                    jm[idx(0, d, i) * ns + idx(0, d, jj)] += eps[0] * op[(i, jj)];
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    /// Local residual with the viscosity computed from the local unknowns and,
    /// optionally, the exact Jacobian including the viscosity linearization.
    pub fn element_residual_exact(
        &self,
        law: &dyn ConservationLaw,
        geo: &MapGeometry,
        k: usize,
        w: &[f64],
        r: &mut [f64],
        jac: Option<&mut [f64]>,
    ) -> Result<()> {
        let nl = self.space.n_local();
        let nc = self.space.n_comp;
        let ns = self.stencil_len();
        let p = law.viscosity();
        let c = law.sensor_component();
        let st = self.stencil(k);
        let mut eps = [0.0; 4];
        let mut grads: [Vec<f64>; 4] = Default::default();
        for slot in 0..4 {
            if st[slot].is_some() {
                let b = (slot * nc + c) * nl;
                let (e, g) = element_viscosity_grad(&self.space, &w[b..b + nl], &p);
                eps[slot] = e;
                grads[slot] = g;
            }
        }
        let Some(jm) = jac else {
            return self.element_residual(law, geo, k, w, &eps, r, None);
        };
        self.element_residual(law, geo, k, w, &eps, r, Some(&mut *jm))?;
        let mut dr = vec![0.0; ns];
        for slot in 0..4 {
            if grads[slot].iter().all(|g| *g == 0.0) {
                continue;
            }
            let mut unit = [0.0; 4];
            unit[slot] = 1.0;
            dr.iter_mut().for_each(|v| *v = 0.0);
            self.diffusion(law, geo, k, w, &unit, &mut dr, None);
            let b = (slot * nc + c) * nl;
            for (a, da) in dr.iter().enumerate() {
                if *da == 0.0 {
                    continue;
                }
                for (j, g) in grads[slot].iter().enumerate() {
                    jm[a * ns + b + j] += da * g;
                }
            }
        }
        Ok(())
    }

    fn stencil_eps(&self, k: usize, eps: &[f64]) -> [f64; 4] {
        let st = self.stencil(k);
        let mut e = [0.0; 4];
        for s in 0..4 {
            if let Some(j) = st[s] {
                e[s] = eps[j];
            }
        }
        e
    }

    /// Global residual with a given element viscosity.
    pub fn residual_with(&self, law: &dyn ConservationLaw, geo: &MapGeometry, w: &[f64], eps: &[f64]) -> Result<Vec<f64>> {
        self.space.check_len(w)?;
        let ns = self.stencil_len();
        let locals: Vec<Result<(usize, Vec<f64>)>> = (0..self.space.n_elements())
            .into_par_iter()
            .map(|k| {
                let loc = self.gather(k, w);
                let mut r = vec![0.0; ns];
                self.element_residual(law, geo, k, &loc, &self.stencil_eps(k, eps), &mut r, None)?;
                Ok((k, r))
            })
            .collect();
        let mut out = vec![0.0; w.len()];
        for item in locals {
            let (k, r) = item?;
            for (j, v) in self.stencil_dofs(k).into_iter().zip(r) {
                if let Some(j) = j {
                    out[j] += v;
                }
            }
        }
        Ok(out)
    }

    /// Global residual with the state-dependent viscosity.
    pub fn residual(&self, law: &dyn ConservationLaw, geo: &MapGeometry, w: &[f64]) -> Result<Vec<f64>> {
        let eps = self.viscosity(law, w);
        self.residual_with(law, geo, w, &eps)
    }

    /// Residual and sparse Jacobian (viscosity frozen at `eps`).
    pub fn jacobian_with(
        &self,
        law: &dyn ConservationLaw,
        geo: &MapGeometry,
        w: &[f64],
        eps: &[f64],
    ) -> Result<(Vec<f64>, SparseMatrix)> {
        self.space.check_len(w)?;
        let ns = self.stencil_len();
        let locals: Vec<Result<(usize, Vec<f64>, Vec<f64>)>> = (0..self.space.n_elements())
            .into_par_iter()
            .map(|k| {
                let loc = self.gather(k, w);
                let mut r = vec![0.0; ns];
                let mut jm = vec![0.0; ns * ns];
                self.element_residual(law, geo, k, &loc, &self.stencil_eps(k, eps), &mut r, Some(&mut jm))?;
                Ok((k, r, jm))
            })
            .collect();
        self.scatter(w.len(), locals)
    }

    /// Residual and exact sparse Jacobian (viscosity linearized).
    pub fn jacobian(&self, law: &dyn ConservationLaw, geo: &MapGeometry, w: &[f64]) -> Result<(Vec<f64>, SparseMatrix)> {
        self.space.check_len(w)?;
        let ns = self.stencil_len();
        let locals: Vec<Result<(usize, Vec<f64>, Vec<f64>)>> = (0..self.space.n_elements())
            .into_par_iter()
            .map(|k| {
                let loc = self.gather(k, w);
                let mut r = vec![0.0; ns];
                let mut jm = vec![0.0; ns * ns];
                self.element_residual_exact(law, geo, k, &loc, &mut r, Some(&mut jm))?;
                Ok((k, r, jm))
            })
            .collect();
        self.scatter(w.len(), locals)
    }

    fn scatter(&self, n: usize, locals: Vec<Result<(usize, Vec<f64>, Vec<f64>)>>) -> Result<(Vec<f64>, SparseMatrix)> {
        let ns = self.stencil_len();
        let mut out = vec![0.0; n];
        let mut trip = Vec::new();
        for item in locals {
            let (k, r, jm) = item?;
            let dofs = self.stencil_dofs(k);
            for (a, ja) in dofs.iter().enumerate() {
                let Some(ja) = *ja else { continue };
                out[ja] += r[a];
                for (b, jb) in dofs.iter().enumerate() {
                    let v = jm[a * ns + b];
                    if let (Some(jb), true) = (*jb, v != 0.0) {
                        trip.push((ja, jb, v));
                    }
                }
            }
        }
        Ok((out, SparseMatrix::from_triplets(n, n, &trip)?))
    }
}
