//! Discontinuous piecewise-polynomial fields on a [`SpaceTimeMesh`].
//!
//! Coefficients are nodal values with linear index `j = i + k n_lp + d n_lp N_e`
//! (node `i`, element `k`, component `d`, all zero-based).

pub mod best_fit;
pub mod br2;
pub mod continuous;
pub mod norms;
pub mod pod;

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{invalid, Result};
use crate::mesh::SpaceTimeMesh;
use crate::quadrature::{line_rule, triangle_rule, TriangleRule};
use crate::reference::ReferenceTriangle;

pub use best_fit::{best_fit_error, registered_best_fit_error};
pub use continuous::to_continuous;
pub use norms::{assemble_norms, NormPair};
pub use br2::{Br2, FacetOperator, BR2_ETA};
pub use pod::{pod, Inner, PodResult};

/// Map-independent quadrature tables on the reference element.
#[derive(Clone, Debug)]
pub struct Tables {
    pub vol: TriangleRule,
    /// `vol_phi[q * n_lp + i]`
    pub vol_phi: Vec<f64>,
    pub vol_dphi: Vec<[f64; 2]>,
    /// Gauss points along an edge, parameter in [0, 1].
    pub edge_s: Vec<f64>,
    pub edge_w: Vec<f64>,
    /// Per local edge: basis values / reference gradients at the edge points.
    pub edge_phi: [Vec<f64>; 3],
    pub edge_dphi: [Vec<[f64; 2]>; 3],
    pub edge_xi: [Vec<[f64; 2]>; 3],
    pub mass_ref: DMatrix<f64>,
    pub mass_ref_inv: DMatrix<f64>,
    /// Nodal L2 projector onto polynomials of degree `p - 1`.
    pub proj_lower: DMatrix<f64>,
}

impl Tables {
    pub fn new(reference: &ReferenceTriangle) -> Result<Self> {
        let p = reference.p;
        let n = reference.n_local();
        let vol = triangle_rule(2 * p + 1)?;
        let mut vol_phi = Vec::with_capacity(vol.len() * n);
        let mut vol_dphi = Vec::with_capacity(vol.len() * n);
        for x in &vol.points {
            vol_phi.extend(reference.eval(*x));
            vol_dphi.extend(reference.grad(*x));
        }
        let line = line_rule(p + 1)?;
        let mut edge_phi: [Vec<f64>; 3] = Default::default();
        let mut edge_dphi: [Vec<[f64; 2]>; 3] = Default::default();
        let mut edge_xi: [Vec<[f64; 2]>; 3] = Default::default();
        for l in 0..3 {
            for &s in &line.points {
                let xi = ReferenceTriangle::edge_point(l, s);
                edge_xi[l].push(xi);
                edge_phi[l].extend(reference.eval(xi));
                edge_dphi[l].extend(reference.grad(xi));
            }
        }
        let mut mass_ref = DMatrix::zeros(n, n);
        for (q, w) in vol.weights.iter().enumerate() {
            let phi = &vol_phi[q * n..(q + 1) * n];
            for i in 0..n {
                for j in 0..n {
                    mass_ref[(i, j)] += w * phi[i] * phi[j];
                }
            }
        }
        let mass_ref_inv = mass_ref
            .clone()
            .try_inverse()
            .ok_or_else(|| invalid("singular reference mass matrix"))?;
        let mut lower = Vec::new();
        for d in 0..p as i32 {
            for b in 0..=d {
                lower.push((d - b, b));
            }
        }
        let v = DMatrix::from_fn(n, lower.len(), |r, m| {
            let (a, b) = lower[m];
            reference.nodes[r][0].powi(a) * reference.nodes[r][1].powi(b)
        });
        let vtm = v.transpose() * &mass_ref;
        let gram_inv = (&vtm * &v)
            .try_inverse()
            .ok_or_else(|| invalid("singular lower-degree Gram matrix"))?;
        let proj_lower = &v * gram_inv * vtm;
        Ok(Self {
            vol,
            vol_phi,
            vol_dphi,
            edge_s: line.points,
            edge_w: line.weights,
            edge_phi,
            edge_dphi,
            edge_xi,
            mass_ref,
            mass_ref_inv,
            proj_lower,
        })
    }

    pub fn n_vol(&self) -> usize {
        self.vol.len()
    }

    pub fn n_edge(&self) -> usize {
        self.edge_s.len()
    }
}

/// A DG space of `n_comp`-vector fields over a mesh.
#[derive(Clone, Debug)]
pub struct DgSpace {
    pub mesh: Arc<SpaceTimeMesh>,
    pub n_comp: usize,
    pub tables: Arc<Tables>,
}

impl DgSpace {
    pub fn new(mesh: Arc<SpaceTimeMesh>, n_comp: usize) -> Result<Self> {
        if n_comp == 0 {
            return Err(invalid("state dimension must be positive"));
        }
        let tables = Arc::new(Tables::new(&mesh.reference)?);
        Ok(Self { mesh, n_comp, tables })
    }

    /// Same mesh and tables, different number of components.
    pub fn with_components(&self, n_comp: usize) -> Self {
        Self { mesh: self.mesh.clone(), n_comp, tables: self.tables.clone() }
    }

    pub fn n_local(&self) -> usize {
        self.mesh.n_local()
    }

    pub fn n_elements(&self) -> usize {
        self.mesh.n_elements()
    }

    pub fn n_dofs(&self) -> usize {
        self.n_local() * self.n_elements() * self.n_comp
    }

    #[inline]
    pub fn index(&self, i: usize, k: usize, d: usize) -> usize {
        let nl = self.n_local();
        i + k * nl + d * nl * self.n_elements()
    }

    /// Inverse of [`DgSpace::index`].
    pub fn unindex(&self, j: usize) -> (usize, usize, usize) {
        let nl = self.n_local();
        let ne = self.n_elements();
        (j % nl, (j / nl) % ne, j / (nl * ne))
    }

    pub fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.n_dofs() {
            return Err(invalid(format!("field has {} coefficients, expected {}", v.len(), self.n_dofs())));
        }
        Ok(())
    }

    /// Value of component `d` on element `k` at reference point `xi`.
    pub fn eval_elem(&self, u: &[f64], k: usize, d: usize, xi: [f64; 2]) -> f64 {
        let phi = self.mesh.reference.eval(xi);
        let base = self.index(0, k, d);
        phi.iter().zip(&u[base..base + phi.len()]).map(|(a, b)| a * b).sum()
    }

    /// All components at a physical point.
    pub fn eval_point(&self, u: &[f64], x: [f64; 2]) -> Vec<f64> {
        let (k, xi) = self.mesh.locate(x);
        let phi = self.mesh.reference.eval(xi);
        (0..self.n_comp)
            .map(|d| {
                let base = self.index(0, k, d);
                phi.iter().zip(&u[base..base + phi.len()]).map(|(a, b)| a * b).sum()
            })
            .collect()
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate(&self, f: impl Fn([f64; 2]) -> Vec<f64>) -> Vec<f64> {
        let nl = self.n_local();
        let mut u = vec![0.0; self.n_dofs()];
        for k in 0..self.n_elements() {
            for i in 0..nl {
                let v = f(self.mesh.nodes[k * nl + i]);
                for d in 0..self.n_comp {
                    u[self.index(i, k, d)] = v[d];
                }
            }
        }
        u
    }

    /// Component `d` as a scalar field.
    pub fn component(&self, u: &[f64], d: usize) -> Vec<f64> {
        let m = self.n_local() * self.n_elements();
        u[d * m..(d + 1) * m].to_vec()
    }

    /// Element mass matrix `det(B_k) * M_ref`.
    pub fn element_mass(&self, k: usize) -> DMatrix<f64> {
        &self.tables.mass_ref * self.mesh.geometry[k].det
    }

    /// `(a, b)_{L^2}` using the block-diagonal mass matrix.
    pub fn l2_inner(&self, a: &[f64], b: &[f64]) -> f64 {
        let nl = self.n_local();
        let mref = &self.tables.mass_ref;
        let mut s = 0.0;
        for d in 0..self.n_comp {
            for k in 0..self.n_elements() {
                let base = self.index(0, k, d);
                let (ak, bk) = (&a[base..base + nl], &b[base..base + nl]);
                let mut e = 0.0;
                for i in 0..nl {
                    for j in 0..nl {
                        e += ak[i] * mref[(i, j)] * bk[j];
                    }
                }
                s += e * self.mesh.geometry[k].det;
            }
        }
        s
    }

    pub fn l2_norm(&self, a: &[f64]) -> f64 {
        self.l2_inner(a, a).max(0.0).sqrt()
    }

    /// `X_hf * a` without forming the matrix.
    pub fn mass_apply(&self, a: &[f64]) -> Vec<f64> {
        let nl = self.n_local();
        let mref = &self.tables.mass_ref;
        let mut out = vec![0.0; a.len()];
        for d in 0..self.n_comp {
            for k in 0..self.n_elements() {
                let base = self.index(0, k, d);
                let det = self.mesh.geometry[k].det;
                for i in 0..nl {
                    let mut s = 0.0;
                    for j in 0..nl {
                        s += mref[(i, j)] * a[base + j];
                    }
                    out[base + i] = s * det;
                }
            }
        }
        out
    }

    /// Solve `X_hf x = b` blockwise.
    pub fn mass_solve(&self, b: &[f64]) -> Vec<f64> {
        let nl = self.n_local();
        let minv = &self.tables.mass_ref_inv;
        let mut out = vec![0.0; b.len()];
        for d in 0..self.n_comp {
            for k in 0..self.n_elements() {
                let base = self.index(0, k, d);
                let det = self.mesh.geometry[k].det;
                for i in 0..nl {
                    let mut s = 0.0;
                    for j in 0..nl {
                        s += minv[(i, j)] * b[base + j];
                    }
                    out[base + i] = s / det;
                }
            }
        }
        out
    }

    /// L2 projection onto the DG space of a pointwise function.
    pub fn project(&self, f: impl Fn([f64; 2]) -> Vec<f64>) -> Vec<f64> {
        let nl = self.n_local();
        let t = &self.tables;
        let mut rhs = vec![0.0; self.n_dofs()];
        for k in 0..self.n_elements() {
            let geo = &self.mesh.geometry[k];
            for (q, xi) in t.vol.points.iter().enumerate() {
                let w = t.vol.weights[q] * geo.det;
                let v = f(geo.to_physical(*xi));
                for d in 0..self.n_comp {
                    for i in 0..nl {
                        rhs[self.index(i, k, d)] += w * v[d] * t.vol_phi[q * nl + i];
                    }
                }
            }
        }
        self.mass_solve(&rhs)
    }
}

impl DgSpace {
    /// Physical positions of all volume quadrature points, element-major.
    pub fn quad_points(&self) -> Vec<[f64; 2]> {
        let mut out = Vec::with_capacity(self.n_elements() * self.tables.n_vol());
        for geo in &self.mesh.geometry {
            for xi in &self.tables.vol.points {
                out.push(geo.to_physical(*xi));
            }
        }
        out
    }

    /// Quadrature weights matching [`DgSpace::quad_points`].
    pub fn quad_weights(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_elements() * self.tables.n_vol());
        for geo in &self.mesh.geometry {
            for w in &self.tables.vol.weights {
                out.push(w * geo.det);
            }
        }
        out
    }

    /// Component `d` of `u` at every volume quadrature point.
    pub fn values_at_quad(&self, u: &[f64], d: usize) -> Vec<f64> {
        let nl = self.n_local();
        let nq = self.tables.n_vol();
        let mut out = Vec::with_capacity(self.n_elements() * nq);
        for k in 0..self.n_elements() {
            let base = self.index(0, k, d);
            let uk = &u[base..base + nl];
            for q in 0..nq {
                let phi = &self.tables.vol_phi[q * nl..(q + 1) * nl];
                out.push(phi.iter().zip(uk).map(|(a, b)| a * b).sum());
            }
        }
        out
    }

    /// L2 projection from values at the volume quadrature points (one slice per component).
    pub fn project_quad_values(&self, vals: &[Vec<f64>]) -> Vec<f64> {
        let nl = self.n_local();
        let nq = self.tables.n_vol();
        let mut rhs = vec![0.0; self.n_dofs()];
        for (d, v) in vals.iter().enumerate() {
            for k in 0..self.n_elements() {
                let det = self.mesh.geometry[k].det;
                for q in 0..nq {
                    let w = self.tables.vol.weights[q] * det * v[k * nq + q];
                    for i in 0..nl {
                        rhs[self.index(i, k, d)] += w * self.tables.vol_phi[q * nl + i];
                    }
                }
            }
        }
        self.mass_solve(&rhs)
    }
}
