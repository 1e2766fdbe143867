//! Map data (`Phi`, cofactor `g G^{-T}`, `g`) cached at every quadrature point
//! of the reference mesh.

use crate::dg::DgSpace;
use crate::error::{Result, StrobeError};
use crate::maps::{Displacement, MapTable, ReducedMapBasis};

#[derive(Clone, Copy, Debug)]
pub struct PointMap {
    /// Physical position `Phi(X)`.
    pub x: [f64; 2],
    /// `g G^{-T}`.
    pub cof: [[f64; 2]; 2],
    pub det: f64,
}

impl PointMap {
    pub fn identity(x: [f64; 2]) -> Self {
        Self { x, cof: [[1.0, 0.0], [0.0, 1.0]], det: 1.0 }
    }

    pub fn from_jacobian(x: [f64; 2], g: [[f64; 2]; 2]) -> Self {
        Self {
            x,
            cof: [[g[1][1], -g[1][0]], [-g[0][1], g[0][0]]],
            det: g[0][0] * g[1][1] - g[0][1] * g[1][0],
        }
    }
}

/// Reference positions of every quadrature point: all volume points
/// (element-major), then all edge points (element, local edge, point).
pub fn all_points(space: &DgSpace) -> Vec<[f64; 2]> {
    let t = &space.tables;
    let mut pts = space.quad_points();
    for geo in &space.mesh.geometry {
        for l in 0..3 {
            for xi in &t.edge_xi[l] {
                pts.push(geo.to_physical(*xi));
            }
        }
    }
    pts
}

/// Volume then edge quadrature points of each listed element in turn.
pub fn subset_points(space: &DgSpace, elements: &[usize]) -> Vec<[f64; 2]> {
    let t = &space.tables;
    let mut pts = Vec::new();
    for &k in elements {
        let geo = &space.mesh.geometry[k];
        pts.extend(t.vol.points.iter().map(|xi| geo.to_physical(*xi)));
        for l in 0..3 {
            pts.extend(t.edge_xi[l].iter().map(|xi| geo.to_physical(*xi)));
        }
    }
    pts
}

#[derive(Clone, Debug)]
pub struct MapGeometry {
    pub nq: usize,
    pub nf: usize,
    pub n_elements: usize,
    pub vol: Vec<PointMap>,
    pub edge: Vec<PointMap>,
    /// False for the identity map, which lets kernels skip the mapping.
    pub mapped: bool,
}

impl MapGeometry {
    pub fn identity(space: &DgSpace) -> Self {
        let pts = all_points(space);
        Self::from_fn(space, |i| PointMap::identity(pts[i]), false)
    }

    fn from_fn(space: &DgSpace, f: impl Fn(usize) -> PointMap, mapped: bool) -> Self {
        let nq = space.tables.n_vol();
        let nf = space.tables.n_edge();
        let ne = space.n_elements();
        let nv = ne * nq;
        let vol = (0..nv).map(&f).collect();
        let edge = (0..ne * 3 * nf).map(|i| f(nv + i)).collect();
        Self { nq, nf, n_elements: ne, vol, edge, mapped }
    }

    pub fn from_displacement(space: &DgSpace, phi: &Displacement) -> Result<Self> {
        let pts = all_points(space);
        let g = Self::from_fn(
            space,
            |i| {
                let (y, jac) = phi.map(pts[i]);
                PointMap::from_jacobian(y, jac)
            },
            true,
        );
        g.check()?;
        Ok(g)
    }

    /// Evaluates `id + sum a_m phi_m` through a table built on [`all_points`].
    pub fn from_table(space: &DgSpace, table: &MapTable, a: &[f64]) -> Result<Self> {
        let g = Self::from_fn(
            space,
            |i| {
                let (y, jac) = table.eval(a, i);
                PointMap::from_jacobian(y, jac)
            },
            true,
        );
        g.check()?;
        Ok(g)
    }

    /// Fills only the listed elements (the rest keep identity data).
    pub fn from_table_subset(space: &DgSpace, table: &MapTable, a: &[f64], elements: &[usize]) -> Result<Self> {
        let mut g = Self::identity(space);
        g.mapped = true;
        let nv = g.n_elements * g.nq;
        for &k in elements {
            for q in 0..g.nq {
                let i = k * g.nq + q;
                let (y, jac) = table.eval(a, i);
                g.vol[i] = PointMap::from_jacobian(y, jac);
            }
            for e in 0..3 * g.nf {
                let i = k * 3 * g.nf + e;
                let (y, jac) = table.eval(a, nv + i);
                g.edge[i] = PointMap::from_jacobian(y, jac);
            }
        }
        g.check()?;
        Ok(g)
    }

    /// Overwrites the listed elements from a table built on
    /// [`subset_points`] of the same element list.
    pub fn fill_subset(&mut self, table: &MapTable, a: &[f64], elements: &[usize]) -> Result<()> {
        let per = self.nq + 3 * self.nf;
        let mut gmin = f64::INFINITY;
        for (e, &k) in elements.iter().enumerate() {
            for q in 0..self.nq {
                let (y, jac) = table.eval(a, e * per + q);
                let pm = PointMap::from_jacobian(y, jac);
                gmin = gmin.min(pm.det);
                self.vol[k * self.nq + q] = pm;
            }
            for i in 0..3 * self.nf {
                let (y, jac) = table.eval(a, e * per + self.nq + i);
                let pm = PointMap::from_jacobian(y, jac);
                gmin = gmin.min(pm.det);
                self.edge[k * 3 * self.nf + i] = pm;
            }
        }
        self.mapped = true;
        if gmin > 0.0 {
            Ok(())
        } else {
            Err(StrobeError::DegenerateMap(format!("min det G = {gmin:.3e}")))
        }
    }

    pub fn check(&self) -> Result<()> {
        let gmin = self.vol.iter().chain(&self.edge).map(|p| p.det).fold(f64::INFINITY, f64::min);
        if gmin > 0.0 {
            Ok(())
        } else {
            Err(StrobeError::DegenerateMap(format!("min det G = {gmin:.3e}")))
        }
    }

    #[inline]
    pub fn vol_point(&self, k: usize, q: usize) -> &PointMap {
        &self.vol[k * self.nq + q]
    }

    #[inline]
    pub fn edge_point(&self, k: usize, l: usize, q: usize) -> &PointMap {
        &self.edge[(k * 3 + l) * self.nf + q]
    }
}

/// Table of a reduced map basis on every quadrature point of the mesh.
pub fn map_table(space: &DgSpace, basis: &ReducedMapBasis) -> MapTable {
    MapTable::new(basis, all_points(space))
}
