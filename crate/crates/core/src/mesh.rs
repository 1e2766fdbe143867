//! Structured triangulation of the space-time slab `[0, L] x [0, T]`.
//!
//! Each `hx x ht` cell is split along its rising diagonal into a lower-right
//! triangle (even element index) and an upper-left triangle (odd index).

use std::collections::HashMap;

use sha2::{Digest, Sha256};

use crate::error::{invalid, Result};
use crate::reference::{edge_vertices, ReferenceTriangle};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum BoundaryTag {
    /// x = 0
    Left,
    /// x = L
    Right,
    /// t = 0
    Bottom,
    /// t = T
    Top,
}

#[derive(Clone, Debug)]
pub struct Facet {
    /// (element, local edge) on the side the normal points away from.
    pub plus: (usize, usize),
    pub minus: Option<(usize, usize)>,
    pub boundary: Option<BoundaryTag>,
    /// Unit normal, outward from `plus`.
    pub normal: [f64; 2],
    pub length: f64,
    /// End points in the orientation of the `plus` element's edge.
    pub ends: [[f64; 2]; 2],
}

/// Affine map `x = origin + jac * xi` from the reference triangle.
#[derive(Clone, Copy, Debug)]
pub struct ElementGeometry {
    pub origin: [f64; 2],
    pub jac: [[f64; 2]; 2],
    pub det: f64,
    pub inv: [[f64; 2]; 2],
}

impl ElementGeometry {
    fn from_vertices(v: [[f64; 2]; 3]) -> Self {
        let jac = [[v[1][0] - v[0][0], v[2][0] - v[0][0]], [v[1][1] - v[0][1], v[2][1] - v[0][1]]];
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let inv = [
            [jac[1][1] / det, -jac[0][1] / det],
            [-jac[1][0] / det, jac[0][0] / det],
        ];
        Self { origin: v[0], jac, det, inv }
    }

    pub fn to_physical(&self, xi: [f64; 2]) -> [f64; 2] {
        [
            self.origin[0] + self.jac[0][0] * xi[0] + self.jac[0][1] * xi[1],
            self.origin[1] + self.jac[1][0] * xi[0] + self.jac[1][1] * xi[1],
        ]
    }

    pub fn to_reference(&self, x: [f64; 2]) -> [f64; 2] {
        let d = [x[0] - self.origin[0], x[1] - self.origin[1]];
        [
            self.inv[0][0] * d[0] + self.inv[0][1] * d[1],
            self.inv[1][0] * d[0] + self.inv[1][1] * d[1],
        ]
    }

    /// Physical gradient from a reference gradient: `B^{-T} g`.
    pub fn grad_to_physical(&self, g: [f64; 2]) -> [f64; 2] {
        [
            self.inv[0][0] * g[0] + self.inv[1][0] * g[1],
            self.inv[0][1] * g[0] + self.inv[1][1] * g[1],
        ]
    }

    pub fn area(&self) -> f64 {
        0.5 * self.det
    }
}

#[derive(Clone, Debug)]
pub struct SpaceTimeMesh {
    pub length: f64,
    pub time: f64,
    pub nx: usize,
    pub nt: usize,
    pub p: usize,
    pub vertices: Vec<[f64; 2]>,
    pub elements: Vec<[usize; 3]>,
    pub geometry: Vec<ElementGeometry>,
    pub facets: Vec<Facet>,
    /// Facet index of each local edge.
    pub element_facets: Vec<[usize; 3]>,
    pub neighbors: Vec<[Option<usize>; 3]>,
    /// DG nodes, `n_local` per element, element-major.
    pub nodes: Vec<[f64; 2]>,
    pub reference: ReferenceTriangle,
}

impl SpaceTimeMesh {
    /// Builds the split-quad mesh with `nx * nt * 2` elements and degree-`p` nodes.
    pub fn generate(length: f64, time: f64, nx: usize, nt: usize, p: usize) -> Result<Self> {
        if !(length > 0.0 && time > 0.0) || nx == 0 || nt == 0 {
            return Err(invalid("mesh needs positive extents and at least one cell per direction"));
        }
        let reference = ReferenceTriangle::new(p)?;
        let hx = length / nx as f64;
        let ht = time / nt as f64;
        let vid = |i: usize, j: usize| j * (nx + 1) + i;
        let mut vertices = Vec::with_capacity((nx + 1) * (nt + 1));
        for j in 0..=nt {
            for i in 0..=nx {
                let x = if i == nx { length } else { i as f64 * hx };
                let t = if j == nt { time } else { j as f64 * ht };
                vertices.push([x, t]);
            }
        }
        let mut elements = Vec::with_capacity(2 * nx * nt);
        for j in 0..nt {
            for i in 0..nx {
                elements.push([vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)]);
                elements.push([vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)]);
            }
        }
        let geometry: Vec<ElementGeometry> = elements
            .iter()
            .map(|e| ElementGeometry::from_vertices([vertices[e[0]], vertices[e[1]], vertices[e[2]]]))
            .collect();

        let mut facets: Vec<Facet> = Vec::new();
        let mut element_facets = vec![[usize::MAX; 3]; elements.len()];
        let mut neighbors = vec![[None; 3]; elements.len()];
        let mut by_edge: HashMap<(usize, usize), usize> = HashMap::new();
        for (k, e) in elements.iter().enumerate() {
            for l in 0..3 {
                let (a, b) = edge_vertices(l);
                let (va, vb) = (e[a], e[b]);
                let key = (va.min(vb), va.max(vb));
                if let Some(&f) = by_edge.get(&key) {
                    let (kp, lp) = facets[f].plus;
                    facets[f].minus = Some((k, l));
                    element_facets[k][l] = f;
                    neighbors[k][l] = Some(kp);
                    neighbors[kp][lp] = Some(k);
                } else {
                    let (pa, pb) = (vertices[va], vertices[vb]);
                    let (dx, dt) = (pb[0] - pa[0], pb[1] - pa[1]);
                    let len = (dx * dx + dt * dt).sqrt();
                    facets.push(Facet {
                        plus: (k, l),
                        minus: None,
                        boundary: None,
                        normal: [dt / len, -dx / len],
                        length: len,
                        ends: [pa, pb],
                    });
                    element_facets[k][l] = facets.len() - 1;
                    by_edge.insert(key, facets.len() - 1);
                }
            }
        }
        for f in facets.iter_mut().filter(|f| f.minus.is_none()) {
            let n = f.normal;
            f.boundary = Some(if n[0] < -0.5 {
                BoundaryTag::Left
            } else if n[0] > 0.5 {
                BoundaryTag::Right
            } else if n[1] < -0.5 {
                BoundaryTag::Bottom
            } else {
                BoundaryTag::Top
            });
        }
        let mut nodes = Vec::with_capacity(elements.len() * reference.n_local());
        for g in &geometry {
            for xi in &reference.nodes {
                nodes.push(g.to_physical(*xi));
            }
        }
        Ok(Self {
            length,
            time,
            nx,
            nt,
            p,
            vertices,
            elements,
            geometry,
            facets,
            element_facets,
            neighbors,
            nodes,
            reference,
        })
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn n_local(&self) -> usize {
        self.reference.n_local()
    }

    pub fn area(&self) -> f64 {
        self.length * self.time
    }

    pub fn cell_size(&self) -> (f64, f64) {
        (self.length / self.nx as f64, self.time / self.nt as f64)
    }

    /// Element containing `x` and the reference coordinates there. Points on
    /// shared edges go to the lowest-indexed candidate; points slightly outside
    /// the slab are clamped onto it.
    pub fn locate(&self, x: [f64; 2]) -> (usize, [f64; 2]) {
        let (hx, ht) = self.cell_size();
        let xc = x[0].clamp(0.0, self.length);
        let tc = x[1].clamp(0.0, self.time);
        let i = ((xc / hx).floor() as usize).min(self.nx - 1);
        let j = ((tc / ht).floor() as usize).min(self.nt - 1);
        let s = xc / hx - i as f64;
        let r = tc / ht - j as f64;
        let base = 2 * (j * self.nx + i);
        let k = if s >= r { base } else { base + 1 };
        (k, self.geometry[k].to_reference([xc, tc]))
    }

    /// Content hash of vertices and connectivity.
    pub fn connectivity_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.p as u64).to_le_bytes());
        for v in &self.vertices {
            h.update(v[0].to_le_bytes());
            h.update(v[1].to_le_bytes());
        }
        for e in &self.elements {
            for &i in e {
                h.update((i as u64).to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cell_diagonal() {
        let m = SpaceTimeMesh::generate(1.0, 1.0, 1, 1, 1).unwrap();
        assert_eq!(m.n_elements(), 2);
        assert_eq!(m.facets.len(), 5);
        let diag: Vec<_> = m.facets.iter().filter(|f| f.boundary.is_none()).collect();
        assert_eq!(diag.len(), 1);
        let f = diag[0];
        let s = 0.5f64.sqrt();
        assert!((f.normal[0].abs() - s).abs() < 1e-14 && (f.normal[0] + f.normal[1]).abs() < 1e-14);
        assert!((f.length - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn areas_sum_to_domain_and_orientation_positive() {
        let m = SpaceTimeMesh::generate(25.0, 3.0, 7, 5, 2).unwrap();
        let a: f64 = m.geometry.iter().map(|g| g.area()).sum();
        assert!((a - 75.0).abs() < 1e-10);
        assert!(m.geometry.iter().all(|g| g.det > 0.0));
        let interior = m.facets.iter().filter(|f| f.minus.is_some()).count();
        assert_eq!(3 * m.n_elements(), 2 * interior + (m.facets.len() - interior));
    }

    #[test]
    fn locate_round_trips() {
        let m = SpaceTimeMesh::generate(1.0, 0.8, 6, 4, 2).unwrap();
        for &x in &[[0.13, 0.07], [0.99, 0.79], [0.5, 0.4], [0.0, 0.0], [1.0, 0.8]] {
            let (k, xi) = m.locate(x);
            let y = m.geometry[k].to_physical(xi);
            assert!((y[0] - x[0]).abs() < 1e-13 && (y[1] - x[1]).abs() < 1e-13);
            assert!(xi[0] >= -1e-12 && xi[1] >= -1e-12 && xi[0] + xi[1] <= 1.0 + 1e-12);
        }
    }
}
