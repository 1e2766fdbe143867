//! Nodal Lagrange basis of degree `p` on the reference triangle.
//!
//! Nodes sit on the equispaced lattice `(i/p, j/p)`, ordered row by row in `j`.
//! Local edge `l` is the edge opposite vertex `l`:
//! edge 0 = v1 -> v2, edge 1 = v2 -> v0, edge 2 = v0 -> v1.

use nalgebra::DMatrix;

use crate::error::{invalid, Result};

pub const VERTICES: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

#[derive(Clone, Debug)]
pub struct ReferenceTriangle {
    pub p: usize,
    pub nodes: Vec<[f64; 2]>,
    exponents: Vec<(i32, i32)>,
    /// Lagrange coefficients: `phi_i = sum_m coef[(m, i)] * mono_m`.
    coef: DMatrix<f64>,
}

pub fn n_local(p: usize) -> usize {
    (p + 1) * (p + 2) / 2
}

impl ReferenceTriangle {
    pub fn new(p: usize) -> Result<Self> {
        if p == 0 || p > 6 {
            return Err(invalid(format!("polynomial order {p} outside 1..=6")));
        }
        let mut nodes = Vec::with_capacity(n_local(p));
        for j in 0..=p {
            for i in 0..=(p - j) {
                nodes.push([i as f64 / p as f64, j as f64 / p as f64]);
            }
        }
        let mut exponents = Vec::new();
        for d in 0..=p as i32 {
            for b in 0..=d {
                exponents.push((d - b, b));
            }
        }
        let n = nodes.len();
        let v = DMatrix::from_fn(n, n, |r, m| {
            let (a, b) = exponents[m];
            nodes[r][0].powi(a) * nodes[r][1].powi(b)
        });
        let coef = v
            .try_inverse()
            .ok_or_else(|| invalid("singular Vandermonde matrix"))?;
        Ok(Self { p, nodes, exponents, coef })
    }

    pub fn n_local(&self) -> usize {
        self.nodes.len()
    }

    /// Basis values at `xi`.
    pub fn eval(&self, xi: [f64; 2]) -> Vec<f64> {
        let n = self.n_local();
        let mono: Vec<f64> = self
            .exponents
            .iter()
            .map(|&(a, b)| xi[0].powi(a) * xi[1].powi(b))
            .collect();
        (0..n)
            .map(|i| (0..n).map(|m| self.coef[(m, i)] * mono[m]).sum())
            .collect()
    }

    /// Basis values and reference gradients at `xi` without allocating
    /// (`vals` and `grads` have length `n_local`; `scratch` at least `3 n_local`).
    pub fn eval_grad_into(&self, xi: [f64; 2], vals: &mut [f64], grads: &mut [[f64; 2]], scratch: &mut [f64]) {
        let n = self.n_local();
        let (mono, rest) = scratch.split_at_mut(n);
        let (dx, dy) = rest.split_at_mut(n);
        for (m, &(a, b)) in self.exponents.iter().enumerate() {
            let xa = if a > 0 { xi[0].powi(a - 1) } else { 0.0 };
            let yb = if b > 0 { xi[1].powi(b - 1) } else { 0.0 };
            mono[m] = xi[0].powi(a) * xi[1].powi(b);
            dx[m] = a as f64 * xa * xi[1].powi(b);
            dy[m] = b as f64 * xi[0].powi(a) * yb;
        }
        for i in 0..n {
            let (mut v, mut g0, mut g1) = (0.0, 0.0, 0.0);
            for m in 0..n {
                let c = self.coef[(m, i)];
                v += c * mono[m];
                g0 += c * dx[m];
                g1 += c * dy[m];
            }
            vals[i] = v;
            grads[i] = [g0, g1];
        }
    }

    /// Reference gradients at `xi`, one `[d/dxi, d/deta]` per basis function.
    pub fn grad(&self, xi: [f64; 2]) -> Vec<[f64; 2]> {
        let n = self.n_local();
        let mut dx = vec![0.0; n];
        let mut dy = vec![0.0; n];
        for (m, &(a, b)) in self.exponents.iter().enumerate() {
            if a > 0 {
                dx[m] = a as f64 * xi[0].powi(a - 1) * xi[1].powi(b);
            }
            if b > 0 {
                dy[m] = b as f64 * xi[0].powi(a) * xi[1].powi(b - 1);
            }
        }
        (0..n)
            .map(|i| {
                let mut g = [0.0; 2];
                for m in 0..n {
                    g[0] += self.coef[(m, i)] * dx[m];
                    g[1] += self.coef[(m, i)] * dy[m];
                }
                g
            })
            .collect()
    }

    /// Reference coordinates of the point at parameter `s` in [0, 1] along local edge `edge`.
    pub fn edge_point(edge: usize, s: f64) -> [f64; 2] {
        let (a, b) = edge_vertices(edge);
        let (va, vb) = (VERTICES[a], VERTICES[b]);
        [va[0] + s * (vb[0] - va[0]), va[1] + s * (vb[1] - va[1])]
    }
}

pub fn edge_vertices(edge: usize) -> (usize, usize) {
    match edge {
        0 => (1, 2),
        1 => (2, 0),
        _ => (0, 1),
    }
}
