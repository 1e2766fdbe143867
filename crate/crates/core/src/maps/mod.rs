//! Displacement spaces for maps `Phi = id + phi` of the rectangle onto itself.
//!
//! The full space is spanned by tensorized Legendre polynomials multiplied by a
//! bubble that kills the normal component on the matching pair of edges, so
//! every map sends each edge of the rectangle into itself.

mod bijectivity;
mod table;

pub use bijectivity::{bijectivity_functional, BijectivityGrid, BijectivityParams};
pub use table::MapTable;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, StrobeError};
use crate::mesh::SpaceTimeMesh;
use crate::quadrature::gauss_legendre;

/// Values and first two derivatives of the shifted, L2(0,1)-normalized Legendre
/// polynomials `l_0..l_{n-1}` at `s`.
pub fn legendre_shifted(n: usize, s: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let x = 2.0 * s - 1.0;
    let mut p = vec![0.0; n.max(2)];
    let mut dp = vec![0.0; n.max(2)];
    let mut ddp = vec![0.0; n.max(2)];
    p[0] = 1.0;
    p[1] = x;
    dp[1] = 1.0;
    for k in 1..n.saturating_sub(1) {
        let kf = k as f64;
        p[k + 1] = ((2.0 * kf + 1.0) * x * p[k] - kf * p[k - 1]) / (kf + 1.0);
        dp[k + 1] = dp[k - 1] + (2.0 * kf + 1.0) * p[k];
        ddp[k + 1] = ddp[k - 1] + (2.0 * kf + 1.0) * dp[k];
    }
    let mut v = Vec::with_capacity(n);
    let mut d = Vec::with_capacity(n);
    let mut dd = Vec::with_capacity(n);
    for k in 0..n {
        let c = (2.0 * k as f64 + 1.0).sqrt();
        v.push(c * p[k]);
        d.push(2.0 * c * dp[k]);
        dd.push(4.0 * c * ddp[k]);
    }
    (v, d, dd)
}

/// One basis function evaluated at a point: it has a single nonzero component.
#[derive(Clone, Copy, Debug, Default)]
pub struct BasisEval {
    pub comp: usize,
    pub val: f64,
    pub grad: [f64; 2],
    /// `[d11, d12, d22]`
    pub hess: [f64; 3],
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapSpace {
    pub mbar: usize,
    pub length: f64,
    pub time: f64,
}

/// 1D factor `l_i(x / len)` optionally times the bubble `x (len - x) / len^2`,
/// with first and second derivatives.
fn factors(n: usize, x: f64, len: f64, bubble: bool) -> Vec<[f64; 3]> {
    let (v, d, dd) = legendre_shifted(n, x / len);
    (0..n)
        .map(|i| {
            let (l, dl, ddl) = (v[i], d[i] / len, dd[i] / (len * len));
            if bubble {
                let b = x * (len - x) / (len * len);
                let db = (len - 2.0 * x) / (len * len);
                let ddb = -2.0 / (len * len);
                [l * b, dl * b + l * db, ddl * b + 2.0 * dl * db + l * ddb]
            } else {
                [l, dl, ddl]
            }
        })
        .collect()
}

impl MapSpace {
    pub fn new(mbar: usize, length: f64, time: f64) -> Result<Self> {
        if mbar == 0 || !(length > 0.0 && time > 0.0) {
            return Err(invalid("map space needs mbar >= 1 and positive extents"));
        }
        Ok(Self { mbar, length, time })
    }

    pub fn dim(&self) -> usize {
        2 * self.mbar * self.mbar
    }

    pub fn area(&self) -> f64 {
        self.length * self.time
    }

    /// All `M_hf` basis functions at `x`.
    pub fn eval_basis(&self, x: [f64; 2]) -> Vec<BasisEval> {
        let mb = self.mbar;
        let fx_b = factors(mb, x[0], self.length, true);
        let ft = factors(mb, x[1], self.time, false);
        let fx = factors(mb, x[0], self.length, false);
        let ft_b = factors(mb, x[1], self.time, true);
        let mut out = Vec::with_capacity(self.dim());
        for (comp, (a, b)) in [(&fx_b, &ft), (&fx, &ft_b)].into_iter().enumerate() {
            for ip in 0..mb {
                for i in 0..mb {
                    let (f, h) = (a[i], b[ip]);
                    out.push(BasisEval {
                        comp,
                        val: f[0] * h[0],
                        grad: [f[1] * h[0], f[0] * h[1]],
                        hess: [f[2] * h[0], f[1] * h[1], f[0] * h[2]],
                    });
                }
            }
        }
        out
    }

    /// Symmetric PSD matrix of the H2 seminorm over the rectangle; exact by
    /// tensor Gauss quadrature.
    pub fn h2_penalty_matrix(&self) -> Result<DMatrix<f64>> {
        let n = self.dim();
        let (g, w) = gauss_legendre(self.mbar + 3)?;
        let mut a = DMatrix::zeros(n, n);
        for (i, gi) in g.iter().enumerate() {
            for (j, gj) in g.iter().enumerate() {
                let x = [0.5 * (gi + 1.0) * self.length, 0.5 * (gj + 1.0) * self.time];
                let wq = w[i] * w[j] * 0.25 * self.area();
                let b = self.eval_basis(x);
                for (m, bm) in b.iter().enumerate() {
                    for (mp, bp) in b.iter().enumerate().skip(m) {
                        if bm.comp != bp.comp {
                            continue;
                        }
                        let v = bm.hess[0] * bp.hess[0] + 2.0 * bm.hess[1] * bp.hess[1] + bm.hess[2] * bp.hess[2];
                        a[(m, mp)] += wq * v;
                    }
                }
            }
        }
        for m in 0..n {
            for mp in 0..m {
                a[(m, mp)] = a[(mp, m)];
            }
        }
        Ok(a)
    }
}

/// A displacement in the full space `W_hf`, stored by its coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Displacement {
    pub space: MapSpace,
    pub coeffs: Vec<f64>,
}

impl Displacement {
    pub fn zero(space: MapSpace) -> Self {
        Self { space, coeffs: vec![0.0; space.dim()] }
    }

    pub fn new(space: MapSpace, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != space.dim() {
            return Err(invalid(format!("{} coefficients for a space of dimension {}", coeffs.len(), space.dim())));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(invalid("non-finite displacement coefficient"));
        }
        Ok(Self { space, coeffs })
    }

    /// `Phi(x)` and its Jacobian `G = I + grad phi`.
    pub fn map(&self, x: [f64; 2]) -> ([f64; 2], [[f64; 2]; 2]) {
        let mut y = x;
        let mut g = [[1.0, 0.0], [0.0, 1.0]];
        for (b, a) in self.space.eval_basis(x).iter().zip(&self.coeffs) {
            if *a == 0.0 {
                continue;
            }
            y[b.comp] += a * b.val;
            g[b.comp][0] += a * b.grad[0];
            g[b.comp][1] += a * b.grad[1];
        }
        (y, g)
    }

    /// `(G, g)` at `x`.
    pub fn jacobian(&self, x: [f64; 2]) -> ([[f64; 2]; 2], f64) {
        let (_, g) = self.map(x);
        (g, g[0][0] * g[1][1] - g[0][1] * g[1][0])
    }

    pub fn h2_seminorm_sq(&self, a_reg: &DMatrix<f64>) -> f64 {
        let a = nalgebra::DVector::from_column_slice(&self.coeffs);
        (a.transpose() * a_reg * &a)[(0, 0)]
    }
}

/// Coefficient (Euclidean) inner product on `W_hf`.
pub fn star_inner_product(a: &Displacement, b: &Displacement) -> Result<f64> {
    if a.space != b.space {
        return Err(StrobeError::MismatchedSpaces("displacements from different map spaces".into()));
    }
    Ok(crate::linalg::dot(&a.coeffs, &b.coeffs))
}

/// A reduced displacement space `W_M` spanned by full-space coefficient vectors.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReducedMapBasis {
    pub space: MapSpace,
    pub modes: Vec<Vec<f64>>,
}

impl ReducedMapBasis {
    /// The whole of `W_hf` (unit coefficient vectors).
    pub fn full(space: MapSpace) -> Self {
        let n = space.dim();
        let modes = (0..n)
            .map(|m| {
                let mut e = vec![0.0; n];
                e[m] = 1.0;
                e
            })
            .collect();
        Self { space, modes }
    }

    pub fn dim(&self) -> usize {
        self.modes.len()
    }

    pub fn displacement(&self, a: &[f64]) -> Displacement {
        let mut c = vec![0.0; self.space.dim()];
        for (am, mode) in a.iter().zip(&self.modes) {
            crate::linalg::axpy(*am, mode, &mut c);
        }
        Displacement { space: self.space, coeffs: c }
    }

    /// Orthogonal projection (modes are star-orthonormal) of full coefficients.
    pub fn project(&self, full: &[f64]) -> Vec<f64> {
        self.modes.iter().map(|m| crate::linalg::dot(m, full)).collect()
    }

    /// `W^T A W` for a full-space matrix.
    pub fn reduce_matrix(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        let w = DMatrix::from_fn(self.space.dim(), self.dim(), |i, j| self.modes[j][i]);
        w.transpose() * a * w
    }
}

/// Mesh nodes moved by `Phi`, connectivity shared with the base mesh.
#[derive(Clone, Debug)]
pub struct DeformedMesh<'a> {
    pub base: &'a SpaceTimeMesh,
    pub nodes: Vec<[f64; 2]>,
}

pub fn deform_mesh<'a>(mesh: &'a SpaceTimeMesh, phi: &Displacement) -> DeformedMesh<'a> {
    let nodes = mesh
        .nodes
        .iter()
        .map(|x| {
            let (y, _) = phi.map(*x);
            [y[0].clamp(0.0, mesh.length), y[1].clamp(0.0, mesh.time)]
        })
        .collect();
    DeformedMesh { base: mesh, nodes }
}
