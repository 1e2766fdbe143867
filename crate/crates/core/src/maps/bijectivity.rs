use serde::{Deserialize, Serialize};

use super::{MapTable, ReducedMapBasis};
use crate::error::Result;
use crate::quadrature::line_rule;

const EXP_CLAMP: f64 = 700.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BijectivityParams {
    /// Largest allowed contraction of the map and of its inverse.
    pub eps: f64,
    pub c_exp: f64,
    pub delta: f64,
}

impl BijectivityParams {
    /// `eps = 0.1`, `C_exp = 0.025 eps`, `delta = |Omega|`.
    pub fn standard(area: f64) -> Self {
        Self { eps: 0.1, c_exp: 0.0025, delta: area }
    }

    #[inline]
    fn terms(&self, g: f64) -> (f64, f64) {
        let a = ((self.eps - g) / self.c_exp).min(EXP_CLAMP).exp();
        let b = ((g - 1.0 / self.eps) / self.c_exp).min(EXP_CLAMP).exp();
        (a, b)
    }
}

/// Tensor Gauss rule on a structured grid of the rectangle, independent of the
/// DG mesh, with the map basis tabulated at its points.
#[derive(Clone, Debug)]
pub struct BijectivityGrid {
    pub weights: Vec<f64>,
    pub table: MapTable,
}

impl BijectivityGrid {
    pub fn new(basis: &ReducedMapBasis, cells: usize, points_per_dir: usize) -> Result<Self> {
        let r = line_rule(points_per_dir)?;
        let (l, t) = (basis.space.length, basis.space.time);
        let (hx, ht) = (l / cells as f64, t / cells as f64);
        let mut pts = Vec::new();
        let mut weights = Vec::new();
        for j in 0..cells {
            for i in 0..cells {
                for (a, wa) in r.points.iter().zip(&r.weights) {
                    for (b, wb) in r.points.iter().zip(&r.weights) {
                        pts.push([(i as f64 + a) * hx, (j as f64 + b) * ht]);
                        weights.push(wa * wb * hx * ht);
                    }
                }
            }
        }
        Ok(Self { weights, table: MapTable::new(basis, pts) })
    }

    /// Value of the surrogate functional, its gradient with respect to the
    /// reduced coefficients, and the minimum sampled Jacobian determinant.
    pub fn evaluate(&self, a: &[f64], params: &BijectivityParams, want_grad: bool) -> (f64, Vec<f64>, f64) {
        let nm = self.table.n_modes;
        let mut val = 0.0;
        let mut grad = vec![0.0; if want_grad { nm } else { 0 }];
        let mut gmin = f64::INFINITY;
        for (p, w) in self.weights.iter().enumerate() {
            let (_, g) = self.table.eval(a, p);
            let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
            gmin = gmin.min(det);
            let (ea, eb) = params.terms(det);
            val += w * (ea + eb);
            if want_grad {
                let dval = w * (eb - ea) / params.c_exp;
                if dval == 0.0 {
                    continue;
                }
                for (m, gm) in grad.iter_mut().enumerate() {
                    let e = self.table.entry(p, m);
                    let ddet = e[2] * g[1][1] + g[0][0] * e[5] - e[3] * g[1][0] - g[0][1] * e[4];
                    *gm += dval * ddet;
                }
            }
        }
        (val, grad, gmin)
    }
}

/// Surrogate bijectivity functional of a full-space displacement.
pub fn bijectivity_functional(
    phi: &super::Displacement,
    params: &BijectivityParams,
    cells: usize,
    points_per_dir: usize,
) -> Result<f64> {
    let basis = ReducedMapBasis { space: phi.space, modes: vec![phi.coeffs.clone()] };
    let grid = BijectivityGrid::new(&basis, cells, points_per_dir)?;
    Ok(grid.evaluate(&[1.0], params, false).0)
}

#[cfg(test)]
mod tests {
    use super::super::{Displacement, MapSpace};
    use super::*;

    #[test]
    fn identity_is_admissible() {
        let s = MapSpace::new(3, 1.0, 0.8).unwrap();
        let p = BijectivityParams::standard(s.area());
        let v = bijectivity_functional(&Displacement::zero(s), &p, 8, 4).unwrap();
        let expected = 0.8 * ((-360.0f64).exp() + (-3600.0f64).exp());
        assert!((v - expected).abs() < 1e-12 * expected.max(1e-300) + 1e-300);
        assert!(v <= p.delta);
    }

    #[test]
    fn strong_compression_rejected() {
        let s = MapSpace::new(3, 1.0, 1.0).unwrap();
        let p = BijectivityParams::standard(s.area());
        let mut c = vec![0.0; s.dim()];
        // first x-mode: l0 * l0 * x(1-x); slope at x=0 is a, so g = 1 - a near x=1
        c[0] = 0.95;
        let v = bijectivity_functional(&Displacement::new(s, c).unwrap(), &p, 8, 4).unwrap();
        assert!(v > p.delta);
    }

    #[test]
    fn gradient_matches_fd() {
        let s = MapSpace::new(2, 1.0, 1.0).unwrap();
        let basis = ReducedMapBasis::full(s);
        let grid = BijectivityGrid::new(&basis, 4, 3).unwrap();
        let p = BijectivityParams { eps: 0.5, c_exp: 0.1, delta: 1.0 };
        let a: Vec<f64> = (0..s.dim()).map(|m| 0.3 * (m as f64 - 3.0) / 4.0).collect();
        let (_, g, _) = grid.evaluate(&a, &p, true);
        for m in 0..s.dim() {
            let h = 1e-6;
            let mut ap = a.clone();
            ap[m] += h;
            let mut am = a.clone();
            am[m] -= h;
            let fd = (grid.evaluate(&ap, &p, false).0 - grid.evaluate(&am, &p, false).0) / (2.0 * h);
            assert!((fd - g[m]).abs() < 1e-5 * (1.0 + fd.abs()));
        }
    }
}
