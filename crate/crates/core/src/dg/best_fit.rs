//! Relative best-fit errors of a field against a linear space, with and
//! without a map.

use nalgebra::{DMatrix, DVector};

use super::DgSpace;
use crate::error::{Result, StrobeError};
use crate::maps::Displacement;

/// `||U - Pi_Z U|| / ||U||` for an L2-orthonormal basis `Z`.
pub fn best_fit_error(space: &DgSpace, u: &[f64], z: &[Vec<f64>]) -> Result<f64> {
    let nu = space.l2_norm(u);
    if nu == 0.0 {
        return Err(StrobeError::UndefinedRatio("best-fit error of a zero field".into()));
    }
    let mu = space.mass_apply(u);
    let mut r = u.to_vec();
    for zn in z {
        let c = crate::linalg::dot(zn, &mu);
        crate::linalg::axpy(-c, zn, &mut r);
    }
    Ok(space.l2_norm(&r) / nu)
}

/// `min_zeta sqrt(int (U o Phi - zeta)^2 g dX) / ||U||`, i.e. the physical-space
/// error of `zeta o Phi^{-1}` without inverting the map.
pub fn registered_best_fit_error(space: &DgSpace, u: &[f64], z: &[Vec<f64>], phi: &Displacement) -> Result<f64> {
    let nu = space.l2_norm(u);
    if nu == 0.0 {
        return Err(StrobeError::UndefinedRatio("best-fit error of a zero field".into()));
    }
    let pts = space.quad_points();
    let w = space.quad_weights();
    let mut wg = Vec::with_capacity(pts.len());
    let mut uphi: Vec<Vec<f64>> = Vec::with_capacity(pts.len());
    for (x, wq) in pts.iter().zip(&w) {
        let (y, g) = phi.map(*x);
        let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
        wg.push(wq * det);
        uphi.push(space.eval_point(u, y));
    }
    let zq: Vec<Vec<Vec<f64>>> = z
        .iter()
        .map(|zn| (0..space.n_comp).map(|d| space.values_at_quad(zn, d)).collect())
        .collect();
    let n = z.len();
    let mut a = DMatrix::zeros(n, n);
    let mut b = DVector::zeros(n);
    let mut uu = 0.0;
    for q in 0..pts.len() {
        for d in 0..space.n_comp {
            let uv = uphi[q][d];
            uu += wg[q] * uv * uv;
            for i in 0..n {
                let zi = zq[i][d][q];
                b[i] += wg[q] * zi * uv;
                for j in 0..n {
                    a[(i, j)] += wg[q] * zi * zq[j][d][q];
                }
            }
        }
    }
    let fit = if n > 0 {
        let c = crate::linalg::lstsq(&a, &b);
        b.dot(&c)
    } else {
        0.0
    };
    Ok((uu - fit).max(0.0).sqrt() / nu)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::MapSpace;
    use crate::mesh::SpaceTimeMesh;
    use std::sync::Arc;

    #[test]
    fn in_span_and_empty_basis() {
        let m = Arc::new(SpaceTimeMesh::generate(1.0, 1.0, 3, 3, 2).unwrap());
        let s = DgSpace::new(m, 1).unwrap();
        let u = s.interpolate(|x| vec![1.0 + x[0] * x[1]]);
        let z = vec![u.iter().map(|v| v / s.l2_norm(&u)).collect::<Vec<_>>()];
        assert!(best_fit_error(&s, &u, &z).unwrap() < 1e-12);
        assert!((best_fit_error(&s, &u, &[]).unwrap() - 1.0).abs() < 1e-14);
        let phi = Displacement::zero(MapSpace::new(2, 1.0, 1.0).unwrap());
        assert!(registered_best_fit_error(&s, &u, &z, &phi).unwrap() < 1e-6);
        assert!((registered_best_fit_error(&s, &u, &[], &phi).unwrap() - 1.0).abs() < 1e-12);
        assert!(best_fit_error(&s, &vec![0.0; s.n_dofs()], &z).is_err());
    }
}
