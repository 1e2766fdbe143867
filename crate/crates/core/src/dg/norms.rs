//! Discrete L2 (`X_hf`) and broken H1 with BR2 jump terms (`Y_hf`) norm matrices.

use nalgebra::DMatrix;

use super::br2::{Br2, FacetOperator, BR2_ETA};
use super::DgSpace;
use crate::error::Result;
use crate::linalg::{SparseCholesky, SparseMatrix};

pub struct NormPair {
    pub x: SparseMatrix,
    pub y: SparseMatrix,
    y_factor: SparseCholesky,
}

impl std::fmt::Debug for NormPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NormPair").field("n", &self.x.nrows()).finish()
    }
}

fn push_block(trip: &mut Vec<(usize, usize, f64)>, rows: &[usize], m: &DMatrix<f64>) {
    for (a, &r) in rows.iter().enumerate() {
        for (b, &c) in rows.iter().enumerate() {
            let v = m[(a, b)];
            if v != 0.0 {
                trip.push((r, c, v));
            }
        }
    }
}

pub fn assemble_norms(space: &DgSpace) -> Result<NormPair> {
    let mesh = &space.mesh;
    let nl = space.n_local();
    let br2 = Br2::new(space, BR2_ETA);
    let mut tx = Vec::new();
    let mut ty = Vec::new();
    for d in 0..space.n_comp {
        for k in 0..mesh.n_elements() {
            let rows: Vec<usize> = (0..nl).map(|i| space.index(i, k, d)).collect();
            let m = space.element_mass(k);
            push_block(&mut tx, &rows, &m);
            push_block(&mut ty, &rows, &(&m + &br2.stiffness[k]));
        }
        for (f, op) in mesh.facets.iter().zip(&br2.facets) {
            if let (FacetOperator::Interior { by_plus, by_minus }, Some((kb, _))) = (op, f.minus) {
                let ka = f.plus.0;
                let rows: Vec<usize> = (0..nl)
                    .map(|i| space.index(i, ka, d))
                    .chain((0..nl).map(|i| space.index(i, kb, d)))
                    .collect();
                push_block(&mut ty, &rows, &(by_plus + by_minus));
            }
        }
    }
    let n = space.n_dofs();
    let x = SparseMatrix::from_triplets(n, n, &tx)?;
    let y = SparseMatrix::from_triplets(n, n, &ty)?;
    let y_factor = y.cholesky()?;
    Ok(NormPair { x, y, y_factor })
}

impl NormPair {
    /// Riesz representer in `Y_hf`: solves `Y_hf v = F`.
    pub fn riesz(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.y_factor.solve(f)
    }

    pub fn riesz_many(&self, f: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.y_factor.solve_many(f)
    }

    pub fn y_inner(&self, a: &[f64], b: &[f64]) -> f64 {
        crate::linalg::dot(&self.y.matvec(a), b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::SpaceTimeMesh;
    use std::sync::Arc;

    #[test]
    fn constants_and_linear_fields() {
        let m = Arc::new(SpaceTimeMesh::generate(1.0, 1.0, 1, 1, 2).unwrap());
        let s = DgSpace::new(m, 1).unwrap();
        let n = assemble_norms(&s).unwrap();
        let c = vec![2.0; s.n_dofs()];
        assert!((crate::linalg::dot(&n.x.matvec(&c), &c) - 4.0).abs() < 1e-12);
        assert!((n.y_inner(&c, &c) - 4.0).abs() < 1e-12);
        let u = s.interpolate(|x| vec![x[0]]);
        // int_0^1 int_0^1 x^2 + 1 = 4/3
        assert!((n.y_inner(&u, &u) - 4.0 / 3.0).abs() < 1e-12);
        let ydense = n.y.to_dense();
        assert!((&ydense - ydense.transpose()).abs().max() < 1e-12);
    }

    #[test]
    fn riesz_round_trip() {
        let m = Arc::new(SpaceTimeMesh::generate(1.0, 1.0, 2, 2, 2).unwrap());
        let s = DgSpace::new(m, 1).unwrap();
        let n = assemble_norms(&s).unwrap();
        let w: Vec<f64> = (0..s.n_dofs()).map(|j| ((j * 7919) % 13) as f64 - 6.0).collect();
        let f = n.y.matvec(&w);
        let v = n.riesz(&f).unwrap();
        assert!(v.iter().zip(&w).all(|(a, b)| (a - b).abs() < 1e-10));
    }
}
