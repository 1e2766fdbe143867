//! Proper orthogonal decomposition by the method of snapshots.

use nalgebra::{DMatrix, SymmetricEigen};

use super::DgSpace;
use crate::error::{invalid, Result, StrobeError};
use crate::linalg::{dot, SparseMatrix};

/// Inner product used for the Gramian and for orthonormality of the modes.
#[derive(Clone, Copy)]
pub enum Inner<'a> {
    Euclidean,
    L2(&'a DgSpace),
    Matrix(&'a SparseMatrix),
}

impl Inner<'_> {
    /// `M v` so that `(a, b) = a . (M b)`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        match self {
            Inner::Euclidean => v.to_vec(),
            Inner::L2(s) => s.mass_apply(v),
            Inner::Matrix(m) => m.matvec(v),
        }
    }

    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        dot(a, &self.apply(b))
    }
}

#[derive(Clone, Copy, Debug)]
pub enum PodSize {
    /// Smallest `N` retaining a `(1 - tol)` fraction of the energy.
    Tolerance(f64),
    /// Exactly `N` modes (capped by the numerical rank).
    Fixed(usize),
}

#[derive(Clone, Debug)]
pub struct PodResult {
    pub modes: Vec<Vec<f64>>,
    /// All Gramian eigenvalues, nonincreasing.
    pub eigenvalues: Vec<f64>,
    /// `coefficients[k][n] = (zeta_n, u_k)`.
    pub coefficients: Vec<Vec<f64>>,
}

/// Cardinality rule: `min { N : sum_{n<=N} lambda_n >= (1 - tol) sum lambda }`.
pub fn pod_cardinality(eigenvalues: &[f64], tol: f64) -> usize {
    let total: f64 = eigenvalues.iter().sum();
    if total <= 0.0 {
        return 0;
    }
    let mut acc = 0.0;
    for (n, l) in eigenvalues.iter().enumerate() {
        acc += l;
        if acc >= (1.0 - tol) * total {
            return n + 1;
        }
    }
    eigenvalues.len()
}

pub fn pod(snapshots: &[Vec<f64>], tol: f64, inner: Inner) -> Result<PodResult> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(invalid(format!("tol_pod = {tol} outside (0, 1)")));
    }
    pod_with(snapshots, PodSize::Tolerance(tol), inner)
}

pub fn pod_with(snapshots: &[Vec<f64>], size: PodSize, inner: Inner) -> Result<PodResult> {
    let ns = snapshots.len();
    if ns == 0 {
        return Err(StrobeError::EmptyInput("POD needs at least one snapshot".into()));
    }
    let n = snapshots[0].len();
    if snapshots.iter().any(|s| s.len() != n) {
        return Err(invalid("snapshots of different lengths"));
    }
    let applied: Vec<Vec<f64>> = snapshots.iter().map(|s| inner.apply(s)).collect();
    let gram = DMatrix::from_fn(ns, ns, |a, b| dot(&snapshots[a], &applied[b]));
    let gram = (&gram + gram.transpose()) * 0.5;
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..ns).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();

    let lmax = eigenvalues[0];
    let rank = eigenvalues.iter().take_while(|&&l| l > 1e-13 * lmax && lmax > 0.0).count();
    let wanted = match size {
        PodSize::Tolerance(t) => pod_cardinality(&eigenvalues, t),
        PodSize::Fixed(m) => m,
    };
    let nm = wanted.min(rank);

    let mut modes: Vec<Vec<f64>> = Vec::with_capacity(nm);
    for &col in order.iter().take(nm) {
        let lam = eig.eigenvalues[col];
        let mut z = vec![0.0; n];
        for (k, s) in snapshots.iter().enumerate() {
            let c = eig.eigenvectors[(k, col)] / lam.sqrt();
            for (zi, si) in z.iter_mut().zip(s) {
                *zi += c * si;
            }
        }
        modes.push(z);
    }
    orthonormalize(&mut modes, inner);
    let coefficients = applied
        .iter()
        .map(|a| modes.iter().map(|z| dot(z, a)).collect())
        .collect();
    Ok(PodResult { modes, eigenvalues, coefficients })
}

/// Two passes of modified Gram-Schmidt; drops vectors that become numerically zero.
pub fn orthonormalize(vs: &mut Vec<Vec<f64>>, inner: Inner) {
    for _ in 0..2 {
        let mut out: Vec<Vec<f64>> = Vec::with_capacity(vs.len());
        for v in vs.drain(..) {
            let mut v = v;
            let before = inner.inner(&v, &v).sqrt();
            for u in &out {
                let c = inner.inner(u, &v);
                for (vi, ui) in v.iter_mut().zip(u) {
                    *vi -= c * ui;
                }
            }
            let nrm = inner.inner(&v, &v).sqrt();
            if nrm > 1e-12 * before.max(1e-300) && nrm > 0.0 {
                v.iter_mut().for_each(|x| *x /= nrm);
                out.push(v);
            }
        }
        *vs = out;
    }
}

impl PodResult {
    /// Normalized eigenvalues `lambda_n / lambda_1`.
    pub fn normalized(&self) -> Vec<f64> {
        let l1 = self.eigenvalues.first().copied().unwrap_or(0.0);
        self.eigenvalues.iter().map(|l| if l1 > 0.0 { l / l1 } else { 0.0 }).collect()
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }
}
