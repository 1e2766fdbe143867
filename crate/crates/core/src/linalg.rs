//! Thin wrappers over faer's sparse factorizations plus the small dense helpers
//! the rest of the crate shares.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use nalgebra::{DMatrix, DVector};

use crate::error::{Result, StrobeError};

/// Compressed-column sparse matrix. Duplicate triplets are summed.
#[derive(Clone, Debug)]
pub struct SparseMatrix {
    inner: SparseColMat<usize, f64>,
}

impl SparseMatrix {
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let t: Vec<Triplet<usize, usize, f64>> =
            triplets.iter().map(|&(r, c, v)| Triplet::new(r, c, v)).collect();
        let inner = SparseColMat::try_new_from_triplets(nrows, ncols, &t)
            .map_err(|e| StrobeError::InvalidArgument(format!("sparse assembly: {e:?}")))?;
        Ok(Self { inner })
    }

    pub fn nrows(&self) -> usize {
        self.inner.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.inner.ncols()
    }

    pub fn nnz(&self) -> usize {
        self.inner.val().len()
    }

    /// Iterates `(row, col, value)` over stored entries.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let sym = self.inner.symbolic();
        let cp = sym.col_ptr();
        let ri = sym.row_idx();
        let v = self.inner.val();
        (0..self.ncols()).flat_map(move |c| (cp[c]..cp[c + 1]).map(move |p| (ri[p], c, v[p])))
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows()];
        for (r, c, v) in self.entries() {
            y[r] += v * x[c];
        }
        y
    }

    pub fn matvec_transpose(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.ncols()];
        for (r, c, v) in self.entries() {
            y[c] += v * x[r];
        }
        y
    }

    /// `A * B` for a dense `B`.
    pub fn mul_dense(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.nrows(), b.ncols());
        for (r, c, v) in self.entries() {
            for j in 0..b.ncols() {
                out[(r, j)] += v * b[(c, j)];
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.nrows(), self.ncols());
        for (r, c, v) in self.entries() {
            d[(r, c)] += v;
        }
        d
    }

    pub fn lu(&self) -> Result<SparseLu> {
        let lu = self
            .inner
            .sp_lu()
            .map_err(|e| StrobeError::FactorizationFailure(format!("sparse LU: {e:?}")))?;
        Ok(SparseLu { lu, n: self.nrows() })
    }

    pub fn cholesky(&self) -> Result<SparseCholesky> {
        let llt = self
            .inner
            .sp_cholesky(faer::Side::Lower)
            .map_err(|e| StrobeError::FactorizationFailure(format!("sparse Cholesky: {e:?}")))?;
        Ok(SparseCholesky { llt, n: self.nrows() })
    }
}

fn to_faer(b: &DMatrix<f64>) -> Mat<f64> {
    Mat::from_fn(b.nrows(), b.ncols(), |i, j| b[(i, j)])
}

fn from_faer(m: &Mat<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn check_finite(v: &DMatrix<f64>) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(StrobeError::FactorizationFailure("non-finite solution (singular matrix?)".into()))
    }
}

pub struct SparseLu {
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
    n: usize,
}

impl SparseLu {
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let m = self.solve_many(&DMatrix::from_column_slice(self.n, 1, b))?;
        Ok(m.column(0).iter().copied().collect())
    }

    pub fn solve_many(&self, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let x = from_faer(&self.lu.solve(&to_faer(b)));
        check_finite(&x)?;
        Ok(x)
    }
}

pub struct SparseCholesky {
    llt: faer::sparse::linalg::solvers::Llt<usize, f64>,
    n: usize,
}

impl SparseCholesky {
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let m = self.solve_many(&DMatrix::from_column_slice(self.n, 1, b))?;
        Ok(m.column(0).iter().copied().collect())
    }

    pub fn solve_many(&self, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let x = from_faer(&self.llt.solve(&to_faer(b)));
        check_finite(&x)?;
        Ok(x)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Least-squares solve via SVD; tolerates rank deficiency.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = smax * 1e-13 * (a.nrows().max(a.ncols()) as f64);
    svd.solve(b, eps).unwrap_or_else(|_| DVector::zeros(a.ncols()))
}
