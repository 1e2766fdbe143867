//! Reduced residuals assembled element by element from the stencil-local
//! restrictions of the trial and test bases.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::hf::{Discretization, MapGeometry};
use crate::models::ConservationLaw;

/// How the artificial viscosity enters the Jacobian.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, schemars::JsonSchema)]
pub enum Linearization {
    /// Differentiate through the sensor.
    #[default]
    Exact,
    /// Recompute the viscosity at each state but hold it fixed in the Jacobian.
    Frozen,
}

/// Element-local residual and Jacobian of element `k` at local unknowns `w`.
pub fn local_residual(
    disc: &Discretization,
    law: &dyn ConservationLaw,
    geo: &MapGeometry,
    k: usize,
    w: &[f64],
    lin: Linearization,
    r: &mut [f64],
    jac: Option<&mut [f64]>,
) -> Result<()> {
    match lin {
        Linearization::Exact => disc.element_residual_exact(law, geo, k, w, r, jac),
        Linearization::Frozen => {
            let eps = disc.local_viscosity(law, k, w);
            disc.element_residual(law, geo, k, w, &eps, r, jac)
        }
    }
}

/// Stencil restriction (`stencil_len x n`) of a set of global vectors.
pub fn restrict(disc: &Discretization, k: usize, basis: &[Vec<f64>]) -> DMatrix<f64> {
    let dofs = disc.stencil_dofs(k);
    DMatrix::from_fn(dofs.len(), basis.len(), |a, n| dofs[a].map_or(0.0, |j| basis[n][j]))
}

/// Evaluates `sum_k rho_k Y_k^T r_k(Z_k alpha)` over a list of elements.
#[derive(Clone, Debug)]
pub struct LocalBases {
    pub elements: Vec<usize>,
    pub weights: Vec<f64>,
    z: Vec<DMatrix<f64>>,
    y: Vec<DMatrix<f64>>,
    n_trial: usize,
    n_test: usize,
}

impl LocalBases {
    pub fn new(disc: &Discretization, z: &[Vec<f64>], y: &[Vec<f64>], elements: Vec<usize>, weights: Vec<f64>) -> Result<Self> {
        if elements.len() != weights.len() {
            return Err(invalid("one weight per element required"));
        }
        let ne = disc.space.n_elements();
        if elements.iter().any(|&k| k >= ne) {
            return Err(invalid("element index out of range"));
        }
        for v in z.iter().chain(y) {
            disc.space.check_len(v)?;
        }
        Ok(Self {
            z: elements.iter().map(|&k| restrict(disc, k, z)).collect(),
            y: elements.iter().map(|&k| restrict(disc, k, y)).collect(),
            elements,
            weights,
            n_trial: z.len(),
            n_test: y.len(),
        })
    }

    /// All elements with unit weights.
    pub fn full(disc: &Discretization, z: &[Vec<f64>], y: &[Vec<f64>]) -> Result<Self> {
        let ne = disc.space.n_elements();
        Self::new(disc, z, y, (0..ne).collect(), vec![1.0; ne])
    }

    pub fn n_trial(&self) -> usize {
        self.n_trial
    }

    pub fn n_test(&self) -> usize {
        self.n_test
    }

    /// Tested residual (length `J`) and optionally its Jacobian (`J x N`).
    pub fn evaluate(
        &self,
        disc: &Discretization,
        law: &dyn ConservationLaw,
        geo: &MapGeometry,
        alpha: &[f64],
        lin: Linearization,
        want_jac: bool,
    ) -> Result<(DVector<f64>, Option<DMatrix<f64>>)> {
        let ns = disc.stencil_len();
        let av = DVector::from_column_slice(alpha);
        let mut r = DVector::zeros(self.n_test);
        let mut jac = want_jac.then(|| DMatrix::zeros(self.n_test, self.n_trial));
        let mut rl = vec![0.0; ns];
        let mut jl = vec![0.0; if want_jac { ns * ns } else { 0 }];
        for (e, &k) in self.elements.iter().enumerate() {
            let rho = self.weights[e];
            let w = &self.z[e] * &av;
            local_residual(disc, law, geo, k, w.as_slice(), lin, &mut rl, want_jac.then_some(&mut jl[..]))?;
            let yk = &self.y[e];
            r += rho * yk.tr_mul(&DVector::from_column_slice(&rl));
            if let Some(j) = jac.as_mut() {
                let jm = DMatrix::from_row_slice(ns, ns, &jl);
                *j += rho * yk.tr_mul(&(jm * &self.z[e]));
            }
        }
        Ok((r, jac))
    }

    /// Per-element tested residuals (`J x n_elements`, unweighted) and the
    /// weighted total Jacobian.
    pub fn contributions(
        &self,
        disc: &Discretization,
        law: &dyn ConservationLaw,
        geo: &MapGeometry,
        alpha: &[f64],
        lin: Linearization,
    ) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let ns = disc.stencil_len();
        let av = DVector::from_column_slice(alpha);
        let mut cols = DMatrix::zeros(self.n_test, self.elements.len());
        let mut jac = DMatrix::zeros(self.n_test, self.n_trial);
        let mut rl = vec![0.0; ns];
        let mut jl = vec![0.0; ns * ns];
        for (e, &k) in self.elements.iter().enumerate() {
            let w = &self.z[e] * &av;
            local_residual(disc, law, geo, k, w.as_slice(), lin, &mut rl, Some(&mut jl))?;
            let yk = &self.y[e];
            cols.set_column(e, &yk.tr_mul(&DVector::from_column_slice(&rl)));
            let jm = DMatrix::from_row_slice(ns, ns, &jl);
            jac += self.weights[e] * yk.tr_mul(&(jm * &self.z[e]));
        }
        Ok((cols, jac))
    }
}
