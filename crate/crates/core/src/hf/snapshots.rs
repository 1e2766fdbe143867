//! Parameter sweeps of high-fidelity solutions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::residual::Discretization;
use super::solver::{solve_hf, NewtonOptions, SolveReport, Start};
use crate::error::{Result, StrobeError};
use crate::models::Family;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Snapshot {
    pub mu: Vec<f64>,
    pub w: Vec<f64>,
    pub eps: Vec<f64>,
    pub report: SolveReport,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct SnapshotSet {
    pub snapshots: Vec<Snapshot>,
    /// Parameters whose solve failed, with the error message.
    pub failed: Vec<(Vec<f64>, String)>,
}

impl SnapshotSet {
    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn fields(&self) -> Vec<Vec<f64>> {
        self.snapshots.iter().map(|s| s.w.clone()).collect()
    }

    pub fn params(&self) -> Vec<Vec<f64>> {
        self.snapshots.iter().map(|s| s.mu.clone()).collect()
    }
}

pub fn solve_one(family: &Family, disc: &Discretization, mu: &[f64], opts: &NewtonOptions) -> Result<Snapshot> {
    let law = family.instantiate(mu)?;
    let sol = solve_hf(disc, law.as_ref(), Start::Cold, opts)?;
    Ok(Snapshot { mu: mu.to_vec(), w: sol.w, eps: sol.eps, report: sol.report })
}

/// Solves every parameter; failed solves are logged and excluded.
pub fn generate_snapshots(
    family: &Family,
    disc: &Discretization,
    mus: &[Vec<f64>],
    opts: &NewtonOptions,
) -> Result<SnapshotSet> {
    if mus.is_empty() {
        return Err(StrobeError::EmptyInput("parameter list".into()));
    }
    for mu in mus {
        family.check_mu(mu)?;
    }
    let results: Vec<Result<Snapshot>> = mus.par_iter().map(|mu| solve_one(family, disc, mu, opts)).collect();
    let mut set = SnapshotSet::default();
    for (mu, r) in mus.iter().zip(results) {
        match r {
            Ok(s) => set.snapshots.push(s),
            Err(e) => {
                log::warn!("snapshot at mu = {mu:?} failed: {e}");
                set.failed.push((mu.clone(), e.to_string()));
            }
        }
    }
    Ok(set)
}
