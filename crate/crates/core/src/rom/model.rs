//! Trained reduced model and its online evaluation.

use std::sync::Mutex;
use std::time::Instant;

use log::warn;
use serde::{Deserialize, Serialize};

use super::{amr_solve, GnOptions, Linearization, LocalBases, RomSolution};
use crate::error::{invalid, Result};
use crate::hf::{subset_points, Discretization, MapGeometry};
use crate::maps::{BijectivityGrid, BijectivityParams, Displacement, MapTable, ReducedMapBasis};
use crate::models::{Family, ModelKind};
use crate::regression::RbfRegressor;

/// Everything the online stage needs, independent of the high-fidelity data.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReducedModel {
    pub kind: ModelKind,
    pub mesh_hash: String,
    /// `Z_N`, L2-orthonormal.
    pub trial: Vec<Vec<f64>>,
    /// `Y_J`, Y-orthonormal.
    pub test: Vec<Vec<f64>>,
    pub continuous: bool,
    pub map_basis: ReducedMapBasis,
    pub eq_elements: Vec<usize>,
    pub eq_weights: Vec<f64>,
    pub map_regressor: RbfRegressor,
    pub alpha_regressor: RbfRegressor,
    /// Training maps `a^k`, used when a predicted map is inadmissible.
    pub train_maps: Vec<Vec<f64>>,
    pub bijectivity: BijectivityParams,
    pub grid_cells: usize,
    pub grid_points: usize,
    pub linearization: Linearization,
    pub gn: GnOptions,
}

impl ReducedModel {
    pub fn n(&self) -> usize {
        self.trial.len()
    }

    pub fn j(&self) -> usize {
        self.test.len()
    }

    pub fn predictor(&self) -> Result<MapPredictor> {
        MapPredictor::new(
            self.map_regressor.clone(),
            self.train_maps.clone(),
            &self.map_basis,
            self.bijectivity,
            self.grid_cells,
            self.grid_points,
        )
    }

    pub fn validate(&self, disc: &Discretization) -> Result<()> {
        if disc.space.mesh.connectivity_hash() != self.mesh_hash {
            return Err(invalid("reduced model was trained on a different mesh"));
        }
        if self.eq_elements.len() != self.eq_weights.len() || self.eq_weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(invalid("malformed quadrature weights"));
        }
        if self.map_regressor.n_targets() != self.map_basis.dim() || self.alpha_regressor.n_targets() != self.n() {
            return Err(invalid("regressor dimensions do not match the reduced spaces"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MapPrediction {
    pub a: Vec<f64>,
    /// The regressor's map was inadmissible and the nearest training map is used.
    pub fallback: bool,
    pub min_det: f64,
    pub bijectivity: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OnlineResult {
    pub mu: Vec<f64>,
    pub map: MapPrediction,
    pub alpha0: Vec<f64>,
    pub solution: RomSolution,
    pub wall_time: f64,
}

/// Regressed map coefficients with a bijectivity check.
#[derive(Clone, Debug)]
pub struct MapPredictor {
    pub regressor: RbfRegressor,
    pub train_maps: Vec<Vec<f64>>,
    pub params: BijectivityParams,
    grid: BijectivityGrid,
}

impl MapPredictor {
    pub fn new(
        regressor: RbfRegressor,
        train_maps: Vec<Vec<f64>>,
        basis: &ReducedMapBasis,
        params: BijectivityParams,
        grid_cells: usize,
        grid_points: usize,
    ) -> Result<Self> {
        if regressor.n_targets() != basis.dim() || train_maps.iter().any(|a| a.len() != basis.dim()) {
            return Err(invalid("map data do not match the map basis"));
        }
        let grid = BijectivityGrid::new(basis, grid_cells, grid_points)?;
        Ok(Self { regressor, train_maps, params, grid })
    }

    /// Regressed map coefficients, replaced by the nearest training map when
    /// the bijectivity check fails.
    pub fn predict(&self, mu: &[f64]) -> MapPrediction {
        let a = self.regressor.predict(mu);
        let (bij, _, min_det) = self.grid.evaluate(&a, &self.params, false);
        if min_det > 0.0 && bij <= self.params.delta {
            return MapPrediction { a, fallback: false, min_det, bijectivity: bij };
        }
        let k = self.regressor.nearest(mu);
        warn!("predicted map at {mu:?} is inadmissible (min det {min_det:.3e}); using training map {k}");
        let a = self.train_maps[k].clone();
        let (bij, _, min_det) = self.grid.evaluate(&a, &self.params, false);
        MapPrediction { a, fallback: true, min_det, bijectivity: bij }
    }
}

/// Online evaluator over a fixed quadrature (the empirical one, or all
/// elements with unit weights).
pub struct OnlineRom<'a> {
    pub model: &'a ReducedModel,
    disc: &'a Discretization,
    family: &'a Family,
    local: LocalBases,
    table: MapTable,
    /// Identity geometry whose quadrature elements are overwritten per solve.
    geo: Mutex<MapGeometry>,
    predictor: MapPredictor,
}

impl<'a> OnlineRom<'a> {
    /// Hyper-reduced evaluator on the empirical quadrature.
    pub fn hyper_reduced(model: &'a ReducedModel, disc: &'a Discretization, family: &'a Family) -> Result<Self> {
        Self::with_quadrature(model, disc, family, model.eq_elements.clone(), model.eq_weights.clone())
    }

    /// Evaluator with the high-fidelity quadrature.
    pub fn full_quadrature(model: &'a ReducedModel, disc: &'a Discretization, family: &'a Family) -> Result<Self> {
        let ne = disc.space.n_elements();
        Self::with_quadrature(model, disc, family, (0..ne).collect(), vec![1.0; ne])
    }

    pub fn with_quadrature(
        model: &'a ReducedModel,
        disc: &'a Discretization,
        family: &'a Family,
        elements: Vec<usize>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        model.validate(disc)?;
        if family.kind != model.kind {
            return Err(invalid("model family mismatch"));
        }
        let table = MapTable::new(&model.map_basis, subset_points(&disc.space, &elements));
        let local = LocalBases::new(disc, &model.trial, &model.test, elements, weights)?;
        let predictor = model.predictor()?;
        let mut geo = MapGeometry::identity(&disc.space);
        geo.mapped = true;
        Ok(Self { model, disc, family, local, table, geo: Mutex::new(geo), predictor })
    }

    pub fn n_elements(&self) -> usize {
        self.local.elements.len()
    }

    pub fn predict_map(&self, mu: &[f64]) -> MapPrediction {
        self.predictor.predict(mu)
    }

    /// Geometry filled on the quadrature elements only.
    pub fn geometry(&self, a: &[f64]) -> Result<MapGeometry> {
        let mut geo = self.geo.lock().map_err(|_| invalid("geometry lock poisoned"))?.clone();
        geo.fill_subset(&self.table, a, &self.local.elements)?;
        Ok(geo)
    }

    pub fn solve(&self, mu: &[f64]) -> Result<OnlineResult> {
        let t0 = Instant::now();
        self.family.check_mu(mu)?;
        let law = self.family.instantiate(mu)?;
        let map = self.predict_map(mu);
        let mut geo = self.geo.lock().map_err(|_| invalid("geometry lock poisoned"))?;
        geo.fill_subset(&self.table, &map.a, &self.local.elements)?;
        let alpha0 = self.model.alpha_regressor.predict(mu);
        let solution = amr_solve(&self.local, self.disc, law.as_ref(), &geo, &alpha0, self.model.linearization, &self.model.gn)?;
        drop(geo);
        if !solution.converged {
            warn!("online Gauss-Newton stopped at gradient {:.3e} after {} iterations", solution.grad_norm, solution.iterations);
        }
        Ok(OnlineResult { mu: mu.to_vec(), map, alpha0, solution, wall_time: t0.elapsed().as_secs_f64() })
    }

    /// Full-space displacement of a prediction.
    pub fn displacement(&self, a: &[f64]) -> Displacement {
        self.model.map_basis.displacement(a)
    }
}
