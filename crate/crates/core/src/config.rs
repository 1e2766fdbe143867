//! Experiment configuration and the shipped presets.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::{Result, StrobeError};
use crate::hf::NewtonOptions;
use crate::maps::{BijectivityParams, MapSpace};
use crate::models::{Family, ModelKind};
use crate::registration::{BfgsOptions, RegistrationParams};
use crate::rom::Linearization;

pub const PRESETS: [(&str, &str); 4] = [
    ("burgers-paper", include_str!("../presets/burgers-paper.json")),
    ("burgers-desk", include_str!("../presets/burgers-desk.json")),
    ("sw-paper", include_str!("../presets/sw-paper.json")),
    ("sw-desk", include_str!("../presets/sw-desk.json")),
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    pub nx: usize,
    pub nt: usize,
    pub p: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Sampling {
    /// Tensor grid with `n[0] x n[1]` points including the box corners.
    Grid { n: [usize; 2] },
    /// Independent uniform draws.
    Uniform { n: usize, seed: u64 },
    /// Explicit list.
    List { points: Vec<[f64; 2]> },
}

impl Sampling {
    pub fn points(&self, bounds: &[[f64; 2]; 2]) -> Vec<Vec<f64>> {
        match self {
            Sampling::Grid { n } => {
                let axis = |d: usize| -> Vec<f64> {
                    let [a, b] = bounds[d];
                    if n[d] == 1 {
                        vec![0.5 * (a + b)]
                    } else {
                        (0..n[d]).map(|i| a + (b - a) * i as f64 / (n[d] - 1) as f64).collect()
                    }
                };
                let (x, y) = (axis(0), axis(1));
                x.iter().flat_map(|&u| y.iter().map(move |&v| vec![u, v])).collect()
            }
            Sampling::Uniform { n, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                (0..*n).map(|_| bounds.iter().map(|b| rng.random_range(b[0]..b[1])).collect()).collect()
            }
            Sampling::List { points } => points.iter().map(|p| p.to_vec()).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct RegistrationConfig {
    pub n_max: usize,
    pub xi: f64,
    /// Legendre degree bound of the displacement space (`M_hf = 2 mbar^2`).
    pub mbar: usize,
    pub tol_pod: f64,
    pub eps: f64,
    pub c_exp: f64,
    /// Bijectivity threshold; `|Omega|` when absent.
    #[serde(default)]
    pub delta: Option<f64>,
    /// Greedy stopping tolerance on the relative proximity.
    pub tol: f64,
    pub grid_cells: usize,
    pub filter_window: usize,
    pub bfgs_max_iter: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct RomConfig {
    /// Trial-space sizes to build.
    pub n_values: Vec<usize>,
    /// Test-space size `J = test_multiple N`.
    pub test_multiple: usize,
    /// Facet-averaged trial and test bases for the trained models.
    pub continuous: bool,
    /// NNLS step tolerance of the trained models.
    pub eqp_tol: f64,
    /// Tolerances compared by the hyper-reduction study.
    pub eqp_tols: Vec<f64>,
    #[serde(default)]
    pub linearization: Linearization,
    pub folds: usize,
    pub seed: u64,
    /// Repetitions of timed online solves (the median is reported).
    pub timing_repeats: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub model: ModelKind,
    pub mesh: MeshConfig,
    pub train: Sampling,
    pub test: Sampling,
    #[serde(default)]
    pub hf: NewtonOptions,
    pub registration: RegistrationConfig,
    pub rom: RomConfig,
    /// Finite-volume cells of the steady shallow-water base flow.
    #[serde(default = "default_steady_cells")]
    pub steady_cells: usize,
    pub output: PathBuf,
}

fn default_steady_cells() -> usize {
    1000
}

fn config_err(msg: impl Into<String>) -> StrobeError {
    StrobeError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn preset(name: &str) -> Result<Self> {
        let text = PRESETS
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, t)| *t)
            .ok_or_else(|| config_err(format!("unknown preset '{name}'")))?;
        Self::from_json(text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text).map_err(|e| config_err(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    /// A preset name or a path to a JSON file.
    pub fn load(spec: &str) -> Result<Self> {
        if PRESETS.iter().any(|(n, _)| *n == spec) {
            return Self::preset(spec);
        }
        let text = std::fs::read_to_string(Path::new(spec)).map_err(|e| config_err(format!("{spec}: {e}")))?;
        Self::from_json(&text)
    }

    pub fn schema() -> serde_json::Value {
        serde_json::to_value(schemars::schema_for!(ExperimentConfig)).expect("schema serializes")
    }

    pub fn family(&self) -> Result<Family> {
        match self.model {
            ModelKind::Burgers => Ok(Family::burgers()),
            ModelKind::ShallowWater => Family::shallow_water(self.steady_cells),
        }
    }

    pub fn train_points(&self, family: &Family) -> Vec<Vec<f64>> {
        self.train.points(&family.param_box)
    }

    pub fn test_points(&self, family: &Family) -> Vec<Vec<f64>> {
        self.test.points(&family.param_box)
    }

    pub fn map_space(&self, family: &Family) -> Result<MapSpace> {
        MapSpace::new(self.registration.mbar, family.length, family.time)
    }

    pub fn registration_params(&self, family: &Family) -> Result<RegistrationParams> {
        let ms = self.map_space(family)?;
        let r = &self.registration;
        let mut p = RegistrationParams::new(&ms, self.mesh.p, r.n_max);
        p.xi = r.xi;
        p.tol_pod = r.tol_pod;
        p.tol = r.tol;
        p.grid_cells = r.grid_cells;
        p.filter_window = r.filter_window;
        p.bijectivity = BijectivityParams { eps: r.eps, c_exp: r.c_exp, delta: r.delta.unwrap_or(ms.area()) };
        p.bfgs = BfgsOptions { max_iter: r.bfgs_max_iter, ..BfgsOptions::default() };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.mesh;
        if m.nx == 0 || m.nt == 0 || !(1..=3).contains(&m.p) {
            return Err(config_err("mesh needs nx, nt >= 1 and p in 1..=3"));
        }
        let r = &self.registration;
        let positive = [r.xi, r.tol_pod, r.eps, r.c_exp, r.tol, self.rom.eqp_tol];
        if positive.iter().any(|v| !(*v > 0.0)) || r.delta.is_some_and(|d| !(d > 0.0)) {
            return Err(config_err("all tolerances must be positive"));
        }
        if !(r.tol_pod < 1.0) || !(r.eps < 1.0) {
            return Err(config_err("tol_pod and eps must be below 1"));
        }
        if r.n_max == 0 || r.mbar == 0 || r.grid_cells == 0 || r.filter_window.is_multiple_of(2) || r.bfgs_max_iter == 0 {
            return Err(config_err("registration sizes must be positive and the filter window odd"));
        }
        let rom = &self.rom;
        if rom.n_values.is_empty() || rom.n_values.contains(&0) || rom.test_multiple == 0 {
            return Err(config_err("ROM sizes must be positive"));
        }
        if rom.eqp_tols.iter().any(|t| !(*t > 0.0)) || rom.folds < 2 || rom.timing_repeats == 0 {
            return Err(config_err("invalid EQP tolerances, fold count or timing repeats"));
        }
        let bounds = self.model.param_box();
        let train = self.train.points(&bounds);
        let test = self.test.points(&bounds);
        if train.is_empty() {
            return Err(config_err("empty training set"));
        }
        if test.is_empty() {
            return Err(config_err("empty test set"));
        }
        if train.len() < rom.folds {
            return Err(config_err("fewer training points than cross-validation folds"));
        }
        if test.iter().any(|t| train.contains(t)) {
            return Err(config_err("training and test sets overlap"));
        }
        let inside = |p: &Vec<f64>| p.iter().zip(&bounds).all(|(v, b)| *v >= b[0] && *v <= b[1]);
        if !train.iter().chain(&test).all(inside) {
            return Err(config_err("parameter outside the model's box"));
        }
        Ok(())
    }
}
