//! Offline stages: snapshots, registration and compression, reduced models.
//! Every stage reads its inputs from and writes its outputs to a container.

use std::path::Path;
use std::sync::{Arc, OnceLock};

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::dg::pod::{orthonormalize, pod_cardinality, pod_with, Inner, PodSize};
use crate::dg::{assemble_norms, to_continuous, DgSpace, NormPair};
use crate::error::{in_stage, Result, StrobeError};
use crate::hf::{generate_snapshots, map_table, solve_one, Discretization, MapGeometry, SnapshotSet, SolveReport};
use crate::io::{Array, Container, Manifest};
use crate::maps::{ReducedMapBasis, MapTable};
use crate::mesh::SpaceTimeMesh;
use crate::models::{Family, ModelKind};
use crate::registration::{extract_sensor, filter_sensor, greedy_registration, repod, GreedyStep, RegistrationResult};
use crate::regression::RbfRegressor;
use crate::rom::{build_eqp, build_test_space, eqp_system, GnOptions, MappedCase, ReducedModel, TestSize};

/// POD modes kept beyond the largest trained `N`, for the best-fit curves.
const EXTRA_MODES: usize = 10;

/// Problem objects shared by all stages of one experiment.
pub struct Setup {
    pub config: ExperimentConfig,
    pub family: Family,
    pub disc: Discretization,
    norms: OnceLock<NormPair>,
}

impl Setup {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let family = in_stage("setup", config.family())?;
        let m = &config.mesh;
        let mesh = Arc::new(SpaceTimeMesh::generate(family.length, family.time, m.nx, m.nt, m.p)?);
        let disc = Discretization::new(DgSpace::new(mesh, family.n_comp)?);
        Ok(Self { config, family, disc, norms: OnceLock::new() })
    }

    pub fn space(&self) -> &DgSpace {
        &self.disc.space
    }

    pub fn mesh_hash(&self) -> String {
        self.disc.space.mesh.connectivity_hash()
    }

    pub fn norms(&self) -> Result<&NormPair> {
        if let Some(n) = self.norms.get() {
            return Ok(n);
        }
        let n = assemble_norms(self.space())?;
        Ok(self.norms.get_or_init(|| n))
    }

    /// Opens the experiment container, creating it when absent.
    pub fn container(&self, dir: &Path) -> Result<Container> {
        if dir.join("manifest.json").exists() {
            let c = Container::open_for_mesh(dir, &self.mesh_hash())?;
            if c.manifest.model != self.config.model.name() {
                return Err(StrobeError::Format("container belongs to another model".into()));
            }
            return Ok(c);
        }
        let mut manifest = Manifest::new(self.config.model.name(), &self.mesh_hash());
        manifest.settings = serde_json::to_value(&self.config)?;
        Container::create(dir, manifest)
    }

    /// Rebuilds the setup recorded in a container.
    pub fn from_container(dir: &Path) -> Result<(Self, Container)> {
        let c = Container::open(dir)?;
        let config: ExperimentConfig =
            serde_json::from_value(c.manifest.settings.clone()).map_err(|e| StrobeError::Config(e.to_string()))?;
        let s = Self::new(config)?;
        if s.mesh_hash() != c.manifest.mesh_hash {
            return Err(StrobeError::Format("container mesh hash does not match its configuration".into()));
        }
        Ok((s, c))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SnapshotDoc {
    pub reports: Vec<SolveReport>,
    pub failed: Vec<(Vec<f64>, String)>,
}

fn write_set(c: &mut Container, prefix: &str, set: &SnapshotSet) -> Result<()> {
    c.write_array(&format!("{prefix}_w"), &Array::matrix(&set.fields())?)?;
    c.write_array(&format!("{prefix}_mu"), &Array::matrix(&set.params())?)?;
    let eps: Vec<Vec<f64>> = set.snapshots.iter().map(|s| s.eps.clone()).collect();
    c.write_array(&format!("{prefix}_eps"), &Array::matrix(&eps)?)?;
    let doc = SnapshotDoc { reports: set.snapshots.iter().map(|s| s.report.clone()).collect(), failed: set.failed.clone() };
    c.write_document(&format!("{prefix}_reports"), &doc)
}

/// Parameters and fields of a stored snapshot set.
#[derive(Clone, Debug)]
pub struct Fields {
    pub mus: Vec<Vec<f64>>,
    pub w: Vec<Vec<f64>>,
}

pub fn read_fields(c: &Container, prefix: &str) -> Result<Fields> {
    let mus = c.read_array(&format!("{prefix}_mu"))?.rows()?;
    let w = c.read_array(&format!("{prefix}_w"))?.rows()?;
    if mus.len() != w.len() {
        return Err(StrobeError::Format(format!("{prefix}: parameter and field counts differ")));
    }
    Ok(Fields { mus, w })
}

/// Stage 1: high-fidelity snapshots for the training and test sets and the
/// solution at the centre of the parameter box.
pub fn run_snapshots(s: &Setup, c: &mut Container) -> Result<()> {
    in_stage("snapshots", (|| {
        let opts = &s.config.hf;
        for (prefix, mus) in [("train", s.config.train_points(&s.family)), ("test", s.config.test_points(&s.family))] {
            info!("solving {} {prefix} snapshots", mus.len());
            let set = generate_snapshots(&s.family, &s.disc, &mus, opts)?;
            if set.is_empty() {
                return Err(StrobeError::EmptyInput(format!("every {prefix} solve failed")));
            }
            write_set(c, prefix, &set)?;
            if prefix == "train" {
                c.manifest.train_mu = set.params();
            } else {
                c.manifest.test_mu = set.params();
            }
        }
        let center = solve_one(&s.family, &s.disc, &s.family.centroid(), opts)?;
        c.write_array("center_w", &Array::vector(center.w))?;
        c.save_manifest()
    })())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CompressionDoc {
    pub history: Vec<GreedyStep>,
    pub results: Vec<RegistrationResult>,
    pub map_eigenvalues: Vec<f64>,
    /// POD cardinality of the mapped snapshots at `tol_pod`.
    pub n_pod: usize,
    pub clamped: usize,
}

/// Registration sensors (filtered) of a list of fields.
pub fn sensors(s: &Setup, fields: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let scalar = s.space().with_components(1);
    let w = s.config.registration.filter_window;
    fields.par_iter().map(|u| filter_sensor(&scalar, &extract_sensor(s.space(), u, 0)?, w)).collect()
}

/// Filtered sensor at the centre of the box, plus the filtered steady height
/// for shallow water.
pub fn initial_templates(s: &Setup, center: &[f64]) -> Result<Vec<Vec<f64>>> {
    let scalar = s.space().with_components(1);
    let w = s.config.registration.filter_window;
    let mut out = vec![filter_sensor(&scalar, &extract_sensor(s.space(), center, 0)?, w)?];
    if s.family.kind == ModelKind::ShallowWater {
        let st = s.family.steady.clone().ok_or_else(|| StrobeError::Config("missing steady state".into()))?;
        let h = scalar.interpolate(|x| vec![st.eval(x[0])[0]]);
        out.push(filter_sensor(&scalar, &h, w)?);
    }
    Ok(out)
}

/// Stage 2: greedy registration, RePOD and plain POD of the training set.
pub fn run_compress(s: &Setup, c: &mut Container) -> Result<()> {
    in_stage("compress", (|| {
        let train = read_fields(c, "train")?;
        let center = c.read_array("center_w")?.as_f64()?.to_vec();
        let params = s.config.registration_params(&s.family)?;
        let scalar = s.space().with_components(1);
        let sens = sensors(s, &train.w)?;
        let init = initial_templates(s, &center)?;
        let g = greedy_registration(&scalar, &sens, &init, s.config.map_space(&s.family)?, &params)?;
        info!("registration: {} templates, M = {}", g.templates.len(), g.basis.dim());
        let keep = (s.config.rom.n_values.iter().max().copied().unwrap_or(1) + EXTRA_MODES).min(train.w.len());
        let rp = repod(s.space(), &train.w, &g.basis, &g.coeffs, 1e-14)?;
        let n_pod = pod_cardinality(&rp.pod.eigenvalues, params.tol_pod);
        let plain = pod_with(&train.w, PodSize::Fixed(keep), Inner::L2(s.space()))?;
        c.write_array("templates", &Array::matrix(&g.templates)?)?;
        c.write_array("map_modes", &Array::matrix(&g.basis.modes)?)?;
        c.write_array("map_coeffs", &Array::matrix(&g.coeffs)?)?;
        c.write_array("mapped_train", &Array::matrix(&rp.mapped)?)?;
        let modes: Vec<Vec<f64>> = rp.pod.modes.into_iter().take(keep).collect();
        c.write_array("repod_modes", &Array::matrix(&modes)?)?;
        c.write_array("repod_eig", &Array::vector(rp.pod.eigenvalues))?;
        c.write_array("plain_modes", &Array::matrix(&plain.modes)?)?;
        c.write_array("plain_eig", &Array::vector(plain.eigenvalues))?;
        let doc = CompressionDoc {
            history: g.history,
            results: g.results,
            map_eigenvalues: g.map_eigenvalues,
            n_pod,
            clamped: rp.clamped,
        };
        c.write_document("compression", &doc)
    })())
}

/// Outputs of the compression stage.
#[derive(Clone, Debug)]
pub struct Compressed {
    pub train: Fields,
    pub map_basis: ReducedMapBasis,
    pub map_coeffs: Vec<Vec<f64>>,
    pub mapped: Vec<Vec<f64>>,
    pub modes: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    pub plain_modes: Vec<Vec<f64>>,
    pub plain_eigenvalues: Vec<f64>,
    pub templates: Vec<Vec<f64>>,
    pub doc: CompressionDoc,
}

pub fn read_compressed(s: &Setup, c: &Container) -> Result<Compressed> {
    let map_modes = c.read_array("map_modes")?.rows()?;
    Ok(Compressed {
        train: read_fields(c, "train")?,
        map_basis: ReducedMapBasis { space: s.config.map_space(&s.family)?, modes: map_modes },
        map_coeffs: c.read_array("map_coeffs")?.rows()?,
        mapped: c.read_array("mapped_train")?.rows()?,
        modes: c.read_array("repod_modes")?.rows()?,
        eigenvalues: c.read_array("repod_eig")?.as_f64()?.to_vec(),
        plain_modes: c.read_array("plain_modes")?.rows()?,
        plain_eigenvalues: c.read_array("plain_eig")?.as_f64()?.to_vec(),
        templates: c.read_array("templates")?.rows()?,
        doc: c.read_document("compression")?,
    })
}

/// How to build one reduced model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Variant {
    pub n: usize,
    pub continuous: bool,
    pub test: TestSize,
    /// NNLS step tolerance; `None` keeps the high-fidelity quadrature.
    pub eqp_tol: Option<f64>,
}

/// Training data shared by every reduced model of one experiment.
pub struct Training<'a> {
    pub setup: &'a Setup,
    pub data: &'a Compressed,
    pub map_regressor: RbfRegressor,
    pub table: MapTable,
    pub cases: Vec<MappedCase>,
}

impl<'a> Training<'a> {
    pub fn new(setup: &'a Setup, data: &'a Compressed) -> Result<Self> {
        let cfg = &setup.config;
        let bounds = setup.family.param_box;
        let map_regressor = RbfRegressor::fit(&bounds, &data.train.mus, &data.map_coeffs, cfg.rom.folds, cfg.rom.seed)?;
        let table = map_table(setup.space(), &data.map_basis);
        let cases = data
            .train
            .mus
            .par_iter()
            .zip(&data.map_coeffs)
            .zip(&data.mapped)
            .map(|((mu, a), u)| {
                Ok(MappedCase {
                    law: setup.family.instantiate(mu)?,
                    geo: MapGeometry::from_table(setup.space(), &table, a)?,
                    state: u.clone(),
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { setup, data, map_regressor, table, cases })
    }

    /// First `n` RePOD modes, facet-averaged and re-orthonormalized if asked.
    pub fn trial_basis(&self, n: usize, continuous: bool) -> Result<Vec<Vec<f64>>> {
        if n == 0 || n > self.data.modes.len() {
            return Err(StrobeError::InvalidArgument(format!("N = {n} outside 1..={}", self.data.modes.len())));
        }
        let mut z: Vec<Vec<f64>> = self.data.modes[..n].to_vec();
        if continuous {
            z = z.iter().map(|v| to_continuous(self.setup.space(), v)).collect();
            orthonormalize(&mut z, Inner::L2(self.setup.space()));
            if z.len() != n {
                return Err(StrobeError::IllPosedData("continuous trial basis lost rank".into()));
            }
        }
        Ok(z)
    }

    /// L2 projection coefficients of the mapped snapshots.
    pub fn coefficients(&self, z: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let space = self.setup.space();
        self.data
            .mapped
            .iter()
            .map(|u| {
                let mu = space.mass_apply(u);
                z.iter().map(|zn| crate::linalg::dot(zn, &mu)).collect()
            })
            .collect()
    }

    pub fn build(&self, v: Variant) -> Result<ReducedModel> {
        let m = self.build_full(v.n, v.continuous, v.test)?;
        match v.eqp_tol {
            Some(tol) => self.with_eqp(&m, tol),
            None => Ok(m),
        }
    }

    /// Empirical quadrature for a model's trial and test bases.
    pub fn with_eqp(&self, m: &ReducedModel, tol: f64) -> Result<ReducedModel> {
        let s = self.setup;
        let alphas = self.coefficients(&m.trial);
        let (g, b) = eqp_system(&s.disc, &self.cases, &alphas, &m.trial, &m.test, m.linearization)?;
        let r = build_eqp(&g, &b, tol)?;
        info!("N = {} J = {} tol {tol:.1e}: {} quadrature elements (residual {:.3e})", m.n(), m.j(), r.elements.len(), r.residual);
        Ok(ReducedModel { eq_elements: r.elements, eq_weights: r.weights, ..m.clone() })
    }

    /// Model with the high-fidelity quadrature.
    pub fn build_full(&self, n: usize, continuous: bool, test: TestSize) -> Result<ReducedModel> {
        let s = self.setup;
        let cfg = &s.config;
        let lin = cfg.rom.linearization;
        let z = self.trial_basis(n, continuous)?;
        let alphas = self.coefficients(&z);
        let alpha_regressor = RbfRegressor::fit(&s.family.param_box, &self.data.train.mus, &alphas, cfg.rom.folds, cfg.rom.seed)?;
        let (y, _) = build_test_space(&s.disc, s.norms()?, &self.cases, &z, test, continuous, lin)?;
        let ne = s.space().n_elements();
        let (eq_elements, eq_weights) = ((0..ne).collect(), vec![1.0; ne]);
        let p = cfg.registration_params(&s.family)?;
        Ok(ReducedModel {
            kind: s.family.kind,
            mesh_hash: s.mesh_hash(),
            trial: z,
            test: y,
            continuous,
            map_basis: self.data.map_basis.clone(),
            eq_elements,
            eq_weights,
            map_regressor: self.map_regressor.clone(),
            alpha_regressor,
            train_maps: self.data.map_coeffs.clone(),
            bijectivity: p.bijectivity,
            grid_cells: p.grid_cells,
            grid_points: p.grid_points,
            linearization: lin,
            gn: GnOptions::default(),
        })
    }
}

pub fn model_name(n: usize) -> String {
    format!("rom_n{n}")
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelSummary {
    pub n: usize,
    pub j: usize,
    pub eq_elements: usize,
    pub eq_fraction: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Summary {
    pub model: String,
    pub n_elements: usize,
    pub n_dofs: usize,
    pub n_train: usize,
    pub n_test: usize,
    /// POD cardinality of the mapped snapshots.
    pub n_pod: usize,
    pub m: usize,
    pub n_templates: usize,
    pub models: Vec<ModelSummary>,
    /// `lambda_n / lambda_1` for the first ten eigenvalues.
    pub registered_decay: Vec<f64>,
    pub unregistered_decay: Vec<f64>,
    pub map_decay: Vec<f64>,
}

fn decay(eig: &[f64]) -> Vec<f64> {
    let l1 = eig.first().copied().unwrap_or(0.0);
    eig.iter().take(10).map(|l| if l1 > 0.0 { l / l1 } else { 0.0 }).collect()
}

/// Stage 3: regressors, test spaces, empirical quadrature and the summary.
pub fn run_train(s: &Setup, c: &mut Container) -> Result<Summary> {
    in_stage("train-rom", (|| {
        let data = read_compressed(s, c)?;
        let tr = Training::new(s, &data)?;
        c.write_document("map_regressor", &tr.map_regressor)?;
        let rom = &s.config.rom;
        let mut models = Vec::new();
        for &n in &rom.n_values {
            let v = Variant { n, continuous: rom.continuous, test: TestSize::Multiple(rom.test_multiple), eqp_tol: Some(rom.eqp_tol) };
            let m = tr.build(v)?;
            let ne = s.space().n_elements();
            models.push(ModelSummary { n, j: m.j(), eq_elements: m.eq_elements.len(), eq_fraction: m.eq_elements.len() as f64 / ne as f64 });
            c.write_document(&model_name(n), &m)?;
        }
        let summary = Summary {
            model: s.config.model.name().into(),
            n_elements: s.space().n_elements(),
            n_dofs: s.space().n_dofs(),
            n_train: data.train.mus.len(),
            n_test: c.manifest.test_mu.len(),
            n_pod: data.doc.n_pod,
            m: data.map_basis.dim(),
            n_templates: data.templates.len(),
            models,
            registered_decay: decay(&data.eigenvalues),
            unregistered_decay: decay(&data.plain_eigenvalues),
            map_decay: decay(&data.doc.map_eigenvalues),
        };
        c.write_document("summary", &summary)?;
        Ok(summary)
    })())
}

/// All three stages.
pub fn run_offline(config: ExperimentConfig) -> Result<(Container, Summary)> {
    let dir = config.output.clone();
    let s = Setup::new(config)?;
    let mut c = s.container(&dir)?;
    run_snapshots(&s, &mut c)?;
    run_compress(&s, &mut c)?;
    let summary = run_train(&s, &mut c)?;
    Ok((c, summary))
}

/// Loads a trained model and checks it against the container's mesh.
pub fn load_model(s: &Setup, c: &Container, n: usize) -> Result<ReducedModel> {
    let m: ReducedModel = c.read_document(&model_name(n))?;
    m.validate(&s.disc)?;
    Ok(m)
}

/// Sizes of the trained models stored in a container.
pub fn trained_sizes(c: &Container) -> Vec<usize> {
    let mut v: Vec<usize> =
        c.manifest.documents.keys().filter_map(|k| k.strip_prefix("rom_n").and_then(|n| n.parse().ok())).collect();
    v.sort_unstable();
    v
}
