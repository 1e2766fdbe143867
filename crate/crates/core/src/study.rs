//! Studies over a trained experiment, each written as one CSV file.
//!
//! Every file starts with a `#` line describing the series, followed by
//! a header row whose column names carry their units.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;

use crate::dg::{best_fit_error, registered_best_fit_error, DgSpace};
use crate::error::{in_stage, invalid, Result, StrobeError};
use crate::hf::{march, MarchOptions};
use crate::io::Container;
use crate::offline::{load_model, read_compressed, read_fields, sensors, trained_sizes, Compressed, Setup, Training};
use crate::registration::{compose, Registrar};
use crate::rom::{galerkin_solve, minres_solve, OnlineRom, ReducedModel, TestSize};

/// Spatial unknowns of the explicit reference solver.
pub const REFERENCE_DOFS: usize = 900;
/// Half width (relative to the domain length) of the band around the shock.
pub const SHOCK_BAND: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Study {
    EigDecay,
    BfError,
    RomError,
    Eqp,
    Speedup,
    SpaceOnlyBaseline,
}

pub const ALL_STUDIES: [Study; 6] =
    [Study::EigDecay, Study::BfError, Study::RomError, Study::Eqp, Study::Speedup, Study::SpaceOnlyBaseline];

impl std::str::FromStr for Study {
    type Err = StrobeError;
    fn from_str(s: &str) -> Result<Self> {
        ALL_STUDIES
            .iter()
            .copied()
            .find(|st| st.name() == s)
            .ok_or_else(|| invalid(format!("unknown study '{s}'")))
    }
}

impl Study {
    pub fn name(&self) -> &'static str {
        match self {
            Study::EigDecay => "eig-decay",
            Study::BfError => "bf-error",
            Study::RomError => "rom-error",
            Study::Eqp => "eqp",
            Study::Speedup => "speedup",
            Study::SpaceOnlyBaseline => "space-only-baseline",
        }
    }
}

/// A CSV table held as strings.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub title: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub(crate) fn new(title: &str, columns: &[&str]) -> Self {
        Self { title: title.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub(crate) fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let body = String::from_utf8(w.into_inner().map_err(|e| StrobeError::Format(e.to_string()))?)
            .map_err(|e| StrobeError::Format(e.to_string()))?;
        let mut out = String::new();
        let _ = writeln!(out, "# {}", self.title);
        out.push_str(&body);
        Ok(out)
    }

    /// Parses a file written by [`Table::to_csv`].
    pub fn from_csv(text: &str) -> Result<Self> {
        let (first, rest) = text.split_once('\n').ok_or_else(|| StrobeError::Format("empty table".into()))?;
        let title = first.strip_prefix("# ").ok_or_else(|| StrobeError::Format("missing title line".into()))?;
        let mut r = csv::Reader::from_reader(rest.as_bytes());
        let columns = r.headers()?.iter().map(String::from).collect();
        let rows = r.records().map(|rec| Ok(rec?.iter().map(String::from).collect())).collect::<Result<_>>()?;
        Ok(Self { title: title.into(), columns, rows })
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name || c.split(" [").next() == Some(name))
            .ok_or_else(|| StrobeError::Format(format!("no column '{name}'")))
    }

    /// Numeric value at a row and named column (empty cells are NaN).
    pub fn value(&self, row: usize, name: &str) -> Result<f64> {
        let c = self.column(name)?;
        let s = &self.rows[row][c];
        if s.is_empty() {
            return Ok(f64::NAN);
        }
        s.parse().map_err(|_| StrobeError::Format(format!("'{s}' is not a number")))
    }
}

pub(crate) fn f(v: f64) -> String {
    format!("{v:.9e}")
}

pub(crate) fn ratios(eig: &[f64]) -> Vec<f64> {
    let l1 = eig.first().copied().unwrap_or(0.0);
    eig.iter().map(|l| if l1 > 0.0 { l / l1 } else { 0.0 }).collect()
}

fn eig_decay(data: &Compressed) -> Table {
    let mut t = Table::new(
        "normalized POD eigenvalues of the unregistered and registered training snapshots and of the displacements",
        &["n", "unregistered [-]", "registered [-]", "maps [-]"],
    );
    let (u, r, m) = (ratios(&data.plain_eigenvalues), ratios(&data.eigenvalues), ratios(&data.doc.map_eigenvalues));
    let cell = |v: &[f64], i: usize| v.get(i).map_or(String::new(), |x| f(*x));
    for i in 0..u.len().max(r.len()).max(m.len()) {
        t.push(vec![(i + 1).to_string(), cell(&u, i), cell(&r, i), cell(&m, i)]);
    }
    t
}

fn bf_error(s: &Setup, c: &Container, tr: &Training) -> Result<Table> {
    let data = tr.data;
    let test = read_fields(c, "test")?;
    let space = s.space();
    let basis = &data.map_basis;
    let params = s.config.registration_params(&s.family)?;
    let predictor = crate::rom::MapPredictor::new(
        tr.map_regressor.clone(),
        data.map_coeffs.clone(),
        basis,
        params.bijectivity,
        params.grid_cells,
        params.grid_points,
    )?;
    let predicted: Vec<_> = test.mus.iter().map(|mu| basis.displacement(&predictor.predict(mu).a)).collect();
    let scalar = space.with_components(1);
    let reg = Registrar::new(&scalar, &data.templates, basis.clone(), &params)?;
    let sens = sensors(s, &test.w)?;
    let fitted: Vec<_> = sens
        .par_iter()
        .map(|sv| Ok(basis.displacement(&reg.register(sv, &vec![0.0; basis.dim()])?.a)))
        .collect::<Result<_>>()?;
    let nmax = data.modes.len().min(data.plain_modes.len());
    let mut t = Table::new(
        "maximum relative best-fit error over the test set against N, with and without registration",
        &["N", "unregistered [-]", "registered [-]", "registered_fitted_map [-]"],
    );
    for n in 1..=nmax {
        let mut e = [0.0f64; 3];
        for (k, u) in test.w.iter().enumerate() {
            e[0] = e[0].max(best_fit_error(space, u, &data.plain_modes[..n])?);
            e[1] = e[1].max(registered_best_fit_error(space, u, &data.modes[..n], &predicted[k])?);
            e[2] = e[2].max(registered_best_fit_error(space, u, &data.modes[..n], &fitted[k])?);
        }
        t.push(vec![n.to_string(), f(e[0]), f(e[1]), f(e[2])]);
    }
    Ok(t)
}

/// One test configuration seen through the predicted map.
struct TestCase {
    mu: Vec<f64>,
    /// `U o Phi` of the high-fidelity test solution.
    mapped: Vec<f64>,
    a: Vec<f64>,
}

fn test_cases(s: &Setup, c: &Container, model: &ReducedModel) -> Result<Vec<TestCase>> {
    let test = read_fields(c, "test")?;
    let pred = model.predictor()?;
    test.mus
        .par_iter()
        .zip(&test.w)
        .map(|(mu, u)| {
            let p = pred.predict(mu);
            let (mapped, _) = compose(s.space(), u, &model.map_basis.displacement(&p.a))?;
            Ok(TestCase { mu: mu.clone(), mapped, a: p.a })
        })
        .collect()
}

fn rel_error(space: &DgSpace, truth: &[f64], z: &[Vec<f64>], alpha: &[f64]) -> f64 {
    let approx = crate::rom::expand(z, alpha);
    let d: Vec<f64> = truth.iter().zip(&approx).map(|(a, b)| a - b).collect();
    space.l2_norm(&d) / space.l2_norm(truth)
}

/// Mean error of a ROM over the test cases and the number of unconverged solves.
fn average<F>(cases: &[TestCase], mut solve: F) -> (f64, usize)
where
    F: FnMut(&TestCase) -> Result<(f64, bool)>,
{
    let (mut sum, mut failed) = (0.0, 0);
    for tc in cases {
        match solve(tc) {
            Ok((e, ok)) => {
                sum += e;
                failed += (!ok) as usize;
            }
            Err(e) => {
                warn!("solve at {:?} failed: {e}", tc.mu);
                sum += f64::NAN;
                failed += 1;
            }
        }
    }
    (sum / cases.len() as f64, failed)
}

fn with_test_prefix(m: &ReducedModel, j: usize) -> ReducedModel {
    ReducedModel { test: m.test[..j.min(m.test.len())].to_vec(), ..m.clone() }
}

fn rom_error(s: &Setup, c: &Container, tr: &Training) -> Result<Table> {
    let space = s.space();
    let lin = s.config.rom.linearization;
    let mut t = Table::new(
        "average relative L2 error in the reference configuration of projection, Galerkin, minimum residual and approximate minimum residual ROMs with the high-fidelity quadrature",
        &["basis", "N", "method", "J", "e_avg [-]", "unconverged [count]"],
    );
    let mut cases: Option<Vec<TestCase>> = None;
    for continuous in [false, true] {
        let basis = if continuous { "continuous" } else { "discontinuous" };
        for &n in &s.config.rom.n_values {
            let full = tr.build_full(n, continuous, TestSize::Multiple(3))?;
            if cases.is_none() {
                cases = Some(test_cases(s, c, &full)?);
            }
            let cases = cases.as_ref().expect("set above");
            let online = OnlineRom::full_quadrature(&full, &s.disc, &s.family)?;
            let z = &full.trial;
            let gn = full.gn.clone();
            let mut row = |method: &str, j: String, (e, bad): (f64, usize)| {
                t.push(vec![basis.into(), n.to_string(), method.into(), j, f(e), bad.to_string()]);
            };
            row("projection", String::new(), average(cases, |tc| Ok((best_fit_error(space, &tc.mapped, z)?, true))));
            let solve = |tc: &TestCase, minres: bool| -> Result<(f64, bool)> {
                let law = s.family.instantiate(&tc.mu)?;
                let geo = online.geometry(&tc.a)?;
                let a0 = full.alpha_regressor.predict(&tc.mu);
                let r = if minres {
                    minres_solve(&s.disc, s.norms()?, law.as_ref(), &geo, z, &a0, lin, &gn)?
                } else {
                    galerkin_solve(&s.disc, law.as_ref(), &geo, z, &a0, lin, &gn)?
                };
                Ok((rel_error(space, &tc.mapped, z, &r.alpha), r.converged))
            };
            row("galerkin", String::new(), average(cases, |tc| solve(tc, false)));
            row("minres", String::new(), average(cases, |tc| solve(tc, true)));
            for mult in 1..=3 {
                let m = with_test_prefix(&full, mult * n);
                let on = OnlineRom::full_quadrature(&m, &s.disc, &s.family)?;
                let res = average(cases, |tc| {
                    let r = on.solve(&tc.mu)?;
                    Ok((rel_error(space, &tc.mapped, z, &r.solution.alpha), r.solution.converged))
                });
                row("amr", m.j().to_string(), res);
            }
            info!("rom-error: {basis} N = {n} done");
        }
    }
    Ok(t)
}

/// Shock position along `t = const` in a reference-configuration field: the
/// midpoint of the largest jump of component 0 on a fine sampling in `x`.
pub fn shock_locus(space: &DgSpace, u: &[f64], t: f64, samples: usize) -> f64 {
    let l = space.mesh.length;
    let xs: Vec<f64> = (0..=samples).map(|i| l * i as f64 / samples as f64).collect();
    let v: Vec<f64> = xs.iter().map(|&x| space.eval_point(u, [x, t])[0]).collect();
    let (i, _) = v.windows(2).enumerate().fold((0, -1.0), |b, (i, w)| {
        let d = (w[1] - w[0]).abs();
        if d > b.1 {
            (i, d)
        } else {
            b
        }
    });
    0.5 * (xs[i] + xs[i + 1])
}

/// Fraction of `elements` whose centroid lies within `half_width` of the
/// shock locus of `u` at the centroid's time.
pub fn shock_band_fraction(space: &DgSpace, u: &[f64], elements: &[usize], half_width: f64) -> f64 {
    if elements.is_empty() {
        return 0.0;
    }
    let mesh = &space.mesh;
    let mut cache: BTreeMap<u64, f64> = BTreeMap::new();
    let near = elements
        .iter()
        .filter(|&&k| {
            let c = mesh.geometry[k].to_physical([1.0 / 3.0, 1.0 / 3.0]);
            let xs = *cache.entry(c[1].to_bits()).or_insert_with(|| shock_locus(space, u, c[1], 400));
            (c[0] - xs).abs() <= half_width
        })
        .count();
    near as f64 / elements.len() as f64
}

fn mean_field(fields: &[Vec<f64>]) -> Vec<f64> {
    let mut m = vec![0.0; fields.first().map_or(0, |v| v.len())];
    for v in fields {
        crate::linalg::axpy(1.0 / fields.len() as f64, v, &mut m);
    }
    m
}

fn eqp_study(s: &Setup, c: &Container, tr: &Training) -> Result<Table> {
    let space = s.space();
    let ne = space.n_elements();
    let mean = mean_field(&tr.data.mapped);
    let band = SHOCK_BAND * space.mesh.length;
    let mut t = Table::new(
        "sampled elements and average relative L2 error of the hyper-reduced and high-fidelity-quadrature ROMs against N for each NNLS tolerance",
        &["tol [-]", "N", "J", "Q [count]", "Q_fraction [-]", "e_avg_eq [-]", "e_avg_hf [-]", "near_shock_fraction [-]", "unconverged [count]"],
    );
    let rom = &s.config.rom;
    let mut cases: Option<Vec<TestCase>> = None;
    for &n in &rom.n_values {
        let full = tr.build_full(n, rom.continuous, TestSize::Multiple(rom.test_multiple))?;
        if cases.is_none() {
            cases = Some(test_cases(s, c, &full)?);
        }
        let cases = cases.as_ref().expect("set above");
        let err = |m: &ReducedModel, hyper: bool| -> Result<(f64, usize)> {
            let on =
                if hyper { OnlineRom::hyper_reduced(m, &s.disc, &s.family)? } else { OnlineRom::full_quadrature(m, &s.disc, &s.family)? };
            Ok(average(cases, |tc| {
                let r = on.solve(&tc.mu)?;
                Ok((rel_error(space, &tc.mapped, &m.trial, &r.solution.alpha), r.solution.converged))
            }))
        };
        let (e_hf, bad_hf) = err(&full, false)?;
        for &tol in &rom.eqp_tols {
            let m = tr.with_eqp(&full, tol)?;
            let (e_eq, bad_eq) = err(&m, true)?;
            let q = m.eq_elements.len();
            let near = shock_band_fraction(space, &mean, &m.eq_elements, band);
            t.push(vec![
                format!("{tol:e}"),
                n.to_string(),
                m.j().to_string(),
                q.to_string(),
                f(q as f64 / ne as f64),
                f(e_eq),
                f(e_hf),
                f(near),
                (bad_eq + bad_hf).to_string(),
            ]);
        }
        info!("eqp: N = {n} done");
    }
    Ok(t)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median wall time of `repeats` calls after one warm-up call.
fn time_median<F: FnMut() -> Result<()>>(repeats: usize, mut f: F) -> Result<f64> {
    f()?;
    let mut ts = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let t0 = Instant::now();
        f()?;
        ts.push(t0.elapsed().as_secs_f64());
    }
    Ok(median(ts))
}

fn speedup(s: &Setup, c: &Container) -> Result<Table> {
    let test = read_fields(c, "test")?;
    let reps = s.config.rom.timing_repeats;
    let mut t = Table::new(
        "average online wall time of the hyper-reduced and high-fidelity-quadrature ROMs and of an explicit reference solver (machine-relative)",
        &["N", "J", "Q [count]", "t_hf_quadrature [s]", "t_hyper_reduced [s]", "speedup_quadrature [-]", "t_reference [s]", "speedup_reference [-]"],
    );
    let cells = (REFERENCE_DOFS / s.family.n_comp).max(2);
    let mut t_ref = 0.0;
    for mu in &test.mus {
        let law = s.family.instantiate(mu)?;
        let opts = MarchOptions { cells, ..MarchOptions::default() };
        t_ref += time_median(reps, || march(law.as_ref(), s.family.length, s.family.time, &opts).map(|_| ()))?;
    }
    t_ref /= test.mus.len() as f64;
    for n in trained_sizes(c) {
        let m = load_model(s, c, n)?;
        let hyper = OnlineRom::hyper_reduced(&m, &s.disc, &s.family)?;
        let full = OnlineRom::full_quadrature(&m, &s.disc, &s.family)?;
        let (mut th, mut tf) = (0.0, 0.0);
        for mu in &test.mus {
            th += time_median(reps, || hyper.solve(mu).map(|_| ()))?;
            tf += time_median(reps, || full.solve(mu).map(|_| ()))?;
        }
        let k = test.mus.len() as f64;
        let (th, tf) = (th / k, tf / k);
        t.push(vec![
            n.to_string(),
            m.j().to_string(),
            m.eq_elements.len().to_string(),
            f(tf),
            f(th),
            f(tf / th),
            f(t_ref),
            f(t_ref / th),
        ]);
    }
    Ok(t)
}

pub fn study_path(c: &Container, study: Study) -> PathBuf {
    c.root.join("studies").join(format!("{}.csv", study.name()))
}

/// Runs one study and writes its CSV into the container's `studies` folder.
pub fn run_study(s: &Setup, c: &Container, study: Study) -> Result<(PathBuf, Table)> {
    let table = in_stage(study.name(), (|| {
        if study == Study::SpaceOnlyBaseline {
            return crate::baseline::space_only_baseline(s, c);
        }
        let data = read_compressed(s, c)?;
        if study == Study::EigDecay {
            return Ok(eig_decay(&data));
        }
        if study == Study::Speedup {
            return speedup(s, c);
        }
        let tr = Training::new(s, &data)?;
        match study {
            Study::BfError => bf_error(s, c, &tr),
            Study::RomError => rom_error(s, c, &tr),
            Study::Eqp => eqp_study(s, c, &tr),
            _ => unreachable!("handled above"),
        }
    })())?;
    let path = study_path(c, study);
    std::fs::create_dir_all(path.parent().expect("studies folder"))?;
    std::fs::write(&path, table.to_csv()?)?;
    Ok((path, table))
}
