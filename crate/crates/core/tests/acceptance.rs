//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Desk-scale experiments are cached under the cargo target directory; set
//! `STROBE_ACCEPTANCE_FRESH=1` to recompute them.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use strobe::config::{ExperimentConfig, MeshConfig, Sampling};
use strobe::dg::pod::{pod, pod_cardinality, Inner};
use strobe::dg::{assemble_norms, DgSpace};
use strobe::hf::{Discretization, MapGeometry};
use strobe::io::Container;
use strobe::maps::{Displacement, MapSpace};
use strobe::mesh::SpaceTimeMesh;
use strobe::models::{ConservationLaw, Family, LinearAdvection, ViscosityParams};
use strobe::offline::{read_compressed, run_compress, run_snapshots, run_train, Setup};
use strobe::rom::{build_eqp, eqp_system, verify_amr_bounds, verify_brr_residual_bound, Linearization, MappedCase};
use strobe::study::{run_study, study_path, Study, Table};

// criterion 1 and 2
const BF_ABS_TOL: f64 = 3e-2;
const BF_RATIO: f64 = 1.0 / 3.0;
const EIG_RATIO: f64 = 0.1;
const OFFLINE_BUDGET_S: f64 = 30.0 * 60.0;
const SW_MAX_MAP_DIM: usize = 8;
// criterion 3
const AMR_OVER_MINRES: f64 = 1.5;
const CONTINUOUS_OVER_DISCONTINUOUS: f64 = 1.5;
const CONTINUOUS_MAX_N: usize = 5;
// criterion 4
const MAX_QUADRATURE_FRACTION: f64 = 0.10;
const EQ_OVER_HF: f64 = 2.0;
const MIN_SPEEDUP: f64 = 5.0;
const MIN_NEAR_SHOCK: f64 = 0.5;
// criterion 5
const FD_RTOL: f64 = 1e-5;
const ORACLE_BUDGET_S: f64 = 60.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

type Check = Result<Outcome, String>;

fn cache_root() -> PathBuf {
    Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance")
}

fn fresh() -> bool {
    std::env::var("STROBE_ACCEPTANCE_FRESH").is_ok_and(|v| v != "0")
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Runs the requested offline stages into `dir`, reusing a previous run with
/// the same settings. Returns the setup, the container and the offline time.
fn experiment(config: ExperimentConfig, dir: &Path, train: bool) -> Result<(Setup, Container, f64), String> {
    let timing = dir.join("offline_seconds.txt");
    let done = if train { "summary" } else { "compression" };
    if !fresh() && dir.join("manifest.json").exists() {
        if let Ok(c) = Container::open(dir) {
            let same = c.manifest.settings == serde_json::to_value(&config).map_err(err)?;
            if same && c.has_document(done) {
                if let Some(t) = std::fs::read_to_string(&timing).ok().and_then(|t| t.trim().parse().ok()) {
                    let s = Setup::new(config).map_err(err)?;
                    return Ok((s, c, t));
                }
            }
        }
    }
    if dir.exists() {
        std::fs::remove_dir_all(dir).map_err(err)?;
    }
    let t0 = Instant::now();
    let s = Setup::new(config).map_err(err)?;
    let mut c = s.container(dir).map_err(err)?;
    run_snapshots(&s, &mut c).map_err(err)?;
    run_compress(&s, &mut c).map_err(err)?;
    if train {
        run_train(&s, &mut c).map_err(err)?;
    }
    let elapsed = t0.elapsed().as_secs_f64();
    std::fs::write(&timing, format!("{elapsed}\n")).map_err(err)?;
    Ok((s, c, elapsed))
}

/// A study table, recomputed unless cached next to a reused experiment.
fn study(s: &Setup, c: &Container, st: Study, reuse: bool) -> Result<Table, String> {
    let path = study_path(c, st);
    if reuse && !fresh() {
        if let Ok(text) = std::fs::read_to_string(&path) {
            return Table::from_csv(&text).map_err(err);
        }
    }
    run_study(s, c, st).map(|(_, t)| t).map_err(err)
}

fn desk(name: &str) -> Result<ExperimentConfig, String> {
    let mut c = ExperimentConfig::preset(name).map_err(err)?;
    c.output = cache_root().join(name);
    Ok(c)
}

fn find_row(t: &Table, key: &[(&str, String)]) -> Option<usize> {
    (0..t.rows.len()).find(|&r| key.iter().all(|(name, v)| t.column(name).is_ok_and(|c| t.rows[r][c] == *v)))
}

fn value_at(t: &Table, key: &str, n: usize, col: &str) -> Result<f64, String> {
    let r = (0..t.rows.len())
        .find(|&r| t.value(r, key).ok() == Some(n as f64))
        .ok_or_else(|| format!("no row with {key} = {n}"))?;
    t.value(r, col).map_err(err)
}

/// Registration efficacy from a bf-error and an eig-decay table. The test
/// map is the one registered to the test snapshot; the error with the
/// regressed map is reported alongside.
fn registration_checks(bf: &Table, eig: &Table, n: usize) -> Result<(bool, String), String> {
    let unreg = value_at(bf, "N", n, "unregistered")?;
    let regressed = value_at(bf, "N", n, "registered")?;
    let reg = value_at(bf, "N", n, "registered_fitted_map")?;
    let eu = value_at(eig, "n", 5, "unregistered")?;
    let er = value_at(eig, "n", 5, "registered")?;
    let pass = reg <= BF_ABS_TOL && reg <= BF_RATIO * unreg && er <= EIG_RATIO * eu;
    Ok((
        pass,
        format!(
            "E_bf(N={n}) registered {reg:.3e} (regressed map {regressed:.3e}) vs unregistered {unreg:.3e} [need <= {BF_ABS_TOL:.0e} and <= {:.3e}]; lambda5/lambda1 registered {er:.3e} vs unregistered {eu:.3e} [need <= {:.3e}]",
            BF_RATIO * unreg,
            EIG_RATIO * eu
        ),
    ))
}

fn criterion_1(s: &Setup, c: &Container, offline: f64, reuse: bool) -> Check {
    let bf = study(s, c, Study::BfError, reuse)?;
    let eig = study(s, c, Study::EigDecay, reuse)?;
    let (pass, detail) = registration_checks(&bf, &eig, 4)?;
    let fast = offline <= OFFLINE_BUDGET_S;
    Ok(outcome(pass && fast, format!("{detail}; offline {offline:.0} s [need <= {OFFLINE_BUDGET_S:.0} s]")))
}

fn criterion_2() -> Check {
    let cfg = desk("sw-desk")?;
    let dir = cfg.output.clone();
    let reuse = !fresh() && dir.join("manifest.json").exists();
    let (s, c, _) = experiment(cfg, &dir, false)?;
    let m = read_compressed(&s, &c).map_err(err)?.map_basis.dim();
    let bf = study(&s, &c, Study::BfError, reuse)?;
    let eig = study(&s, &c, Study::EigDecay, reuse)?;
    let (pass, detail) = registration_checks(&bf, &eig, 5)?;
    Ok(outcome(pass && m <= SW_MAX_MAP_DIM, format!("{detail}; M = {m} [need <= {SW_MAX_MAP_DIM}]")))
}

fn criterion_3(s: &Setup, c: &Container, reuse: bool) -> Check {
    let t = study(s, c, Study::RomError, reuse)?;
    let mut pass = true;
    let mut parts = Vec::new();
    let e = |basis: &str, n: usize, method: &str, j: Option<usize>| -> Result<(f64, f64), String> {
        let js = j.map(|j| j.to_string()).unwrap_or_default();
        let key = [("basis", basis.to_string()), ("N", n.to_string()), ("method", method.to_string()), ("J", js.clone())];
        let r = find_row(&t, &key).ok_or_else(|| format!("missing {basis} N={n} {method} J={js}"))?;
        Ok((t.value(r, "e_avg").map_err(err)?, t.value(r, "unconverged").map_err(err)?))
    };
    for &n in &s.config.rom.n_values {
        let (mr, _) = e("discontinuous", n, "minres", None)?;
        let (ga, ga_fail) = e("discontinuous", n, "galerkin", None)?;
        let (amr, _) = e("discontinuous", n, "amr", Some(2 * n))?;
        let ok_ga = mr <= ga || ga_fail > 0.0 || ga.is_nan();
        let ok_amr = amr <= AMR_OVER_MINRES * mr;
        let mut line = format!("N={n}: minres {mr:.3e} galerkin {ga:.3e} (unconverged {ga_fail}) amr(2N) {amr:.3e}");
        pass &= ok_ga && ok_amr;
        if n <= CONTINUOUS_MAX_N {
            let (camr, _) = e("continuous", n, "amr", Some(2 * n))?;
            let ok_c = camr <= CONTINUOUS_OVER_DISCONTINUOUS * amr;
            pass &= ok_c;
            line.push_str(&format!(" continuous amr(2N) {camr:.3e}"));
        }
        parts.push(line);
    }
    Ok(outcome(
        pass,
        format!(
            "{} [need minres <= galerkin or galerkin unconverged, amr <= {AMR_OVER_MINRES} minres, continuous <= {CONTINUOUS_OVER_DISCONTINUOUS} discontinuous for N <= {CONTINUOUS_MAX_N}]",
            parts.join("; ")
        ),
    ))
}

fn criterion_4(s: &Setup, c: &Container, reuse: bool) -> Check {
    let eqp = study(s, c, Study::Eqp, reuse)?;
    let sp = study(s, c, Study::Speedup, reuse)?;
    let tight = s.config.rom.eqp_tols.iter().copied().fold(f64::INFINITY, f64::min);
    let mut pass = true;
    let mut parts = Vec::new();
    for r in 0..eqp.rows.len() {
        let tol = eqp.value(r, "tol").map_err(err)?;
        if (tol - tight).abs() > 1e-3 * tight {
            continue;
        }
        let n = eqp.value(r, "N").map_err(err)? as usize;
        let qf = eqp.value(r, "Q_fraction").map_err(err)?;
        let (e_eq, e_hf) = (eqp.value(r, "e_avg_eq").map_err(err)?, eqp.value(r, "e_avg_hf").map_err(err)?);
        let near = eqp.value(r, "near_shock_fraction").map_err(err)?;
        let speedup = value_at(&sp, "N", n, "speedup_quadrature")?;
        pass &= qf <= MAX_QUADRATURE_FRACTION && e_eq <= EQ_OVER_HF * e_hf && speedup >= MIN_SPEEDUP && near >= MIN_NEAR_SHOCK;
        parts.push(format!("N={n}: Q/N_e {qf:.3} e_eq {e_eq:.3e} e_hf {e_hf:.3e} speedup {speedup:.1} near-shock {near:.2}"));
    }
    if parts.is_empty() {
        return Err("no rows at the tight EQP tolerance".into());
    }
    Ok(outcome(
        pass,
        format!(
            "{} [need Q/N_e <= {MAX_QUADRATURE_FRACTION}, e_eq <= {EQ_OVER_HF} e_hf, speedup >= {MIN_SPEEDUP}, near-shock >= {MIN_NEAR_SHOCK}]",
            parts.join("; ")
        ),
    ))
}

fn tiny_disc(nx: usize, nt: usize, p: usize, nc: usize) -> Result<Discretization, String> {
    sized_disc(1.0, 0.8, nx, nt, p, nc)
}

fn sized_disc(l: f64, t: f64, nx: usize, nt: usize, p: usize, nc: usize) -> Result<Discretization, String> {
    let mesh = Arc::new(SpaceTimeMesh::generate(l, t, nx, nt, p).map_err(err)?);
    Ok(Discretization::new(DgSpace::new(mesh, nc).map_err(err)?))
}

fn random_map(space: MapSpace, rng: &mut ChaCha8Rng, scale: f64) -> Result<Displacement, String> {
    Displacement::new(space, (0..space.dim()).map(|_| scale * rng.random_range(-1.0..1.0)).collect()).map_err(err)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Worst relative mismatch between the Jacobian and central differences.
fn fd_mismatch(d: &Discretization, law: &dyn ConservationLaw, geo: &MapGeometry, w: &[f64], rng: &mut ChaCha8Rng) -> Result<f64, String> {
    let eps = d.viscosity(law, w);
    let (_, jac) = d.jacobian_with(law, geo, w, &eps).map_err(err)?;
    let mut worst: f64 = 0.0;
    for _ in 0..3 {
        let dir: Vec<f64> = (0..w.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let h = 1e-6;
        let shift = |sgn: f64| -> Vec<f64> { w.iter().zip(&dir).map(|(a, b)| a + sgn * h * b).collect() };
        let rp = d.residual_with(law, geo, &shift(1.0), &eps).map_err(err)?;
        let rm = d.residual_with(law, geo, &shift(-1.0), &eps).map_err(err)?;
        let jd = jac.matvec(&dir);
        let diff: Vec<f64> = rp.iter().zip(&rm).zip(&jd).map(|((a, b), j)| (a - b) / (2.0 * h) - j).collect();
        worst = worst.max(norm(&diff) / norm(&jd));
    }
    Ok(worst)
}

fn criterion_5() -> Check {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut fails = Vec::new();
    let mut notes = Vec::new();

    // residual / Jacobian finite differences
    let d = tiny_disc(4, 3, 2, 1)?;
    let law = Family::burgers().instantiate(&[1.1, 0.3]).map_err(err)?;
    let w: Vec<f64> = (0..d.space.n_dofs()).map(|_| 1.0 + 0.5 * rng.random_range(-1.0..1.0)).collect();
    let geo = MapGeometry::from_displacement(&d.space, &random_map(MapSpace::new(2, 1.0, 0.8).map_err(err)?, &mut rng, 0.05)?)
        .map_err(err)?;
    let fd_b = fd_mismatch(&d, law.as_ref(), &geo, &w, &mut rng)?;
    let sw = Family::shallow_water(200).map_err(err)?;
    let d2 = sized_disc(sw.length, sw.time, 5, 3, 2, 2)?;
    let law2 = sw.instantiate(&[5.0, 0.15]).map_err(err)?;
    let w2 = d2.space.interpolate(|x| vec![2.0 + 0.1 * (0.3 * x[0] + x[1]).sin(), 4.4 + 0.2 * (0.2 * x[0]).cos()]);
    let fd_s = fd_mismatch(&d2, law2.as_ref(), &MapGeometry::identity(&d2.space), &w2, &mut rng)?;
    if fd_b > FD_RTOL || fd_s > FD_RTOL {
        fails.push("jacobian");
    }
    notes.push(format!("FD {:.1e}/{:.1e}", fd_b, fd_s));

    // mapped divergence identity
    let d3 = tiny_disc(3, 2, 2, 1)?;
    let adv = LinearAdvection {
        speed: 0.7,
        profile: Arc::new(|z| 1.0 + 0.8 * z),
        viscosity: ViscosityParams { eps0: 0.0, eps_base: 0.0, ..Default::default() },
    };
    let phi = random_map(MapSpace::new(1, 1.0, 0.8).map_err(err)?, &mut rng, 0.04)?;
    let geo3 = MapGeometry::from_displacement(&d3.space, &phi).map_err(err)?;
    let u = d3.space.interpolate(|x| {
        let y = phi.map(x).0;
        vec![1.0 + 0.8 * (y[0] - 0.7 * y[1])]
    });
    let div = norm(&d3.residual(&adv, &geo3, &u).map_err(err)?);
    if div > 1e-11 {
        fails.push("mapped divergence");
    }
    notes.push(format!("mapped residual {div:.1e}"));

    // POD orthonormality and energy criterion
    let s = &d3.space;
    let snaps: Vec<Vec<f64>> = (0..8).map(|_| (0..s.n_dofs()).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let tol = 1e-2;
    let p = pod(&snaps, tol, Inner::L2(s)).map_err(err)?;
    let n = p.modes.len();
    let mut ortho: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            ortho = ortho.max((s.l2_inner(&p.modes[i], &p.modes[j]) - if i == j { 1.0 } else { 0.0 }).abs());
        }
    }
    let total: f64 = p.eigenvalues.iter().sum();
    let energy_ok = p.eigenvalues[..n].iter().sum::<f64>() >= (1.0 - tol) * total * (1.0 - 1e-12)
        && (n == 1 || p.eigenvalues[..n - 1].iter().sum::<f64>() < (1.0 - tol) * total)
        && n == pod_cardinality(&p.eigenvalues, tol);
    if ortho > 1e-10 || !energy_ok {
        fails.push("pod");
    }
    notes.push(format!("POD orthonormality {ortho:.1e}"));

    // NNLS at unit weights
    let dd = tiny_disc(3, 3, 1, 1)?;
    let nd = dd.space.n_dofs();
    let z: Vec<Vec<f64>> = (0..2).map(|_| (0..nd).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let y: Vec<Vec<f64>> = (0..4).map(|_| (0..nd).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let bur = Family::burgers();
    let cases: Vec<MappedCase> = [[1.05, 0.26], [1.25, 0.33]]
        .iter()
        .map(|mu| Ok(MappedCase { law: bur.instantiate(mu).map_err(err)?, geo: MapGeometry::identity(&dd.space), state: vec![] }))
        .collect::<Result<_, String>>()?;
    let alphas = vec![vec![0.3, 0.2], vec![-0.1, 0.5]];
    let (g, b) = eqp_system(&dd, &cases, &alphas, &z, &y, Linearization::Exact).map_err(err)?;
    let consistency = (&g * DVector::from_element(g.ncols(), 1.0) - &b).norm();
    let eq = build_eqp(&g, &b, 1e-12).map_err(err)?;
    if consistency > 1e-12 || eq.residual > 1e-6 {
        fails.push("nnls");
    }
    notes.push(format!("EQP at unit weights {consistency:.1e}"));

    // Riesz round trip
    let norms = assemble_norms(&d3.space).map_err(err)?;
    let v: Vec<f64> = (0..d3.space.n_dofs()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let back = norms.riesz(&norms.y.matvec(&v)).map_err(err)?;
    let riesz = v.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    if riesz > 1e-9 {
        fails.push("riesz");
    }
    notes.push(format!("Riesz {riesz:.1e}"));

    // AMR and BRR bounds on random instances
    let mut amr_ok = true;
    let mut brr_ok = true;
    for k in 0..5 {
        let n = 20 + 5 * k;
        let spd = |rng: &mut ChaCha8Rng| {
            let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            &m * m.transpose() + DMatrix::identity(n, n) * n as f64 * 0.5
        };
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0)) + DMatrix::identity(n, n) * (n as f64).sqrt() * 1.5;
        let f = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let (x, yn) = (spd(&mut rng), spd(&mut rng));
        let zz = DMatrix::from_fn(n, 3, |_, _| rng.random_range(-1.0..1.0));
        let yj = DMatrix::from_fn(n, 7, |_, _| rng.random_range(-1.0..1.0));
        amr_ok &= verify_amr_bounds(&a, &f, &x, &yn, &zz, &yj).map_err(err)?.holds(1e-10);
        let blocks: Vec<(DMatrix<f64>, DVector<f64>)> = (0..8)
            .map(|_| (DMatrix::from_fn(6, 3, |_, _| rng.random_range(-1.0..1.0)), DVector::from_fn(6, |_, _| rng.random_range(-1.0..1.0))))
            .collect();
        let rho: Vec<f64> = (0..8).map(|_| 1.0 + 0.3 * rng.random_range(-1.0..1.0)).collect();
        brr_ok &= verify_brr_residual_bound(&blocks, &rho).map_err(err)?.holds();
    }
    if !amr_ok {
        fails.push("amr bounds");
    }
    if !brr_ok {
        fails.push("brr bound");
    }
    let elapsed = t0.elapsed().as_secs_f64();
    if elapsed > ORACLE_BUDGET_S {
        fails.push("time budget");
    }
    notes.push(format!("{elapsed:.1} s"));
    let detail = if fails.is_empty() { notes.join(", ") } else { format!("failed: {}; {}", fails.join(", "), notes.join(", ")) };
    Ok(outcome(fails.is_empty(), detail))
}

fn tiny_config(out: PathBuf) -> Result<ExperimentConfig, String> {
    let mut c = ExperimentConfig::preset("burgers-desk").map_err(err)?;
    c.name = "determinism".into();
    c.mesh = MeshConfig { nx: 10, nt: 6, p: 2 };
    c.train = Sampling::Uniform { n: 8, seed: 1 };
    c.test = Sampling::Uniform { n: 3, seed: 2 };
    c.registration.mbar = 4;
    c.rom.n_values = vec![2];
    c.rom.folds = 4;
    c.rom.timing_repeats = 1;
    c.output = out;
    c.validate().map_err(err)?;
    Ok(c)
}

const DETERMINISTIC_STUDIES: [Study; 5] = [Study::EigDecay, Study::BfError, Study::RomError, Study::Eqp, Study::SpaceOnlyBaseline];

fn files_under(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        if let Ok(rd) = std::fs::read_dir(&d) {
            for e in rd.flatten() {
                let p = e.path();
                if p.is_dir() {
                    stack.push(p);
                } else {
                    out.push(p);
                }
            }
        }
    }
    out.sort();
    out
}

fn criterion_6() -> Check {
    let root = cache_root().join("determinism");
    if root.exists() {
        std::fs::remove_dir_all(&root).map_err(err)?;
    }
    let mut hashes = Vec::new();
    let mut csvs: Vec<Vec<Vec<u8>>> = Vec::new();
    let mut arrays: Vec<Vec<(String, Vec<u8>)>> = Vec::new();
    for run in ["a", "b"] {
        let dir = root.join(run);
        let cfg = tiny_config(dir.clone())?;
        let s = Setup::new(cfg).map_err(err)?;
        let mut c = s.container(&dir).map_err(err)?;
        run_snapshots(&s, &mut c).map_err(err)?;
        run_compress(&s, &mut c).map_err(err)?;
        run_train(&s, &mut c).map_err(err)?;
        let mut bytes = Vec::new();
        for st in DETERMINISTIC_STUDIES {
            let (path, _) = run_study(&s, &c, st).map_err(err)?;
            bytes.push(std::fs::read(path).map_err(err)?);
        }
        csvs.push(bytes);
        let mut m = c.manifest.without_timestamps();
        m.settings = serde_json::Value::Null;
        hashes.push(serde_json::to_string(&m).map_err(err)?);
        let data = files_under(&dir.join("arrays"))
            .into_iter()
            .chain(files_under(&dir.join("docs")))
            .map(|p| Ok((p.strip_prefix(&dir).map_err(err)?.display().to_string(), std::fs::read(&p).map_err(err)?)))
            .collect::<Result<_, String>>()?;
        arrays.push(data);
    }
    let same_csv = csvs[0] == csvs[1];
    let same_manifest = hashes[0] == hashes[1];
    let same_arrays = arrays[0] == arrays[1];

    // round trip: copy every array through the reader and writer
    let src = Container::open(root.join("a")).map_err(err)?;
    let copy_dir = root.join("copy");
    let mut copy = Container::create(&copy_dir, src.manifest.clone()).map_err(err)?;
    copy.manifest.arrays.clear();
    let names: Vec<String> = src.manifest.arrays.keys().cloned().collect();
    let mut bit_exact = true;
    for name in &names {
        let a = src.read_array(name).map_err(err)?;
        copy.write_array(name, &a).map_err(err)?;
        let b = copy.read_array(name).map_err(err)?;
        let file = format!("arrays/{name}.bin");
        bit_exact &= a == b
            && std::fs::read(root.join("a").join(&file)).map_err(err)? == std::fs::read(copy_dir.join(&file)).map_err(err)?;
    }
    let pass = same_csv && same_manifest && same_arrays && bit_exact;
    Ok(outcome(
        pass,
        format!(
            "{} study CSVs identical: {same_csv}; manifests (no timestamps) identical: {same_manifest}; arrays and documents identical: {same_arrays}; {} arrays round-trip bit-exact: {bit_exact}",
            DETERMINISTIC_STUDIES.len(),
            names.len()
        ),
    ))
}

fn report(id: usize, name: &str, r: Check) -> bool {
    match r {
        Ok(o) => {
            println!("{} [{id}] {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
            o.pass
        }
        Err(e) => {
            println!("FAIL [{id}] {name}: error: {e}");
            false
        }
    }
}

fn main() -> ExitCode {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).is_test(true).try_init();
    let args: Vec<String> = std::env::args().collect();
    // `cargo test -- --list` and filters from other targets
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    let mut all = true;
    all &= report(5, "oracle equivalences", criterion_5());
    all &= report(6, "determinism and persistence", criterion_6());
    let burgers = desk("burgers-desk").and_then(|cfg| {
        let dir = cfg.output.clone();
        let reuse = !fresh() && dir.join("manifest.json").exists();
        experiment(cfg, &dir, true).map(|e| (e, reuse))
    });
    match burgers {
        Ok(((s, c, offline), reuse)) => {
            all &= report(1, "registration efficacy (Burgers)", criterion_1(&s, &c, offline, reuse));
            all &= report(3, "ROM error ordering (Burgers)", criterion_3(&s, &c, reuse));
            all &= report(4, "hyper-reduction (Burgers)", criterion_4(&s, &c, reuse));
        }
        Err(e) => {
            for (id, name) in [(1, "registration efficacy (Burgers)"), (3, "ROM error ordering (Burgers)"), (4, "hyper-reduction (Burgers)")] {
                all &= report(id, name, Err(e.clone()));
            }
        }
    }
    all &= report(2, "registration efficacy (shallow water)", criterion_2());
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
