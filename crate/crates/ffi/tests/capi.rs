use std::ffi::{CStr, CString};
use std::path::Path;
use std::ptr;

use strobe::config::{ExperimentConfig, MeshConfig, Sampling};
use strobe::offline::{load_model, run_offline, Setup};
use strobe::rom::OnlineRom;
use strobe_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(strobe_last_error()) }.to_string_lossy().into_owned()
}

fn tiny_config(out: &Path) -> ExperimentConfig {
    let mut c = ExperimentConfig::preset("burgers-desk").unwrap();
    c.name = "ffi".into();
    c.mesh = MeshConfig { nx: 8, nt: 5, p: 1 };
    c.train = Sampling::Uniform { n: 8, seed: 1 };
    c.test = Sampling::Uniform { n: 2, seed: 2 };
    c.registration.mbar = 3;
    c.rom.n_values = vec![2];
    c.rom.folds = 4;
    c.rom.timing_repeats = 1;
    c.output = out.to_path_buf();
    c
}

fn cstr(p: &Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(strobe_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn null_arguments_are_reported() {
    let mut p: *mut StrobeProblem = ptr::null_mut();
    assert_eq!(unsafe { strobe_problem_new(ptr::null(), &mut p) }, StrobeStatus::NullPointer);
    assert!(last_error().contains("config"));
    let name = CString::new("burgers-desk").unwrap();
    assert_eq!(unsafe { strobe_problem_new(name.as_ptr(), ptr::null_mut()) }, StrobeStatus::NullPointer);
    let mu = [1.1, 0.3];
    let st = unsafe { strobe_model_solve(ptr::null(), mu.as_ptr(), 2, ptr::null_mut(), 0, ptr::null_mut(), 0, ptr::null_mut()) };
    assert_eq!(st, StrobeStatus::NullPointer);
    assert_eq!(unsafe { strobe_model_n(ptr::null()) }, 0);
    unsafe {
        strobe_problem_free(ptr::null_mut());
        strobe_model_free(ptr::null_mut());
    }
}

#[test]
fn unknown_preset_is_a_config_error() {
    let name = CString::new("no-such-preset").unwrap();
    let mut p: *mut StrobeProblem = ptr::null_mut();
    assert_eq!(unsafe { strobe_problem_new(name.as_ptr(), &mut p) }, StrobeStatus::Config);
    assert!(p.is_null());
    assert!(last_error().contains("no-such-preset"));
}

#[test]
fn missing_container_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = cstr(&dir.path().join("absent"));
    let mut m: *mut StrobeModel = ptr::null_mut();
    assert_eq!(unsafe { strobe_model_open(path.as_ptr(), 0, &mut m) }, StrobeStatus::Io);
    assert!(m.is_null());
}

#[test]
fn problem_solve_fills_the_buffer() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("tiny.json");
    std::fs::write(&cfg_path, serde_json::to_string(&tiny_config(dir.path())).unwrap()).unwrap();
    let spec = cstr(&cfg_path);
    let mut p: *mut StrobeProblem = ptr::null_mut();
    assert_eq!(unsafe { strobe_problem_new(spec.as_ptr(), &mut p) }, StrobeStatus::Ok);
    let n = unsafe { strobe_problem_n_dofs(p) };
    assert_eq!(n, 2 * 8 * 5 * 3);
    let mu = [1.1, 0.3];
    let mut small = vec![0.0; 3];
    let st = unsafe { strobe_problem_solve(p, mu.as_ptr(), 2, small.as_mut_ptr(), small.len(), ptr::null_mut()) };
    assert_eq!(st, StrobeStatus::BufferTooSmall);
    let mut w = vec![0.0; n];
    let mut got = 0usize;
    assert_eq!(unsafe { strobe_problem_solve(p, mu.as_ptr(), 2, w.as_mut_ptr(), n, &mut got) }, StrobeStatus::Ok);
    assert_eq!(got, n);
    assert!(w.iter().all(|v| v.is_finite()) && w.iter().any(|v| *v != 0.0));
    let short_mu = [1.1];
    assert_eq!(unsafe { strobe_problem_solve(p, short_mu.as_ptr(), 1, ptr::null_mut(), 0, ptr::null_mut()) }, StrobeStatus::InvalidArgument);
    unsafe { strobe_problem_free(p) };
}

#[test]
fn model_solve_matches_the_library() {
    let dir = tempfile::tempdir().unwrap();
    run_offline(tiny_config(dir.path())).unwrap();
    let path = cstr(dir.path());
    let mut m: *mut StrobeModel = ptr::null_mut();
    assert_eq!(unsafe { strobe_model_open(path.as_ptr(), 0, &mut m) }, StrobeStatus::Ok);
    let (n, dim) = unsafe { (strobe_model_n(m), strobe_model_map_dim(m)) };
    assert_eq!(n, 2);
    assert!(dim >= 1 && unsafe { strobe_model_n_quadrature(m) } >= 1);

    let mu = [1.12, 0.31];
    let mut alpha = vec![0.0; n];
    let mut a = vec![0.0; dim];
    let mut rep = StrobeReport::default();
    let st = unsafe { strobe_model_solve(m, mu.as_ptr(), 2, alpha.as_mut_ptr(), n, a.as_mut_ptr(), dim, &mut rep) };
    assert_eq!(st, StrobeStatus::Ok, "{}", last_error());
    assert!(rep.iterations >= 1 && rep.residual_norm.is_finite());

    let (s, c) = Setup::from_container(dir.path()).unwrap();
    let model = load_model(&s, &c, 2).unwrap();
    let r = OnlineRom::hyper_reduced(&model, &s.disc, &s.family).unwrap().solve(&mu).unwrap();
    assert_eq!(r.solution.alpha, alpha);
    assert_eq!(r.map.a, a);

    let nd = s.space().n_dofs();
    let mut w = vec![0.0; nd];
    assert_eq!(unsafe { strobe_model_reconstruct(m, alpha.as_ptr(), w.as_mut_ptr(), nd) }, StrobeStatus::Ok);
    let expect: Vec<f64> = (0..nd).map(|i| model.trial.iter().zip(&alpha).map(|(z, c)| c * z[i]).sum()).collect();
    assert!(w.iter().zip(&expect).all(|(x, y)| (x - y).abs() <= 1e-12 * (1.0 + y.abs())));

    let mut short = vec![0.0; 1];
    let st = unsafe { strobe_model_solve(m, mu.as_ptr(), 2, short.as_mut_ptr(), 1, ptr::null_mut(), 0, ptr::null_mut()) };
    assert_eq!(st, StrobeStatus::BufferTooSmall);
    let missing = unsafe { strobe_model_open(path.as_ptr(), 7, &mut ptr::null_mut()) };
    assert_ne!(missing, StrobeStatus::Ok);
    unsafe { strobe_model_free(m) };
}

#[test]
fn header_declares_every_export() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let header = std::fs::read_to_string(root.join("include/strobe.h")).unwrap();
    let src = std::fs::read_to_string(root.join("src/lib.rs")).unwrap();
    let exports: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .filter_map(|rest| rest.split('(').next())
        .collect();
    assert!(exports.len() >= 10);
    for name in exports {
        assert!(header.contains(&format!("{name}(")), "{name} missing from the header");
    }
    for ty in ["StrobeStatus", "StrobeReport", "StrobeModel", "StrobeProblem"] {
        assert!(header.contains(ty));
    }
}

#[test]
fn header_compiles_as_c() {
    let Ok(cc) = which_cc() else { return };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(&src, "#include \"strobe.h\"\nint main(void) { return strobe_version() == 0; }\n").unwrap();
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let out = std::process::Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(&include)
        .arg(&src)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn which_cc() -> Result<&'static str, ()> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| std::process::Command::new(c).arg("--version").output().is_ok_and(|o| o.status.success()))
        .ok_or(())
}
