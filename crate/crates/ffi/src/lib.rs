//! C ABI over the `strobe` library: opaque handles for a high-fidelity problem
//! and for a trained reduced model, integer status codes and a thread-local
//! error message.

#![allow(clippy::too_many_arguments)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use strobe::config::ExperimentConfig;
use strobe::error::StrobeError;
use strobe::hf::solve_one;
use strobe::offline::{load_model, trained_sizes, Setup};
use strobe::rom::{OnlineRom, ReducedModel};

/// Status returned by every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StrobeStatus {
    Ok = 0,
    InvalidArgument = 1,
    Config = 2,
    NonConvergence = 3,
    Io = 4,
    Format = 5,
    Numerical = 6,
    NullPointer = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

/// Diagnostics of one online solve.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct StrobeReport {
    pub residual_norm: f64,
    pub iterations: usize,
    /// 1 when Gauss-Newton met its gradient tolerance.
    pub converged: i32,
    /// 1 when the regressed map was inadmissible and a training map was used.
    pub map_fallback: i32,
    pub wall_time: f64,
}

/// A high-fidelity problem built from an experiment config.
pub struct StrobeProblem {
    setup: Setup,
}

/// A trained reduced model with its hyper-reduced online evaluator.
pub struct StrobeModel {
    // declared first so it is dropped before the data it borrows
    rom: OnlineRom<'static>,
    model: Box<ReducedModel>,
    setup: Box<Setup>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &StrobeError) -> StrobeStatus {
    match e {
        StrobeError::InvalidArgument(_) | StrobeError::EmptyInput(_) | StrobeError::MismatchedSpaces(_) => {
            StrobeStatus::InvalidArgument
        }
        StrobeError::Config(_) => StrobeStatus::Config,
        StrobeError::NonConvergence { .. } => StrobeStatus::NonConvergence,
        StrobeError::Io(_) => StrobeStatus::Io,
        StrobeError::Format(_) => StrobeStatus::Format,
        StrobeError::Stage { source, .. } => status_of(source),
        _ => StrobeStatus::Numerical,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (StrobeStatus, String)>) -> StrobeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => StrobeStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside strobe".into());
            StrobeStatus::Panic
        }
    }
}

fn lib_err(e: StrobeError) -> (StrobeStatus, String) {
    (status_of(&e), e.to_string())
}

fn null_err(what: &str) -> (StrobeStatus, String) {
    (StrobeStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (StrobeStatus, String)> {
    if p.is_null() {
        return Err(null_err(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (StrobeStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], (StrobeStatus, String)> {
    if p.is_null() {
        return Err(null_err(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn copy_out(src: &[f64], dst: *mut f64, cap: usize, what: &str) -> Result<(), (StrobeStatus, String)> {
    if dst.is_null() {
        return Ok(());
    }
    if cap < src.len() {
        return Err((StrobeStatus::BufferTooSmall, format!("{what} needs {} entries, got {cap}", src.len())));
    }
    std::ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len());
    Ok(())
}

/// Message of the last failed call on this thread; empty when none. Valid
/// until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn strobe_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn strobe_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a problem from a preset name or a JSON config path.
///
/// # Safety
/// `config` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn strobe_problem_new(config: *const c_char, out: *mut *mut StrobeProblem) -> StrobeStatus {
    guard(|| {
        if out.is_null() {
            return Err(null_err("out"));
        }
        let spec = str_arg(config, "config")?;
        let cfg = ExperimentConfig::load(spec).map_err(lib_err)?;
        let setup = Setup::new(cfg).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(StrobeProblem { setup }));
        Ok(())
    })
}

/// # Safety
/// `p` must come from [`strobe_problem_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn strobe_problem_free(p: *mut StrobeProblem) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Number of degrees of freedom of the problem's solution vector.
///
/// # Safety
/// `p` must be a live problem handle or null.
#[no_mangle]
pub unsafe extern "C" fn strobe_problem_n_dofs(p: *const StrobeProblem) -> usize {
    p.as_ref().map_or(0, |p| p.setup.space().n_dofs())
}

/// High-fidelity solve at `mu`; the solution is copied to `w` (capacity
/// `w_len`, may be null) and its size written to `n_dofs` (may be null).
///
/// # Safety
/// Pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn strobe_problem_solve(
    p: *const StrobeProblem,
    mu: *const f64,
    n_mu: usize,
    w: *mut f64,
    w_len: usize,
    n_dofs: *mut usize,
) -> StrobeStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null_err("problem"))?;
        let mu = slice_arg(mu, n_mu, "mu")?;
        let s = &p.setup;
        s.family.check_mu(mu).map_err(lib_err)?;
        let sol = solve_one(&s.family, &s.disc, mu, &s.config.hf).map_err(lib_err)?;
        if !n_dofs.is_null() {
            *n_dofs = sol.w.len();
        }
        copy_out(&sol.w, w, w_len, "w")
    })
}

/// Opens the reduced model of size `n` (0 selects the largest) stored in a
/// trained container directory.
///
/// # Safety
/// `dir` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn strobe_model_open(dir: *const c_char, n: usize, out: *mut *mut StrobeModel) -> StrobeStatus {
    guard(|| {
        if out.is_null() {
            return Err(null_err("out"));
        }
        let dir = str_arg(dir, "dir")?;
        let (setup, c) = Setup::from_container(Path::new(dir)).map_err(lib_err)?;
        let n = match n {
            0 => *trained_sizes(&c)
                .last()
                .ok_or_else(|| (StrobeStatus::InvalidArgument, "container has no trained model".to_string()))?,
            n => n,
        };
        let model = Box::new(load_model(&setup, &c, n).map_err(lib_err)?);
        let setup = Box::new(setup);
        // SAFETY: the boxes are owned by the handle, never moved out of and
        // dropped after `rom`, so the references stay valid for its lifetime.
        let (m, s): (&'static ReducedModel, &'static Setup) = (&*(model.as_ref() as *const _), &*(setup.as_ref() as *const _));
        let rom = OnlineRom::hyper_reduced(m, &s.disc, &s.family).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(StrobeModel { rom, model, setup }));
        Ok(())
    })
}

/// # Safety
/// `m` must come from [`strobe_model_open`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn strobe_model_free(m: *mut StrobeModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Trial-space dimension `N`.
///
/// # Safety
/// `m` must be a live model handle or null.
#[no_mangle]
pub unsafe extern "C" fn strobe_model_n(m: *const StrobeModel) -> usize {
    m.as_ref().map_or(0, |m| m.model.n())
}

/// Map-space dimension `M`.
///
/// # Safety
/// `m` must be a live model handle or null.
#[no_mangle]
pub unsafe extern "C" fn strobe_model_map_dim(m: *const StrobeModel) -> usize {
    m.as_ref().map_or(0, |m| m.model.map_basis.dim())
}

/// Number of empirical quadrature elements.
///
/// # Safety
/// `m` must be a live model handle or null.
#[no_mangle]
pub unsafe extern "C" fn strobe_model_n_quadrature(m: *const StrobeModel) -> usize {
    m.as_ref().map_or(0, |m| m.rom.n_elements())
}

/// Online solve at `mu`. Writes the generalized coordinates to `alpha`
/// (capacity `alpha_len`), the map coefficients to `a` (capacity `a_len`) and
/// the diagnostics to `report`; any output pointer may be null.
///
/// # Safety
/// Pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn strobe_model_solve(
    m: *const StrobeModel,
    mu: *const f64,
    n_mu: usize,
    alpha: *mut f64,
    alpha_len: usize,
    a: *mut f64,
    a_len: usize,
    report: *mut StrobeReport,
) -> StrobeStatus {
    guard(|| {
        let m = m.as_ref().ok_or_else(|| null_err("model"))?;
        let mu = slice_arg(mu, n_mu, "mu")?;
        let r = m.rom.solve(mu).map_err(lib_err)?;
        copy_out(&r.solution.alpha, alpha, alpha_len, "alpha")?;
        copy_out(&r.map.a, a, a_len, "a")?;
        if let Some(rep) = report.as_mut() {
            *rep = StrobeReport {
                residual_norm: r.solution.residual_norm,
                iterations: r.solution.iterations,
                converged: r.solution.converged as i32,
                map_fallback: r.map.fallback as i32,
                wall_time: r.wall_time,
            };
        }
        Ok(())
    })
}

/// Reference-domain state `sum_n alpha_n zeta_n` written to `w` (capacity
/// `w_len`).
///
/// # Safety
/// `alpha` must hold `strobe_model_n(m)` values and `w` `w_len` values.
#[no_mangle]
pub unsafe extern "C" fn strobe_model_reconstruct(
    m: *const StrobeModel,
    alpha: *const f64,
    w: *mut f64,
    w_len: usize,
) -> StrobeStatus {
    guard(|| {
        let m = m.as_ref().ok_or_else(|| null_err("model"))?;
        let alpha = slice_arg(alpha, m.model.n(), "alpha")?;
        if w.is_null() {
            return Err(null_err("w"));
        }
        let mut out = vec![0.0; m.setup.space().n_dofs()];
        for (z, c) in m.model.trial.iter().zip(alpha) {
            out.iter_mut().zip(z).for_each(|(o, zi)| *o += c * zi);
        }
        copy_out(&out, w, w_len, "w")
    })
}
