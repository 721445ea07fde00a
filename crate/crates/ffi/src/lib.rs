//! C ABI for the `ddetc` library.
//!
//! Every function returns a [`DdetcStatus`]; on failure the message is
//! available from [`ddetc_last_error`] on the same thread. Objects are opaque
//! handles created by `*_new`/`*_from_*` functions and released by the
//! matching `*_free`. Matrices cross the boundary row-major.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use ddetc::config::ScenarioConfig;
use ddetc::experiment::{run_scenario, simulate, RunSummary};
use ddetc::hybrid::{ControlMode, EngineConfig, RunStatus, Trajectory};
use ddetc::linalg::Mat;
use ddetc::plant::LtvPlant;
use ddetc::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DdetcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Numerical = 4,
    SolverBreakdown = 5,
    Io = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DdetcMode {
    EventTriggered = 0,
    Fixed = 1,
    TimeTriggered = 2,
}

/// Engine settings for [`ddetc_simulate`]; start from [`ddetc_engine_params_default`].
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct DdetcEngineParams {
    pub window: usize,
    pub horizon: u64,
    pub seed: u64,
    pub mode: DdetcMode,
    /// Re-design period for `TimeTriggered`.
    pub period: u64,
    pub c_sigma: f64,
    pub eps_f: f64,
    pub divergence_threshold: f64,
}

/// Opaque plant handle.
pub struct DdetcPlant(LtvPlant);

/// Opaque scenario (parsed config) handle.
pub struct DdetcScenario(ScenarioConfig);

/// Opaque handle to a finished run.
pub struct DdetcRun {
    traj: Trajectory,
    summary: RunSummary,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> DdetcStatus {
    match e {
        Error::InvalidInput(_) => DdetcStatus::InvalidArgument,
        Error::Config(_) => DdetcStatus::Config,
        Error::NotPositiveDefinite | Error::Internal(_) => DdetcStatus::Numerical,
        Error::SolverBreakdown(_) => DdetcStatus::SolverBreakdown,
        Error::Io(_) => DdetcStatus::Io,
    }
}

struct Fail(DdetcStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(DdetcStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(DdetcStatus::InvalidArgument, msg.into())
}

/// Runs `f`, mapping errors and panics to a status and the last-error slot.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> DdetcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            DdetcStatus::Ok
        }
        Ok(Err(Fail(s, msg))) => {
            set_error(msg);
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            DdetcStatus::Panic
        }
    }
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn string<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output handle"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write<T>(out: *mut T, v: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    *out = v;
    Ok(())
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call into the library on this thread.
#[no_mangle]
pub extern "C" fn ddetc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ddetc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

// ---------------------------------------------------------------- plants

/// Constant plant `x+ = A x + B u` with row-major `a` (`nx*nx`) and `b` (`nx*nu`).
///
/// # Safety
/// `a` and `b` must point to the stated number of doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ddetc_plant_constant(nx: usize, nu: usize, a: *const f64, b: *const f64, out: *mut *mut DdetcPlant) -> DdetcStatus {
    guard(|| {
        if nx == 0 || nu == 0 {
            return Err(invalid("nx and nu must be positive"));
        }
        let a = Mat::from_vec(nx, nx, slice(a, nx * nx, "a")?.to_vec())?;
        let b = Mat::from_vec(nx, nu, slice(b, nx * nu, "b")?.to_vec())?;
        put(out, DdetcPlant(LtvPlant::constant(a, b)?))
    })
}

/// Benchmark plant whose input matrix flips sign every `period` steps, scaled by `ell`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ddetc_plant_switching(period: u64, ell: f64, out: *mut *mut DdetcPlant) -> DdetcStatus {
    guard(|| put(out, DdetcPlant(LtvPlant::switching(period, ell)?)))
}

/// Benchmark plant with a sinusoidal perturbation of amplitude `delta_a`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ddetc_plant_sinusoidal(period: f64, delta_a: f64, out: *mut *mut DdetcPlant) -> DdetcStatus {
    guard(|| put(out, DdetcPlant(LtvPlant::sinusoidal(period, delta_a)?)))
}

/// Benchmark plant whose perturbation vanishes at `t_delta`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ddetc_plant_vanishing(period: f64, t_delta: f64, out: *mut *mut DdetcPlant) -> DdetcStatus {
    guard(|| put(out, DdetcPlant(LtvPlant::vanishing(period, t_delta)?)))
}

/// Piecewise plant read from a knot file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ddetc_plant_from_file(path: *const c_char, out: *mut *mut DdetcPlant) -> DdetcStatus {
    guard(|| {
        let p = string(path, "path")?;
        put(out, DdetcPlant(LtvPlant::from_piecewise_file(Path::new(p))?))
    })
}

/// # Safety
/// `plant` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ddetc_plant_free(plant: *mut DdetcPlant) {
    if !plant.is_null() {
        drop(Box::from_raw(plant));
    }
}

/// # Safety
/// `plant` must be a live handle; `nx` and `nu` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ddetc_plant_dims(plant: *const DdetcPlant, nx: *mut usize, nu: *mut usize) -> DdetcStatus {
    guard(|| {
        let p = &handle(plant, "plant")?.0;
        write(nx, p.nx(), "nx")?;
        write(nu, p.nu(), "nu")
    })
}

/// Writes `A(k)` (`nx*nx`) and `B(k)` (`nx*nu`) row-major.
///
/// # Safety
/// `plant` must be a live handle; `a` and `b` must hold the stated sizes.
#[no_mangle]
pub unsafe extern "C" fn ddetc_plant_eval(plant: *const DdetcPlant, k: u64, a: *mut f64, a_len: usize, b: *mut f64, b_len: usize) -> DdetcStatus {
    guard(|| {
        let p = &handle(plant, "plant")?.0;
        let (am, bm) = p.eval(k);
        if a_len != am.as_slice().len() || b_len != bm.as_slice().len() {
            return Err(invalid(format!("buffers must hold {} and {} values", am.as_slice().len(), bm.as_slice().len())));
        }
        slice_mut(a, a_len, "a")?.copy_from_slice(am.as_slice());
        slice_mut(b, b_len, "b")?.copy_from_slice(bm.as_slice());
        Ok(())
    })
}

/// One plant step `A(k) x + B(k) u` written to `x_next` (length `nx`).
///
/// # Safety
/// Buffers must hold `nx`, `nu` and `nx` doubles respectively.
#[no_mangle]
pub unsafe extern "C" fn ddetc_plant_step(plant: *const DdetcPlant, k: u64, x: *const f64, u: *const f64, x_next: *mut f64) -> DdetcStatus {
    guard(|| {
        let p = &handle(plant, "plant")?.0;
        let next = p.step(k, slice(x, p.nx(), "x")?, slice(u, p.nu(), "u")?)?;
        slice_mut(x_next, p.nx(), "x_next")?.copy_from_slice(&next);
        Ok(())
    })
}

// ---------------------------------------------------------------- scenarios

/// Defaults for a plant with `nx` states and `nu` inputs.
#[no_mangle]
pub extern "C" fn ddetc_engine_params_default(nx: usize, nu: usize) -> DdetcEngineParams {
    let e = EngineConfig::new(nx + nu, vec![0.0; nx]);
    DdetcEngineParams {
        window: e.window,
        horizon: e.horizon,
        seed: e.seed,
        mode: DdetcMode::EventTriggered,
        period: 1,
        c_sigma: e.c_sigma,
        eps_f: e.synthesis.eps_f,
        divergence_threshold: e.divergence_threshold,
    }
}

/// Parses scenario text; relative file paths resolve against the working directory.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ddetc_scenario_from_str(text: *const c_char, out: *mut *mut DdetcScenario) -> DdetcStatus {
    guard(|| {
        let t = string(text, "text")?;
        put(out, DdetcScenario(ScenarioConfig::parse(t, Path::new("."), "scenario")?))
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ddetc_scenario_from_file(path: *const c_char, out: *mut *mut DdetcScenario) -> DdetcStatus {
    guard(|| {
        let p = string(path, "path")?;
        put(out, DdetcScenario(ScenarioConfig::from_file(Path::new(p))?))
    })
}

/// # Safety
/// `scenario` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ddetc_scenario_set_seed(scenario: *mut DdetcScenario, seed: u64) -> DdetcStatus {
    guard(|| {
        scenario.as_mut().ok_or_else(|| null("scenario"))?.0.engine.seed = seed;
        Ok(())
    })
}

/// # Safety
/// `scenario` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ddetc_scenario_free(scenario: *mut DdetcScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Runs a scenario; artifacts are written only if `out_dir` is non-null.
///
/// # Safety
/// `scenario` must be a live handle, `out_dir` null or NUL-terminated, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ddetc_scenario_run(scenario: *const DdetcScenario, out_dir: *const c_char, out: *mut *mut DdetcRun) -> DdetcStatus {
    guard(|| {
        let cfg = &handle(scenario, "scenario")?.0;
        let dir = if out_dir.is_null() { None } else { Some(Path::new(string(out_dir, "out_dir")?)) };
        let mut cfg = cfg.clone();
        if dir.is_none() {
            cfg.output_dir = None;
        }
        let o = run_scenario(&cfg, dir)?;
        put(out, DdetcRun { traj: o.trajectory, summary: o.summary })
    })
}

/// Simulates `plant` from `x0` (length `nx`) under `params`.
///
/// # Safety
/// `plant` must be a live handle, `params` readable, `x0` hold `x0_len` doubles, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ddetc_simulate(
    plant: *const DdetcPlant,
    params: *const DdetcEngineParams,
    x0: *const f64,
    x0_len: usize,
    out: *mut *mut DdetcRun,
) -> DdetcStatus {
    guard(|| {
        let p = &handle(plant, "plant")?.0;
        let pr = handle(params, "params")?;
        let mut cfg = EngineConfig::new(pr.window, slice(x0, x0_len, "x0")?.to_vec());
        cfg.horizon = pr.horizon;
        cfg.seed = pr.seed;
        cfg.c_sigma = pr.c_sigma;
        cfg.synthesis.eps_f = pr.eps_f;
        cfg.divergence_threshold = pr.divergence_threshold;
        cfg.mode = match pr.mode {
            DdetcMode::EventTriggered => ControlMode::EventTriggered,
            DdetcMode::Fixed => ControlMode::Fixed,
            DdetcMode::TimeTriggered => ControlMode::TimeTriggered { period: pr.period },
        };
        if !(pr.eps_f > 0.0 && pr.eps_f < 1.0) {
            return Err(invalid("eps_f must lie in (0, 1)"));
        }
        let (traj, _, summary) = simulate("ffi", p, &cfg)?;
        put(out, DdetcRun { traj, summary })
    })
}

// ---------------------------------------------------------------- runs

/// # Safety
/// `run` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ddetc_run_free(run: *mut DdetcRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Number of hybrid-time records `(k, j)`.
///
/// # Safety
/// `run` must be a live handle; `n` writable.
#[no_mangle]
pub unsafe extern "C" fn ddetc_run_num_records(run: *const DdetcRun, n: *mut usize) -> DdetcStatus {
    guard(|| write(n, handle(run, "run")?.traj.records.len(), "n"))
}

/// Hybrid time and state of record `index`; `x` must hold `nx` doubles.
///
/// # Safety
/// `run` must be a live handle; output pointers writable.
#[no_mangle]
pub unsafe extern "C" fn ddetc_run_record(run: *const DdetcRun, index: usize, k: *mut u64, j: *mut u64, x: *mut f64, x_len: usize) -> DdetcStatus {
    guard(|| {
        let r = handle(run, "run")?;
        let rec = r.traj.records.get(index).ok_or_else(|| invalid(format!("record {index} out of range")))?;
        if x_len != rec.x.len() {
            return Err(invalid(format!("x must hold {} values", rec.x.len())));
        }
        write(k, rec.k, "k")?;
        write(j, rec.j, "j")?;
        slice_mut(x, x_len, "x")?.copy_from_slice(&rec.x);
        Ok(())
    })
}

/// Copies up to `cap` episode instants into `buf` and stores the total count in `n`.
///
/// # Safety
/// `run` must be a live handle; `buf` must hold `cap` values; `n` writable.
#[no_mangle]
pub unsafe extern "C" fn ddetc_run_episodes(run: *const DdetcRun, buf: *mut u64, cap: usize, n: *mut usize) -> DdetcStatus {
    guard(|| {
        let e = &handle(run, "run")?.traj.episodes;
        let m = cap.min(e.len());
        slice_mut(buf, m, "buf")?.copy_from_slice(&e[..m]);
        write(n, e.len(), "n")
    })
}

/// Final and maximum state norm.
///
/// # Safety
/// `run` must be a live handle; outputs writable.
#[no_mangle]
pub unsafe extern "C" fn ddetc_run_norms(run: *const DdetcRun, final_norm: *mut f64, max_norm: *mut f64) -> DdetcStatus {
    guard(|| {
        let s = &handle(run, "run")?.summary;
        write(final_norm, s.final_norm, "final_norm")?;
        write(max_norm, s.max_norm, "max_norm")
    })
}

/// `diverged` is set to 1 when the divergence threshold was crossed;
/// `bound_ok` to 1 when the Lyapunov bound held at every record.
///
/// # Safety
/// `run` must be a live handle; outputs writable.
#[no_mangle]
pub unsafe extern "C" fn ddetc_run_status(run: *const DdetcRun, diverged: *mut i32, bound_ok: *mut i32) -> DdetcStatus {
    guard(|| {
        let s = &handle(run, "run")?.summary;
        write(diverged, i32::from(s.status == RunStatus::Diverged), "diverged")?;
        write(bound_ok, i32::from(s.bound_ok), "bound_ok")
    })
}

/// Trajectory CSV as a newly allocated string; release with [`ddetc_string_free`].
///
/// # Safety
/// `run` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ddetc_run_trajectory_csv(run: *const DdetcRun, out: *mut *mut c_char) -> DdetcStatus {
    guard(|| {
        let csv = handle(run, "run")?.traj.to_csv();
        let c = CString::new(csv).map_err(|_| invalid("CSV contains NUL"))?;
        write(out, c.into_raw(), "out")
    })
}

/// # Safety
/// `s` must be null or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ddetc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
