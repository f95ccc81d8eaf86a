//! C ABI over the soliton-rigidity core.
//!
//! Every function returns an [`SrStatus`]. Results are written through out
//! pointers. Objects are opaque handles owned by the caller and released with the
//! matching `*_free` function. The message of the last failure on the calling
//! thread is available from [`sr_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;

use soliton_rigidity::asymptotics::fit_rigidity;
use soliton_rigidity::cache::Cache;
use soliton_rigidity::cli::{self, ConfigError, NumericsSpec, ScenarioSpec};
use soliton_rigidity::dynamics::{simulate, SimulationConfig, SolitonConfiguration, Trajectory};
use soliton_rigidity::geometry::gram_inequality_suite;
use soliton_rigidity::kernel::{InteractionKernel, ReferenceClock};
use soliton_rigidity::{Error, ModelParams};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SrStatus {
    SrOk = 0,
    SrNullPointer = 1,
    SrInvalidArgument = 2,
    SrConfigError = 3,
    SrNumericalError = 4,
    SrCollision = 5,
    SrIoError = 6,
    SrCheckFailed = 7,
    SrPanic = 8,
}

/// Interaction kernel and reference clock for one model.
pub struct SrKernel {
    kernel: Arc<InteractionKernel>,
    clock: ReferenceClock,
}

/// Simulated trajectory.
pub struct SrTrajectory {
    traj: Trajectory,
}

/// Summary of a rigidity fit.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SrRigidity {
    pub s_end: f64,
    pub omega_sum_norm: f64,
    pub omega_norm_error: f64,
    pub z0_end_distance: f64,
    pub c0: f64,
    pub c_star: f64,
    pub c0_tolerance: f64,
    pub passed: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> SrStatus {
    match e {
        Error::Collision { .. } => SrStatus::SrCollision,
        Error::InvalidParams(_) | Error::InvalidSetup(_) => SrStatus::SrInvalidArgument,
        _ => SrStatus::SrNumericalError,
    }
}

fn status_of_any(e: &anyhow::Error) -> SrStatus {
    if e.downcast_ref::<ConfigError>().is_some() {
        SrStatus::SrConfigError
    } else if let Some(core) = e.downcast_ref::<Error>() {
        status_of(core)
    } else if e.downcast_ref::<std::io::Error>().is_some() {
        SrStatus::SrIoError
    } else {
        SrStatus::SrNumericalError
    }
}

/// Runs `f`, converting panics and errors into status codes.
fn guard(f: impl FnOnce() -> Result<(), (SrStatus, String)>) -> SrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SrStatus::SrOk,
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(p) => {
            let msg = p.downcast_ref::<&str>().map(|s| s.to_string()).or_else(|| p.downcast_ref::<String>().cloned());
            set_error(&format!("panic: {}", msg.unwrap_or_default()));
            SrStatus::SrPanic
        }
    }
}

fn core_err(e: Error) -> (SrStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (SrStatus, String) {
    (SrStatus::SrNullPointer, format!("{what} is null"))
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (SrStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (SrStatus::SrInvalidArgument, format!("{what} is not UTF-8")))
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`) and returns the full message length without the NUL.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn sr_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let bytes = e.borrow();
        let bytes = bytes.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Builds the ground state, kernel and clock up to log time `s_max`.
/// `use_cache` reads and writes the on-disk cache.
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn sr_kernel_new(d: u32, p: f64, alpha: f64, s_max: f64, use_cache: bool, out: *mut *mut SrKernel) -> SrStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = std::ptr::null_mut();
        ModelParams::new(d as usize, p, alpha).map_err(core_err)?;
        if !(s_max.is_finite() && s_max > 0.0) {
            return Err((SrStatus::SrInvalidArgument, "s_max must be positive".into()));
        }
        let cache = if use_cache { Cache::from_env() } else { Cache::disabled() };
        let model = ModelParams { d: d as usize, p, alpha };
        let setup = cli::setup(model, &NumericsSpec::default(), s_max, &cache).map_err(|e| (status_of_any(&e), format!("{e:#}")))?;
        *out = Box::into_raw(Box::new(SrKernel { kernel: setup.kernel, clock: setup.clock }));
        Ok(())
    })
}

/// # Safety
/// `k` must be null or a handle from [`sr_kernel_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sr_kernel_free(k: *mut SrKernel) {
    if !k.is_null() {
        drop(Box::from_raw(k));
    }
}

/// Force F(r) for r ≥ 1.
///
/// # Safety
/// `k` must be a live kernel handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sr_kernel_force(k: *const SrKernel, r: f64, out: *mut f64) -> SrStatus {
    guard(|| {
        let k = k.as_ref().ok_or_else(|| null("kernel"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        if r.is_nan() || r < 1.0 {
            return Err((SrStatus::SrInvalidArgument, format!("r = {r} is below the kernel domain")));
        }
        *out = k.kernel.force(r);
        Ok(())
    })
}

/// Far-field amplitude c_g and clock constant c_star.
///
/// # Safety
/// `k` must be a live kernel handle; the out pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sr_kernel_constants(k: *const SrKernel, c_g: *mut f64, c_star: *mut f64) -> SrStatus {
    guard(|| {
        let k = k.as_ref().ok_or_else(|| null("kernel"))?;
        if c_g.is_null() || c_star.is_null() {
            return Err(null("out"));
        }
        *c_g = k.kernel.c_g;
        *c_star = k.clock.c_star;
        Ok(())
    })
}

/// Simulates `n` centers in dimension `d` (row-major `centers`, `n * d` values)
/// from t = 1 to log time `s_max`, writing frames every `stride` in s.
/// A collision is not an error: the trajectory ends there and is reported by
/// [`sr_trajectory_collision`].
///
/// # Safety
/// `centers` must hold `n * d` values, `signs` `n` values, `k` must be live and
/// `out` valid.
#[no_mangle]
pub unsafe extern "C" fn sr_simulate(
    k: *const SrKernel,
    d: u32,
    n: usize,
    centers: *const f64,
    signs: *const i8,
    s_max: f64,
    stride: f64,
    rel_tol: f64,
    out: *mut *mut SrTrajectory,
) -> SrStatus {
    guard(|| {
        let k = k.as_ref().ok_or_else(|| null("kernel"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = std::ptr::null_mut();
        if centers.is_null() || signs.is_null() {
            return Err(null("centers or signs"));
        }
        let d = d as usize;
        if d != k.kernel.params.d {
            return Err((SrStatus::SrInvalidArgument, format!("dimension {d} does not match the kernel")));
        }
        let flat = std::slice::from_raw_parts(centers, n * d);
        let signs = std::slice::from_raw_parts(signs, n).to_vec();
        let init = SolitonConfiguration::new(d, flat.chunks(d.max(1)).map(|c| c.to_vec()).collect(), signs).map_err(core_err)?;
        let cfg = SimulationConfig { s_max, stride, rel_tol, ..SimulationConfig::default() };
        cfg.validate(k.kernel.params.p).map_err(core_err)?;
        let traj = simulate(&init, &k.kernel, &cfg).map_err(core_err)?;
        *out = Box::into_raw(Box::new(SrTrajectory { traj }));
        Ok(())
    })
}

/// # Safety
/// `t` must be null or a handle from [`sr_simulate`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sr_trajectory_free(t: *mut SrTrajectory) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Number of frames, dimension and number of centers.
///
/// # Safety
/// `t` must be live; the out pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sr_trajectory_shape(t: *const SrTrajectory, frames: *mut usize, d: *mut u32, n: *mut usize) -> SrStatus {
    guard(|| {
        let t = t.as_ref().ok_or_else(|| null("trajectory"))?;
        if frames.is_null() || d.is_null() || n.is_null() {
            return Err(null("out"));
        }
        *frames = t.traj.len();
        *d = t.traj.d as u32;
        *n = t.traj.signs.len();
        Ok(())
    })
}

/// Log time and centers of frame `index`; `centers` receives `n * d` values.
///
/// # Safety
/// `t` must be live, `s` valid and `centers` must have room for `cap` values.
#[no_mangle]
pub unsafe extern "C" fn sr_trajectory_frame(t: *const SrTrajectory, index: usize, s: *mut f64, centers: *mut f64, cap: usize) -> SrStatus {
    guard(|| {
        let t = t.as_ref().ok_or_else(|| null("trajectory"))?;
        if s.is_null() || centers.is_null() {
            return Err(null("out"));
        }
        let frame = t.traj.frames.get(index).ok_or((SrStatus::SrInvalidArgument, format!("frame {index} out of range")))?;
        if cap < frame.len() {
            return Err((SrStatus::SrInvalidArgument, format!("buffer holds {cap} values, frame has {}", frame.len())));
        }
        *s = t.traj.s[index];
        std::ptr::copy_nonoverlapping(frame.as_ptr(), centers, frame.len());
        Ok(())
    })
}

/// Whether the run ended in a collision, and the log time of the collision.
///
/// # Safety
/// `t` must be live; the out pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn sr_trajectory_collision(t: *const SrTrajectory, collided: *mut bool, s: *mut f64) -> SrStatus {
    guard(|| {
        let t = t.as_ref().ok_or_else(|| null("trajectory"))?;
        if collided.is_null() || s.is_null() {
            return Err(null("out"));
        }
        *collided = t.traj.collision.is_some();
        *s = t.traj.collision.map_or(f64::NAN, |c| c.s);
        Ok(())
    })
}

/// Limit directions and radial constant of a (1,3) trajectory.
///
/// # Safety
/// `k` and `t` must be live and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn sr_fit_rigidity(k: *const SrKernel, t: *const SrTrajectory, out: *mut SrRigidity) -> SrStatus {
    guard(|| {
        let k = k.as_ref().ok_or_else(|| null("kernel"))?;
        let t = t.as_ref().ok_or_else(|| null("trajectory"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let r = fit_rigidity(&t.traj, &k.clock).map_err(core_err)?;
        *out = SrRigidity {
            s_end: r.s_end,
            omega_sum_norm: r.omega_sum_norm,
            omega_norm_error: r.omega_norm_error,
            z0_end_distance: r.z0_end_distance,
            c0: r.c0,
            c_star: r.c_star,
            c0_tolerance: r.c0_tolerance,
            passed: r.checks.values().all(|&ok| ok),
        };
        Ok(())
    })
}

/// Samples `samples` unit-vector triples in dimension `d` and checks the Gram
/// inequalities; `worst_margin` receives the smallest margin seen.
/// Returns `SrCheckFailed` when an inequality is violated.
///
/// # Safety
/// `worst_margin` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sr_gram_inequalities(samples: usize, seed: u64, d: u32, worst_margin: *mut f64) -> SrStatus {
    guard(|| {
        if worst_margin.is_null() {
            return Err(null("worst_margin"));
        }
        match gram_inequality_suite(samples, seed, d as usize) {
            Ok(r) => {
                *worst_margin = r.worst_margins.values().copied().fold(f64::INFINITY, f64::min);
                Ok(())
            }
            Err(e @ Error::InequalityViolated { margin, .. }) => {
                *worst_margin = margin;
                Err((SrStatus::SrCheckFailed, e.to_string()))
            }
            Err(e) => Err(core_err(e)),
        }
    })
}

/// Runs the scenario in the JSON text `config`, writing artifacts into
/// `out_dir`. `passed` receives whether every configured check passed.
///
/// # Safety
/// `config` and `out_dir` must be NUL-terminated strings and `passed` valid.
#[no_mangle]
pub unsafe extern "C" fn sr_run_scenario(config: *const c_char, out_dir: *const c_char, use_cache: bool, passed: *mut bool) -> SrStatus {
    guard(|| {
        let text = c_str(config, "config")?;
        let dir = c_str(out_dir, "out_dir")?;
        if passed.is_null() {
            return Err(null("passed"));
        }
        let spec = ScenarioSpec::from_json(text).map_err(|e| (SrStatus::SrConfigError, e.to_string()))?;
        let cache = if use_cache { Cache::from_env() } else { Cache::disabled() };
        let (_, report) = cli::run_scenario(&spec, &cache, Path::new(dir)).map_err(|e| (status_of_any(&e), format!("{e:#}")))?;
        *passed = report.passed;
        Ok(())
    })
}
