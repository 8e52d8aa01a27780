//! C interface to the mdkit solvers.
//!
//! Simulations are opaque heap handles. Every fallible call returns an
//! [`MdkitStatus`]; on failure the message is available from
//! [`mdkit_last_error`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use mdkit::runner::{RunParams, Simulation};
use mdkit::Error;

/// Result of a call across the C boundary.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MdkitStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Numerical = 4,
    Io = 5,
    BufferTooSmall = 6,
    Internal = 7,
}

/// Opaque simulation handle.
pub struct MdkitSimulation {
    params: RunParams,
    sim: Simulation,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> MdkitStatus {
    match e {
        Error::Config { .. } | Error::Grid(_) | Error::InvalidParameter(_) | Error::SizeMismatch { .. } => MdkitStatus::Config,
        Error::Caustic { .. } | Error::NonFinite(_) | Error::NoConvergence(_) | Error::Cfl { .. } => MdkitStatus::Numerical,
        Error::Io(_) | Error::Format(_) => MdkitStatus::Io,
    }
}

/// Run `f`, converting errors and panics into a status code.
fn guard<F>(f: F) -> MdkitStatus
where
    F: FnOnce() -> Result<(), (MdkitStatus, String)>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MdkitStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            MdkitStatus::Internal
        }
    }
}

fn lift(e: Error) -> (MdkitStatus, String) {
    (status_of(&e), e.to_string())
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (MdkitStatus, String)> {
    if p.is_null() {
        return Err((MdkitStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (MdkitStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn sim_ref<'a>(p: *const MdkitSimulation) -> Result<&'a MdkitSimulation, (MdkitStatus, String)> {
    p.as_ref().ok_or((MdkitStatus::NullPointer, "simulation handle is null".into()))
}

unsafe fn out_ref<'a, T>(p: *mut T) -> Result<&'a mut T, (MdkitStatus, String)> {
    p.as_mut().ok_or((MdkitStatus::NullPointer, "output pointer is null".into()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mdkit_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mdkit_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Build a simulation from configuration text (`key = value` lines).
///
/// # Safety
/// `config` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mdkit_simulation_new(config: *const c_char, out: *mut *mut MdkitSimulation) -> MdkitStatus {
    guard(|| {
        let out = out_ref(out)?;
        *out = std::ptr::null_mut();
        let text = str_arg(config, "config")?;
        let params = RunParams::parse(text, &[]).map_err(lift)?;
        let (sim, _) = Simulation::new(&params).map_err(lift)?;
        *out = Box::into_raw(Box::new(MdkitSimulation { params, sim }));
        Ok(())
    })
}

/// Release a handle. Null is accepted.
///
/// # Safety
/// `sim` must come from [`mdkit_simulation_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mdkit_simulation_free(sim: *mut MdkitSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Advance by `steps` time steps.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mdkit_simulation_step(sim: *mut MdkitSimulation, steps: u64) -> MdkitStatus {
    guard(|| {
        let s = out_ref(sim)?;
        for _ in 0..steps {
            s.sim.step().map_err(lift)?;
        }
        Ok(())
    })
}

/// # Safety
/// `sim` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mdkit_simulation_time(sim: *const MdkitSimulation, out: *mut f64) -> MdkitStatus {
    guard(|| {
        *out_ref(out)? = sim_ref(sim)?.sim.time();
        Ok(())
    })
}

/// Total charge Σ|ψ|²·ΔV of the current state.
///
/// # Safety
/// `sim` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mdkit_simulation_charge(sim: *const MdkitSimulation, out: *mut f64) -> MdkitStatus {
    guard(|| {
        *out_ref(out)? = sim_ref(sim)?.sim.charge();
        Ok(())
    })
}

/// Number of grid points, i.e. the length of a density buffer.
///
/// # Safety
/// `sim` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mdkit_simulation_grid_len(sim: *const MdkitSimulation, out: *mut usize) -> MdkitStatus {
    guard(|| {
        *out_ref(out)? = sim_ref(sim)?.sim.grid().len();
        Ok(())
    })
}

/// Copy the particle density into `buf` (last axis fastest).
///
/// # Safety
/// `sim` must be a live handle and `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn mdkit_simulation_density(sim: *const MdkitSimulation, buf: *mut f64, len: usize) -> MdkitStatus {
    guard(|| {
        let s = sim_ref(sim)?;
        if buf.is_null() {
            return Err((MdkitStatus::NullPointer, "buffer is null".into()));
        }
        let rho = s.sim.density();
        if len < rho.len() {
            return Err((MdkitStatus::BufferTooSmall, format!("buffer holds {len} values, need {}", rho.len())));
        }
        std::slice::from_raw_parts_mut(buf, rho.len()).copy_from_slice(&rho);
        Ok(())
    })
}

/// Write the current fields as `MDKIT1` dumps into directory `dir`.
///
/// # Safety
/// `sim` must be a live handle and `dir` a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mdkit_simulation_write_dumps(sim: *const MdkitSimulation, dir: *const c_char) -> MdkitStatus {
    guard(|| {
        let s = sim_ref(sim)?;
        let dir = Path::new(str_arg(dir, "dir")?);
        std::fs::create_dir_all(dir).map_err(|e| lift(e.into()))?;
        let k = s.sim.step_index();
        for rec in s.sim.dumps(s.params.epsilon, s.params.delta).map_err(lift)? {
            rec.write_file(&dir.join(format!("{}_{k:06}.mdk", rec.header.name))).map_err(lift)?;
        }
        Ok(())
    })
}
