//! C ABI over the `ips` library.
//!
//! Objects are passed as opaque handles created by `*_new` and released by
//! `*_free`. Every fallible call returns an [`IpsStatus`]; the message of the
//! last failure on the calling thread is available from
//! [`ips_last_error_message`]. Panics are caught at the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use ips::cli::{build_model, execute, ExperimentConfig, SimulateArgs};
use ips::estimators::{theta_curve, SurvivalPlan};
use ips::graphical::{evolve, sample_events};
use ips::lattice::{Configuration, Lattice, LatticeSpec};
use ips::models::ModelSpec;

/// Result codes of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IpsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidUtf8 = 3,
    InvariantViolated = 4,
    Io = 5,
    Panic = 6,
}

/// A model on a lattice.
pub struct IpsModel {
    inner: ModelSpec,
}

/// Binomial proportion with a 95% Wilson interval.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct IpsProportion {
    pub estimate: f64,
    pub lo: f64,
    pub hi: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).ok());
}

fn status_of(e: &ips::Error) -> IpsStatus {
    match e {
        ips::Error::Invariant(_) => IpsStatus::InvariantViolated,
        ips::Error::Io(_) => IpsStatus::Io,
        _ => IpsStatus::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> Result<(), IpsStatus>) -> IpsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => IpsStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            IpsStatus::Panic
        }
    }
}

fn lib_err(e: ips::Error) -> IpsStatus {
    set_error(e.to_string());
    status_of(&e)
}

fn null() -> IpsStatus {
    set_error("null pointer argument");
    IpsStatus::NullPointer
}

unsafe fn opt_str<'a>(p: *const c_char) -> Result<Option<&'a str>, IpsStatus> {
    if p.is_null() {
        return Ok(None);
    }
    CStr::from_ptr(p).to_str().map(Some).map_err(|_| {
        set_error("string argument is not valid UTF-8");
        IpsStatus::InvalidUtf8
    })
}

unsafe fn req_str<'a>(p: *const c_char) -> Result<&'a str, IpsStatus> {
    opt_str(p)?.ok_or_else(null)
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ips_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error message of this thread into `buf` (truncated and
/// NUL-terminated) and returns the full message length, or 0 if there is
/// none. Passing a null `buf` only queries the length.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn ips_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Creates a named model (`contact`, `voter`, `ising`, ...) on the torus of
/// dimension `dim` and side `side` (a ring for `dim == 1`). `params_json`
/// may be null or a JSON object such as `{"lambda": 2.0}`.
///
/// # Safety
/// `name` must be a NUL-terminated string, `params_json` null or one, and
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ips_model_new(
    name: *const c_char,
    params_json: *const c_char,
    dim: usize,
    side: usize,
    out: *mut *mut IpsModel,
) -> IpsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        let name = req_str(name)?;
        let args: SimulateArgs = match opt_str(params_json)? {
            Some(s) => serde_json::from_str(s).map_err(|e| {
                set_error(format!("invalid parameters: {e}"));
                IpsStatus::InvalidArgument
            })?,
            None => SimulateArgs::default(),
        };
        let spec = if dim == 1 { LatticeSpec::ring(side) } else { LatticeSpec::torus(dim, side) };
        let lattice = Arc::new(Lattice::new(spec).map_err(lib_err)?);
        let model = build_model(name, &args, &lattice).map_err(|e| {
            set_error(e.message);
            IpsStatus::InvalidArgument
        })?;
        *out = Box::into_raw(Box::new(IpsModel { inner: model }));
        Ok(())
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `model` must be null or a handle from [`ips_model_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ips_model_free(model: *mut IpsModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Number of sites, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ips_model_n_sites(model: *const IpsModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.n_sites())
}

/// Number of local states, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ips_model_alphabet(model: *const IpsModel) -> u32 {
    model.as_ref().map_or(0, |m| m.inner.alphabet.size() as u32)
}

/// Runs the model for time `t` from `x0` on a graphical representation
/// sampled with `seed` and writes the final configuration to `out`. Both
/// arrays hold `n` site states and `n` must equal the number of sites.
///
/// # Safety
/// `x0` and `out` must be valid for `n` bytes.
#[no_mangle]
pub unsafe extern "C" fn ips_model_evolve(
    model: *const IpsModel,
    x0: *const u8,
    n: usize,
    t: f64,
    seed: u64,
    out: *mut u8,
) -> IpsStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(null)?;
        if x0.is_null() || out.is_null() {
            return Err(null());
        }
        let m = &m.inner;
        if n != m.n_sites() {
            set_error(format!("configuration has {n} sites, model has {}", m.n_sites()));
            return Err(IpsStatus::InvalidArgument);
        }
        if !t.is_finite() || t < 0.0 {
            set_error("time must be finite and nonnegative");
            return Err(IpsStatus::InvalidArgument);
        }
        let states = std::slice::from_raw_parts(x0, n).to_vec();
        let x = Configuration::new(m.alphabet, states).map_err(lib_err)?;
        let events = sample_events(m, t, seed).map_err(lib_err)?;
        let traj = evolve(m, &x, &events.events, &[t]).map_err(lib_err)?;
        let last = traj.states.last().expect("one sample time");
        std::slice::from_raw_parts_mut(out, n).copy_from_slice(&last.states);
        Ok(())
    })
}

/// Survival proxy of the one-dimensional contact process from a single
/// infected site on a ring of `len` sites up to time `horizon`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ips_contact_survival(
    lambda: f64,
    len: usize,
    horizon: f64,
    replicas: usize,
    seed: u64,
    out: *mut IpsProportion,
) -> IpsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        let plan = SurvivalPlan { len, horizon, replicas, seed };
        let p = theta_curve(&[lambda], &plan).map_err(lib_err)?[0];
        *out = IpsProportion { estimate: p.theta.estimate, lo: p.theta.lo, hi: p.theta.hi };
        Ok(())
    })
}

/// Runs an experiment as the command line tool would (`command` is a
/// subcommand name such as `"percolation"`, `params_json` its parameters)
/// and returns the CSV body in `*out_csv`, to be released with
/// [`ips_string_free`]. A checked invariant that fails still returns the CSV
/// together with `INVARIANT_VIOLATED`.
///
/// # Safety
/// `command` must be a NUL-terminated string, `params_json` null or one, and
/// `out_csv` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ips_run(
    command: *const c_char,
    params_json: *const c_char,
    seed: u64,
    out_csv: *mut *mut c_char,
) -> IpsStatus {
    guard(|| {
        if out_csv.is_null() {
            return Err(null());
        }
        *out_csv = std::ptr::null_mut();
        let command = req_str(command)?.to_string();
        let params = match opt_str(params_json)? {
            Some(s) => serde_json::from_str(s).map_err(|e| {
                set_error(format!("invalid parameters: {e}"));
                IpsStatus::InvalidArgument
            })?,
            None => serde_json::json!({}),
        };
        let cfg = ExperimentConfig { command, seed, params };
        let outcome = execute(&cfg).map_err(|e| {
            set_error(e.message.clone());
            if e.code == ips::cli::EXIT_VIOLATION {
                IpsStatus::InvariantViolated
            } else {
                IpsStatus::InvalidArgument
            }
        })?;
        let csv = CString::new(outcome.csv).expect("csv has no NUL");
        *out_csv = csv.into_raw();
        if outcome.passed {
            Ok(())
        } else {
            set_error("checked invariant failed");
            Err(IpsStatus::InvariantViolated)
        }
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must be null or a string from [`ips_run`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ips_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
