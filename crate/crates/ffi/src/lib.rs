//! C ABI over the `dualkan` solver.
//!
//! Every function returns a [`DkStatus`]; results go through out-pointers.
//! After a failure, [`dk_last_error_message`] describes it. Handles are opaque
//! and must be released with the matching `*_free` function. Strings returned
//! through `char**` are owned by the caller and released with [`dk_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use dualkan::config::ExperimentConfig;
use dualkan::experiment::{run_experiment, ExperimentError, RunOutcome};
use dualkan::geometry::Membership;
use dualkan::networks::{kan_param_count, mlp_param_count, DualNetwork, Side, SideSelect};
use dualkan::problems::{ProblemDefinition, ProblemId};
use dualkan::training::Silent;

/// Status code of every call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DkStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// An argument was malformed or out of range.
    InvalidArgument = 2,
    /// A point lay outside the region the call requires.
    Domain = 3,
    /// Training produced a non-finite loss.
    Numerical = 4,
    /// Any other library failure.
    Internal = 5,
    /// A Rust panic was caught at the boundary.
    Panic = 6,
}

/// Subdomain selector.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DkSide {
    /// Choose by point location.
    Auto = 0,
    Omega1 = 1,
    Omega2 = 2,
}

/// Point classification.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DkMembership {
    Inside1 = 1,
    Inside2 = 2,
    OnGamma = 3,
    Outside = 4,
}

/// A built-in benchmark problem.
pub struct DkProblem {
    def: ProblemDefinition,
}

/// A trained or loaded pair of subdomain networks.
pub struct DkNetwork {
    dual: DualNetwork,
}

/// The result of a training run.
pub struct DkRun {
    outcome: RunOutcome,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(CString::new(msg).unwrap()));
}

fn fail(status: DkStatus, msg: impl Into<String>) -> DkStatus {
    set_error(msg);
    status
}

/// Runs `f`, converting errors and panics into status codes.
fn guard<F: FnOnce() -> Result<(), (DkStatus, String)>>(f: F) -> DkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DkStatus::Ok,
        Ok(Err((status, msg))) => fail(status, msg),
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(DkStatus::Panic, format!("panic: {msg}"))
        }
    }
}

type Res = Result<(), (DkStatus, String)>;

fn null(name: &str) -> (DkStatus, String) {
    (DkStatus::NullPointer, format!("{name} is null"))
}

unsafe fn read_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, (DkStatus, String)> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (DkStatus::InvalidArgument, format!("{name} is not valid UTF-8")))
}

unsafe fn write_string(out: *mut *mut c_char, s: String) -> Res {
    let c = CString::new(s).map_err(|_| (DkStatus::Internal, "string contains NUL".to_string()))?;
    *out = c.into_raw();
    Ok(())
}

fn side_select(side: DkSide) -> SideSelect {
    match side {
        DkSide::Auto => SideSelect::Auto,
        DkSide::Omega1 => SideSelect::Side1,
        DkSide::Omega2 => SideSelect::Side2,
    }
}

fn experiment_status(e: &ExperimentError) -> DkStatus {
    match e.exit_code() {
        2 => DkStatus::InvalidArgument,
        3 => DkStatus::Numerical,
        _ => DkStatus::Internal,
    }
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn dk_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn dk_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads built-in problem `id` (`"e1"`, `"e4"`, `"e5"` or `"e6"`).
///
/// # Safety
/// `id` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dk_problem_new(id: *const c_char, out: *mut *mut DkProblem) -> DkStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let id: ProblemId = read_str(id, "id")?
            .parse()
            .map_err(|e: dualkan::problems::ProblemError| (DkStatus::InvalidArgument, e.to_string()))?;
        *out = Box::into_raw(Box::new(DkProblem {
            def: ProblemDefinition::builtin(id),
        }));
        Ok(())
    })
}

/// # Safety
/// `p` must be null or a handle from [`dk_problem_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dk_problem_free(p: *mut DkProblem) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Classifies `(x, y)` against the problem's domain decomposition.
///
/// # Safety
/// `problem` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dk_problem_classify(problem: *const DkProblem, x: f64, y: f64, out: *mut DkMembership) -> DkStatus {
    guard(|| {
        let problem = problem.as_ref().ok_or_else(|| null("problem"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let m = problem
            .def
            .decomposition
            .contains([x, y])
            .map_err(|e| (DkStatus::InvalidArgument, e.to_string()))?;
        *out = match m {
            Membership::Inside1 => DkMembership::Inside1,
            Membership::Inside2 => DkMembership::Inside2,
            Membership::OnGamma => DkMembership::OnGamma,
            Membership::Outside => DkMembership::Outside,
        };
        Ok(())
    })
}

/// Exact solution of `side` at `(x, y)`; `DK_SIDE_AUTO` is not accepted.
///
/// # Safety
/// `problem` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dk_problem_exact(problem: *const DkProblem, x: f64, y: f64, side: DkSide, out: *mut f64) -> DkStatus {
    guard(|| {
        let problem = problem.as_ref().ok_or_else(|| null("problem"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let side = match side {
            DkSide::Omega1 => Side::Side1,
            DkSide::Omega2 => Side::Side2,
            DkSide::Auto => return Err((DkStatus::InvalidArgument, "side must be OMEGA1 or OMEGA2".into())),
        };
        *out = problem
            .def
            .exact_at([x, y], side)
            .map_err(|e| (DkStatus::Domain, e.to_string()))?;
        Ok(())
    })
}

/// Parses a network from the JSON written by `dk_network_to_json` or the CLI.
///
/// # Safety
/// `json` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dk_network_from_json(json: *const c_char, out: *mut *mut DkNetwork) -> DkStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let dual = DualNetwork::from_json(read_str(json, "json")?).map_err(|e| (DkStatus::InvalidArgument, e.to_string()))?;
        *out = Box::into_raw(Box::new(DkNetwork { dual }));
        Ok(())
    })
}

/// # Safety
/// `net` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dk_network_to_json(net: *const DkNetwork, out: *mut *mut c_char) -> DkStatus {
    guard(|| {
        let net = net.as_ref().ok_or_else(|| null("net"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        write_string(out, net.dual.to_json())
    })
}

/// # Safety
/// `net` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dk_network_free(net: *mut DkNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Total trainable parameters of both subdomain networks.
///
/// # Safety
/// `net` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dk_network_param_count(net: *const DkNetwork, out: *mut usize) -> DkStatus {
    guard(|| {
        let net = net.as_ref().ok_or_else(|| null("net"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = net.dual.param_count();
        Ok(())
    })
}

/// Piecewise network value at `(x, y)`; with `DK_SIDE_AUTO` the network of
/// the subdomain containing the point is used.
///
/// # Safety
/// `net` and `problem` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dk_network_eval(
    net: *const DkNetwork,
    problem: *const DkProblem,
    x: f64,
    y: f64,
    side: DkSide,
    out: *mut f64,
) -> DkStatus {
    guard(|| {
        let net = net.as_ref().ok_or_else(|| null("net"))?;
        let problem = problem.as_ref().ok_or_else(|| null("problem"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = net
            .dual
            .dual_eval(&problem.def.decomposition, [x, y], side_select(side))
            .map_err(|e| (DkStatus::Domain, e.to_string()))?;
        Ok(())
    })
}

/// Values of one subdomain network at `n` points given as interleaved
/// `xy[2i], xy[2i+1]`.
///
/// # Safety
/// `xy` must hold `2n` doubles and `out` room for `n`.
#[no_mangle]
pub unsafe extern "C" fn dk_network_eval_batch(net: *const DkNetwork, side: DkSide, xy: *const f64, n: usize, out: *mut f64) -> DkStatus {
    guard(|| {
        let net = net.as_ref().ok_or_else(|| null("net"))?;
        if n == 0 {
            return Ok(());
        }
        if xy.is_null() {
            return Err(null("xy"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let side = match side {
            DkSide::Omega1 => Side::Side1,
            DkSide::Omega2 => Side::Side2,
            DkSide::Auto => return Err((DkStatus::InvalidArgument, "side must be OMEGA1 or OMEGA2".into())),
        };
        let coords = std::slice::from_raw_parts(xy, 2 * n);
        let pts: Vec<[f64; 2]> = coords.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
        let vals = net.dual.net(side).values(&pts);
        std::slice::from_raw_parts_mut(out, n).copy_from_slice(&vals);
        Ok(())
    })
}

unsafe fn train_config(cfg: ExperimentConfig, out: *mut *mut DkRun) -> Res {
    let outcome = run_experiment(&cfg, &mut Silent).map_err(|e| (experiment_status(&e), e.to_string()))?;
    *out = Box::into_raw(Box::new(DkRun { outcome }));
    Ok(())
}

/// Trains a preset such as `"e1-kan-rard"`. `steps` overrides the preset's
/// step count when nonzero.
///
/// # Safety
/// `preset` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dk_train_preset(preset: *const c_char, seed: u64, steps: usize, out: *mut *mut DkRun) -> DkStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let mut cfg = ExperimentConfig::preset(read_str(preset, "preset")?).map_err(|e| (DkStatus::InvalidArgument, e.to_string()))?;
        cfg.seed = seed;
        if steps > 0 {
            cfg.set_total_steps(steps);
        }
        train_config(cfg, out)
    })
}

/// Trains from an experiment config in JSON.
///
/// # Safety
/// `json` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dk_train_config_json(json: *const c_char, out: *mut *mut DkRun) -> DkStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = ExperimentConfig::from_json(read_str(json, "json")?).map_err(|e| (DkStatus::InvalidArgument, e.to_string()))?;
        train_config(cfg, out)
    })
}

/// # Safety
/// `run` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dk_run_free(run: *mut DkRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Copy of the trained networks as a new handle.
///
/// # Safety
/// `run` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dk_run_network(run: *const DkRun, out: *mut *mut DkNetwork) -> DkStatus {
    guard(|| {
        let run = run.as_ref().ok_or_else(|| null("run"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = Box::into_raw(Box::new(DkNetwork {
            dual: run.outcome.dual.clone(),
        }));
        Ok(())
    })
}

/// Test-set error report as JSON; undefined errors are `null`.
///
/// # Safety
/// `run` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dk_run_errors_json(run: *const DkRun, out: *mut *mut c_char) -> DkStatus {
    guard(|| {
        let run = run.as_ref().ok_or_else(|| null("run"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        write_string(out, serde_json::to_string(&run.outcome.errors).expect("report serializes"))
    })
}

/// Loss history as CSV with a header row.
///
/// # Safety
/// `run` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dk_run_loss_csv(run: *const DkRun, out: *mut *mut c_char) -> DkStatus {
    guard(|| {
        let run = run.as_ref().ok_or_else(|| null("run"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        write_string(out, run.outcome.report.history_csv())
    })
}

/// Parameter count of one KAN with layer widths `widths[0..n]`.
///
/// # Safety
/// `widths` must hold `n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dk_kan_param_count(widths: *const usize, n: usize, grid_intervals: usize, spline_order: usize, out: *mut usize) -> DkStatus {
    guard(|| {
        if widths.is_null() {
            return Err(null("widths"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        *out = kan_param_count(std::slice::from_raw_parts(widths, n), grid_intervals, spline_order);
        Ok(())
    })
}

/// Parameter count of one MLP with layer widths `widths[0..n]`.
///
/// # Safety
/// `widths` must hold `n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dk_mlp_param_count(widths: *const usize, n: usize, out: *mut usize) -> DkStatus {
    guard(|| {
        if widths.is_null() {
            return Err(null("widths"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        *out = mlp_param_count(std::slice::from_raw_parts(widths, n));
        Ok(())
    })
}

/// `sqrt(Σ|u−û|² / Σ|u|²)` over `n ≥ 1` values; NaN when `Σ|u|² = 0`.
///
/// # Safety
/// `exact` and `approx` must hold `n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dk_relative_l2(exact: *const f64, approx: *const f64, n: usize, out: *mut f64) -> DkStatus {
    guard(|| {
        if exact.is_null() || approx.is_null() || out.is_null() {
            return Err(null("exact, approx or out"));
        }
        *out = dualkan::reporting::relative_l2(std::slice::from_raw_parts(exact, n), std::slice::from_raw_parts(approx, n))
            .map_err(|e| (DkStatus::InvalidArgument, e.to_string()))?;
        Ok(())
    })
}
