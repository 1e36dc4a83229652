//! C ABI for `ncorbifold`.
//!
//! Every fallible function returns an [`NcoStatus`]. On failure a message is
//! stored per thread and can be read with [`nco_last_error_message`]. Strings
//! returned through out-pointers are owned by the caller and must be released
//! with [`nco_string_free`]. Handles are released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use ncorbifold::algebra::{GroupAction, HaarConvention};
use ncorbifold::geometry::{DiscreteOrbifold, MetricGraph};
use ncorbifold::scenario::{load_scenario, parse_scenario, run, RunOptions, Scenario};
use ncorbifold::{Error, ScenarioErrorKind};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NcoStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    UnresolvedReference = 5,
    InvariantViolation = 6,
    Domain = 7,
    TaskFailed = 8,
    Internal = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NcoConvention {
    /// Use the convention stored in the scenario.
    Scenario = 0,
    Counting = 1,
    Normalized = 2,
}

/// Opaque loaded scenario.
pub struct NcoScenario {
    scenario: Scenario,
}

/// Opaque discrete orbifold.
pub struct NcoOrbifold {
    orbifold: DiscreteOrbifold,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(e: &Error) -> NcoStatus {
    match e {
        Error::Io(_) => NcoStatus::Io,
        Error::Json(_) => NcoStatus::Parse,
        Error::Scenario { kind, .. } => match kind {
            ScenarioErrorKind::Parse => NcoStatus::Parse,
            ScenarioErrorKind::UnresolvedReference => NcoStatus::UnresolvedReference,
            ScenarioErrorKind::InvariantViolation => NcoStatus::InvariantViolation,
        },
        _ => NcoStatus::Domain,
    }
}

/// Runs `f`, converting errors and panics into a status plus message.
fn guard(f: impl FnOnce() -> Result<(), (NcoStatus, String)>) -> NcoStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NcoStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            NcoStatus::Internal
        }
    }
}

fn lib_err(e: Error) -> (NcoStatus, String) {
    (status_of(&e), e.to_string())
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, (NcoStatus, String)> {
    if p.is_null() {
        return Err((NcoStatus::NullArgument, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (NcoStatus::InvalidUtf8, format!("{name} is not valid UTF-8")))
}

fn null(name: &str) -> (NcoStatus, String) {
    (NcoStatus::NullArgument, format!("{name} is null"))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn nco_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn nco_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// # Safety
/// `s` must be null or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn nco_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

fn store_scenario(out: *mut *mut NcoScenario, scenario: Scenario) {
    unsafe { *out = Box::into_raw(Box::new(NcoScenario { scenario })) };
}

/// Loads and validates a scenario file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nco_scenario_load(path: *const c_char, out: *mut *mut NcoScenario) -> NcoStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = str_arg(path, "path")?;
        let s = load_scenario(Path::new(path)).map_err(lib_err)?;
        store_scenario(out, s);
        Ok(())
    })
}

/// Parses and validates a scenario from JSON text.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nco_scenario_parse(json: *const c_char, out: *mut *mut NcoScenario) -> NcoStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = str_arg(json, "json")?;
        let s = parse_scenario(text, Path::new("<memory>")).map_err(lib_err)?;
        store_scenario(out, s);
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a handle from `nco_scenario_load`/`nco_scenario_parse`.
#[no_mangle]
pub unsafe extern "C" fn nco_scenario_free(s: *mut NcoScenario) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Number of tasks listed in the scenario.
///
/// # Safety
/// `s` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn nco_scenario_task_count(s: *const NcoScenario) -> usize {
    s.as_ref().map_or(0, |s| s.scenario.tasks.len())
}

/// Runs every task and returns the JSON report through `report_json`.
/// Returns `NCO_STATUS_TASK_FAILED` (with the report still set) when a task
/// fails.
///
/// # Safety
/// `s` must be a valid handle; `report_json` a valid pointer. A negative
/// `tolerance` keeps the default solver tolerance.
#[no_mangle]
pub unsafe extern "C" fn nco_scenario_run(
    s: *const NcoScenario,
    convention: NcoConvention,
    seed: u64,
    tolerance: f64,
    report_json: *mut *mut c_char,
) -> NcoStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(|| null("scenario"))?;
        if report_json.is_null() {
            return Err(null("report_json"));
        }
        *report_json = ptr::null_mut();
        let opts = RunOptions {
            seed: Some(seed),
            haar: match convention {
                NcoConvention::Scenario => None,
                NcoConvention::Counting => Some(HaarConvention::Counting),
                NcoConvention::Normalized => Some(HaarConvention::Normalized),
            },
            tolerance: (tolerance >= 0.0).then_some(tolerance),
            only: None,
        };
        let outcome = run(&s.scenario, &opts).map_err(lib_err)?;
        let text = serde_json::to_string(&outcome.report).map_err(|e| (NcoStatus::Internal, e.to_string()))?;
        *report_json = CString::new(text).map_err(|e| (NcoStatus::Internal, e.to_string()))?.into_raw();
        if outcome.passed {
            Ok(())
        } else {
            Err((NcoStatus::TaskFailed, "at least one task failed".into()))
        }
    })
}

/// Cycle `C_n` with uniform edge length and `Z_{n/shift}` acting by rotation.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nco_orbifold_rotation(n: usize, edge_length: f64, shift: usize, out: *mut *mut NcoOrbifold) -> NcoStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let graph = MetricGraph::cycle(n, edge_length).map_err(lib_err)?;
        let action = GroupAction::cyclic_rotation(n, shift).map_err(lib_err)?;
        let orbifold = DiscreteOrbifold::new(graph, action).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(NcoOrbifold { orbifold }));
        Ok(())
    })
}

/// Cycle `C_n` with uniform edge length and `Z₂` reflecting through vertex 0.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nco_orbifold_reflection(n: usize, edge_length: f64, out: *mut *mut NcoOrbifold) -> NcoStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let graph = MetricGraph::cycle(n, edge_length).map_err(lib_err)?;
        let orbifold = DiscreteOrbifold::new(graph, GroupAction::reflection(n)).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(NcoOrbifold { orbifold }));
        Ok(())
    })
}

/// # Safety
/// `o` must be null or a handle from an `nco_orbifold_*` constructor.
#[no_mangle]
pub unsafe extern "C" fn nco_orbifold_free(o: *mut NcoOrbifold) {
    if !o.is_null() {
        drop(Box::from_raw(o));
    }
}

/// Orbifold distance between the orbits of `x` and `y`.
///
/// # Safety
/// `o` must be a valid handle and `distance` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn nco_orbifold_distance(o: *const NcoOrbifold, x: usize, y: usize, distance: *mut f64) -> NcoStatus {
    guard(|| {
        let o = o.as_ref().ok_or_else(|| null("orbifold"))?;
        if distance.is_null() {
            return Err(null("distance"));
        }
        *distance = o.orbifold.orbifold_distance(x, y).map_err(lib_err)?;
        Ok(())
    })
}

/// Number of singular vertices; writes up to `capacity` of them to `vertices`.
///
/// # Safety
/// `o` must be a valid handle; `vertices` must hold `capacity` entries or be
/// null when `capacity` is 0.
#[no_mangle]
pub unsafe extern "C" fn nco_orbifold_singular_vertices(o: *const NcoOrbifold, vertices: *mut usize, capacity: usize) -> usize {
    let Some(o) = o.as_ref() else { return 0 };
    let ids = o.orbifold.singular_locus().vertex_ids();
    if !vertices.is_null() {
        for (i, v) in ids.iter().take(capacity).enumerate() {
            *vertices.add(i) = *v;
        }
    }
    ids.len()
}
