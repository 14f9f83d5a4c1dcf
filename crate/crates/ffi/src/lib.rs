//! C interface to the fragalloc simulator.
//!
//! Scenarios and simulations are opaque handles. Every fallible function
//! returns an [`FaStatus`]; on failure the message is available from
//! [`fa_last_error_message`] on the same thread. Strings handed out through
//! `char **out` parameters are owned by the caller and released with
//! [`fa_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use fragalloc::policy::builtin_policy;
use fragalloc::rules::{parse_goal, query, FactBase};
use fragalloc::sim::{run, Scenario, Simulation};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FaStatus {
    Ok = 0,
    /// A required pointer was null or a string was not UTF-8.
    InvalidArgument = 1,
    /// The scenario, policy or goal was rejected.
    InputError = 2,
    /// Evaluation or simulation failed.
    RuntimeError = 3,
    /// The library panicked; the handle involved should be freed.
    Panic = 4,
}

/// A validated scenario.
pub struct FaScenario {
    inner: Scenario,
}

/// A simulation advanced round by round.
pub struct FaSimulation {
    inner: Simulation,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(FaStatus, String);

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> FaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            FaStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            FaStatus::Panic
        }
    }
}

fn invalid(what: &str) -> Failure {
    Failure(FaStatus::InvalidArgument, format!("{what} is null or not valid UTF-8"))
}

/// # Safety
/// `s` must be null or point to a NUL-terminated string.
unsafe fn str_arg<'a>(s: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(invalid(what));
    }
    CStr::from_ptr(s).to_str().map_err(|_| invalid(what))
}

/// # Safety
/// `out` must be null or valid for a pointer write.
unsafe fn put_string(out: *mut *mut c_char, text: String) -> Result<(), Failure> {
    if out.is_null() {
        return Err(invalid("out"));
    }
    let c = CString::new(text)
        .map_err(|_| Failure(FaStatus::RuntimeError, "output contains NUL".to_string()))?;
    *out = c.into_raw();
    Ok(())
}

/// Loads and validates a scenario file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn fa_scenario_load(path: *const c_char, out: *mut *mut FaScenario) -> FaStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        if out.is_null() {
            return Err(invalid("out"));
        }
        let inner = Scenario::load(Path::new(path)).map_err(|e| Failure(FaStatus::InputError, e.to_string()))?;
        *out = Box::into_raw(Box::new(FaScenario { inner }));
        Ok(())
    })
}

/// Parses a scenario from JSON text. Relative policy files resolve against
/// `base_dir`, or the current directory when it is null.
///
/// # Safety
/// `json` must be a NUL-terminated string, `base_dir` null or one, and `out`
/// valid for a write.
#[no_mangle]
pub unsafe extern "C" fn fa_scenario_from_json(
    json: *const c_char,
    base_dir: *const c_char,
    out: *mut *mut FaScenario,
) -> FaStatus {
    guard(|| {
        let json = str_arg(json, "json")?;
        let dir = if base_dir.is_null() { "." } else { str_arg(base_dir, "base_dir")? };
        if out.is_null() {
            return Err(invalid("out"));
        }
        let inner = Scenario::from_json_str(json, Path::new(dir))
            .map_err(|e| Failure(FaStatus::InputError, e.to_string()))?;
        *out = Box::into_raw(Box::new(FaScenario { inner }));
        Ok(())
    })
}

/// # Safety
/// `scenario` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fa_scenario_free(scenario: *mut FaScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Replaces the scenario's policy with a builtin one.
///
/// # Safety
/// `scenario` must be a live handle and `name` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn fa_scenario_set_policy(scenario: *mut FaScenario, name: *const c_char) -> FaStatus {
    guard(|| {
        let s = scenario.as_mut().ok_or_else(|| invalid("scenario"))?;
        let name = str_arg(name, "name")?;
        s.inner.policy = builtin_policy(name).map_err(|e| Failure(FaStatus::InputError, e.to_string()))?;
        Ok(())
    })
}

/// Writes the scenario's initial fact text to `*out`.
///
/// # Safety
/// `scenario` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn fa_emit_facts(scenario: *const FaScenario, out: *mut *mut c_char) -> FaStatus {
    guard(|| {
        let s = scenario.as_ref().ok_or_else(|| invalid("scenario"))?;
        put_string(out, s.inner.emit_facts())
    })
}

/// Evaluates the policy over the initial facts and writes the facts
/// matching `goal`, one per line, to `*out`.
///
/// # Safety
/// `scenario` must be a live handle, `goal` a NUL-terminated string and
/// `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn fa_query(
    scenario: *const FaScenario,
    goal: *const c_char,
    out: *mut *mut c_char,
) -> FaStatus {
    guard(|| {
        let s = scenario.as_ref().ok_or_else(|| invalid("scenario"))?;
        let goal = parse_goal(str_arg(goal, "goal")?).map_err(|e| Failure(FaStatus::InputError, e.to_string()))?;
        let base: FactBase = s.inner.initial_facts().into_iter().collect();
        let result = query(s.inner.policy.evaluation_program(), &base, &goal)
            .map_err(|e| Failure(FaStatus::RuntimeError, e.to_string()))?;
        let text: String = result.answers.iter().map(|a| format!("{}\n", a.fact)).collect();
        put_string(out, text)
    })
}

/// Writes the rule text of a builtin policy to `*out`.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn fa_export_policy(name: *const c_char, out: *mut *mut c_char) -> FaStatus {
    guard(|| {
        let p = builtin_policy(str_arg(name, "name")?).map_err(|e| Failure(FaStatus::InputError, e.to_string()))?;
        put_string(out, p.export_text())
    })
}

/// Runs the scenario to completion and writes the JSON-lines metrics to
/// `*out`. A failed run still produces the partial metrics and returns
/// `RUNTIME_ERROR`.
///
/// # Safety
/// `scenario` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn fa_run_metrics_jsonl(scenario: *const FaScenario, out: *mut *mut c_char) -> FaStatus {
    guard(|| {
        let s = scenario.as_ref().ok_or_else(|| invalid("scenario"))?;
        let timeline = run(&s.inner);
        put_string(out, timeline.to_jsonl())?;
        match timeline.failure {
            Some(msg) => Err(Failure(FaStatus::RuntimeError, msg)),
            None => Ok(()),
        }
    })
}

/// Starts a simulation from a copy of the scenario.
///
/// # Safety
/// `scenario` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn fa_simulation_new(scenario: *const FaScenario, out: *mut *mut FaSimulation) -> FaStatus {
    guard(|| {
        let s = scenario.as_ref().ok_or_else(|| invalid("scenario"))?;
        if out.is_null() {
            return Err(invalid("out"));
        }
        let inner = Simulation::new(s.inner.clone());
        *out = Box::into_raw(Box::new(FaSimulation { inner }));
        Ok(())
    })
}

/// Runs one round. `*finished` is set to true once no rounds remain, in
/// which case nothing was run.
///
/// # Safety
/// `sim` must be a live handle and `finished` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn fa_simulation_step(sim: *mut FaSimulation, finished: *mut bool) -> FaStatus {
    guard(|| {
        let sim = sim.as_mut().ok_or_else(|| invalid("sim"))?;
        if finished.is_null() {
            return Err(invalid("finished"));
        }
        let ran = sim
            .inner
            .step()
            .map_err(|e| Failure(FaStatus::RuntimeError, e.to_string()))?
            .is_some();
        *finished = !ran;
        Ok(())
    })
}

/// Writes each node's fact-base digest, one hex line per node in id
/// order, to `*out`.
///
/// # Safety
/// `sim` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn fa_simulation_digests(sim: *const FaSimulation, out: *mut *mut c_char) -> FaStatus {
    guard(|| {
        let sim = sim.as_ref().ok_or_else(|| invalid("sim"))?;
        let text: String = sim
            .inner
            .cluster()
            .nodes()
            .iter()
            .map(|n| format!("{}\n", n.base.digest()))
            .collect();
        put_string(out, text)
    })
}

/// Writes the metrics recorded so far as JSON lines to `*out`.
///
/// # Safety
/// `sim` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn fa_simulation_metrics_jsonl(sim: *const FaSimulation, out: *mut *mut c_char) -> FaStatus {
    guard(|| {
        let sim = sim.as_ref().ok_or_else(|| invalid("sim"))?;
        put_string(out, sim.inner.timeline().to_jsonl())
    })
}

/// # Safety
/// `sim` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fa_simulation_free(sim: *mut FaSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// # Safety
/// `s` must be null or a string returned by this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fa_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message for the last failed call on this thread, or an empty string.
/// The pointer stays valid until the next call into the library from the
/// same thread.
#[no_mangle]
pub extern "C" fn fa_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

