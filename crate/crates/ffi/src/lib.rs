//! C ABI over `eal-core`.
//!
//! Programs are opaque [`EalProgram`] handles. Every entry point returns an
//! [`EalStatus`]; on failure [`eal_last_error`] describes the cause. Strings
//! handed out by the library are released with [`eal_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use eal_core::complexity::certificate;
use eal_core::depth::{check_depth, infer_region_depths};
use eal_core::encodings::decode_banged;
use eal_core::eval::{run, MachineState, RunError, RunOutcome, SchedulerMode, SchedulerPolicy};
use eal_core::reader::{parse, parse_term, print_type, print_unit, PrintOptions, SourceUnit};
use eal_core::syntax::{revised_depth, RegionDepthContext};
use eal_core::typing::check;

/// Result of every entry point.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EalStatus {
    Ok = 0,
    /// The source text does not parse.
    Syntax = 1,
    /// The program is not derivable in the depth system.
    IllFormed = 2,
    /// The program does not type-check.
    IllTyped = 3,
    /// A step, state or normalization budget ran out.
    Budget = 4,
    /// A null pointer, invalid UTF-8 or an out-of-range argument.
    InvalidArgument = 5,
    /// A panic inside the library; the handle may be reused.
    Internal = 6,
}

/// Scheduling policy for [`eal_program_run`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EalSchedule {
    Deterministic = 0,
    Seeded = 1,
    Exhaustive = 2,
}

/// A parsed source unit.
pub struct EalProgram {
    unit: SourceUnit,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(EalStatus, String);

type FfiResult<T> = Result<T, Failure>;

fn fail<T>(status: EalStatus, msg: impl ToString) -> FfiResult<T> {
    Err(Failure(status, msg.to_string()))
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', "?")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

/// Runs `f`, recording the error message and mapping panics to `Internal`.
fn guard(f: impl FnOnce() -> FfiResult<()>) -> EalStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            EalStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            set_error(&format!("internal error: {msg}"));
            EalStatus::Internal
        }
    }
}

unsafe fn str_arg<'a>(s: *const c_char, what: &str) -> FfiResult<&'a str> {
    if s.is_null() {
        return fail(EalStatus::InvalidArgument, format!("{what} is null"));
    }
    match CStr::from_ptr(s).to_str() {
        Ok(s) => Ok(s),
        Err(_) => fail(EalStatus::InvalidArgument, format!("{what} is not UTF-8")),
    }
}

unsafe fn program<'a>(p: *const EalProgram) -> FfiResult<&'a EalProgram> {
    p.as_ref()
        .map_or_else(|| fail(EalStatus::InvalidArgument, "program handle is null"), Ok)
}

unsafe fn put<T>(out: *mut T, v: T) -> FfiResult<()> {
    if out.is_null() {
        return fail(EalStatus::InvalidArgument, "output pointer is null");
    }
    out.write(v);
    Ok(())
}

fn to_c(s: String) -> *mut c_char {
    CString::new(s.replace('\0', "?")).unwrap_or_default().into_raw()
}

fn depths(unit: &SourceUnit) -> FfiResult<RegionDepthContext> {
    match unit.region_depths() {
        Some(r) => Ok(r),
        None => infer_region_depths(&unit.body).or_else(|e| fail(EalStatus::IllFormed, e)),
    }
}

/// Message for the last failing call on this thread, or an empty string.
/// The pointer is valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn eal_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn eal_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn eal_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a source unit into a new handle.
///
/// # Safety
/// `src` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn eal_program_parse(src: *const c_char, out: *mut *mut EalProgram) -> EalStatus {
    guard(|| {
        let src = str_arg(src, "source")?;
        let unit = parse(src).or_else(|e| fail(EalStatus::Syntax, e))?;
        put(out, Box::into_raw(Box::new(EalProgram { unit })))
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `p` must come from [`eal_program_parse`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn eal_program_free(p: *mut EalProgram) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Prints the program back in ASCII concrete syntax.
///
/// # Safety
/// `p` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn eal_program_print(p: *const EalProgram, out: *mut *mut c_char) -> EalStatus {
    guard(|| {
        let p = program(p)?;
        put(out, to_c(print_unit(&p.unit, PrintOptions::ascii())))
    })
}

/// Decides well-formedness at `delta`; on success writes the revised depth.
///
/// # Safety
/// `p` must be a live handle; `depth_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn eal_program_check_depth(p: *const EalProgram, delta: u32, depth_out: *mut u32) -> EalStatus {
    guard(|| {
        let p = program(p)?;
        let r = depths(&p.unit)?;
        check_depth(&p.unit.body, &r, &p.unit.var_depths(), delta).or_else(|e| fail(EalStatus::IllFormed, e))?;
        let d = revised_depth(&p.unit.body, &r).or_else(|e| fail(EalStatus::IllFormed, e))?;
        put(depth_out, d)
    })
}

/// Type-checks at `delta` against the declared contexts; writes the type.
///
/// # Safety
/// `p` must be a live handle; `type_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn eal_program_type(p: *const EalProgram, delta: u32, type_out: *mut *mut c_char) -> EalStatus {
    guard(|| {
        let p = program(p)?;
        let Some(r) = p.unit.region_types() else {
            return fail(
                EalStatus::InvalidArgument,
                "every region needs a depth and a content type",
            );
        };
        let Some(gamma) = p.unit.var_types() else {
            return fail(EalStatus::InvalidArgument, "every variable needs a type");
        };
        let a = check(&p.unit.body, &r, &gamma, delta, None).or_else(|e| fail(EalStatus::IllTyped, e))?;
        put(type_out, to_c(print_type(&a)))
    })
}

/// Evaluates the program.
///
/// Deterministic and seeded runs write the final state to `final_out` and
/// the number of steps to `steps_out`. Exhaustive runs write the distinct
/// final states, one per line, and the longest reduction length; `budget`
/// bounds steps or visited states respectively.
///
/// # Safety
/// `p` must be a live handle; both outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn eal_program_run(
    p: *const EalProgram,
    schedule: EalSchedule,
    seed: u64,
    budget: usize,
    steps_out: *mut usize,
    final_out: *mut *mut c_char,
) -> EalStatus {
    guard(|| {
        let p = program(p)?;
        if steps_out.is_null() || final_out.is_null() {
            return fail(EalStatus::InvalidArgument, "output pointer is null");
        }
        let s = MachineState::new(&p.unit.body).or_else(|e| fail(EalStatus::InvalidArgument, e))?;
        let policy = SchedulerPolicy {
            mode: match schedule {
                EalSchedule::Deterministic => SchedulerMode::Deterministic,
                EalSchedule::Seeded => SchedulerMode::Seeded(seed),
                EalSchedule::Exhaustive => SchedulerMode::Exhaustive,
            },
            ..SchedulerPolicy::deterministic()
        };
        let (steps, text) = match run(&s, &policy, budget) {
            Ok(RunOutcome::Trace(t)) => (t.len(), t.last.text()),
            Ok(RunOutcome::Tree(e)) => {
                let mut finals: Vec<String> = e.finals.iter().map(MachineState::text).collect();
                finals.sort();
                finals.dedup();
                (e.longest, finals.join("\n"))
            }
            Err(e @ RunError::BudgetExceeded { .. }) => return fail(EalStatus::Budget, e),
            Err(e @ RunError::Divergent) => return fail(EalStatus::Budget, e),
        };
        put(steps_out, steps)?;
        put(final_out, to_c(text))
    })
}

/// Writes the elementary bound certificate as JSON.
///
/// # Safety
/// `p` must be a live handle; `json_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn eal_program_bound(p: *const EalProgram, json_out: *mut *mut c_char) -> EalStatus {
    guard(|| {
        let p = program(p)?;
        let r = depths(&p.unit)?;
        let c = certificate(&p.unit.body, &r).or_else(|e| fail(EalStatus::IllFormed, e))?;
        let json = serde_json::to_string(&c).or_else(|e| fail(EalStatus::Internal, e))?;
        put(json_out, to_c(json))
    })
}

/// Strongly normalizes a term and reads back a numeral under `bangs` bangs.
///
/// # Safety
/// `term` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn eal_decode_numeral(term: *const c_char, bangs: u32, out: *mut u64) -> EalStatus {
    guard(|| {
        let t = parse_term(str_arg(term, "term")?).or_else(|e| fail(EalStatus::Syntax, e))?;
        let n = decode_banged(&t, bangs as usize).or_else(|e| match e {
            eal_core::encodings::DecodeError::Budget(b) => fail(EalStatus::Budget, b),
            other => fail(EalStatus::InvalidArgument, other),
        })?;
        put(out, n as u64)
    })
}
