//! C ABI for the identification library: opaque handles, integer status
//! codes, JSON strings for structured values, and a thread-local last
//! error message. The header `include/taueff.h` is generated at build
//! time.
//!
//! Conventions:
//!
//! - every fallible function returns a [`TaueffStatus`]; on failure the
//!   message is retrievable with `taueff_last_error`;
//! - objects returned through out-pointers are owned by the caller and
//!   must be released with the matching `_free` function;
//! - strings returned through out-pointers must be released with
//!   `taueff_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};

use taueff::criteria::{theorem1_check, theorem2_check, RoleSpec, Strategy};
use taueff::dsl::{CovarianceDocument, GraphDocument};
use taueff::identify::{identify_tau_sq, Settings};
use taueff::LabeledCovariance;

/// Status code of every fallible call.
#[repr(C)]
#[derive(Copy, Clone, PartialEq, Eq, Debug)]
pub enum TaueffStatus {
    /// Success.
    Ok = 0,
    /// A pointer argument was null or a string was not valid UTF-8.
    InvalidArgument = 1,
    /// The graph text or a JSON document failed to parse.
    ParseError = 2,
    /// The covariance matrix was rejected (shape, symmetry, definiteness).
    CovarianceError = 3,
    /// The graphical criterion is not satisfied.
    CriterionNotSatisfied = 4,
    /// Identification failed numerically (misfit, degeneracy, roles).
    IdentificationError = 5,
    /// Simulation failed (missing annotations, infeasible variances).
    SimulationError = 6,
}

/// Opaque parsed graph document.
pub struct TaueffGraph {
    doc: GraphDocument,
}

/// Opaque labeled covariance matrix.
pub struct TaueffCovariance {
    cov: LabeledCovariance,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).expect("NUL bytes stripped");
    });
}

fn fail(status: TaueffStatus, message: &str) -> TaueffStatus {
    set_last_error(message);
    status
}

/// # Safety
/// `ptr` must be a valid NUL-terminated string or null.
unsafe fn read_str<'a>(ptr: *const c_char) -> Result<&'a str, TaueffStatus> {
    if ptr.is_null() {
        set_last_error("null string argument");
        return Err(TaueffStatus::InvalidArgument);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_last_error("string argument is not valid UTF-8");
        TaueffStatus::InvalidArgument
    })
}

fn give_string(s: String, out: *mut *mut c_char) -> TaueffStatus {
    let c = match CString::new(s) {
        Ok(c) => c,
        Err(_) => return fail(TaueffStatus::InvalidArgument, "output contains NUL"),
    };
    unsafe { *out = c.into_raw() };
    TaueffStatus::Ok
}

/// Message of the most recent failure on this thread. The pointer stays
/// valid until the next failing call on the same thread; do not free it.
#[no_mangle]
pub extern "C" fn taueff_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must have been returned by this library and not freed before.
#[no_mangle]
pub unsafe extern "C" fn taueff_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses graph text into an owned handle.
///
/// # Safety
/// `text` must be a valid NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn taueff_graph_parse(
    text: *const c_char,
    out: *mut *mut TaueffGraph,
) -> TaueffStatus {
    if out.is_null() {
        return fail(TaueffStatus::InvalidArgument, "null out pointer");
    }
    let text = match read_str(text) {
        Ok(t) => t,
        Err(s) => return s,
    };
    match GraphDocument::parse(text) {
        Ok(doc) => {
            *out = Box::into_raw(Box::new(TaueffGraph { doc }));
            TaueffStatus::Ok
        }
        Err(e) => fail(TaueffStatus::ParseError, &e.to_string()),
    }
}

/// Releases a graph handle.
///
/// # Safety
/// `g` must come from `taueff_graph_parse` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn taueff_graph_free(g: *mut TaueffGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Canonical text form of the graph.
///
/// # Safety
/// `g` must be a valid handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn taueff_graph_print(
    g: *const TaueffGraph,
    out: *mut *mut c_char,
) -> TaueffStatus {
    if g.is_null() || out.is_null() {
        return fail(TaueffStatus::InvalidArgument, "null argument");
    }
    give_string((*g).doc.print(), out)
}

/// Number of vertices (observed and latent).
///
/// # Safety
/// `g` must be a valid handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn taueff_graph_vertex_count(
    g: *const TaueffGraph,
    out: *mut usize,
) -> TaueffStatus {
    if g.is_null() || out.is_null() {
        return fail(TaueffStatus::InvalidArgument, "null argument");
    }
    *out = (*g).doc.diagram.vertex_count();
    TaueffStatus::Ok
}

/// Parses a covariance JSON document into an owned handle.
///
/// # Safety
/// `text` must be a valid NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn taueff_covariance_parse_json(
    text: *const c_char,
    out: *mut *mut TaueffCovariance,
) -> TaueffStatus {
    if out.is_null() {
        return fail(TaueffStatus::InvalidArgument, "null out pointer");
    }
    let text = match read_str(text) {
        Ok(t) => t,
        Err(s) => return s,
    };
    let doc = match CovarianceDocument::parse_json(text) {
        Ok(d) => d,
        Err(e) => return fail(TaueffStatus::ParseError, &e.to_string()),
    };
    match doc.to_cov() {
        Ok(cov) => {
            *out = Box::into_raw(Box::new(TaueffCovariance { cov }));
            TaueffStatus::Ok
        }
        Err(e) => fail(TaueffStatus::CovarianceError, &e.to_string()),
    }
}

/// Releases a covariance handle.
///
/// # Safety
/// `c` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn taueff_covariance_free(c: *mut TaueffCovariance) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// Serializes a covariance handle back to JSON.
///
/// # Safety
/// `c` must be a valid handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn taueff_covariance_to_json(
    c: *const TaueffCovariance,
    out: *mut *mut c_char,
) -> TaueffStatus {
    if c.is_null() || out.is_null() {
        return fail(TaueffStatus::InvalidArgument, "null argument");
    }
    give_string(
        CovarianceDocument::from_cov(&(*c).cov).to_json_string(),
        out,
    )
}

/// Exact implied covariance of the observed variables; the graph must
/// carry a coefficient on every edge.
///
/// # Safety
/// `g` must be a valid handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn taueff_graph_exact_covariance(
    g: *const TaueffGraph,
    out: *mut *mut TaueffCovariance,
) -> TaueffStatus {
    if g.is_null() || out.is_null() {
        return fail(TaueffStatus::InvalidArgument, "null argument");
    }
    match (*g).doc.to_sem() {
        Ok(sem) => {
            *out = Box::into_raw(Box::new(TaueffCovariance {
                cov: sem.observed_covariance(),
            }));
            TaueffStatus::Ok
        }
        Err(e) => fail(TaueffStatus::SimulationError, &e.to_string()),
    }
}

/// Seeded sample covariance of the observed variables.
///
/// # Safety
/// `g` must be a valid handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn taueff_graph_sample_covariance(
    g: *const TaueffGraph,
    n: usize,
    seed: u64,
    out: *mut *mut TaueffCovariance,
) -> TaueffStatus {
    if g.is_null() || out.is_null() {
        return fail(TaueffStatus::InvalidArgument, "null argument");
    }
    let sem = match (*g).doc.to_sem() {
        Ok(sem) => sem,
        Err(e) => return fail(TaueffStatus::SimulationError, &e.to_string()),
    };
    match sem.sample_covariance(n, seed) {
        Ok(cov) => {
            *out = Box::into_raw(Box::new(TaueffCovariance { cov }));
            TaueffStatus::Ok
        }
        Err(e) => fail(TaueffStatus::SimulationError, &e.to_string()),
    }
}

fn parse_roles(json: &str) -> Result<RoleSpec, TaueffStatus> {
    serde_json::from_str(json).map_err(|e| {
        set_last_error(&format!("roles JSON: {e}"));
        TaueffStatus::ParseError
    })
}

/// Runs the criterion check matching the role assignment kind (the
/// single-latent criterion for `"Single"` roles, the two-latent criterion
/// for `"Double"`). Writes the certificate as JSON regardless of the
/// outcome; returns `CriterionNotSatisfied` when the check fails.
///
/// # Safety
/// `g` must be a valid handle; strings NUL-terminated; `out_certificate`
/// a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn taueff_check(
    g: *const TaueffGraph,
    roles_json: *const c_char,
    out_certificate: *mut *mut c_char,
) -> TaueffStatus {
    if g.is_null() || out_certificate.is_null() {
        return fail(TaueffStatus::InvalidArgument, "null argument");
    }
    let roles = match read_str(roles_json).and_then(|s| parse_roles(s)) {
        Ok(r) => r,
        Err(s) => return s,
    };
    let cert = match &roles {
        RoleSpec::Single(r) => theorem1_check(&(*g).doc.diagram, r),
        RoleSpec::Double(r) => theorem2_check(&(*g).doc.diagram, r),
    };
    match cert {
        Ok(cert) => {
            let satisfied = cert.satisfied;
            let json = serde_json::to_string_pretty(&cert).expect("certificate serialization");
            let status = give_string(json, out_certificate);
            if status != TaueffStatus::Ok {
                status
            } else if satisfied {
                TaueffStatus::Ok
            } else {
                fail(
                    TaueffStatus::CriterionNotSatisfied,
                    cert.failed_condition.as_deref().unwrap_or("not satisfied"),
                )
            }
        }
        Err(e) => fail(TaueffStatus::IdentificationError, &e.to_string()),
    }
}

/// Identifies the squared total effect. `strategy` is one of
/// `backdoor-latent-response`, `backdoor-latent-treatment`,
/// `civ-latent-response`, `double-latent`; `roles_json` the matching role
/// assignment; `sample_tol` less than or equal to zero selects the exact
/// regime. On success writes the full result object as JSON and the bare
/// value to `out_tau_squared` (either may be null to skip).
///
/// # Safety
/// Handles must be valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn taueff_identify(
    g: *const TaueffGraph,
    c: *const TaueffCovariance,
    strategy: *const c_char,
    roles_json: *const c_char,
    sample_tol: f64,
    out_tau_squared: *mut f64,
    out_result: *mut *mut c_char,
) -> TaueffStatus {
    if g.is_null() || c.is_null() {
        return fail(TaueffStatus::InvalidArgument, "null argument");
    }
    let strategy: Strategy = match read_str(strategy) {
        Ok(s) => match s.parse::<Strategy>() {
            Ok(st) => st,
            Err(e) => return fail(TaueffStatus::ParseError, &e),
        },
        Err(s) => return s,
    };
    let roles = match read_str(roles_json).and_then(|s| parse_roles(s)) {
        Ok(r) => r,
        Err(s) => return s,
    };
    let settings = if sample_tol > 0.0 {
        Settings::sampled(sample_tol)
    } else {
        Settings::exact()
    };
    match identify_tau_sq(&(*c).cov, &(*g).doc.diagram, &roles, strategy, &settings) {
        Ok(res) => {
            if !out_tau_squared.is_null() {
                *out_tau_squared = res.tau_squared;
            }
            if !out_result.is_null() {
                let json =
                    serde_json::to_string_pretty(&res).expect("result serialization");
                return give_string(json, out_result);
            }
            TaueffStatus::Ok
        }
        Err(e) => fail(TaueffStatus::IdentificationError, &e.to_string()),
    }
}
