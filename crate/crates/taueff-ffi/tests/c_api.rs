//! Exercises the extern "C" surface the way a foreign caller would:
//! through raw pointers, C strings, and status codes.

use std::ffi::{CStr, CString};
use std::ptr;

use taueff_ffi::*;

const GRAPH_A: &str = "\
observed Z X U W T
latent Y
Z -> X : 0.5
Z -> Y : 0.4
X -> Y : 0.7
Y -> U : 0.8
Y -> W : 0.6
Y -> T : 0.5
";

const ROLES_A: &str = r#"{"Single": {
    "x": "X", "y": "Y", "u": "U", "w": "W",
    "z": ["Z"], "t": ["T"], "latent_role": "Response"
}}"#;

fn parse_graph(text: &str) -> *mut TaueffGraph {
    let c = CString::new(text).unwrap();
    let mut g: *mut TaueffGraph = ptr::null_mut();
    let status = unsafe { taueff_graph_parse(c.as_ptr(), &mut g) };
    assert_eq!(status, TaueffStatus::Ok, "{}", last_error());
    assert!(!g.is_null());
    g
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(taueff_last_error()) }
        .to_string_lossy()
        .into_owned()
}

fn take_string(p: *mut std::ffi::c_char) -> String {
    assert!(!p.is_null());
    let s = unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned();
    unsafe { taueff_string_free(p) };
    s
}

#[test]
fn parse_inspect_print_free() {
    let g = parse_graph(GRAPH_A);
    let mut count = 0usize;
    assert_eq!(
        unsafe { taueff_graph_vertex_count(g, &mut count) },
        TaueffStatus::Ok
    );
    assert_eq!(count, 6);

    let mut printed: *mut std::ffi::c_char = ptr::null_mut();
    assert_eq!(
        unsafe { taueff_graph_print(g, &mut printed) },
        TaueffStatus::Ok
    );
    let text = take_string(printed);
    assert!(text.contains("X -> Y"));
    unsafe { taueff_graph_free(g) };
}

#[test]
fn parse_error_reports_location() {
    let c = CString::new("observed A\nA -> B\n").unwrap();
    let mut g: *mut TaueffGraph = ptr::null_mut();
    let status = unsafe { taueff_graph_parse(c.as_ptr(), &mut g) };
    assert_eq!(status, TaueffStatus::ParseError);
    assert!(g.is_null());
    assert!(last_error().contains("line 2"), "{}", last_error());
}

#[test]
fn null_arguments_are_rejected() {
    let mut g: *mut TaueffGraph = ptr::null_mut();
    assert_eq!(
        unsafe { taueff_graph_parse(ptr::null(), &mut g) },
        TaueffStatus::InvalidArgument
    );
    assert_eq!(
        unsafe { taueff_graph_vertex_count(ptr::null(), ptr::null_mut()) },
        TaueffStatus::InvalidArgument
    );
}

#[test]
fn check_and_identify_round_trip() {
    let g = parse_graph(GRAPH_A);

    // exact covariance straight from the annotated graph
    let mut cov: *mut TaueffCovariance = ptr::null_mut();
    assert_eq!(
        unsafe { taueff_graph_exact_covariance(g, &mut cov) },
        TaueffStatus::Ok,
        "{}",
        last_error()
    );

    // serialize, reload: same handle semantics as a foreign round trip
    let mut json: *mut std::ffi::c_char = ptr::null_mut();
    assert_eq!(
        unsafe { taueff_covariance_to_json(cov, &mut json) },
        TaueffStatus::Ok
    );
    let json = take_string(json);
    let c_json = CString::new(json).unwrap();
    let mut cov2: *mut TaueffCovariance = ptr::null_mut();
    assert_eq!(
        unsafe { taueff_covariance_parse_json(c_json.as_ptr(), &mut cov2) },
        TaueffStatus::Ok,
        "{}",
        last_error()
    );

    let roles = CString::new(ROLES_A).unwrap();
    let mut cert: *mut std::ffi::c_char = ptr::null_mut();
    assert_eq!(
        unsafe { taueff_check(g, roles.as_ptr(), &mut cert) },
        TaueffStatus::Ok,
        "{}",
        last_error()
    );
    let cert = take_string(cert);
    assert!(cert.contains("\"satisfied\": true"), "{cert}");

    let strategy = CString::new("backdoor-latent-response").unwrap();
    let mut tau = f64::NAN;
    let mut result: *mut std::ffi::c_char = ptr::null_mut();
    let status = unsafe {
        taueff_identify(
            g,
            cov2,
            strategy.as_ptr(),
            roles.as_ptr(),
            0.0,
            &mut tau,
            &mut result,
        )
    };
    assert_eq!(status, TaueffStatus::Ok, "{}", last_error());
    assert!((tau - 0.49).abs() < 1e-9, "tau_squared = {tau}");
    let result = take_string(result);
    assert!(result.contains("backdoor-latent-response"));

    unsafe {
        taueff_covariance_free(cov);
        taueff_covariance_free(cov2);
        taueff_graph_free(g);
    }
}

#[test]
fn unsatisfied_criterion_still_returns_certificate() {
    let g = parse_graph(GRAPH_A);
    // Z as a surrogate is adjacent to X: condition (1) cannot hold
    let roles = CString::new(
        r#"{"Single": {
            "x": "X", "y": "Y", "u": "Z", "w": "W",
            "z": ["U"], "t": ["T"], "latent_role": "Response"
        }}"#,
    )
    .unwrap();
    let mut cert: *mut std::ffi::c_char = ptr::null_mut();
    let status = unsafe { taueff_check(g, roles.as_ptr(), &mut cert) };
    assert_eq!(status, TaueffStatus::CriterionNotSatisfied);
    let cert = take_string(cert);
    assert!(cert.contains("\"satisfied\": false"), "{cert}");
    unsafe { taueff_graph_free(g) };
}

#[test]
fn sample_covariance_is_seed_deterministic() {
    let g = parse_graph(GRAPH_A);
    let sample = |seed: u64| -> String {
        let mut cov: *mut TaueffCovariance = ptr::null_mut();
        assert_eq!(
            unsafe { taueff_graph_sample_covariance(g, 500, seed, &mut cov) },
            TaueffStatus::Ok,
            "{}",
            last_error()
        );
        let mut json: *mut std::ffi::c_char = ptr::null_mut();
        assert_eq!(
            unsafe { taueff_covariance_to_json(cov, &mut json) },
            TaueffStatus::Ok
        );
        unsafe { taueff_covariance_free(cov) };
        take_string(json)
    };
    assert_eq!(sample(9), sample(9));
    assert_ne!(sample(9), sample(10));
    unsafe { taueff_graph_free(g) };
}

#[test]
fn generated_header_covers_the_surface() {
    let header = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("include")
        .join("taueff.h");
    let text = std::fs::read_to_string(&header)
        .unwrap_or_else(|e| panic!("missing generated header {}: {e}", header.display()));
    for symbol in [
        "taueff_graph_parse",
        "taueff_graph_free",
        "taueff_covariance_parse_json",
        "taueff_covariance_free",
        "taueff_check",
        "taueff_identify",
        "taueff_last_error",
        "taueff_string_free",
        "TaueffStatus",
    ] {
        assert!(text.contains(symbol), "header lacks {symbol}");
    }
}
