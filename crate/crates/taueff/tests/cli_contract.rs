//! Contract tests for the command-line interface, exercised through the
//! compiled binary: output streams, exit codes, and the file formats.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use taueff::criteria::RoleSpec;
use taueff::dsl::CovarianceDocument;
use taueff::fixtures;
use taueff::identify::{identify_tau_sq, Settings};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_taueff"))
}

fn write_fixture_a(dir: &Path) -> (String, String) {
    let f = fixtures::fixture_a();
    let graph = dir.join("fixtureA.pd");
    let cov = dir.join("fixtureA_exact.json");
    fs::write(&graph, f.source).unwrap();
    fs::write(
        &cov,
        CovarianceDocument::from_cov(&f.sem.observed_covariance()).to_json_string(),
    )
    .unwrap();
    (
        graph.to_str().unwrap().to_owned(),
        cov.to_str().unwrap().to_owned(),
    )
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}",
            String::from_utf8_lossy(&out.stdout)
        )
    })
}

#[test]
fn check_theorem1_prints_certificate_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let (graph, _) = write_fixture_a(dir.path());
    let out = bin()
        .args([
            "check", "--graph", &graph, "--criterion", "theorem1", "--x", "X", "--y", "Y",
            "--u", "U", "--w", "W", "--z", "Z", "--t", "T",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("SATISFIED"));
    let cert: serde_json::Value =
        serde_json::from_str(&lines.collect::<Vec<_>>().join("\n")).unwrap();
    assert_eq!(cert["criterion"], "theorem1");
    assert_eq!(
        cert["witnesses"]["r1"],
        serde_json::json!(["U", "W", "X"])
    );
    assert_eq!(
        cert["witnesses"]["r2"],
        serde_json::json!(["T", "U", "W"])
    );
}

#[test]
fn check_reports_violations_with_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let (graph, _) = write_fixture_a(dir.path());
    // Z is a parent of X: as a surrogate it can never be separated from X
    let out = bin()
        .args([
            "check", "--graph", &graph, "--criterion", "theorem1", "--x", "X", "--y", "Y",
            "--u", "Z", "--w", "W", "--z", "U", "--t", "T",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("NOT SATISFIED"));
}

#[test]
fn identify_matches_in_memory_result() {
    let dir = tempfile::tempdir().unwrap();
    let (graph, cov) = write_fixture_a(dir.path());
    let out = bin()
        .args([
            "identify", "--graph", &graph, "--cov", &cov, "--strategy",
            "backdoor-latent-response", "--x", "X", "--y", "Y", "--u", "U", "--w", "W",
            "--z", "Z", "--t", "T",
        ])
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let result = stdout_json(&out);
    let tau = result["tau_squared"].as_f64().unwrap();
    assert!((tau - 0.49).abs() < 1e-9);
    assert_eq!(result["strategy"], "backdoor-latent-response");

    // file round-trip must agree bit-for-bit with the in-memory pipeline
    let f = fixtures::fixture_a();
    let in_memory = identify_tau_sq(
        &f.sem.observed_covariance(),
        f.graph(),
        &f.roles,
        f.strategy,
        &Settings::exact(),
    )
    .unwrap();
    assert_eq!(tau.to_bits(), in_memory.tau_squared.to_bits());
}

#[test]
fn simulate_exact_hides_latents_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let (graph, _) = write_fixture_a(dir.path());
    let out = bin()
        .args(["simulate", "--graph", &graph, "--exact"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let doc: CovarianceDocument =
        serde_json::from_slice(&out.stdout).expect("covariance document");
    assert!(!doc.labels.contains(&"Y".to_owned()), "latent column leaked");
    assert_eq!(doc.labels.len(), 5);
    let cov = doc.to_cov().unwrap();
    assert!(cov.max_abs_diag_deviation() < 1e-12);
}

#[test]
fn simulate_sampled_is_seed_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (graph, _) = write_fixture_a(dir.path());
    let run = || {
        bin()
            .args(["simulate", "--graph", &graph, "--n", "500", "--seed", "42"])
            .output()
            .unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let other = bin()
        .args(["simulate", "--graph", &graph, "--n", "500", "--seed", "43"])
        .output()
        .unwrap();
    assert_ne!(a.stdout, other.stdout);
}

#[test]
fn strategies_lists_canonical_assignment_and_its_swap() {
    let dir = tempfile::tempdir().unwrap();
    let (graph, _) = write_fixture_a(dir.path());
    let out = bin()
        .args([
            "strategies", "--graph", &graph, "--x", "X", "--y", "Y", "--max-set-size", "1",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let listing = stdout_json(&out);
    let f = fixtures::fixture_a();
    let RoleSpec::Single(canonical) = &f.roles else {
        panic!()
    };
    let mut swapped = canonical.clone();
    std::mem::swap(&mut swapped.u, &mut swapped.w);
    let entries = listing.as_array().unwrap();
    for roles in [canonical, &swapped] {
        let wanted = serde_json::json!({
            "strategy": "backdoor-latent-response",
            "roles": {"Single": roles},
        });
        assert!(
            entries.contains(&wanted),
            "missing assignment {wanted} in {listing}"
        );
    }
}

#[test]
fn input_errors_exit_two_with_error_object() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.pd");
    fs::write(&bad, "observed A\nA -> B\n").unwrap();
    let out = bin()
        .args([
            "check", "--graph", bad.to_str().unwrap(), "--criterion", "back-door", "--x",
            "A", "--y", "B",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "input");
    assert!(err["message"]
        .as_str()
        .unwrap()
        .contains("line 2, column 6"));
}

#[test]
fn identification_errors_exit_one_with_error_object() {
    let dir = tempfile::tempdir().unwrap();
    let (graph, cov) = write_fixture_a(dir.path());
    // wrong latent role for the strategy
    let out = bin()
        .args([
            "identify", "--graph", &graph, "--cov", &cov, "--strategy",
            "backdoor-latent-treatment", "--x", "X", "--y", "Y", "--u", "U", "--w", "W",
            "--z", "Z", "--t", "T",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "malformed-roles");
}

#[test]
fn usage_errors_exit_two() {
    let out = bin().args(["frobnicate"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
