use serde_json::Value;
use std::path::PathBuf;
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn ncball(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ncball")).current_dir(fixtures()).args(args).output().expect("spawn ncball")
}

/// Run, check the exit code and parse stdout as JSON.
fn json(args: &[&str], code: i32) -> Value {
    let out = ncball(args);
    assert_eq!(out.status.code(), Some(code), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{args:?}: {e}"))
}

fn matrix(v: &Value) -> Vec<[f64; 2]> {
    serde_json::from_value(v["data"].clone()).unwrap()
}

#[test]
fn parse_prints_canonical_text() {
    let v = json(&["parse", "--poly", "eval_poly.ncp"], 0);
    assert_eq!(v["degree"], 2);
    assert_eq!(v["shape"], serde_json::json!([2, 3]));
    assert_eq!(v["analytic"], true);
}

#[test]
fn eval_fixture_matches_expected_matrix() {
    let expected: Value = serde_json::from_str(&std::fs::read_to_string(fixtures().join("eval_expected.json")).unwrap()).unwrap();
    let v = json(&["eval", "--poly", "eval_poly.ncp", "--tuple", "eval_tuple.json"], 0);
    assert_eq!(matrix(&v["value"]), matrix(&expected));
    let via_text = json(&["eval", "--text", "A x11 x21", "--grid", "2,1", "--coeffs", "coeffs.json", "--tuple", "eval_tuple.json"], 0);
    assert_eq!(via_text["value"], v["value"]);
    let scalar = json(&["eval", "--text", "x11 x21", "--grid", "2,1", "--tuple", "eval_tuple.json"], 0);
    assert_eq!(scalar["value"]["rows"], 2);
}

#[test]
fn text_without_grid_is_a_usage_error() {
    assert_eq!(ncball(&["eval", "--text", "x11", "--tuple", "eval_tuple.json"]).status.code(), Some(2));
}

#[test]
fn ball_and_pencil_membership() {
    let v = json(&["ball", "classify", "--tuple", "cling_point.json"], 0);
    assert!((v["norm"].as_f64().unwrap() - 2f64.sqrt()).abs() < 1e-12);
    let v = json(&["pencil", "member", "--pencil", "two_variable_pencil.json", "--tuple", "cling_point.json"], 1);
    assert!((v["norm"].as_f64().unwrap() - 1.5f64.sqrt()).abs() < 1e-12);
    assert_eq!(v["status"], "exterior");
    let v = json(&["pencil", "embed", "--pencil", "trace_map.json", "--tuple", "identity_point.json"], 0);
    assert_eq!(v["norm"].as_f64().unwrap(), 2.0);
    assert_eq!(v["lmi_member"], false);
}

#[test]
fn moebius_apply_and_verify() {
    let v = json(&["moebius", "apply", "--v", "moebius_v.json", "--u", "moebius_u.json"], 0);
    assert!(v["norm"].as_f64().unwrap() < 1.0);
    let v = json(&["moebius", "verify", "--samples", "100", "--seed", "1"], 0);
    assert_eq!(v["passed"], true);
    assert!(v["metrics"]["max_involution_residual"].as_f64().unwrap() <= 1e-9);
}

#[test]
fn fock_identities_and_uniqueness() {
    let v = json(&["fock", "identities", "--gprime", "2", "--g", "2", "--n", "3"], 0);
    assert_eq!(v["nilpotency_order"], 4);
    let v = json(&["fock", "unique", "--poly", "unique_poly.ncp"], 1);
    assert!(v["witness"]["min_eig"].as_f64().unwrap() < 0.0);
    let v = json(&["fock", "unique", "--poly", "zero_poly.ncp", "--N", "2"], 0);
    assert_eq!(v["all_psd"], true);
}

#[test]
fn isometry_certificates() {
    let v = json(&["iso", "certify", "--map", "trace_map.json"], 1);
    assert_eq!(v["certified"], false);
    let ratio = v["complete_contractivity"]["max_ratio"].as_f64().unwrap();
    assert!((ratio - 2.0).abs() <= 1e-9, "{ratio}");
    let v = json(&["iso", "certify", "--map", "planted_isometry.json"], 0);
    assert!(v["residual"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn clinging_analysis_and_search() {
    let v = json(&["cling", "analyze", "--pencil", "two_variable_pencil.json", "--samples", "50"], 0);
    assert!(v["gram"].is_object() && v["scalar"].is_object());
    let v = json(&["cling", "search3", "--budget", "3", "--seed", "5"], 0);
    assert_eq!(v["budget"], 3);
}

#[test]
fn canonical_forms() {
    let v = json(&["ballmap", "canon", "--series", "canon_series.ncs"], 0);
    assert!(v["reconstruction_residual"].as_f64().unwrap() <= 1e-8);
    let v = json(&["ballmap", "canon", "--series", "canon_planted.ncs"], 1);
    assert!(v["rejection"].is_object());
    let v = json(&["ballmap", "canon", "--series", "canon_basepoint.ncs"], 0);
    assert!(v["round_trip_residual"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn canonical_form_through_a_pencil() {
    let v = json(&["ballmap", "canon", "--series", "column_identity.ncs", "--pencil", "planted_isometry.json"], 0);
    assert!(v["reconstruction_residual"].as_f64().unwrap() <= 1e-8);
    let v = json(&["ballmap", "canon", "--series", "column_identity.ncs", "--pencil", "two_variable_pencil.json"], 1);
    assert_eq!(v["rejection"]["stage"], "norm_test");
    assert_eq!(ncball(&["ballmap", "canon", "--series", "column_identity.ncs", "--pencil", "trace_map.json"]).status.code(), Some(2));
}

#[test]
fn schwarz_and_bidisk() {
    json(&["ballmap", "schwarz", "--series", "schwarz_series.ncs", "--samples", "50"], 0);
    let v = json(&["ballmap", "schwarz", "--series", "scaled_identity.ncs", "--samples", "3"], 1);
    assert_eq!(v["passed"], false);
    let v = json(&["ballmap", "bidisk", "--series", "bidisk_series.ncs"], 0);
    assert_eq!(v["s_dim"], 1);
}

#[test]
fn nullstellensatz_solve() {
    let v = json(&["nullss", "solve", "--p", "p_x1.ncpm", "--q", "q_multiple.ncpm"], 0);
    assert_eq!(v["residual"].as_f64().unwrap(), 0.0);
    let v = json(&["nullss", "solve", "--p", "p_x1.ncpm", "--q", "q_multiple.ncpm", "--mode", "float"], 0);
    assert_eq!(v["solved"], true);
    let v = json(&["nullss", "solve", "--p", "p_x1.ncpm", "--q", "q_x2.ncpm", "--max-degree", "2"], 1);
    assert_eq!(v["solved"], false);
}

#[test]
fn suite_filter_fault_and_errors() {
    let v = json(&["suite", "--filter", "eval"], 0);
    assert_eq!(v["checks"].as_array().unwrap().len(), 1);
    assert!(v["checks"][0].get("runtime_ms").is_none());
    let v = json(&["suite", "--filter", "eval", "--timings"], 0);
    assert!(v["checks"][0]["runtime_ms"].is_number());
    let v = json(&["suite", "--filter", "scott", "--inject-fault", "scott"], 1);
    assert_eq!(v["failed"], serde_json::json!(["scott"]));
    assert_eq!(ncball(&["suite", "--inject-fault", "bogus"]).status.code(), Some(2));
    assert_eq!(ncball(&["parse", "--poly", "missing.ncp"]).status.code(), Some(2));
    assert_eq!(ncball(&["bogus"]).status.code(), Some(2));
}

#[test]
fn reports_are_deterministic() {
    let args = ["suite", "--filter", "moebius", "--seed", "9"];
    assert_eq!(ncball(&args).stdout, ncball(&args).stdout);
}

#[test]
fn out_file_and_text_format() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.txt");
    let out = ncball(&["ball", "classify", "--tuple", "cling_point.json", "--format", "text", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.contains("norm = 1.4142135623730951e0"), "{text}");
    assert!(text.contains("status = exterior"));
}

#[test]
fn tolerance_override() {
    let v = json(&["ball", "classify", "--tuple", "cling_point.json", "--tol", "1e-3"], 0);
    assert_eq!(v["tol"].as_f64().unwrap(), 1e-3);
}
