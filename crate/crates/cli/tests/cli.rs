//! End-to-end runs of the binary: one process per check, a single JSON
//! document on stdout, exit code 0/1/2 per the contract.

use std::path::Path;
use std::process::Command;

use serde_json::Value;

use exppoly::lattice::MultiIndex;
use exppoly::oracle::centered_cube;
use exppoly::poly::{ExpPoly, ExponentialWitness};
use exppoly::sampled::SampledFunction;
use exppoly::scalar::Scalar;

fn run(args: &[&str]) -> (Option<i32>, Value) {
    let out = Command::new(env!("CARGO_BIN_EXE_exppoly"))
        .args(args)
        .output()
        .expect("binary runs");
    let stdout = String::from_utf8(out.stdout).expect("utf8 stdout");
    let json: Value = serde_json::from_str(&stdout)
        .unwrap_or_else(|e| panic!("stdout is not one JSON document ({e}): {stdout}"));
    (out.status.code(), json)
}

fn write_file(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).expect("write input");
    path.to_string_lossy().into_owned()
}

/// f(n) = n·2^n as wire JSON.
const N_TIMES_2N: &str =
    r#"{"dim":1,"terms":[{"lambda":[["2","0"]],"coeffs":[{"alpha":[1],"c":["1","0"]}]}]}"#;

fn exponential(base: i64) -> ExpPoly {
    ExpPoly::monomial(
        ExponentialWitness::from_ints(&[base]).unwrap(),
        MultiIndex(vec![0]),
        Scalar::one(),
    )
    .unwrap()
}

#[test]
fn verify_accepts_the_matched_weight() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_file(dir.path(), "f.json", N_TIMES_2N);
    let (code, json) = run(&[
        "verify", "--f", &f, "--shifts", "[[1]]", "--powers", "[2]", "--phi", "[[2,0]]",
    ]);
    assert_eq!(code, Some(0));
    assert_eq!(json["verdict"]["kind"], "annihilated");
    assert_eq!(json["orders"], serde_json::json!([2]));
}

#[test]
fn verify_rejects_a_wrong_weight() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_file(dir.path(), "f.json", N_TIMES_2N);
    let (code, json) = run(&[
        "verify", "--f", &f, "--shifts", "[[1]]", "--powers", "[2]", "--phi", "[[3,0]]",
    ]);
    assert_eq!(code, Some(1));
    assert_eq!(json["verdict"]["kind"], "violated");
}

#[test]
fn decompose_finds_both_witnesses() {
    let f = exponential(2).add(&exponential(3)).unwrap();
    let s = SampledFunction::sample(&f, centered_cube(1, 17)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = write_file(dir.path(), "s.json", &serde_json::to_string(&s).unwrap());
    let (code, json) = run(&["decompose", "--samples", &path]);
    assert_eq!(code, Some(0));
    assert_eq!(json["success"], Value::Bool(true));
    let terms = json["poly"]["terms"].as_array().unwrap();
    assert_eq!(terms.len(), 2);
    let mut bases: Vec<f64> =
        terms.iter().map(|t| t["lambda"][0][0].as_f64().unwrap()).collect();
    bases.sort_by(f64::total_cmp);
    assert!((bases[0] - 2.0).abs() < 1e-6 && (bases[1] - 3.0).abs() < 1e-6);
}

#[test]
fn frechet_reports_equal_nullspaces() {
    let (code, json) = run(&["frechet", "--group", "4", "--n", "1"]);
    assert_eq!(code, Some(0));
    assert_eq!(json["dim1"], 1);
    assert_eq!(json["dim2"], 1);
    assert_eq!(json["equal"], Value::Bool(true));
}

#[test]
fn selftest_passes_and_reports_checks() {
    let (code, json) = run(&["selftest", "--seed", "3"]);
    assert_eq!(code, Some(0));
    assert_eq!(json["passed"], Value::Bool(true));
    assert!(!json["checks"].as_array().unwrap().is_empty());
}

#[test]
fn eval_reports_exact_values() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_file(dir.path(), "f.json", N_TIMES_2N);
    let (code, json) = run(&["eval", "--f", &f, "--shifts", "[[0],[3]]"]);
    assert_eq!(code, Some(0));
    assert_eq!(json["values"], serde_json::json!([["0", "0"], ["24", "0"]]));
}

#[test]
fn orders_finds_the_least_power() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_file(dir.path(), "f.json", N_TIMES_2N);
    let (code, json) = run(&[
        "orders",
        "--f",
        &f,
        "--shifts",
        "[[1]]",
        "--phi",
        r#"[["2","0"]]"#,
        "--max-order",
        "5",
    ]);
    assert_eq!(code, Some(0));
    assert_eq!(json["orders"], serde_json::json!([2]));
}

#[test]
fn witness_recovers_the_weight_value() {
    let s = SampledFunction::sample(&exponential(2), centered_cube(1, 13)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = write_file(dir.path(), "s.json", &serde_json::to_string(&s).unwrap());
    let (code, json) =
        run(&["witness", "--samples", &path, "--shifts", "[[1]]", "--max-order", "2"]);
    assert_eq!(code, Some(0));
    assert_eq!(json["kind"], "assignments");
    let first = &json["values"][0][0];
    assert!((first[0].as_f64().unwrap() - 2.0).abs() < 1e-6);
    assert!(first[1].as_f64().unwrap().abs() < 1e-6);
}

#[test]
fn closure_reaches_an_invariant_space() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_file(dir.path(), "f.json", N_TIMES_2N);
    let (code, json) = run(&[
        "closure",
        "--f",
        &f,
        "--shifts",
        "[[1]]",
        "--powers",
        "[2]",
        "--phi",
        r#"[["2","0"]]"#,
    ]);
    assert_eq!(code, Some(0));
    assert_eq!(json["invariant_under_all"], Value::Bool(true));
    assert_eq!(json["step_invariant"], serde_json::json!([true]));
    assert_eq!(json["space"]["rank"], 2);
}

#[test]
fn apply_with_the_matched_weight_annihilates() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_file(dir.path(), "f.json", N_TIMES_2N);
    let (code, json) = run(&[
        "apply", "--f", &f, "--shifts", "[[1]]", "--powers", "[2]", "--phi",
        r#"[["2","0"]]"#,
    ]);
    assert_eq!(code, Some(0));
    assert!(json["terms"].as_array().unwrap().is_empty());
}

#[test]
fn matrix_is_triangular_and_nilpotent_at_the_matched_weight() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_file(
        dir.path(),
        "f.json",
        r#"{"dim":1,"terms":[{"lambda":[["1/2","0"]],"coeffs":[{"alpha":[2],"c":["1","0"]}]}]}"#,
    );
    let (code, json) = run(&["matrix", "--f", &f, "--shifts", "[[1]]"]);
    assert_eq!(code, Some(0));
    assert_eq!(json["degree_bound"], 2);
    assert_eq!(json["upper_triangular"], Value::Bool(true));
    assert_eq!(json["matrix"]["size"], 3);
    for d in json["diagonal"].as_array().unwrap() {
        assert_eq!(d, &serde_json::json!(["0", "0"]));
    }
}

#[test]
fn malformed_inline_json_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let f = write_file(dir.path(), "f.json", N_TIMES_2N);
    let (code, json) = run(&["verify", "--f", &f, "--shifts", "nope"]);
    assert_eq!(code, Some(2));
    assert_eq!(json["error"], "invalid_input");
    assert!(json["detail"].as_str().unwrap().contains("--shifts"));
}

#[test]
fn missing_subject_is_a_usage_error() {
    let (code, json) = run(&["verify", "--shifts", "[[1]]"]);
    assert_eq!(code, Some(2));
    assert_eq!(json["error"], "invalid_input");
}

#[test]
fn unreadable_file_is_a_usage_error() {
    let (code, json) = run(&["eval", "--f", "/nonexistent/f.json", "--shifts", "[[0]]"]);
    assert_eq!(code, Some(2));
    assert_eq!(json["error"], "invalid_input");
}
