//! End-to-end behavior of the installed binary: exit codes, artifact shape,
//! reproducibility, and the config-over-flags precedence.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn pdmp(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pdmp"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn read_json(path: &Path) -> serde_json::Value {
    let text = fs::read_to_string(path).expect("artifact exists");
    serde_json::from_str(&text).expect("artifact is json")
}

#[test]
fn validate_passes_for_a_builtin_model() {
    let tmp = tempfile::tempdir().unwrap();
    let out = pdmp(
        tmp.path(),
        &["validate", "--model", "linear1d", "--lambda", "1", "--seed", "1", "--out", "v"],
    );
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let report = read_json(&tmp.path().join("v/validation.json"));
    for check in report["checks"].as_array().unwrap() {
        assert_eq!(check["passed"], true, "failed check: {check}");
    }
    let manifest = read_json(&tmp.path().join("v/manifest.json"));
    assert_eq!(manifest["command"], "validate");
    assert_eq!(manifest["seed"], 1);
}

#[test]
fn check_reports_the_known_criterion_values() {
    let tmp = tempfile::tempdir().unwrap();
    let out = pdmp(
        tmp.path(),
        &["check", "--model", "linear1d", "--lambda", "1", "--seed", "1", "--out", "c"],
    );
    assert!(out.status.success());

    let report = read_json(&tmp.path().join("c/check.json"));
    let criterion = &report["criterion"];
    assert_eq!(criterion["satisfied"], true);
    assert!((criterion["lhs"].as_f64().unwrap() - -0.5).abs() < 1e-12);
    assert!((criterion["beta"].as_f64().unwrap() - 0.25).abs() < 1e-12);
}

#[test]
fn fm_of_a_measure_with_itself_is_zero() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("a.csv"), "weight,x0\n0.5,1.0\n0.5,2.0\n").unwrap();
    let out = pdmp(tmp.path(), &["fm", "--a", "a.csv", "--b", "a.csv", "--seed", "1"]);
    assert!(out.status.success());

    let report = read_json(&tmp.path().join("out/fm.json"));
    assert_eq!(report["value"].as_f64().unwrap(), 0.0);
}

#[test]
fn usage_errors_exit_64() {
    let tmp = tempfile::tempdir().unwrap();
    let unknown_cmd = pdmp(tmp.path(), &["frobnicate"]);
    assert_eq!(unknown_cmd.status.code(), Some(64));

    let unknown_flag = pdmp(tmp.path(), &["validate", "--frobnicate"]);
    assert_eq!(unknown_flag.status.code(), Some(64));
}

#[test]
fn missing_seed_or_lambda_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let no_seed = pdmp(tmp.path(), &["validate", "--model", "linear1d", "--lambda", "1"]);
    assert_eq!(no_seed.status.code(), Some(78));
    assert!(String::from_utf8_lossy(&no_seed.stderr).contains("seed"));

    let no_lambda = pdmp(tmp.path(), &["validate", "--model", "linear1d", "--seed", "1"]);
    assert_eq!(no_lambda.status.code(), Some(78));
    assert!(String::from_utf8_lossy(&no_lambda.stderr).contains("lambda"));
}

#[test]
fn malformed_config_files_exit_78() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("broken.json"), "{ not json").unwrap();
    let broken = pdmp(
        tmp.path(),
        &["validate", "--model", "linear1d", "--lambda", "1", "--seed", "1", "--config", "broken.json"],
    );
    assert_eq!(broken.status.code(), Some(78));

    fs::write(tmp.path().join("extra.json"), r#"{"seed": 1, "frobnicate": 2}"#).unwrap();
    let extra = pdmp(
        tmp.path(),
        &["validate", "--model", "linear1d", "--lambda", "1", "--config", "extra.json"],
    );
    assert_eq!(extra.status.code(), Some(78));
    assert!(String::from_utf8_lossy(&extra.stderr).contains("frobnicate"));
}

#[test]
fn a_bad_observable_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = pdmp(
        tmp.path(),
        &[
            "lln", "--model", "linear1d", "--lambda", "1", "--seed", "1",
            "--f", "frobnicate:0", "--n", "10",
        ],
    );
    assert_eq!(out.status.code(), Some(78));
    assert!(String::from_utf8_lossy(&out.stderr).contains("observable"));
}

#[test]
fn a_model_that_violates_its_certificate_fails_validation() {
    let tmp = tempfile::tempdir().unwrap();
    // True averaged flow bound is 1.0; the certificate claims 0.1.
    let model = r#"{
        "lambda": 1.0,
        "dimension": 1,
        "flows": [{"type": "affine_exp", "rate": [-0.5], "target": [0.0]}],
        "jumps": [{"type": "affine", "scale": [0.5], "shift": [1.0]}],
        "initial_flow": [1.0],
        "flow_matrix": [[1.0]],
        "jump_dist": [1.0],
        "constants": {
            "flow_lip": 0.1, "flow_rate": -0.5, "jump_lip": 0.5,
            "switch_lip": 0.0, "jump_prob_lip": 0.0,
            "switch_overlap": 1.0, "jump_overlap": 1.0,
            "anchor": [2.0], "provenance": "Analytic"
        }
    }"#;
    fs::write(tmp.path().join("model.json"), model).unwrap();
    let out = pdmp(tmp.path(), &["validate", "--model", "model.json", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(2));

    let report = read_json(&tmp.path().join("out/validation.json"));
    let cert = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == "constants-certificate")
        .expect("certificate check present");
    assert_eq!(cert["passed"], false);
}

#[test]
fn artifacts_are_bytewise_reproducible() {
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    let args =
        ["simulate", "--model", "genetoggle", "--lambda", "1", "--seed", "5", "--n", "200"];
    assert!(pdmp(first.path(), &args).status.success());
    assert!(pdmp(second.path(), &args).status.success());

    for name in ["out/trajectory.csv", "out/manifest.json"] {
        let a = fs::read(first.path().join(name)).unwrap();
        let b = fs::read(second.path().join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
}

#[test]
fn a_config_file_overrides_flags() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("run.json"), r#"{"seed": 9, "simulate": {"n": 7}}"#).unwrap();
    let out = pdmp(
        tmp.path(),
        &[
            "simulate", "--model", "linear1d", "--lambda", "1",
            "--seed", "1", "--n", "100", "--config", "run.json",
        ],
    );
    assert!(out.status.success());

    let manifest = read_json(&tmp.path().join("out/manifest.json"));
    assert_eq!(manifest["seed"], 9);
    assert_eq!(manifest["config"]["effective"]["n"], 7);
    let rows = fs::read_to_string(tmp.path().join("out/trajectory.csv")).unwrap();
    assert_eq!(rows.lines().count(), 8, "header plus the seven configured steps");
}
