//! End-to-end checks of the command-line surface: exit codes, report
//! shapes, determinism of emitted files, and the seed environment override.

use assert_cmd::Command;
use predicates::prelude::*;
use std::fs;

fn wde() -> Command {
    Command::cargo_bin("wde").unwrap()
}

fn write_scenario(dir: &tempfile::TempDir, name: &str, body: &str) -> String {
    let path = dir.path().join(name);
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

const UNIT_1D: &str = r#"{
  "matrices": {"C": {"dim": 1, "rows": [[1.0]]}},
  "wf": {"type": "constant", "c": 1.0}
}"#;

const KYFAN_TILTED: &str = r#"{
  "matrices": {
    "C1": {"dim": 2, "rows": [[1.0, 0.2], [0.2, 0.8]]},
    "C2": {"dim": 2, "rows": [[2.0, -0.3], [-0.3, 1.5]]}
  },
  "wf": {"type": "exp_tilt", "t": [0.1, -0.1]},
  "lambda": 0.4
}"#;

#[test]
fn entropy_unit_model() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(&dir, "s.json", UNIT_1D);
    wde()
        .args(["entropy", "--scenario", &path])
        .assert()
        .success()
        .stdout(predicate::str::contains("1.4189385332046727"));
}

#[test]
fn moments_reports_alpha_and_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(&dir, "s.json", UNIT_1D);
    let out = wde()
        .args(["moments", "--scenario", &path])
        .assert()
        .success();
    let body: serde_json::Value = serde_json::from_slice(&out.get_output().stdout).unwrap();
    assert_eq!(body["result"]["alpha"]["value"], 1.0);
    assert_eq!(body["result"]["phi"]["values"]["rows"][0][0], 1.0);
    assert_eq!(body["result"]["phi"]["values"]["dim"], 1);
}

#[test]
fn verify_identity_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(
        &dir,
        "s.json",
        r#"{
          "matrices": {"C": {"dim": 2, "rows": [[2.0, 1.0], [1.0, 2.0]]}},
          "wf": {"type": "constant", "c": 1.0}
        }"#,
    );
    let out = wde()
        .args(["verify", "Identity6.7", "--scenario", &path])
        .assert()
        .success();
    let body: serde_json::Value = serde_json::from_slice(&out.get_output().stdout).unwrap();
    let margin = body["result"]["margin"]["value"].as_f64().unwrap();
    assert!(margin.abs() < 1e-9);
}

/// A failing prerequisite does not fail the run when the inequality itself
/// holds; the note records the failure.
#[test]
fn verify_with_failed_prerequisite_still_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(&dir, "s.json", KYFAN_TILTED);
    let out = wde()
        .args(["verify", "KyFanW", "--scenario", &path])
        .assert()
        .success();
    let body: serde_json::Value = serde_json::from_slice(&out.get_output().stdout).unwrap();
    assert!(body["result"]["margin"]["value"].as_f64().unwrap() >= 0.0);
    assert_eq!(body["result"]["prerequisites"][0]["verdict"], "Fails");
    assert!(body["result"]["note"]
        .as_str()
        .unwrap()
        .contains("prerequisite C1.6 failed"));
}

#[test]
fn check_reports_parts_and_verdict_exit() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(&dir, "s.json", KYFAN_TILTED);
    // The balance condition fails on this scenario: exit code 1.
    let out = wde()
        .args(["check", "C1.6", "--scenario", &path])
        .assert()
        .code(1);
    let body: serde_json::Value = serde_json::from_slice(&out.get_output().stdout).unwrap();
    assert_eq!(body["result"]["parts"].as_array().unwrap().len(), 2);
}

#[test]
fn sweep_csv_has_contracted_columns() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(&dir, "s.json", KYFAN_TILTED);
    let out = wde()
        .args([
            "sweep",
            "KyFanW",
            "--scenario",
            &path,
            "--axis",
            "t",
            "--grid",
            "0:0.4:0.2",
            "--format",
            "csv",
        ])
        .assert();
    let stdout = String::from_utf8(out.get_output().stdout.clone()).unwrap();
    let mut lines = stdout.lines();
    assert_eq!(
        lines.next().unwrap(),
        "grid_value,margin,margin_stderr,condition_verdict,inequality_verdict"
    );
    assert_eq!(lines.count(), 3);
}

#[test]
fn identical_configuration_produces_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(&dir, "s.json", KYFAN_TILTED);
    let out1 = dir.path().join("r1.json");
    let out2 = dir.path().join("r2.json");
    for out in [&out1, &out2] {
        wde()
            .args([
                "verify",
                "KyFanW",
                "--scenario",
                &path,
                "--samples",
                "5000",
                "--seed",
                "7",
                "--out",
                &out.to_string_lossy(),
            ])
            .assert()
            .success();
    }
    assert_eq!(fs::read(&out1).unwrap(), fs::read(&out2).unwrap());
}

#[test]
fn malformed_scenario_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(&dir, "bad.json", "{\"matrices\": ");
    wde()
        .args(["entropy", "--scenario", &path])
        .assert()
        .code(64)
        .stderr(predicate::str::contains("line"));
}

#[test]
fn unknown_scenario_key_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(
        &dir,
        "s.json",
        r#"{"matrices": {}, "wf": {"type": "constant", "c": 1.0}, "lambada": 0.5}"#,
    );
    wde()
        .args(["entropy", "--scenario", &path])
        .assert()
        .code(64);
}

#[test]
fn missing_required_field_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(&dir, "s.json", UNIT_1D);
    wde()
        .args(["verify", "KyFanW", "--scenario", &path])
        .assert()
        .code(64)
        .stderr(predicate::str::contains("matrices.C1"));
}

#[test]
fn unknown_id_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(&dir, "s.json", UNIT_1D);
    wde()
        .args(["verify", "NoSuchBound", "--scenario", &path])
        .assert()
        .code(64)
        .stderr(predicate::str::contains("unknown id"));
}

/// The environment variable overrides only the default seed.
#[test]
fn seed_environment_override() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(&dir, "s.json", UNIT_1D);
    let report = |cmd: &mut Command| -> serde_json::Value {
        let out = cmd.assert().success();
        serde_json::from_slice(&out.get_output().stdout).unwrap()
    };
    let via_env = report(
        wde()
            .args(["entropy", "--scenario", &path])
            .env("WDE_SEED", "123"),
    );
    assert_eq!(via_env["config"]["seed"], 123);
    let via_flag = report(
        wde()
            .args(["entropy", "--scenario", &path, "--seed", "9"])
            .env("WDE_SEED", "123"),
    );
    assert_eq!(via_flag["config"]["seed"], 9);
}

#[test]
fn selftest_passes_and_lists_batteries() {
    let out = wde()
        .args(["selftest", "--samples", "20000"])
        .assert()
        .success();
    let body: serde_json::Value = serde_json::from_slice(&out.get_output().stdout).unwrap();
    assert_eq!(body["result"]["batteries"].as_array().unwrap().len(), 2);
    assert_eq!(body["result"]["pass"], true);
}

#[test]
fn list_covers_both_registries() {
    let out = wde().arg("list").assert().success();
    let body: serde_json::Value = serde_json::from_slice(&out.get_output().stdout).unwrap();
    assert_eq!(body["conditions"].as_array().unwrap().len(), 14);
    assert_eq!(body["inequalities"].as_array().unwrap().len(), 22);
}
