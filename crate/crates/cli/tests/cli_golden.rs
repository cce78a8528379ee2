//! End-to-end runs of the `recomb` binary against golden values of the
//! worked three-site model, plus degenerate and error paths.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn binary() -> &'static str {
    env!("CARGO_BIN_EXE_recomb")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    Command::new(binary()).args(args).output().unwrap()
}

fn stdout_json(output: &Output) -> Value {
    serde_json::from_slice(&output.stdout).unwrap_or_else(|_| {
        panic!(
            "stdout is not JSON: {}\nstderr: {}",
            String::from_utf8_lossy(&output.stdout),
            String::from_utf8_lossy(&output.stderr)
        )
    })
}

const E1: &str = r#"{
  "sites": 3,
  "weights": [
    ["{1,2,3}", "1/5"],
    ["{1}{2,3}", "1/2"],
    ["{1,2}{3}", "3/10"]
  ],
  "measure": {"type": "random", "seed": 42},
  "mode": "exact"
}"#;

#[test]
fn closure_lists_the_four_states_and_the_absorbing_partition() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "model.json", E1);
    let out = dir.path().join("out");
    let result = run(&[
        "closure",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(result.status.success());
    let summary = stdout_json(&result);
    assert_eq!(summary["count"], 4);
    assert_eq!(summary["absorbing"], "{1}{2}{3}");

    let file: Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("closure.json")).unwrap()).unwrap();
    assert_eq!(file["states"].as_array().unwrap().len(), 4);
    assert_eq!(file["absorbing"], "{1}{2}{3}");
}

#[test]
fn qsd_report_carries_the_golden_values() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "model.json", E1);
    let out = dir.path().join("out");
    let result = run(&[
        "qsd",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(result.status.success());
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("qsd.json")).unwrap()).unwrap();
    assert_eq!(report["degenerate"], false);
    assert_eq!(report["eta"], "7/10");
    assert_eq!(report["beta0"], "1/2");
    assert_eq!(report["F"], serde_json::json!(["{1}{2,3}"]));
    assert_eq!(report["limitConstant"], "1");
    assert_eq!(
        report["Q"]["rows"],
        serde_json::json!([["2/7", "5/7"], ["0", "1"]])
    );
    assert_eq!(report["quasiLimiting"]["{1}{2,3}"], "1");
    assert_eq!(report["phi"]["{1,2}{3}"], "0");
}

#[test]
fn matrix_csv_round_trips_partition_strings() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "model.json", E1);
    let out = dir.path().join("out");
    assert!(run(&[
        "matrix",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ])
    .status
    .success());

    let mut reader = csv::Reader::from_path(out.join("matrix.csv")).unwrap();
    let header: Vec<String> =
        reader.headers().unwrap().iter().map(str::to_string).collect();
    assert_eq!(header[0], "state");
    for text in &header[1..] {
        let partition = recomb_core::partitions::Partition::parse(text).unwrap();
        assert_eq!(partition.to_string(), *text);
    }
    // Worked rows: the coarsest state row in column order.
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 4);
    let coarsest = &rows[0];
    assert_eq!(&coarsest[0], "{1,2,3}");
    let by_name: std::collections::HashMap<&str, &str> = header[1..]
        .iter()
        .map(String::as_str)
        .zip(coarsest.iter().skip(1))
        .collect();
    assert_eq!(by_name["{1,2,3}"], "1/5");
    assert_eq!(by_name["{1}{2,3}"], "1/2");
    assert_eq!(by_name["{1,2}{3}"], "3/10");
    assert_eq!(by_name["{1}{2}{3}"], "0");
}

#[test]
fn evolve_cross_check_passes_and_reports_survival() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "model.json", E1);
    let out = dir.path().join("out");
    let result = run(&[
        "evolve",
        "--steps",
        "6",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(result.status.success());
    let summary = stdout_json(&result);
    assert_eq!(summary["chainMixtureCheck"]["pass"], true);
    let csv_text = std::fs::read_to_string(out.join("evolve.csv")).unwrap();
    let lines: Vec<&str> = csv_text.lines().collect();
    assert_eq!(lines.len(), 8); // header + n = 0..=6
    assert!(lines[1].ends_with(",1")); // survival at n = 0
}

#[test]
fn identity_model_is_flagged_degenerate_with_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "model.json",
        r#"{"sites": 3, "weights": [["{1,2,3}", "1"]]}"#,
    );
    let out = dir.path().join("out");
    let result = run(&[
        "qsd",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(result.status.success());
    let summary = stdout_json(&result);
    assert_eq!(summary["degenerate"], true);
    assert_eq!(summary["absorptionBound"], 0);

    let matrix = run(&[
        "matrix",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(matrix.status.success());
    assert_eq!(stdout_json(&matrix)["degenerate"], true);
}

#[test]
fn verify_is_green_on_the_worked_model() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "model.json", E1);
    let out = dir.path().join("out");
    let result = run(&[
        "verify",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(result.status.success());
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("verify.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], true);
    assert!(report["checks"].as_array().unwrap().len() >= 10);
}

#[test]
fn verify_reports_the_decomposition_failure_on_a_crossing_support() {
    // Two weighted partitions with two non-singleton atoms each: the
    // chain-mixture decomposition is genuinely false there, and verify
    // must say so and exit nonzero.
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "model.json",
        r#"{
          "sites": 4,
          "weights": [["{1}{2}{3}{4}", "1/2"], ["{1,2}{3,4}", "1/2"]],
          "measure": {"type": "random", "seed": 5}
        }"#,
    );
    let out = dir.path().join("out");
    let result = run(&[
        "verify",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(result.status.code(), Some(1));
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("verify.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], false);
    let failing: Vec<&str> = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["pass"] == false)
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert_eq!(failing, ["chain_mixture_decomposition"]);
}

#[test]
fn simulate_is_reproducible_and_close_to_exact() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "model.json", E1);
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        let result = run(&[
            "simulate",
            "--seeds",
            "5000",
            "--horizon",
            "8",
            "--seed",
            "123",
            "--config",
            config.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(result.status.success());
    }
    let a = std::fs::read_to_string(out_a.join("simulate.csv")).unwrap();
    let b = std::fs::read_to_string(out_b.join("simulate.csv")).unwrap();
    assert_eq!(a, b, "same base seed must give bit-identical estimates");
}

#[test]
fn float_mode_emits_numbers_instead_of_strings() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "model.json", E1);
    let out = dir.path().join("out");
    let result = run(&[
        "qsd",
        "--mode",
        "float",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(result.status.success());
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("qsd.json")).unwrap()).unwrap();
    let eta = report["eta"].as_f64().unwrap();
    assert!((eta - 0.7).abs() < 1e-12);
}

#[test]
fn malformed_config_yields_machine_readable_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "model.json", r#"{"sites": 3}"#);
    let result = run(&["qsd", "--config", config.to_str().unwrap()]);
    assert_eq!(result.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&result.stderr).unwrap();
    assert!(err["error"].as_str().unwrap().contains("weights"));
}

#[test]
fn weight_partitions_must_match_the_site_count() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "model.json",
        r#"{"sites": 3, "weights": [["{1,2}", "1"]]}"#,
    );
    let result = run(&["matrix", "--config", config.to_str().unwrap()]);
    assert_eq!(result.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&result.stderr).unwrap();
    assert!(err["error"].as_str().unwrap().contains("covers 2 sites"));
}

#[test]
fn state_cap_violation_reports_the_partial_count() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "model.json", E1);
    let result = run(&[
        "closure",
        "--state-cap",
        "2",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(result.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&result.stderr).unwrap();
    assert!(err["error"].as_str().unwrap().contains("cap exceeded"));
}
