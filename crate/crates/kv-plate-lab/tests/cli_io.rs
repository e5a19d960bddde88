//! End-to-end checks of the command-line surface: exit codes, file formats,
//! and bit-level determinism.

use std::path::Path;
use std::process::Command;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_kv-plate-lab")
}

fn run_in(dir: &Path, args: &[&str]) -> (i32, String, String) {
    let out = Command::new(bin())
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn small_config(dir: &Path) -> String {
    let p = dir.join("config.json");
    std::fs::write(
        &p,
        r#"{"numerics": {"n_cells": 60, "dt": 0.01, "t_final": 2.0},
            "sweep": {"mu_min": 5.0, "mu_max": 50.0, "points": 6}}"#,
    )
    .unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn model_show_prints_resolved_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let (code, stdout, _) = run_in(dir.path(), &["model", "--show"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(v["model"]["interface_left"], 0.3);
    assert_eq!(v["numerics"]["n_cells"], 200);
    assert_eq!(v["sweep"]["mu_max"], 400.0);
}

#[test]
fn unknown_subcommand_exits_one_with_usage() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, stderr) = run_in(dir.path(), &["frobnicate"]);
    assert_eq!(code, 1);
    assert!(stderr.contains("Usage"));
}

#[test]
fn invalid_config_field_exits_one_with_message() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"model": {"c1": -1.0}}"#).unwrap();
    let (code, _, stderr) = run_in(dir.path(), &["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(stderr.contains("c1"), "stderr: {stderr}");

    let cfg2 = dir.path().join("unknown.json");
    std::fs::write(&cfg2, r#"{"modle": {}}"#).unwrap();
    let (code, _, _) = run_in(dir.path(), &["model", "--config", cfg2.to_str().unwrap()]);
    assert_eq!(code, 1);
}

#[test]
fn simulate_writes_monotone_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let (code, _, _) = run_in(
        dir.path(),
        &["simulate", "--config", &cfg, "--out", "trace.csv"],
    );
    assert_eq!(code, 0);
    let text = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,energy,cumulative_dissipation,identity_residual"
    );
    let energies: Vec<f64> = lines
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(energies.len() > 100);
    let e0 = energies[0];
    for k in 1..energies.len() {
        assert!(energies[k] <= energies[k - 1] + 1e-10 * e0);
    }
}

#[test]
fn weights_output_is_bit_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["w1.json", "w2.json"] {
        let (code, _, stderr) = run_in(
            dir.path(),
            &[
                "weights", "--hole-x", "0.3", "--hole-r", "0.2", "--seed", "7", "--out", out,
            ],
        );
        assert_eq!(code, 0, "stderr: {stderr}");
    }
    let a = std::fs::read(dir.path().join("w1.json")).unwrap();
    let b = std::fs::read(dir.path().join("w2.json")).unwrap();
    assert_eq!(a, b);
    let v: serde_json::Value = serde_json::from_slice(&a).unwrap();
    assert!(v["certificates"][0]["lambda_used"].as_f64().unwrap() <= 1024.0);
    assert!(v["certificates"][0]["min_bracket"].as_f64().unwrap() > 0.0);
}

#[test]
fn report_assembles_sections_and_handles_missing_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let (code, _, _) = run_in(
        dir.path(),
        &["simulate", "--config", &cfg, "--out", "trace.csv"],
    );
    assert_eq!(code, 0);
    let (code, _, _) = run_in(
        dir.path(),
        &["carleman", "--config", &cfg, "--out", "ratio.csv"],
    );
    assert_eq!(code, 0);

    // missing sweep.csv: explicit null section, still a success
    let (code, _, _) = run_in(
        dir.path(),
        &[
            "report",
            "--trace",
            "trace.csv",
            "--ratio",
            "ratio.csv",
            "--sweep",
            "sweep.csv",
            "--out",
            "summary.json",
        ],
    );
    assert_eq!(code, 0);
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap())
            .unwrap();
    assert!(v["resolvent"].is_null());
    assert!(v["energy"]["monotone"].as_bool().unwrap());
    assert!(v["carleman_ratio"]["ratio_min"].as_f64().unwrap() > 0.0);

    // empty trace file: hard error
    std::fs::write(
        dir.path().join("empty.csv"),
        "t,energy,cumulative_dissipation,identity_residual\n",
    )
    .unwrap();
    let (code, _, _) = run_in(dir.path(), &["report", "--trace", "empty.csv"]);
    assert_eq!(code, 1);
}

#[test]
fn resolvent_csv_has_expected_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let (code, _, _) = run_in(
        dir.path(),
        &["resolvent", "--config", &cfg, "--out", "sweep.csv"],
    );
    assert_eq!(code, 0);
    let text = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert!(text.starts_with("mu,norm,log_norm,iterations\n"));
    assert_eq!(text.lines().count(), 7);
}
