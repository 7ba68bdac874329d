use std::path::Path;
use std::process::Command;

const BIN: &str = env!("CARGO_BIN_EXE_kinlaw");

fn small_config(dir: &Path) -> std::path::PathBuf {
    let cfg = r#"{
        "name": "small",
        "chart": {"id": "decoupled"},
        "initial": {"kind": "two-jump", "left": [0.8, 0.0], "right": [-0.4, 0.0], "x0": 0.0, "x1": 1.0},
        "grid": {"nx": 128, "t_final": 1.0, "n_snapshots": 41},
        "epsilon": 0.02,
        "family": {"n_w": 33, "n_z": 33, "n_xi": 9, "n_zeta": 9},
        "diagnostics": {"bank_size": 8, "block_t": 4, "block_x": 8, "jump_radii_cells": [2.0, 4.0, 8.0],
                        "theta_relative": 0.25, "vmo_radii": [0.4, 0.2, 0.1], "window": [0.4, 0.6]}
    }"#;
    let p = dir.join("small.json");
    std::fs::write(&p, cfg).unwrap();
    p
}

fn kinlaw(args: &[&str]) -> std::process::Output {
    Command::new(BIN).args(args).env("KINLAW_THREADS", "1").output().unwrap()
}

#[test]
fn unknown_subcommand_exits_with_usage() {
    let o = kinlaw(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn bad_thread_count_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let o = Command::new(BIN)
        .args(["simulate", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()])
        .env("KINLAW_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn simulate_is_deterministic_and_report_aggregates() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = kinlaw(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for n in [0, 20, 40] {
        let f = format!("solution/snap_{n:05}.bin");
        assert_eq!(std::fs::read(a.join(&f)).unwrap(), std::fs::read(b.join(&f)).unwrap());
    }
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(a.join("manifest_simulate.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["name"], "small");

    let out = a.to_str().unwrap();
    for sub in ["kinetic", "qfunc", "jumpset", "vmo"] {
        let o = kinlaw(&[sub, "--config", cfg.to_str().unwrap(), "--out", out]);
        assert_eq!(o.status.code(), Some(0), "{sub}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let o = kinlaw(&["report", "--out", out]);
    assert_eq!(o.status.code(), Some(0));
    let md = std::fs::read_to_string(a.join("report.md")).unwrap();
    for section in ["Interaction functional", "Measure masses", "Jump set", "VMO flags"] {
        assert!(md.contains(section), "missing {section}");
    }
}

#[test]
fn numerical_failure_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    // Too close to t = 0 for the largest VMO radius.
    let o = kinlaw(&["vmo", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--t", "0.1", "--x", "1.0"]);
    assert_eq!(o.status.code(), Some(2));
}
