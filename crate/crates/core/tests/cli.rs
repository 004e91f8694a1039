use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const FIGURE_ONE: &str = r#"{"lambda": 1.1, "mu": 1.0, "theta": 20.0, "zeta": 20.0,
    "R": 4.0, "C": 1.0, "fe": 0.0, "fs": 0.0, "r": -30.0}"#;

fn altq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_altq"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn solve_prints_equilibrium() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "p.json", FIGURE_ONE);
    let v = json(&altq(&["solve", "--config", cfg.to_str().unwrap()]));
    assert_eq!(v["method"], "qbd");
    let q = v["q_e"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&q));
    for key in ["case", "n_e", "n_s", "mu_e", "a_e", "EN", "S_e"] {
        assert!(!v[key].is_null(), "missing {key}");
    }
}

#[test]
fn both_methods_agree() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "p.json", FIGURE_ONE);
    let v = json(&altq(&["solve", "--config", cfg.to_str().unwrap(), "--method", "both"]));
    assert!(v["q_e_difference"].as_f64().unwrap() <= 1e-8);
    assert_eq!(v["qbd"]["n_s"], v["genfunc"]["n_s"]);
}

#[test]
fn sweep_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "p.json", FIGURE_ONE);
    let out = dir.path().join("gamma.csv");
    let status = altq(&[
        "sweep",
        "--family",
        "gamma",
        "--config",
        cfg.to_str().unwrap(),
        "--grid",
        "0.1:0.9:0.2",
        "--B",
        "0.1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(status.status.success());
    let text = std::fs::read_to_string(out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), altq::experiments::CSV_HEADER);
    assert_eq!(lines.count(), 5);
}

#[test]
fn simulate_reports_estimates() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "p.json", FIGURE_ONE);
    let args = [
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--q",
        "0.5",
        "--events",
        "20000",
        "--reps",
        "3",
    ];
    let a = altq(&args);
    let v = json(&a);
    assert!(v["estimates"]["mu_e"]["mean"].as_f64().unwrap() > 0.0);
    assert_eq!(a.stdout, altq(&args).stdout);
}

#[test]
fn invalid_input_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let trivial = config(
        dir.path(),
        "trivial.json",
        r#"{"lambda": 1, "mu": 1, "theta": 1, "zeta": 1, "R": 1, "C": 1, "fe": 0, "fs": 0, "r": 0}"#,
    );
    let unknown = config(dir.path(), "unknown.json", &FIGURE_ONE.replace("\"mu\"", "\"nu\""));
    for cfg in [trivial, unknown] {
        let out = altq(&["solve", "--config", cfg.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let out = altq(&["solve", "--config", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn runtime_failure_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "p.json", FIGURE_ONE);
    let out = dir.path().join("no/such/dir/out.csv");
    let status = altq(&[
        "sweep",
        "--family",
        "refund",
        "--config",
        cfg.to_str().unwrap(),
        "--grid",
        "0:0.5:0.5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(status.status.code(), Some(3));
}
