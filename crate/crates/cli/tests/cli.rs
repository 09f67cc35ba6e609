use std::path::PathBuf;
use std::process::Command;

use serde_json::Value;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn run(args: &[&str]) -> (i32, Value) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let out = Command::new(env!("CARGO_BIN_EXE_curvature"))
        .args(args)
        .arg("--report")
        .arg(&path)
        .output()
        .unwrap();
    let code = out.status.code().unwrap();
    let text = std::fs::read_to_string(&path).unwrap_or_else(|_| panic!("no report; stderr {}", String::from_utf8_lossy(&out.stderr)));
    (code, serde_json::from_str(&text).unwrap())
}

fn arg(p: PathBuf) -> String {
    p.to_string_lossy().into_owned()
}

#[test]
fn sense_binomial_power_collapses() {
    let (m, u) = (arg(data("binomial.json")), arg(data("power2.json")));
    let (code, rep) = run(&["sense", "--model", &m, "--utility", &u, "--capital", "1"]);
    assert_eq!(code, 0, "{rep:#}");
    assert_eq!(rep["schema"], 1);
    assert!((rep["result"]["a"].as_f64().unwrap() - 2.0).abs() < 1e-12);
    let residuals = rep["residuals"].as_object().unwrap();
    for name in ["engine.reciprocity", "engine.proportionality", "engine.constant_rra.alpha_hat", "engine.martingale.x_yp"] {
        assert!(residuals.contains_key(name), "missing {name}");
    }
}

#[test]
fn sense_with_fd_oracle_on_incomplete_market() {
    let (m, u) = (arg(data("trinomial.json")), arg(data("blend.json")));
    let (code, rep) = run(&["sense", "--model", &m, "--utility", &u, "--fd-ladder"]);
    assert_eq!(code, 0, "{rep:#}");
    assert_eq!(rep["result"]["dim_complement"], 1);
    assert!(rep["residuals"]["fd.u2"]["pass"].as_bool().unwrap());
}

#[test]
fn solve_on_arbitrage_model_returns_certificate() {
    let (m, u) = (arg(data("arbitrage.json")), arg(data("power2.json")));
    let (code, rep) = run(&["solve", "--model", &m, "--utility", &u]);
    assert_eq!(code, 3);
    assert_eq!(rep["error"]["kind"], "arbitrage");
    assert!(rep["error"]["certificate"].is_object());
}

#[test]
fn validate_reports_structure() {
    let (code, rep) = run(&["validate", "--model", &arg(data("binomial.json"))]);
    assert_eq!(code, 0);
    assert_eq!(rep["result"]["leaves"], 4);
    let (code, rep) = run(&["validate", "--model", &arg(data("broken.json"))]);
    assert_eq!(code, 3);
    assert_eq!(rep["error"]["kind"], "invalid_tree");
}

#[test]
fn solve_with_value_curve() {
    let (m, u) = (arg(data("binomial.json")), arg(data("blend.json")));
    let (code, rep) = run(&["solve", "--model", &m, "--utility", &u, "--grid", "0.5,1,2"]);
    assert_eq!(code, 0, "{rep:#}");
    assert_eq!(rep["result"]["value_curve"]["samples"].as_array().unwrap().len(), 3);
}

#[test]
fn tightened_tolerance_fails_with_code_two() {
    let (m, u) = (arg(data("trinomial.json")), arg(data("blend.json")));
    let (code, rep) = run(&["sense", "--model", &m, "--utility", &u, "--fd-ladder", "--tol", "fd.u2=1e-300"]);
    assert_eq!(code, 2);
    assert!(!rep["residuals"]["fd.u2"]["pass"].as_bool().unwrap());
}

#[test]
fn bad_grid_is_an_input_error() {
    let (m, u) = (arg(data("binomial.json")), arg(data("power2.json")));
    let (code, rep) = run(&["solve", "--model", &m, "--utility", &u, "--grid", "2,1"]);
    assert_eq!(code, 3);
    assert_eq!(rep["error"]["kind"], "config");
}

#[test]
fn atlas_example4_table() {
    let (code, rep) = run(&["atlas", "--example", "4"]);
    assert_eq!(code, 0, "{rep:#}");
    let xp: Vec<f64> = rep["result"]["xp_terminal"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    for (a, b) in xp.iter().zip([-1.0 / 6.0, 0.0, 1.0 / 3.0, 7.0 / 3.0]) {
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn atlas_example1_ladder() {
    let (code, rep) = run(&["atlas", "--example", "1", "--levels", "10,20,40"]);
    assert_eq!(code, 0, "{rep:#}");
    assert!((rep["ladder"]["exponent"].as_f64().unwrap() - 3.0).abs() < 0.2);
}

#[test]
fn audit_is_deterministic() {
    let (c1, r1) = run(&["audit", "--count", "5", "--seed", "11"]);
    let (c2, r2) = run(&["audit", "--count", "5", "--seed", "11"]);
    assert_eq!(c1, 0);
    assert_eq!(c2, 0);
    assert_eq!(serde_json::to_string(&r1["result"]).unwrap(), serde_json::to_string(&r2["result"]).unwrap());
}

#[test]
fn text_table_is_printed() {
    let out = Command::new(env!("CARGO_BIN_EXE_curvature")).args(["atlas", "--example", "2", "--levels", "8,16,32"]).output().unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("exponent"));
    assert!(text.lines().any(|l| l.starts_with("residual")));
}

#[test]
fn atlas_example3_bias_safe_window_passes() {
    let (code, rep) = run(&["atlas", "--example", "3", "--levels", "16", "--window", "1.953125e-3,1e-2"]);
    assert_eq!(code, 0, "{rep:#}");
    let (code, _) = run(&["atlas", "--example", "3", "--levels", "16", "--bias-safe"]);
    assert_eq!(code, 0);
}
