use std::io::Write;
use std::process::{Command, Output};

use serde_json::Value;

fn cgw(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cgw")).args(args).output().expect("binary runs")
}

fn json(args: &[&str]) -> Value {
    let out = cgw(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("valid JSON")
}

#[test]
fn enumerate_counts_catalan() {
    let v = json(&["enumerate", "--n-arcs", "4"]);
    assert_eq!(v["schema"], 1);
    assert_eq!(v["count"], 14);
    assert_eq!(v["diagrams"].as_array().unwrap().len(), 14);
}

#[test]
fn crossing_sums_to_one() {
    let v = json(&["crossing", "--basis", "1", "--kappa", "5", "--n-arcs", "2", "--points", "0,1,2,3"]);
    let p: Vec<f64> = v["probs"].as_array().unwrap().iter().map(|p| p.as_f64().unwrap()).collect();
    assert_eq!(p.len(), 2);
    assert!((p[0] + p[1] - 1.0).abs() < 1e-14);
    assert!(p.iter().all(|p| *p > 0.0));
}

#[test]
fn cft_reports_minimal_model() {
    let v = json(&["cft", "--kappa", "6"]);
    assert_eq!(v["c"].as_f64().unwrap(), 0.0);
    assert_eq!(v["minimal_model"]["p"], 3);
    assert_eq!(v["minimal_model"]["p_prime"], 2);
    assert_eq!(v["facts"]["fact"], 2);
    let v = json(&["cft", "--kappa", "20/13"]);
    assert_eq!(v["minimal_model"]["p"], 13);
    assert_eq!(v["minimal_model"]["p_prime"], 5);
    assert_eq!(v["facts"]["fact"], 3);
    // 51/10 = 4 * 51/40 is exceptional from N = 50 on.
    let v = json(&["cft", "--kappa", "5.1"]);
    assert_eq!(v["facts"]["min_n_arcs"], 50);
    let v = json(&["cft", "--kappa", "5.123456789"]);
    assert_eq!(v["facts"]["exceptional"], false);
}

#[test]
fn eval_at_kappa_six_is_one() {
    let v = json(&["eval", "--kappa", "6", "--n-arcs", "2", "--connectivity", "2", "--conjugate", "3", "--points", "0,1,2,3"]);
    assert!((v["value"].as_f64().unwrap() - 1.0).abs() < 1e-10);
}

#[test]
fn exit_codes() {
    assert_eq!(cgw(&["eval", "--kappa", "9", "--connectivity", "1", "--points", "0,1"]).status.code(), Some(2));
    assert_eq!(cgw(&["bogus"]).status.code(), Some(2));
    assert_eq!(cgw(&["eval", "--kappa", "5", "--n-arcs", "3", "--connectivity", "1", "--points", "0,1,2,3"]).status.code(), Some(2));
    // Exceptional speed: the direct weight solve is refused.
    assert_eq!(cgw(&["weights", "--kappa", "6", "--points", "0,1,2,3"]).status.code(), Some(1));
    assert_eq!(cgw(&["enumerate", "--n-arcs", "3"]).status.code(), Some(0));
}

#[test]
fn verify_kappa6_suite_passes() {
    let out = cgw(&["verify", "--suite", "kappa6"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{text}");
    assert!(!text.contains("FAIL"));
}

#[test]
fn csv_sweep_and_determinism() {
    let args = ["--format", "csv", "weights", "--kappa", "5", "--points", "0,1,2,3", "--kappa-sweep", "5:5.5:3"];
    let a = cgw(&args);
    let b = cgw(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("kappa,pi1,pi2"));
    assert_eq!(lines.count(), 3);
}

#[test]
fn config_file_is_applied() {
    let mut f = tempfile::Builder::new().suffix(".toml").tempfile().unwrap();
    writeln!(f, "seed = 7\n[quad]\nrel_tol = 1e-8\n[ladder]\nn_points = 8").unwrap();
    let path = f.path().to_str().unwrap().to_string();
    let v = json(&["--config", &path, "limit", "--fn", "basis:1", "--interval", "1", "--kappa", "5", "--points", "0,1,2,3"]);
    assert_eq!(v["deltas"].as_array().unwrap().len(), 9);
    let mut bad = tempfile::Builder::new().suffix(".toml").tempfile().unwrap();
    writeln!(bad, "[ladder]\nratio = 2.0").unwrap();
    let out = cgw(&["--config", bad.path().to_str().unwrap(), "enumerate", "--n-arcs", "2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn limit_matches_meander_pairing() {
    // [L_1] F_1 = n^2 with n(5) = golden ratio.
    let v = json(&["limit", "--fn", "basis:1", "--connectivity", "1", "--kappa", "5", "--points", "0,1,2,3"]);
    let n = (1.0 + 5f64.sqrt()) / 2.0;
    assert!((v["value"].as_f64().unwrap() - n * n).abs() < 1e-3 * n * n);
}
