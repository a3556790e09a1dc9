use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn dfrelay(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dfrelay")).args(args).output().unwrap()
}

fn repo_file(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn fixture() -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures/gains_k16_n2.json")
        .display()
        .to_string()
}

/// A 16-subcarrier, two-relay config with a short sweep.
fn quick_config(dir: &Path, realizations: usize) -> String {
    let mut cfg: Value = serde_json::from_str(&std::fs::read_to_string(repo_file("configs/quick.json")).unwrap()).unwrap();
    cfg["experiment"]["realizations"] = realizations.into();
    cfg["experiment"]["powers_dbw"] = serde_json::json!([20.0, 40.0]);
    let path = dir.join("quick.json");
    std::fs::write(&path, cfg.to_string()).unwrap();
    path.display().to_string()
}

fn parse(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn solve_dual_on_fixture_is_feasible() {
    let report = parse(&dfrelay(&["solve-dual", "--gains", &fixture()]));
    assert_eq!(report["solver"], "dual");
    assert_eq!(report["feasible"], true);
    assert_eq!(report["respects_assisting_sets"], true);
    assert!(report["sum_rate"].as_f64().unwrap() > 0.0);
    assert_eq!(report["per_subcarrier_rate"].as_array().unwrap().len(), 16);
}

#[test]
fn every_solver_emits_a_feasible_allocation() {
    for cmd in ["solve-dual", "heuristic"] {
        let report = parse(&dfrelay(&[cmd, "--gains", &fixture()]));
        assert_eq!(report["feasible"], true, "{cmd}");
        for s in report["slack"].as_array().unwrap() {
            assert!(s.as_f64().unwrap() >= 0.0, "{cmd}");
        }
    }
}

#[test]
fn iterative_either_solves_or_reports_solver_failure() {
    let out = dfrelay(&["solve-iterative", "--gains", &fixture()]);
    if out.status.success() {
        assert_eq!(parse(&out)["feasible"], true);
    } else {
        // a power solve with no feasible iterate is a solver failure
        assert_eq!(out.status.code(), Some(6));
        assert!(String::from_utf8_lossy(&out.stderr).contains("no feasible iterate"));
    }
}

#[test]
fn allocation_written_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("alloc.json");
    let status = dfrelay(&["heuristic", "--gains", &fixture(), "--out", out.to_str().unwrap()]);
    assert!(status.status.success());
    assert!(status.stdout.is_empty());
    let report: Value = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(report["solver"], "heuristic");
}

#[test]
fn gen_channel_reproduces_the_fixture() {
    let out = dfrelay(&["gen-channel", "--config", repo_file("configs/quick.json").to_str().unwrap()]);
    assert!(out.status.success());
    let fresh: Value = serde_json::from_slice(&out.stdout).unwrap();
    let stored: Value = serde_json::from_str(&std::fs::read_to_string(fixture()).unwrap()).unwrap();
    assert_eq!(fresh, stored);

    let other = dfrelay(&["gen-channel", "--config", repo_file("configs/quick.json").to_str().unwrap(), "--seed", "2"]);
    assert_ne!(serde_json::from_slice::<Value>(&other.stdout).unwrap(), stored);
}

#[test]
fn experiment_csv_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick_config(dir.path(), 3);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let s = dir.path().join("summary.csv");
    for out in [&a, &b] {
        let run = dfrelay(&["experiment", "--config", &cfg, "--out", out.to_str().unwrap(), "--summary", s.to_str().unwrap()]);
        assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    }
    let first = std::fs::read(&a).unwrap();
    assert_eq!(first, std::fs::read(&b).unwrap());

    let text = String::from_utf8(first).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "solver,ps_dbw,realization,sum_rate_bpts,tetib_j_per_bit,converged");
    // 2 powers x 3 solvers x 3 realizations
    assert_eq!(lines.count(), 18);
    assert!(std::fs::read_to_string(s).unwrap().starts_with("solver,ps_dbw,"));

    let reseeded = dfrelay(&["experiment", "--config", &cfg, "--seed", "9"]);
    assert!(reseeded.status.success());
    assert_ne!(reseeded.stdout, text.as_bytes());
}

#[test]
fn oracle_check_reports_both_sides() {
    let out = dfrelay(&["oracle-check", "--k", "2", "--n", "1", "--seed", "7"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("oracle"));
    assert!(text.contains("dual value"));
    let verdict = text.lines().last().unwrap();
    assert!(verdict == "PASS" || verdict == "FAIL");
    assert_eq!(out.status.code(), Some(if verdict == "PASS" { 0 } else { 7 }));
}

#[test]
fn error_exit_codes() {
    let dir = tempfile::tempdir().unwrap();

    let missing = dfrelay(&["solve-dual", "--gains", dir.path().join("none.json").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(3));
    assert!(!missing.stderr.is_empty());

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    assert_eq!(dfrelay(&["solve-dual", "--gains", bad.to_str().unwrap()]).status.code(), Some(4));

    let ragged = dir.path().join("ragged.json");
    std::fs::write(&ragged, r#"{"g_sd":[1.0,2.0],"g_sr":[[1.0]],"g_rd":[[1.0,1.0]]}"#).unwrap();
    assert_eq!(dfrelay(&["solve-dual", "--gains", ragged.to_str().unwrap()]).status.code(), Some(5));

    let mut cfg: Value = serde_json::from_str(&std::fs::read_to_string(repo_file("configs/quick.json")).unwrap()).unwrap();
    cfg["system"]["N"] = 3.into();
    let mismatch = dir.path().join("mismatch.json");
    std::fs::write(&mismatch, cfg.to_string()).unwrap();
    assert_eq!(dfrelay(&["experiment", "--config", mismatch.to_str().unwrap()]).status.code(), Some(5));

    // clap's own usage errors
    assert_eq!(dfrelay(&["solve-dual"]).status.code(), Some(2));
}
