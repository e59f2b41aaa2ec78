use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mcsp::cost::save_schedule;
use mcsp::cost::Schedule;
use mcsp::driver::SolveReport;
use mcsp::instance::{save_instance, Instance};

fn mcsp(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mcsp")).args(args).current_dir(dir).env_remove("MCSP_THREADS").output().expect("binary runs")
}

fn small_instance(dir: &Path, seed: &str) {
    let out =
        mcsp(&["gen", "--cells", "3", "--contents", "15", "--requests", "40", "--slots", "5", "--seed", seed, "--out", "inst.json"], dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn report(dir: &Path, name: &str) -> SolveReport {
    serde_json::from_str(&fs::read_to_string(dir.join(name)).unwrap()).unwrap()
}

#[test]
fn gen_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a.json", "b.json"] {
        let out = mcsp(&["gen", "--cells", "7", "--contents", "30", "--requests", "100", "--seed", "9", "--out", name], dir.path());
        assert!(out.status.success());
    }
    assert_eq!(fs::read(dir.path().join("a.json")).unwrap(), fs::read(dir.path().join("b.json")).unwrap());
}

#[test]
fn lower_bound_is_below_rcga() {
    let dir = tempfile::tempdir().unwrap();
    small_instance(dir.path(), "3");
    for algo in ["lb", "rcga", "pba", "nrs"] {
        let out = mcsp(&["solve", "--algo", algo, "--instance", "inst.json", "--out", &format!("{algo}.json")], dir.path());
        assert!(out.status.success(), "{algo}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let lb = report(dir.path(), "lb.json").lower_bound.unwrap();
    let rcga = report(dir.path(), "rcga.json");
    assert!(lb <= rcga.cost.total + 1e-6);
    assert_eq!(rcga.lower_bound, Some(lb));
}

#[test]
fn eval_reproduces_reports() {
    let dir = tempfile::tempdir().unwrap();
    small_instance(dir.path(), "5");
    for algo in ["rcga", "pba"] {
        let name = format!("{algo}.json");
        assert!(mcsp(&["solve", "--algo", algo, "--instance", "inst.json", "--mode", "min", "--out", &name], dir.path()).status.success());
        let out = mcsp(&["eval", "--instance", "inst.json", "--schedule", &name], dir.path());
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
        let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(v["matches_report"], true);
        assert_eq!(v["violations"].as_array().unwrap().len(), 0);
    }
}

#[test]
fn eval_rejects_capacity_violations() {
    let dir = tempfile::tempdir().unwrap();
    let mut inst = Instance::tiny();
    inst.servers[0].cache_capacity = 1.0;
    save_instance(&inst, dir.path().join("inst.json")).unwrap();
    let mut s = Schedule::empty(&inst);
    s.set(0, 0, "UC".parse().unwrap());
    save_schedule(&s, dir.path().join("sched.json")).unwrap();
    let out = mcsp(&["eval", "--instance", "inst.json", "--schedule", "sched.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(!v["violations"].as_array().unwrap().is_empty());
}

#[test]
fn eval_prices_a_bare_schedule() {
    let dir = tempfile::tempdir().unwrap();
    let inst = Instance::tiny();
    save_instance(&inst, dir.path().join("inst.json")).unwrap();
    let mut s = Schedule::empty(&inst);
    s.set(0, 0, "UC".parse().unwrap());
    save_schedule(&s, dir.path().join("sched.json")).unwrap();
    let out = mcsp(&["eval", "--instance", "inst.json", "--schedule", "sched.json"], dir.path());
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["cost"]["total"], 3.0);
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(mcsp(&["solve", "--algo", "simplex", "--instance", "x.json"], dir.path()).status.code(), Some(2));
    assert_eq!(mcsp(&["gen", "--cells", "4", "--out", "x.json"], dir.path()).status.code(), Some(2));
    assert_eq!(mcsp(&["frobnicate"], dir.path()).status.code(), Some(2));
    assert_eq!(mcsp(&["--threads", "0", "verify", "pricing", "--trials", "1"], dir.path()).status.code(), Some(2));
    // a missing input file is a failure, not a usage error
    assert_eq!(mcsp(&["solve", "--algo", "rcga", "--instance", "missing.json"], dir.path()).status.code(), Some(1));
}

#[test]
fn sweep_resumes_and_report_emits_figures() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"{"cells": [3], "contents": [10, 15], "requests": [30], "slots": [4], "seeds": [0, 1], "algos": ["rcga", "pba"]}"#;
    fs::write(dir.path().join("sweep.json"), cfg).unwrap();
    let out = mcsp(&["--threads", "2", "sweep", "--config", "sweep.json", "--out", "results.csv"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "8 runs, 0 already present");
    let first = fs::read_to_string(dir.path().join("results.csv")).unwrap();
    assert_eq!(first.lines().count(), 9);
    assert!(first.starts_with("seed,cells,I,R,T,rho_m,rho_tt,rho_b,algo,mode,total,"));

    let again = mcsp(&["sweep", "--config", "sweep.json", "--out", "results.csv"], dir.path());
    assert_eq!(String::from_utf8_lossy(&again.stdout).trim(), "0 runs, 8 already present");
    assert_eq!(fs::read_to_string(dir.path().join("results.csv")).unwrap(), first);

    let rep = mcsp(&["report", "--in", "results.csv", "--emit", "figs"], dir.path());
    assert!(rep.status.success(), "{}", String::from_utf8_lossy(&rep.stderr));
    for name in ["cost_vs_contents.csv", "cost_vs_contents.svg", "cost_vs_backhaul.csv", "success_and_runtime.csv"] {
        assert!(dir.path().join("figs").join(name).exists(), "{name} missing");
    }
}

#[test]
fn unknown_sweep_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("sweep.json"), r#"{"cels": [3]}"#).unwrap();
    let out = mcsp(&["sweep", "--config", "sweep.json", "--out", "r.csv"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_subcommands_pass() {
    let dir = tempfile::tempdir().unwrap();
    assert!(mcsp(&["verify", "pricing", "--trials", "20", "--max-slots", "4"], dir.path()).status.success());
    assert!(mcsp(&["verify", "sandwich", "--trials", "5"], dir.path()).status.success());
    assert_eq!(mcsp(&["verify", "pricing", "--max-slots", "9"], dir.path()).status.code(), Some(2));
}
