use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_bt-bounds"));
    c.env_remove("BT_BOUNDS_THREADS");
    c
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("bt-bounds-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn run_json(args: &[&str], name: &str) -> (i32, Value) {
    let path = tmp(name);
    let mut full: Vec<&str> = args.to_vec();
    let p = path.to_str().unwrap().to_string();
    full.extend(["--json", &p]);
    let out = run(&full);
    let report = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    (out.status.code().unwrap(), report)
}

fn strip_timing(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("timing_ms");
    v
}

#[test]
fn weyl_p2_level2_all_equal() {
    let (code, r) = run_json(&["--suite", "weyl", "--p", "2", "--level", "2"], "weyl.json");
    assert_eq!(code, 0);
    assert_eq!(r["schema"], 1);
    let cases = r["cases"].as_array().unwrap();
    assert!(cases.len() >= 5);
    for c in cases {
        assert_eq!(c["outputs"]["lhs"], c["outputs"]["rhs"], "{}", c["key"]);
        assert_eq!(c["status"], "ok");
    }
}

#[test]
fn fixed_points_p3_gl2() {
    let (code, r) = run_json(
        &["--suite", "fixed-points", "--p", "3", "--group", "gl2", "--sd", "1..2", "--depth", "0..1"],
        "fp.json",
    );
    assert_eq!(code, 0);
    let cases = r["cases"].as_array().unwrap();
    assert_eq!(cases.len(), 4);
    assert!(cases.iter().all(|c| c["holds"] == true));
    let keys: Vec<&str> = cases.iter().map(|c| c["key"].as_str().unwrap()).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
}

#[test]
fn empty_sweep_is_vacuous() {
    let (code, r) = run_json(&["--suite", "above", "--sd", "1..0"], "empty.json");
    assert_eq!(code, 0);
    assert_eq!(r["vacuous"], true);
    assert_eq!(r["cases"].as_array().unwrap().len(), 0);
}

#[test]
fn config_errors_exit_3() {
    assert_eq!(run(&["--suite", "nope"]).status.code(), Some(3));
    assert_eq!(run(&["--suite", "weyl", "--group", "gl7"]).status.code(), Some(3));
    assert_eq!(run(&["--suite", "weyl", "--p", "4"]).status.code(), Some(3));
    assert_eq!(run(&["--suite", "weyl", "--cap", "0"]).status.code(), Some(3));
    assert_eq!(run(&["--suite", "summability", "--eps", "x"]).status.code(), Some(3));
    let out = bin().args(["--suite", "weyl", "--p", "2"]).env("BT_BOUNDS_THREADS", "zero").output().unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn cap_exhaustion_exits_2() {
    let (code, r) = run_json(&["--suite", "weyl", "--p", "2", "--cap", "100"], "cap.json");
    assert_eq!(code, 2);
    assert!(r["cases"].as_array().unwrap().iter().any(|c| c["status"] == "precision"));
}

#[test]
fn above_threshold_eps_is_reported() {
    // eps = 1/4 is the GL_2 threshold: those cases error, the rest pass
    let (code, r) = run_json(&["--suite", "summability", "--p", "3", "--eps", "1/4"], "eps.json");
    assert_eq!(code, 3);
    assert!(r["cases"].as_array().unwrap().iter().any(|c| c["status"] == "error"));
}

#[test]
fn reports_are_deterministic_across_thread_counts() {
    let args = ["--suite", "bermaat", "--p", "3", "--level", "3", "--seed", "7"];
    let one = tmp("det1.json");
    let two = tmp("det2.json");
    for (threads, path) in [("1", &one), ("3", &two)] {
        let st = bin()
            .args(args)
            .args(["--json", path.to_str().unwrap()])
            .env("BT_BOUNDS_THREADS", threads)
            .status()
            .unwrap();
        assert_eq!(st.code(), Some(0));
    }
    let a: Value = serde_json::from_str(&std::fs::read_to_string(one).unwrap()).unwrap();
    let b: Value = serde_json::from_str(&std::fs::read_to_string(two).unwrap()).unwrap();
    assert_eq!(strip_timing(a.clone()), strip_timing(b));
    let (_, c) = run_json(&["--suite", "bermaat", "--p", "3", "--level", "3", "--seed", "8"], "det3.json");
    assert_ne!(strip_timing(a)["cases"], strip_timing(c)["cases"]);
}

#[test]
fn rerun_reproduces_every_case() {
    let path = tmp("rerun.json");
    let st = run(&["--suite", "orbital", "--p", "3", "--group", "gl2", "--sd", "1..2", "--json", path.to_str().unwrap()]);
    assert_eq!(st.status.code(), Some(0));
    let out = run(&["--rerun", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["mismatches"].as_array().unwrap().len(), 0);
    assert_eq!(r["cases"], r["reproduced"]);

    // a tampered output is caught
    let mut report: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    report["cases"][0]["outputs"]["value"] = Value::String("12345".into());
    let bad = tmp("rerun-bad.json");
    std::fs::write(&bad, report.to_string()).unwrap();
    assert_eq!(run(&["--rerun", bad.to_str().unwrap()]).status.code(), Some(1));
}
