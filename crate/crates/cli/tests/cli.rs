use std::path::Path;
use std::process::{Command, Output};

use queuecap::EntMaxSolution64;
use serde_json::Value;

fn queuecap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_queuecap"))
        .args(args)
        .env_remove("QUEUECAP_OPTIONS")
        .output()
        .expect("spawn queuecap")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(o: &Output) -> Value {
    assert!(o.status.success(), "{}", stderr(o));
    serde_json::from_slice(&o.stdout).expect("json on stdout")
}

fn data(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name).display().to_string()
}

#[test]
fn gap_uniform12_is_strict() {
    let o = queuecap(&["gap", "--service", "uniform12", "--tau", "1", "--lambda", "0.4"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("VERDICT=Strict"), "{}", stdout(&o));
}

#[test]
fn gap_at_tau_beyond_support_is_equal() {
    let o = queuecap(&["gap", "--service", "uniform12", "--tau", "2", "--lambda", "0.4"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("VERDICT=Equal"), "{}", stdout(&o));
}

#[test]
fn recursion_deviation_alternates() {
    let o = queuecap(&["recursion", "--q", "0.5", "--gamma", "0.2", "--delta", "0.1", "--n", "16", "--format", "json"]);
    let v = json(&o);
    let dev: Vec<f64> = v["deviations"].as_array().expect("deviations").iter().map(|d| d.as_f64().unwrap()).collect();
    assert_eq!(dev.len(), 17);
    for (k, d) in dev.iter().enumerate() {
        let want = if k % 2 == 0 { 1.2 } else { -1.2 };
        assert!((d - want).abs() < 1e-12, "k={k} d={d}");
    }
}

#[test]
fn feedback_entropy_below_full() {
    let full = json(&queuecap(&["solve", "--service", "uniform12", "--lambda", "0.4"]));
    let gfb = json(&queuecap(&["solve", "--service", "uniform12", "--mode", "gfb", "--tau", "1", "--lambda", "0.4"]));
    let hf = full["solution"]["entropy_value"].as_f64().unwrap();
    let hg = gfb["solution"]["entropy_value"].as_f64().unwrap();
    assert!(hg < hf, "{hg} vs {hf}");
}

#[test]
fn service_file_matches_builtin() {
    let a = json(&queuecap(&["solve", "--service", "uniform12", "--lambda", "0.4"]));
    let b = json(&queuecap(&["solve", "--service", &data("uniform12.json"), "--lambda", "0.4"]));
    assert_eq!(a["solution"], b["solution"]);
}

#[test]
fn missing_budget_is_config_error() {
    let o = queuecap(&["solve", "--service", "uniform12"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("lambda"), "{}", stderr(&o));
}

#[test]
fn unknown_service_is_config_error() {
    let o = queuecap(&["solve", "--service", "no-such-law", "--lambda", "0.4"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("service"), "{}", stderr(&o));
}

#[test]
fn config_unknown_key_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    std::fs::write(&path, r#"{"version":1,"command":{"gap":{"service":"uniform12","tau":1,"lambda":0.4,"bogus":2}}}"#)
        .unwrap();
    let o = queuecap(&["config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bogus"), "{}", stderr(&o));
}

#[test]
fn config_runs_sample() {
    let o = queuecap(&["config", &data("gap-uniform12.json")]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("VERDICT=Strict"));
}

#[test]
fn oracle_cap_too_large() {
    let o = queuecap(&["oracle", "--service", "uniform12", "--lambda", "0.4", "--cap", "7"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn solve_output_roundtrips_and_checks() {
    let dir = tempfile::tempdir().unwrap();
    let sol = dir.path().join("sol.json");
    let o = queuecap(&["solve", "--service", "uniform12", "--lambda", "0.4", "--out", sol.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&sol).unwrap();
    let v: Value = serde_json::from_str(&text).unwrap();
    let back: EntMaxSolution64 = serde_json::from_value(v["solution"].clone()).unwrap();
    assert_eq!(serde_json::to_value(&back).unwrap(), v["solution"]);
    let k = queuecap(&["kkt", "--service", "uniform12", "--lambda", "0.4", "--solution", sol.to_str().unwrap()]);
    let rep = json(&k);
    assert!(rep["max_abs_residual"].as_f64().unwrap() < 1e-6);
}

#[test]
fn simulate_is_deterministic_and_exact() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let trace = dir.path().join(name);
        let o = queuecap(&[
            "simulate", "--service", "uniform0123", "--tau", "1", "--trials", "500", "--seed", "11", "--trace",
            trace.to_str().unwrap(),
        ]);
        (json(&o), std::fs::read(trace).unwrap())
    };
    let (a, ta) = run("a.csv");
    let (b, tb) = run("b.csv");
    assert_eq!(a, b);
    assert_eq!(ta, tb);
    assert_eq!(a["max_discrepancy"].as_u64(), Some(0));
}

#[test]
fn options_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let opts = dir.path().join("opts.json");
    std::fs::write(&opts, r#"{"not_an_option": 1}"#).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_queuecap"))
        .args(["recursion", "--q", "0.5", "--gamma", "0.2", "--delta", "0.1", "--n", "2"])
        .env("QUEUECAP_OPTIONS", &opts)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("options file"), "{}", stderr(&o));
}
