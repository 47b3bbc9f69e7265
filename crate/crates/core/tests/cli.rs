mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::fixture;
use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_bl-scales");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn run_with_threads(args: &[&str], threads: &str) -> Output {
    Command::new(BIN).args(args).env("BL_SCALES_THREADS", threads).output().expect("binary runs")
}

fn fx(name: &str) -> String {
    fixture(name).to_string_lossy().into_owned()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

#[test]
fn constant_on_young() {
    let out = run(&["constant", "--input", &fx("young.json")]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert!((v["bl_value"].as_f64().unwrap() - 3f64.sqrt() / 2.0).abs() < 1e-8);
    assert_eq!(v["converged"], Value::Bool(true));
    assert_eq!(v["command"], "constant");
}

#[test]
fn extremiser_reports_blocks() {
    let v = json(&run(&["extremiser", "--input", &fx("loomis_whitney.json")]));
    assert!((v["bl_value"].as_f64().unwrap() - 1.0).abs() < 1e-10);
    assert_eq!(v["gaussians"]["blocks"].as_array().unwrap().len(), 2);
    assert!(v["m_matrix"].is_array());
}

#[test]
fn common_kernel_is_infinite_with_witness() {
    let out = run(&["finiteness", "--input", &fx("common_kernel.json")]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["verdict"], "infinite");
    assert!(!out.stderr.is_empty());
}

#[test]
fn malformed_input_exits_two_with_position() {
    let out = run(&["constant", "--input", &fx("malformed.json")]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line"), "{err}");
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(run(&["constant"]).status.code(), Some(2));
    assert_eq!(run(&["schedule", "--alpha", "1"]).status.code(), Some(2));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn solver_exhaustion_exits_one() {
    let out = run(&["constant", "--input", &fx("rank_one_3d.json"), "--max-iter", "5"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(run(&["constant", "--input", &fx("rank_one_3d.json")]).status.code(), Some(0));
}

#[test]
fn young_lie_writes_a_table() {
    let out = run(&["young-lie", "--group", "euclidean:1", "--deltas", "0.2,0.1", "--resolution", "20000"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    assert_eq!(lines.next(), Some("delta,ratio,stderr,bound,slack"));
    assert_eq!(lines.count(), 2);
    assert!(text.contains("# seed=0"));
}

#[test]
fn schedule_table_and_header() {
    let out = run(&["schedule", "--delta0", "0.1", "--mu", "1e-10"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("# k_star=5"), "{text}");
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 7);
}

/// Commands covering every fixture; each is run twice and compared byte for byte.
fn rerun_suite() -> Vec<Vec<String>> {
    let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    vec![
        s(&["constant", "--input", &fx("young.json")]),
        s(&["extremiser", "--input", &fx("rank_one_3d.json")]),
        s(&["finiteness", "--input", &fx("common_kernel.json"), "--mode", "randomized", "--seed", "4"]),
        s(&["finiteness", "--input", &fx("loomis_whitney.json")]),
        s(&["functional", "--input", &fx("young.json"), "--inputs", &fx("young_inputs.json"), "--method", "monte-carlo", "--resolution", "50000", "--seed", "3"]),
        s(&["functional", "--input", &fx("young.json"), "--inputs", &fx("young_inputs.json")]),
        s(&["ball-check", "--input", &fx("young.json"), "--inputs", &fx("young_ball.json"), "--method", "monte-carlo", "--resolution", "20000", "--seed", "1"]),
        s(&["nonlinear", "--tag", "young-heisenberg", "--check", "perturbation", "--resolution", "20000", "--seed", "2"]),
        s(&["nonlinear", "--tag", "young-heisenberg", "--check", "submersion", "--seed", "2"]),
        s(&["young-lie", "--group", "heisenberg", "--resolution", "20000", "--seed", "5"]),
        s(&["schedule", "--input", &fx("young.json"), "--mu", "1e-12"]),
    ]
}

fn run_to(args: &[String], out: &Path, threads: &str) -> Vec<u8> {
    let mut a: Vec<&str> = args.iter().map(String::as_str).collect();
    let o = out.to_string_lossy().into_owned();
    a.extend(["--output", &o]);
    let r = run_with_threads(&a, threads);
    assert!(matches!(r.status.code(), Some(0) | Some(1)), "{args:?}: {}", String::from_utf8_lossy(&r.stderr));
    std::fs::read(out).unwrap()
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for (i, args) in rerun_suite().iter().enumerate() {
        let a = run_to(args, &dir.path().join(format!("{i}a")), "1");
        let b = run_to(args, &dir.path().join(format!("{i}b")), "1");
        assert!(!a.is_empty());
        assert_eq!(a, b, "{args:?}");
    }
}

#[test]
fn worker_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let args: Vec<String> = ["functional", "--input", &fx("young.json"), "--inputs", &fx("young_inputs.json"), "--method", "monte-carlo", "--resolution", "50000"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    assert_eq!(run_to(&args, &dir.path().join("one"), "1"), run_to(&args, &dir.path().join("three"), "3"));
}

#[test]
fn output_file_matches_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("c.json");
    let args = ["constant", "--input", &fx("young.json")].map(String::from);
    let file = run_to(&args, &p, "1");
    let stdout = run(&["constant", "--input", &fx("young.json")]).stdout;
    assert_eq!(file, stdout);
}
