use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn mbqc(args: &[&str], stdin: Option<&[u8]>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mbqc"));
    cmd.args(args)
        .env_remove("MCBETH_SEED")
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());
    cmd.stdin(if stdin.is_some() { Stdio::piped() } else { Stdio::null() });
    let mut child = cmd.spawn().expect("binary runs");
    if let Some(bytes) = stdin {
        child.stdin.take().unwrap().write_all(bytes).unwrap();
    }
    child.wait_with_output().unwrap()
}

fn ok(args: &[&str], stdin: Option<&[u8]>) -> String {
    let out = mbqc(args, stdin);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn tmp(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name)
}

#[test]
fn teleport_pipes_into_standardize() {
    let src = ok(&["examples", "teleport"], None);
    let out = ok(&["standardize", "-"], Some(src.as_bytes()));
    assert_eq!(
        out,
        "Input 0\nPrepList [1, 2]\nEntangle 0 1\nEntangle 1 2\nMeasure 0 0.0 [] []\nMeasure 1 0.0 [0] []\nZCorrect 2 [0]\nXCorrect 2 [1]\n"
    );
}

#[test]
fn trace_goes_to_stderr_as_json_lines() {
    let src = ok(&["examples", "teleport"], None);
    let out = mbqc(&["standardize", "-", "--trace"], Some(src.as_bytes()));
    assert!(out.status.success());
    let lines: Vec<Value> = String::from_utf8(out.stderr)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert!(!lines.is_empty());
    assert!(lines.iter().all(|v| v["rule"].is_u64() && v["at"].is_u64()));
}

#[test]
fn grover_strong_distribution() {
    let src = ok(&["examples", "grover2", "--oracle", "10", "--variant", "four"], None);
    let out = ok(&["simulate", "-", "--mode", "strong"], Some(src.as_bytes()));
    let v: Value = serde_json::from_str(&out).unwrap();
    let dist = v["readouts"].as_object().unwrap();
    assert_eq!(dist.len(), 1);
    // Raw read-out bits of the four-qubit variant are the searched bits reversed.
    assert!((dist["01"].as_f64().unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn constraint_violation_exits_one() {
    let path = tmp("violation.mcb");
    std::fs::write(&path, "Prep 0\nPrep 1\nMeasure 0 0 [1] []\n").unwrap();
    let out = mbqc(&["validate", path.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("constraint 1"));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(mbqc(&["simulate", "x.mcb"], None).status.code(), Some(2));
    assert_eq!(mbqc(&["frobnicate"], None).status.code(), Some(2));
    assert_eq!(
        mbqc(&["validate", "/nonexistent/file.mcb"], None).status.code(),
        Some(2)
    );
    assert_eq!(
        mbqc(&["examples", "grover2", "--oracle", "102"], None).status.code(),
        Some(2)
    );
}

#[test]
fn json_programs_are_detected() {
    let src = ok(&["examples", "dj", "--bits", "3", "--format", "json"], None);
    assert!(src.trim_start().starts_with('['));
    assert_eq!(ok(&["validate", "-"], Some(src.as_bytes())), "ok\n");
    let path = tmp("dj3.json");
    std::fs::write(&path, &src).unwrap();
    assert_eq!(ok(&["validate", path.to_str().unwrap()], None), "ok\n");
}

#[test]
fn seed_comes_from_environment() {
    let src = ok(&["examples", "cluster", "horseshoe", "--angles", "pi/3,-0.4"], None);
    let path = tmp("horseshoe.mcb");
    std::fs::write(&path, &src).unwrap();
    let p = path.to_str().unwrap();
    let flag = ok(&["simulate", p, "--mode", "weak", "--seed", "77"], None);
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mbqc"));
    let env = cmd
        .args(["simulate", p, "--mode", "weak"])
        .env("MCBETH_SEED", "77")
        .output()
        .unwrap();
    assert_eq!(String::from_utf8(env.stdout).unwrap(), flag);
}

#[test]
fn weak_shots_and_inputs() {
    let inputs = tmp("inputs.json");
    std::fs::write(&inputs, r#"{"0": [[1, 0], [0, 0]]}"#).unwrap();
    let prog = tmp("tele-readout.mcb");
    std::fs::write(&prog, "Input 0\nPrepList [1, 2]\nJ 0 0 1\nJ 0 1 2\nReadOut 2 Z\n").unwrap();
    let out = ok(
        &[
            "simulate",
            prog.to_str().unwrap(),
            "--mode",
            "weak",
            "--shots",
            "200",
            "--inputs",
            inputs.to_str().unwrap(),
        ],
        None,
    );
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["readouts"]["0"].as_f64(), Some(1.0));
    assert_eq!(v["shots"].as_u64(), Some(200));
}

#[test]
fn compiled_qasm_parses_back() {
    let src = ok(&["examples", "dj"], None);
    for mode in ["cc", "deferred"] {
        let qasm = ok(&["compile", "-", "--mode", mode], Some(src.as_bytes()));
        assert!(qasm.starts_with("OPENQASM 2.0;\n"));
        mbqc::compiler::parse_qasm(&qasm).unwrap();
        let json = ok(
            &["compile", "-", "--mode", mode, "--format", "json"],
            Some(src.as_bytes()),
        );
        let v: Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["n_qubits"].as_u64(), Some(4));
    }
}

#[test]
fn pre_circuit_is_prepended() {
    let pre = tmp("pre.qasm");
    std::fs::write(&pre, "OPENQASM 2.0;\ninclude \"qelib1.inc\";\nqreg q[1];\nx q[0];\n").unwrap();
    let src = ok(&["examples", "teleport"], None);
    let qasm = ok(
        &["compile", "-", "--mode", "cc", "--pre-circuit", pre.to_str().unwrap()],
        Some(src.as_bytes()),
    );
    let body: Vec<&str> = qasm.lines().filter(|l| !l.starts_with("creg")).collect();
    assert_eq!(body[3], "x q[0];");
}

#[test]
fn distribute_with_plan_and_report() {
    let plan = tmp("plan.json");
    let src = ok(
        &[
            "examples",
            "linear",
            "--nodes",
            "2",
            "--qubits",
            "3",
            "--plan-out",
            plan.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(std::fs::read_to_string(&plan).unwrap().trim(), "[[0,1,2],[3,4,5]]");
    let report = tmp("report.csv");
    let out = ok(
        &[
            "distribute",
            "-",
            "--plan",
            plan.to_str().unwrap(),
            "--strict",
            "--report",
            report.to_str().unwrap(),
        ],
        Some(src.as_bytes()),
    );
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["nodes"].as_array().unwrap().len(), 2);
    assert_eq!(v["fallback"], Value::Bool(false));
    let csv = std::fs::read_to_string(&report).unwrap();
    assert_eq!(csv.lines().count(), 3);

    let crossed = mbqc(
        &["distribute", "-", "--plan", "[[0,3],[1,4],[2,5]]", "--strict"],
        Some(src.as_bytes()),
    );
    assert_eq!(crossed.status.code(), Some(1));
    let fallback = ok(
        &["distribute", "-", "--plan", "[[0,3],[1,4],[2,5]]", "--sequential"],
        Some(src.as_bytes()),
    );
    let v: Value = serde_json::from_str(&fallback).unwrap();
    assert_eq!(v["fallback"], Value::Bool(true));
}
