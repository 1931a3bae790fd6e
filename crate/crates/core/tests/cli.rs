//! Drives the `weightbal` binary end to end.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_weightbal")).args(args).output().unwrap()
}

fn write(path: &Path, v: &Value) {
    std::fs::write(path, serde_json::to_string_pretty(v).unwrap()).unwrap();
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn infeasible_two_cycle_reports_witness() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("g.json");
    let bounds = dir.path().join("b.json");
    write(&graph, &json!({"n": 2, "edges": [[0, 1], [1, 0]]}));
    write(&bounds, &json!({"bounds": [[0, 1, 2.0, 2.0], [1, 0, 1.0, 1.0]]}));
    for extra in [None, Some("--brute-force")] {
        let mut args = vec!["feasible", "--graph", s(&graph), "--bounds", s(&bounds)];
        args.extend(extra);
        let out = bin(&args);
        assert_eq!(out.status.code(), Some(2));
        let v: Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(v["feasible"], json!(false));
        assert_eq!(v["subset"], json!([1]));
        assert_eq!(v["in_lower"], json!(2));
        assert_eq!(v["out_upper"], json!(1));
    }
    write(&bounds, &json!({"bounds": [[0, 1, 1.0, 2.0], [1, 0, 1.0, 1.0]]}));
    let out = bin(&["feasible", "--graph", s(&graph), "--bounds", s(&bounds)]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["feasible"], json!(true));
}

#[test]
fn generate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        assert!(bin(&["generate", "--n", "20", "--p", "0.2", "--seed", "7", "--out", s(p)]).status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let v: Value = serde_json::from_slice(&std::fs::read(&a).unwrap()).unwrap();
    assert_eq!(v["n"], json!(20));
}

#[test]
fn usage_errors_exit_64() {
    assert_eq!(bin(&[]).status.code(), Some(64));
    assert_eq!(bin(&["generate", "--n", "x"]).status.code(), Some(64));
    assert_eq!(bin(&["frobnicate"]).status.code(), Some(64));
    assert_eq!(bin(&["--help"]).status.code(), Some(0));
}

#[test]
fn missing_files_are_runtime_errors() {
    let out = bin(&["replay", "--trace", "/nonexistent/trace.csv", "--check-invariants"]);
    assert_eq!(out.status.code(), Some(1));
}

fn config(algorithm: &str) -> Value {
    let mut c = json!({
        "graph": {"random": {"n": 8, "p": 0.3}},
        "algorithm": algorithm,
        "seeds": [1, 2, 3],
        "max_rounds": 50000,
    });
    let bounded = algorithm.starts_with("cap");
    if bounded {
        c["bounds"] = json!({"random_feasible": {"spread": 2}});
    }
    match algorithm {
        "delay" | "delay-event" | "cap-delay" | "cap-event" => c["link"] = json!({"tau_max": 5}),
        "cap-drop" => c["link"] = json!({"drop_prob": 0.5}),
        "cap-targeted" => c["targets"] = json!([1, -1, 0, 0, 0, 0, 0, 0]),
        "sync-async-script" => c["activations"] = json!([0, 1, 2, 3, 4, 5, 6, 7, 0, 1, 2, 3, 4, 5, 6, 7]),
        _ => {}
    }
    c
}

#[test]
fn every_algorithm_runs_and_replays() {
    let algorithms = [
        "centralized", "sync", "sync-async-script", "delay", "delay-event", "cap", "cap-enhanced",
        "cap-naive", "cap-targeted", "cap-delay", "cap-event", "cap-drop",
    ];
    for alg in algorithms {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("cfg.json");
        let out_dir = dir.path().join("out");
        write(&cfg, &config(alg));
        let out = bin(&["run", "--config", s(&cfg), "--out-dir", s(&out_dir)]);
        assert!(out.status.success(), "{alg}: {}", String::from_utf8_lossy(&out.stderr));
        let summary: Value = serde_json::from_slice(&std::fs::read(out_dir.join("summary.json")).unwrap()).unwrap();
        assert_eq!(summary.as_array().unwrap().len(), 3, "{alg}");
        assert!(out_dir.join("mean_epsilon.csv").exists());
        for seed in [1, 2, 3] {
            let trace = out_dir.join(format!("trace_seed{seed}.csv"));
            let out = bin(&["replay", "--trace", s(&trace), "--check-invariants"]);
            assert!(
                out.status.success(),
                "{alg} seed {seed}: {}{}",
                String::from_utf8_lossy(&out.stdout),
                String::from_utf8_lossy(&out.stderr)
            );
        }
    }
}

#[test]
fn runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    write(&cfg, &config("cap-delay"));
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        assert!(bin(&["run", "--config", s(&cfg), "--out-dir", s(d)]).status.success());
    }
    for name in ["trace_seed1.csv", "trace_seed2.csv", "summary.json", "mean_epsilon.csv"] {
        assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn replay_flags_a_tampered_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    let out_dir = dir.path().join("out");
    write(&cfg, &config("sync"));
    assert!(bin(&["run", "--config", s(&cfg), "--out-dir", s(&out_dir)]).status.success());
    let trace = out_dir.join("trace_seed1.csv");
    let text = std::fs::read_to_string(&trace).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_owned).collect();
    let mut cells: Vec<String> = lines[1].split(',').map(str::to_owned).collect();
    let last = cells.len() - 1;
    cells[last] = (cells[last].parse::<i64>().unwrap() + 1).to_string();
    lines[1] = cells.join(",");
    std::fs::write(&trace, lines.join("\n") + "\n").unwrap();
    let out = bin(&["replay", "--trace", s(&trace), "--check-invariants"]);
    assert!(!out.status.success());
}
