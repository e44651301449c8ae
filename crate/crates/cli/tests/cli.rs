//! End-to-end checks of the `mqsac` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn mqsac(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mqsac"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "failed: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("JSON on stdout")
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

/// Every listed file exists and matches its recorded digest.
fn check_manifest(dir: &Path) -> serde_json::Value {
    let m = manifest(dir);
    for f in m["files"].as_array().unwrap() {
        let bytes = fs::read(dir.join(f["name"].as_str().unwrap())).unwrap();
        assert_eq!(f["sha256"].as_str().unwrap(), hex::encode(Sha256::digest(&bytes)));
        if let Some(rows) = f["rows"].as_u64() {
            let lines = bytes.iter().filter(|&&b| b == b'\n').count() as u64;
            let header = u64::from(f["name"].as_str().unwrap().ends_with(".csv"));
            assert_eq!(lines, rows + header, "{}", f["name"]);
        }
    }
    m
}

#[test]
fn regions_reports_counts() {
    let v = stdout_json(&mqsac(&["regions", "--scenario", "case-study"]));
    assert_eq!(v["feasible"], 9);
    assert_eq!(v["admissible"].as_u64().unwrap() + v["boundary"].as_u64().unwrap(), 9);
}

#[test]
fn analyze_matches_mm1_closed_form() {
    let v = stdout_json(&mqsac(&["analyze", "--lambda", "0.5", "--mu", "1", "--alpha", "0", "--beta", "0"]));
    // rho / (1 - rho) at rho = 1/2.
    assert!((v["mean_length"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert!((v["pmf"][0].as_f64().unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn exit_codes_distinguish_failures() {
    assert_eq!(code(&mqsac(&["analyze", "--lambda", "2", "--mu", "1", "--alpha", "0", "--beta", "0"])), 3);
    assert_eq!(code(&mqsac(&["regions", "--scenario", "/nonexistent/scenario.json"])), 1);
    assert_eq!(code(&mqsac(&["--scale", "2", "preset", "regions"])), 2);
    assert_eq!(code(&mqsac(&["simulate", "--strategy", "naive:1,1,0"])), 2);
    assert_eq!(code(&mqsac(&["no-such-command"])), 2);
}

#[test]
fn preset_is_byte_reproducible_and_refuses_overwrite() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for dir in [&a, &b] {
        let out = mqsac(&["--seed", "3", "--scale", "0.002", "--out", dir.to_str().unwrap(), "preset", "table3"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for name in ["table3.csv", "table3_runs.csv", "manifest.json"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    let m = check_manifest(&a);
    assert_eq!(m["command"], "table3");
    assert!(m["reproduce"].as_str().unwrap().contains("--seed 3 --scale 0.002"));
    let table = fs::read_to_string(a.join("table3.csv")).unwrap();
    assert_eq!(table.lines().count(), 9);

    let again = mqsac(&["--out", a.to_str().unwrap(), "--scale", "0.002", "preset", "table3"]);
    assert_eq!(code(&again), 2);
    let forced = mqsac(&["--out", a.to_str().unwrap(), "--scale", "0.002", "--force", "preset", "table3"]);
    assert!(forced.status.success());
}

#[test]
fn regions_preset_lists_every_feasible_state() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("r");
    let out = mqsac(&["--out", dir.to_str().unwrap(), "preset", "regions"]);
    assert!(out.status.success());
    let m = check_manifest(&dir);
    assert_eq!(m["parameters"]["feasible"], 357);
    let states = fs::read_to_string(dir.join("states.csv")).unwrap();
    assert_eq!(states.lines().count(), 358);
}

#[test]
fn simulate_writes_consistent_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("sim");
    let out = mqsac(&[
        "--seed", "5", "--out", dir.to_str().unwrap(), "simulate", "--horizon", "30", "--replications", "2",
        "--knowledge", "full", "--strategy", "naive:2,1,0", "--trace",
    ]);
    let agg = stdout_json(&out);
    check_manifest(&dir);
    let arrivals: f64 = agg
        .as_array()
        .unwrap()
        .iter()
        .filter(|s| s["name"].as_str().unwrap().starts_with("arrivals_"))
        .map(|s| s["mean"].as_f64().unwrap())
        .sum();
    let requests = fs::read_to_string(dir.join("requests.csv")).unwrap();
    assert_eq!((requests.lines().count() - 1) as f64, 2.0 * arrivals);
    assert!(fs::read_to_string(dir.join("events.jsonl")).unwrap().lines().count() > 0);

    // Waits floor to whole periods for the geometric fit.
    let fit = mqsac(&[
        "fit", "--input", dir.join("requests.csv").to_str().unwrap(), "--column", "wait", "--dist", "geometric",
    ]);
    let v = stdout_json(&fit);
    assert_eq!(v["dist"], "geometric");
}

#[test]
fn search_lists_benchmarks_after_ranked_rows() {
    let out = mqsac(&["--seed", "2", "search", "--strategies", "3", "--replications", "2", "--horizon", "10"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 3 + 2 + 1);
    assert_eq!(&rows[0][0], "1");
    assert!(rows[..3].iter().all(|r| r[1].starts_with("random-")));
    assert!(rows[3..].iter().all(|r| r[0].is_empty()));
    assert_eq!(&rows[5][1], "greedy-single-queue");
    // Same seed, same table.
    let again = mqsac(&["--seed", "2", "search", "--strategies", "3", "--replications", "2", "--horizon", "10"]);
    assert_eq!(String::from_utf8(again.stdout).unwrap(), text);
}

#[test]
fn markov_reports_a_normalized_top_list() {
    let v = stdout_json(&mqsac(&["markov", "--strategy", "naive:1,2,0", "--empty-probs", "0.3,0.6", "--top", "5"]));
    let top = v["long_run"]["top"].as_array().unwrap();
    assert_eq!(top.len(), 5);
    let probs: Vec<f64> = top.iter().map(|t| t["prob"].as_f64().unwrap()).collect();
    assert!(probs.windows(2).all(|w| w[0] >= w[1]));
    assert!(probs.iter().sum::<f64>() <= 1.0 + 1e-9);
}
