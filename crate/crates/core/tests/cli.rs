use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn scenario(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "scenarios", name].iter().collect();
    p.display().to_string()
}

fn trapsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trapsim"))
        .args(args)
        .env_remove("TRAPSIM_SEED")
        .output()
        .unwrap()
}

#[test]
fn paired_reports_both_arms() {
    let out = trapsim(&["paired", "--scenario", &scenario("table3.json"), "--seed", "7", "--quiet"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let run = &v["runs"][0];
    assert_eq!(run["seed"], 7);
    assert_eq!(run["trap"]["success_rate"], 1.0);
    assert!(run["baseline"]["tx_actions"].as_u64().unwrap() > 0);
}

#[test]
fn zero_duration_baseline_run() {
    let dir = tempfile::tempdir().unwrap();
    let summary = dir.path().join("s.json");
    let out = trapsim(&[
        "run",
        "--scenario",
        &scenario("table3.json"),
        "--mode",
        "baseline",
        "--duration",
        "0m",
        "--summary",
        summary.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&summary).unwrap()).unwrap();
    assert_eq!(v["metrics"]["mode"], "baseline");
    assert_eq!(v["metrics"]["tx_actions"], 0);
    assert_eq!(v["metrics"]["successful_receptions"], 0);
}

#[test]
fn missing_scenario_exits_one() {
    let out = trapsim(&["run", "--scenario", "missing.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.json"));
}

#[test]
fn bad_flags_exit_one() {
    assert_eq!(trapsim(&["run", "--scenario", &scenario("table3.json"), "--mode", "fast"]).status.code(), Some(1));
    assert_eq!(
        trapsim(&["sweep", "--scenario", &scenario("table3.json"), "--grid", "colour=1"]).status.code(),
        Some(1)
    );
}

#[test]
fn outputs_are_reproducible_and_trace_is_optional() {
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for i in 0..2 {
        let trace = dir.path().join(format!("t{i}.csv"));
        let summary = dir.path().join(format!("s{i}.json"));
        let out = trapsim(&[
            "run",
            "--scenario",
            &scenario("collision.json"),
            "--seed",
            "3",
            "--trace",
            trace.to_str().unwrap(),
            "--summary",
            summary.to_str().unwrap(),
            "--quiet",
        ]);
        assert!(out.status.success());
        assert!(out.stdout.is_empty());
        files.push((std::fs::read(&trace).unwrap(), std::fs::read(&summary).unwrap()));
    }
    assert_eq!(files[0], files[1]);
    assert!(String::from_utf8_lossy(&files[0].0).starts_with("time_us,kind,node,peer,level,energy,detail\n"));

    let summary = dir.path().join("only.json");
    trapsim(&["run", "--scenario", &scenario("collision.json"), "--summary", summary.to_str().unwrap()]);
    assert!(summary.exists());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 5);
}

#[test]
fn seed_falls_back_to_environment() {
    let args = ["run", "--scenario", &scenario("table3.json"), "--quiet"];
    let with_env = Command::new(env!("CARGO_BIN_EXE_trapsim"))
        .args(args)
        .env("TRAPSIM_SEED", "12")
        .output()
        .unwrap();
    let explicit = trapsim(&["run", "--scenario", &scenario("table3.json"), "--quiet", "--seed", "12"]);
    assert_eq!(with_env.stdout, explicit.stdout);
    let v: Value = serde_json::from_slice(&explicit.stdout).unwrap();
    assert_eq!(v["seed"], 12);
}

#[test]
fn report_reads_paired_summaries() {
    let dir = tempfile::tempdir().unwrap();
    let summary = dir.path().join("p.json");
    let out = trapsim(&[
        "paired",
        "--scenario",
        &scenario("table3.json"),
        "--seeds",
        "3",
        "--summary",
        summary.to_str().unwrap(),
        "--quiet",
    ]);
    assert!(out.status.success());
    let out = trapsim(&["report", summary.to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("paired runs: 3"), "{text}");
    assert!(text.contains("100.0% ± 0.0"), "{text}");
    assert!(text.contains("0.35") && text.contains("0.15"), "{text}");
}

#[test]
fn sweep_writes_a_table() {
    let out = trapsim(&[
        "sweep",
        "--scenario",
        &scenario("codec_bench.json"),
        "--grid",
        "ook_freq_hz=12000,39000",
        "--seeds",
        "2",
        "--quiet",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 2);
    assert_eq!(v["keys"][0], "ook_freq_hz");
}
