use std::path::PathBuf;
use std::process::{Command, Output};

fn ctbt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ctbt")).args(args).output().expect("binary runs")
}

fn model(name: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/models").join(name);
    p.to_str().unwrap().to_string()
}

fn broken() -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/malformed/broken.btm");
    p.to_str().unwrap().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn simulate_thermostat() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.json");
    let o = ctbt(&["simulate", &model("thermostat.btm"), "--x0", "19", "--t-end", "5", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let line = stdout(&o);
    assert_eq!(line.lines().count(), 1);
    assert!(line.starts_with("t = 5.000000  status = Running"), "{line}");
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(doc["meta"]["model"], "thermostat");
    assert_eq!(doc["meta"]["dt"], 0.001);
    assert_eq!(doc["meta"]["event_tol"], 1e-6);
    let samples = doc["samples"].as_array().unwrap();
    let last = samples.last().unwrap()["x"][0].as_f64().unwrap();
    assert!((last - 21.0).abs() <= 1e-4);
    let enters: Vec<f64> = doc["events"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|e| e["kind"] == "SlideEnter")
        .map(|e| e["t"].as_f64().unwrap())
        .collect();
    assert_eq!(enters.len(), 1);
    assert!((enters[0] - 2.0).abs() < 0.01);
}

#[test]
fn simulate_csv_and_pendulum_success() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p.csv");
    let o = ctbt(&[
        "simulate",
        &model("pendulum.btm"),
        "--x0",
        "3.24,0",
        "--t-end",
        "60",
        "--format",
        "csv",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("status = Success"), "{}", stdout(&o));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(csv.starts_with("t,x1,x2,leaf,status\n"));
    assert!(csv.trim_end().ends_with(",2,Success"));
}

#[test]
fn simulate_dimension_mismatch() {
    let o = ctbt(&["simulate", &model("thermostat.btm"), "--x0", "1,2"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("DimensionMismatch"), "{}", stderr(&o));
}

#[test]
fn simulate_runtime_failure_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("blowup.btm");
    std::fs::write(
        &path,
        "model \"blowup\" { state_dim = 1; control_dim = 1; plant { dx0 = x0 * x0; } leaf a { u = [0]; status = R; } root = a; }",
    )
    .unwrap();
    let o = ctbt(&["simulate", path.to_str().unwrap(), "--x0", "1", "--t-end", "5"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("integration failed"));
}

#[test]
fn regions_thermostat_grid() {
    let o = ctbt(&["regions", &model("thermostat.btm"), "--box", "11:31", "--grid", "101"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x1,owner_leaf_id,root_status"));
    let owners: Vec<(f64, &str)> = lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[1])
        })
        .collect();
    assert_eq!(owners.len(), 101);
    let first_cooling = owners.iter().position(|(_, o)| *o == "4").unwrap();
    assert!((owners[first_cooling - 1].0 - 21.0).abs() < 1e-9);
    assert!(owners[..first_cooling].iter().all(|(_, o)| *o == "3"));
    assert!(owners[first_cooling..].iter().all(|(_, o)| *o == "4"));
}

#[test]
fn regions_usage_errors() {
    assert_eq!(ctbt(&["regions", &model("thermostat.btm"), "--grid", "1"]).status.code(), Some(1));
    assert_eq!(ctbt(&["regions", &model("thermostat.btm"), "--box", "0:1,0:1"]).status.code(), Some(1));
    assert_eq!(ctbt(&["regions", &model("thermostat.btm"), "--box", "x"]).status.code(), Some(1));
}

#[test]
fn check_partition_kitchen_lamp() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    let o = ctbt(&[
        "check-partition",
        &model("kitchen_lamp.btm"),
        "--samples",
        "10000",
        "--seed",
        "7",
        "--report",
        report.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("PASS"));
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(doc["passed"], true);
    assert_eq!(doc["seed"], 7);
    assert_eq!(doc["report"]["samples_tested"], 10000);
}

#[test]
fn seed_is_required() {
    let o = ctbt(&["check-partition", &model("kitchen_lamp.btm")]);
    assert_eq!(o.status.code(), Some(1));
    let o = ctbt(&["certify", &model("pendulum.btm")]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn certify_pendulum_and_thermostat() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("c.json");
    let o = ctbt(&[
        "certify",
        &model("pendulum.btm"),
        "--inits",
        "grid",
        "--count",
        "25",
        "--seed",
        "7",
        "--dt",
        "0.01",
        "--t-end",
        "60",
        "--report",
        report.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("N = 2"));
    assert!(stdout(&o).trim_end().ends_with("result: PASS"));
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(doc["certificate"]["N"], 2);
    assert_eq!(doc["certificate"]["pass"], true);
    assert_eq!(doc["config"]["dt"], 0.01);
    assert_eq!(doc["count"], 25);

    let o = ctbt(&["certify", &model("thermostat.btm"), "--count", "5", "--seed", "1", "--t-end", "10", "--dt", "0.01"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("result: FAIL"));
}

#[test]
fn validate_models() {
    let o = ctbt(&["validate", &model("kitchen_lamp.btm")]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("5 nodes, 3 leaves"));
    let o = ctbt(&["validate", &broken()]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("NodeReusedInTree") && err.contains(":8:22:"), "{err}");
    assert_eq!(ctbt(&["validate", "/nonexistent/model.btm"]).status.code(), Some(1));
}

#[test]
fn output_directory_checked_before_work() {
    let o = ctbt(&["simulate", &model("thermostat.btm"), "--x0", "19", "--out", "/nonexistent/dir/t.json"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run = |k: usize| {
        let sim = dir.path().join(format!("sim{k}.json"));
        let rep = dir.path().join(format!("rep{k}.json"));
        let cert = dir.path().join(format!("cert{k}.json"));
        let a = ctbt(&["simulate", &model("pendulum.btm"), "--x0", "2,0.5", "--dt", "0.01", "--out", sim.to_str().unwrap()]);
        let b = ctbt(&[
            "check-partition",
            &model("kitchen_lamp.btm"),
            "--samples",
            "2000",
            "--seed",
            "3",
            "--report",
            rep.to_str().unwrap(),
        ]);
        let c = ctbt(&[
            "certify",
            &model("pendulum.btm"),
            "--inits",
            "random",
            "--count",
            "6",
            "--seed",
            "5",
            "--dt",
            "0.01",
            "--t-end",
            "60",
            "--report",
            cert.to_str().unwrap(),
        ]);
        for o in [&a, &b, &c] {
            assert!(o.status.code().is_some_and(|c| c != 1), "{}", stderr(o));
        }
        [sim, rep, cert].map(|p| std::fs::read(p).unwrap())
    };
    assert_eq!(run(0), run(1));
}
