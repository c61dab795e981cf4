use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const TWO_TASKS_UNSCHEDULABLE: &str = r#"{"model":"IMC","tasks":[
  {"id":"tau1","criticality":"LO","period":9,"wcet_lo":4,"wcet_hi":2},
  {"id":"tau2","criticality":"HI","period":10,"wcet_lo":4,"wcet_hi":7}]}"#;

const EDFVD_SET: &str = r#"{"model":"IMC","tasks":[
  {"id":"l","criticality":"LO","period":10,"wcet_lo":5,"wcet_hi":1},
  {"id":"h","criticality":"HI","period":10,"wcet_lo":3,"wcet_hi":6}]}"#;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_imc-edfvd")).args(args).output().unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn analyze_reports_range_and_virtual_deadlines() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "ts.json", EDFVD_SET);
    let o = bin(&["analyze", &f]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.contains("x range: [3/5, 3/4]"), "{s}");
    assert!(s.contains("x: 3/5"), "{s}");
    assert!(s.contains("  h: 6"), "{s}");

    let o = bin(&["analyze", &f, "--x-policy", "max"]);
    assert!(stdout(&o).contains("x: 3/4"));
}

#[test]
fn analyze_exit_codes() {
    let dir = TempDir::new().unwrap();
    let bad = write(&dir, "bad.json", TWO_TASKS_UNSCHEDULABLE);
    let o = bin(&["analyze", &bad]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("unschedulable"));

    let broken = write(&dir, "broken.json", "{\"model\": \"IMC\"");
    assert_eq!(bin(&["analyze", &broken]).status.code(), Some(2));
    assert_eq!(bin(&["analyze", "/no/such/file.json"]).status.code(), Some(2));

    let invalid = write(
        &dir,
        "invalid.json",
        r#"{"model":"IMC","tasks":[{"id":"h","criticality":"HI","period":10,"wcet_lo":6,"wcet_hi":3}]}"#,
    );
    assert_eq!(bin(&["analyze", &invalid]).status.code(), Some(2));
}

#[test]
fn optimize_prints_plan() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "ts.json", EDFVD_SET);
    let o = bin(&["optimize", &f]);
    assert_eq!(o.status.code(), Some(0));
    let plan: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(plan["x"], "3/5");
    // cap = (1 - 3/10 - 3/5) / (2/5) - 1/10 = 3/20; l takes 3/2 of its 4.
    assert_eq!(plan["budget_cap"], "3/20");
    assert_eq!(plan["increments"]["l"], "3/2");
    assert_eq!(plan["resulting_wcet_hi"]["l"], "5/2");

    let bad = write(&dir, "bad.json", TWO_TASKS_UNSCHEDULABLE);
    assert_eq!(bin(&["optimize", &bad]).status.code(), Some(1));
    assert_eq!(bin(&["optimize", &f, "--x", "1/2"]).status.code(), Some(2));
}

#[test]
fn drop_prints_modified_set() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "ts.json", TWO_TASKS_UNSCHEDULABLE);
    let o = bin(&["drop", &f]);
    let doc: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(doc["dropped"], serde_json::json!(["tau1"]));
    assert_eq!(doc["task_set"]["tasks"][0]["wcet_hi"], 0);
    let schedulable = doc["schedulable"].as_bool().unwrap();
    assert_eq!(o.status.code(), Some(if schedulable { 0 } else { 1 }));
}

#[test]
fn simulate_writes_trace() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "ts.json", TWO_TASKS_UNSCHEDULABLE);
    let trace = dir.path().join("trace.json");
    let o = bin(&[
        "simulate",
        &f,
        "--x",
        "7/10",
        "--scenario",
        "switch:tau2:1",
        "--horizon",
        "30",
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("mode switch: 14"));
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&trace).unwrap()).unwrap();
    assert_eq!(doc["mode_switch"], 14);
    assert!(doc["misses"].as_array().unwrap().is_empty());
    let first = &doc["events"][0];
    assert_eq!((first["t"].as_i64(), first["kind"].as_str()), (Some(0), Some("release")));

    assert_eq!(bin(&["simulate", &f, "--x", "7/10", "--scenario", "switch:nope:0"]).status.code(), Some(2));
    assert_eq!(bin(&["simulate", &f, "--x", "0"]).status.code(), Some(2));
}

#[test]
fn speedup_point_and_table() {
    let o = bin(&["speedup", "--alpha", "0.5", "--lambda", "0.5"]);
    let f: f64 = stdout(&o).trim().parse().unwrap();
    assert!((f - 1.206).abs() < 1e-3);

    let s = stdout(&bin(&["speedup", "--table"]));
    let lines: Vec<&str> = s.lines().collect();
    assert_eq!(lines[0], "lambda,alpha,f");
    assert_eq!(lines.len(), 50);
    assert_eq!(bin(&["speedup"]).status.code(), Some(2));
    assert_eq!(bin(&["speedup", "--alpha", "2", "--lambda", "0"]).status.code(), Some(2));
}

fn dir_contents(p: &Path) -> Vec<(String, String)> {
    let mut v: Vec<_> = fs::read_dir(p)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), fs::read_to_string(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn generate_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        let o = bin(&["--seed", "42", "generate", "-n", "3", "--lambda", "0.3", "--out", d.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
    }
    let files = dir_contents(&a);
    assert_eq!(files, dir_contents(&b));
    let names: Vec<&str> = files.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(names, ["manifest.json", "taskset-0000.json", "taskset-0001.json", "taskset-0002.json"]);
    let manifest: serde_json::Value = serde_json::from_str(&files[0].1).unwrap();
    assert_eq!(manifest["sets"][2]["seed"], 44);
    assert_eq!(manifest["params"]["lambda"], "3/10");

    assert_eq!(bin(&["generate", "-n", "1"]).status.code(), Some(2));
}

#[test]
fn sweep_csv_is_deterministic_across_thread_counts() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "sweep.json",
        r#"{"axis":"uavg","axis_values":["0.5","0.7","0.9"],"sets_per_point":40,
            "tests":["edfvd","worst_case_edf"],"validate_with_sim":true,"sim_scenarios_per_set":2}"#,
    );
    let one = dir.path().join("one.csv");
    let four = dir.path().join("four.csv");
    for (threads, out) in [("1", &one), ("4", &four)] {
        let o = bin(&["--seed", "3", "--threads", threads, "--out", out.to_str().unwrap(), "sweep", "--config", &cfg]);
        assert_eq!(o.status.code(), Some(0));
    }
    let a = fs::read(&one).unwrap();
    assert_eq!(a, fs::read(&four).unwrap());
    let text = String::from_utf8(a).unwrap();
    assert!(!text.contains('\r'));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "axis,value,test,accepted,total,ratio,sim_misses");
    assert_eq!(lines.len(), 7);
    assert!(lines[1].starts_with("uavg,0.5,edfvd,"));
    assert!(lines.iter().skip(1).all(|l| l.ends_with(",0")));

    let bad = write(&dir, "bad.json", r#"{"axis":"uavg","axis_values":["0.5"],"bogus":1}"#);
    assert_eq!(bin(&["sweep", "--config", &bad]).status.code(), Some(2));
}
