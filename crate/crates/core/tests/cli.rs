use std::path::Path;
use std::process::Command;

use cgsched::TrafficPlan;

const CONFIG: &str = r#"{
    "topology": {"kind": "grid", "rows": 3, "cols": 3},
    "scenario": {"initial_streams": 30, "iterations": 3,
                 "add_per_iteration": 5, "delete_per_iteration": 4},
    "expansion": {"cps": 10, "scheme": "randomized", "strategy": "traffic-volume"},
    "seed": 4
}"#;

fn cgsched(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_cgsched")).args(args).output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("config.json");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn run_then_validate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let out = dir.path().join("out");
    let o =
        cgsched(&["run", "--config", &cfg, "--out", out.to_str().unwrap(), "--strategy", "avg-degree", "--cps", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "iteration,strategy,scheme,cps,rejected,expansion_ms,solving_ms,total_ms,vertices,edges"
    );
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&row[..4], &["0", "avg-degree", "randomized", "3"]);
    assert_eq!(csv.lines().count(), 5);

    let topo = out.join("topology.json");
    let plan = out.join("plan.json");
    let o = cgsched(&["validate", topo.to_str().unwrap(), plan.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));

    // Move one stream onto another's route and phase.
    let mut p: TrafficPlan = serde_json::from_str(&std::fs::read_to_string(&plan).unwrap()).unwrap();
    let first = p.streams[0].clone();
    let mut copy = first.clone();
    copy.stream.id = cgsched::StreamId(9999);
    p.streams.push(copy);
    std::fs::write(&plan, serde_json::to_string(&p).unwrap()).unwrap();
    let o = cgsched(&["validate", topo.to_str().unwrap(), plan.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("overlap"));
}

#[test]
fn generators_write_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let out = dir.path().join("gen");
    let o = cgsched(&["gen-scenario", "--config", &cfg, "--seed", "8", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let scenario: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("scenario.json")).unwrap()).unwrap();
    assert_eq!(scenario["steps"].as_array().unwrap().len(), 4);
    assert_eq!(scenario["steps"][0]["add"].as_array().unwrap().len(), 30);

    let with_file =
        CONFIG.replace("\"seed\": 4", &format!("\"seed\": 4, \"scenario_file\": {:?}", out.join("scenario.json")));
    let cfg2 = write_config(dir.path(), &with_file);
    let o = cgsched(&["run", "--config", &cfg2, "--out", dir.path().join("r").to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let o = cgsched(&["gen-topology", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(out.join("topology.json").exists());
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), &CONFIG.replace("\"rows\": 3", "\"rows\": 1"));
    assert_eq!(cgsched(&["run", "--config", &bad]).status.code(), Some(2));
    assert_eq!(cgsched(&["run", "--config", "/nonexistent.json"]).status.code(), Some(2));
    let cfg = write_config(dir.path(), CONFIG);
    assert_eq!(cgsched(&["run", "--config", &cfg, "--alpha", "50"]).status.code(), Some(2));
}
