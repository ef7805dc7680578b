use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

use womctl_core::bundled;

fn womctl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_womctl"))
        .args(args)
        .env_remove("WOMCTL_CAP")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn demo_reports_sizes_and_equal_costs() {
    let dir = TempDir::new().unwrap();
    let report = dir.path().join("demo.json");
    let out = womctl(&["demo", "static3", "--report", path_str(&report)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let r = read_json(&report);
    assert_eq!(r["command"], "demo");
    let res = &r["results"]["static3"];
    assert_eq!(res["consistent"], true);
    let sizes: Vec<&str> = res["solvers"].as_array().unwrap().iter().map(|s| s["search_size"].as_str().unwrap()).collect();
    assert_eq!(sizes, ["16384", "256", "64", "64", "256"]);
    for s in res["solvers"].as_array().unwrap() {
        assert!((s["optimal_cost"].as_f64().unwrap() - 0.835).abs() < 1e-9);
    }
    assert!(r["instance_digest"]["static3"].as_str().unwrap().len() == 64);
}

#[test]
fn delays_of_the_three_agent_network() {
    let dir = TempDir::new().unwrap();
    let report = dir.path().join("d.json");
    let out = womctl(&["delays", "wom3", "--report", path_str(&report)]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("path 2 -> 3: [2, 1, 3] (delay 2)"));
    let r = read_json(&report);
    assert_eq!(r["results"]["delays"], json!([[0, 1, 1], [1, 0, 2], [1, 2, 0]]));
}

#[test]
fn disconnected_network_is_a_validation_error() {
    let dir = TempDir::new().unwrap();
    let file = dir.path().join("bad.json");
    let mut inst: Value = serde_json::from_str(&bundled::d2(1).to_json()).unwrap();
    inst["network"]["links"] = json!([{ "from": 1, "to": 2, "delay": 1 }]);
    std::fs::write(&file, inst.to_string()).unwrap();
    let out = womctl(&["validate", path_str(&file)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("2") && stderr(&out).to_lowercase().contains("connected"), "{}", stderr(&out));
}

#[test]
fn malformed_input_exits_with_one() {
    let dir = TempDir::new().unwrap();
    let file = dir.path().join("broken.json");
    std::fs::write(&file, "{ \"network\": ").unwrap();
    assert_eq!(womctl(&["validate", path_str(&file)]).status.code(), Some(1));
    assert_eq!(womctl(&["validate", "no-such-instance"]).status.code(), Some(1));
    assert_eq!(womctl(&["solve"]).status.code(), Some(1));
}

#[test]
fn cap_exceeded_exits_with_two() {
    let out = womctl(&["solve", "static3", "--method", "brute", "--cap", "2"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    let out = Command::new(env!("CARGO_BIN_EXE_womctl"))
        .args(["solve", "static3", "--method", "brute"])
        .env("WOMCTL_CAP", "2")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn agent_flag_is_checked() {
    assert_eq!(womctl(&["solve", "d2", "--method", "prescription"]).status.code(), Some(3));
    assert_eq!(womctl(&["solve", "d2", "--agent", "1"]).status.code(), Some(3));
    assert_eq!(womctl(&["solve", "d2", "--method", "prescription", "--agent", "3"]).status.code(), Some(3));
}

#[test]
fn reports_are_stable() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    assert!(womctl(&["counts", "wom3", "--report", path_str(&a)]).status.success());
    assert!(womctl(&["counts", "wom3", "--report", path_str(&b)]).status.success());
    let (ra, rb) = (read_json(&a), read_json(&b));
    assert_eq!(ra["instance_digest"], rb["instance_digest"]);
    assert_eq!(ra["results"], rb["results"]);
    let file = dir.path().join("wom3.json");
    std::fs::write(&file, bundled::wom3(1).to_json()).unwrap();
    let c = dir.path().join("c.json");
    assert!(womctl(&["counts", path_str(&file), "--report", path_str(&c)]).status.success());
    assert_eq!(read_json(&c)["instance_digest"], ra["instance_digest"]);
}

#[test]
fn emitted_strategy_evaluates_to_its_cost() {
    let dir = TempDir::new().unwrap();
    let strategy = dir.path().join("s.json");
    let beliefs = dir.path().join("b.json");
    let solved = dir.path().join("solve.json");
    let evaluated = dir.path().join("eval.json");
    let simulated = dir.path().join("sim.json");
    let out = womctl(&[
        "solve", "d2-t2", "--method", "prescription", "--agent", "2",
        "--emit-strategy", path_str(&strategy), "--emit-beliefs", path_str(&beliefs), "--report", path_str(&solved),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(womctl(&["evaluate", "d2-t2", "--strategy", path_str(&strategy), "--report", path_str(&evaluated)]).status.success());
    let optimal = read_json(&solved)["results"]["optimal_cost"].as_f64().unwrap();
    let exact = read_json(&evaluated)["results"]["expected_cost"].as_f64().unwrap();
    assert!((optimal - exact).abs() < 1e-9);
    assert!((exact - 2.058).abs() < 1e-9);
    let s = read_json(&strategy);
    assert_eq!(s["prescription"]["owner"], 2);
    let b = read_json(&beliefs);
    for record in b.as_array().unwrap() {
        let total: f64 = record["probs"].as_array().unwrap().iter().map(|p| p.as_f64().unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }
    let args = ["simulate", "d2-t2", "--strategy", path_str(&strategy), "--samples", "20000", "--seed", "5", "--report", path_str(&simulated)];
    assert!(womctl(&args).status.success());
    let first = read_json(&simulated)["results"].clone();
    assert!(womctl(&args).status.success());
    assert_eq!(read_json(&simulated)["results"], first);
    let estimate = first["expected_cost"].as_f64().unwrap();
    let stderr = first["stderr"].as_f64().unwrap();
    assert!((estimate - exact).abs() <= 4.0 * stderr);
}

#[test]
fn schema_lists_every_agent() {
    let out = womctl(&["schema", "wom3", "--time", "1"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("agent 3") && text.contains("L[1,3]"));
    assert_eq!(womctl(&["schema", "wom3", "--time", "9"]).status.code(), Some(3));
}
