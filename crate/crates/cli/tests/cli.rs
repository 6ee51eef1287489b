use std::path::Path;
use std::process::{Command, Output};

fn rothlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rothlab")).args(args).output().unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn count_small_set() {
    let out = rothlab(&["count", "--modulus", "7", "--set", "1,3,5"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["total"], 5);
    assert_eq!(v["nontrivial"], 2);
}

#[test]
fn count_empty_set() {
    let out = rothlab(&["count", "--modulus", "5", "--set", ""]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["total"], 0);
}

#[test]
fn count_rejects_out_of_range_elements() {
    let out = rothlab(&["count", "--modulus", "5", "--set", "1,7"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
    assert!(!out.stderr.is_empty());
}

#[test]
fn count_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("set.json");
    std::fs::write(&file, r#"{"invariant_factors":[3,3],"elements":[0,1,2]}"#).unwrap();
    let out = rothlab(&["count", "--file", path(&file)]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["total"], 9);
}

#[test]
fn unknown_flag_is_a_usage_error() {
    assert_eq!(rothlab(&["count", "--bogus"]).status.code(), Some(2));
}

#[test]
fn construct_greedy() {
    let out = rothlab(&["construct", "--method", "greedy", "--n", "14"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["set"]["elements"], serde_json::json!([1, 2, 4, 5, 10, 11, 13, 14]));
    assert_eq!(v["free"], true);
}

#[test]
fn construct_each_method() {
    for method in ["behrend", "elkin", "greedy"] {
        let out = rothlab(&["construct", "--method", method, "--n", "500"]);
        assert_eq!(out.status.code(), Some(0), "{method}");
        assert_eq!(json(&out)["free"], true);
    }
    let a = rothlab(&["construct", "--method", "random", "--n", "100", "--alpha", "0.3", "--seed", "4"]);
    let b = rothlab(&["construct", "--method", "random", "--n", "100", "--alpha", "0.3", "--seed", "4"]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn verify_reports_witness() {
    let out = rothlab(&["verify", "--n", "10", "--set", "1,2,3"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["free"], false);
    assert_eq!(v["witness"], serde_json::json!([1, 2, 3]));
}

#[test]
fn spectrum_of_subgroup() {
    let out = rothlab(&["spectrum", "--modulus", "9", "--set", "0,3,6", "--epsilon", "0.5"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let chars: Vec<u64> = v["entries"].as_array().unwrap().iter().map(|e| e["character"].as_u64().unwrap()).collect();
    assert_eq!(chars, vec![0, 3, 6]);
}

#[test]
fn bohr_report() {
    let out = rothlab(&["bohr", "--modulus", "9", "--frequencies", "3", "--widths", "0.5", "--members"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["members"], serde_json::json!([0, 3, 6]));
    assert_eq!(v["rank"], 1);
}

#[test]
fn bohr_width_mismatch_is_usage_error() {
    let out = rothlab(&["bohr", "--modulus", "9", "--frequencies", "1,2,3", "--widths", "0.5,1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn engine_is_deterministic_and_replays() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("a.json");
    let second = dir.path().join("b.json");
    for f in [&first, &second] {
        let out = rothlab(&["engine", "--modulus", "101", "--density", "0.4", "--seed", "7", "--out", path(f)]);
        assert_eq!(out.status.code(), Some(0));
    }
    assert_eq!(std::fs::read(&first).unwrap(), std::fs::read(&second).unwrap());
    let out = rothlab(&["replay", path(&first)]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["failures"], serde_json::json!([]));
}

#[test]
fn engine_on_behrend_image_replays() {
    let dir = tempfile::tempdir().unwrap();
    let cert = dir.path().join("c.json");
    for engine in ["main", "energy"] {
        let out = rothlab(&["engine", "--behrend", "100", "--engine", engine, "--out", path(&cert)]);
        assert_eq!(out.status.code(), Some(0));
        assert_eq!(rothlab(&["replay", path(&cert)]).status.code(), Some(0));
    }
}

#[test]
fn replay_rejects_tampered_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let cert = dir.path().join("c.json");
    rothlab(&["engine", "--modulus", "101", "--density", "0.4", "--seed", "1", "--out", path(&cert)]);
    let mut v: serde_json::Value = serde_json::from_slice(&std::fs::read(&cert).unwrap()).unwrap();
    let lhs = v["steps"][0]["checks"][0]["lhs"].as_f64().unwrap();
    v["steps"][0]["checks"][0]["lhs"] = serde_json::json!(lhs + 1.0);
    let before = serde_json::to_vec(&v).unwrap();
    std::fs::write(&cert, &before).unwrap();
    let out = rothlab(&["replay", path(&cert)]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(std::fs::read(&cert).unwrap(), before);
}

#[test]
fn engine_step_budget_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let cert = dir.path().join("c.json");
    let out = rothlab(&["engine", "--behrend", "100", "--step-budget", "0", "--out", path(&cert)]);
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn guard_env_caps_group_order() {
    let out = Command::new(env!("CARGO_BIN_EXE_rothlab"))
        .args(["engine", "--modulus", "101", "--density", "0.4"])
        .env("ROTHLAB_GUARD_BYTES", "160")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("config.json");
    let out = rothlab(&["config", "--out", path(&file)]);
    assert_eq!(out.status.code(), Some(0));
    let cert = dir.path().join("c.json");
    let out = rothlab(&["engine", "--modulus", "31", "--density", "0.5", "--config", path(&file), "--out", path(&cert)]);
    assert_eq!(out.status.code(), Some(0));
    let config: serde_json::Value = serde_json::from_slice(&std::fs::read(&file).unwrap()).unwrap();
    let used: serde_json::Value = serde_json::from_slice(&std::fs::read(&cert).unwrap()).unwrap();
    assert_eq!(config["increment"], used["config"]);
}
