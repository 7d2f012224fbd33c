use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn owgame(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_owgame"))
        .args(args)
        .env_remove("OWGAME_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// Header and data lines of a CSV document, comment lines dropped.
fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    (header, rows)
}

fn col(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("missing column {name}"))
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

fn schema() -> jsonschema::JSONSchema {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schema/owgame-output.schema.json");
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    jsonschema::JSONSchema::compile(&schema).unwrap()
}

fn assert_valid(doc: &Value) {
    let s = schema();
    let result = s.validate(doc);
    if let Err(errors) = result {
        let msgs: Vec<String> = errors.map(|e| format!("{e} at {}", e.instance_path)).collect();
        panic!("schema violations: {msgs:?}");
    }
}

#[test]
fn solve_small_grid() {
    let out = owgame(&["solve", "--n", "2", "--rho", "1", "--T", "1", "--N", "4", "--theta", "0.1", "--x", "1,1"]);
    assert!(out.status.success());
    let (header, rows) = csv_rows(&stdout(&out));
    assert_eq!(header, ["k", "t_k", "v_k", "w_k", "xi_1_k", "xi_2_k"]);
    assert_eq!(rows.len(), 5);
    let v: f64 = rows.iter().map(|r| num(&r[col(&header, "v_k")])).sum();
    assert!((v - 1.0).abs() < 1e-14);
    // 17 significant digits.
    assert_eq!(rows[1][1], "2.5000000000000000e-1");
}

#[test]
fn solve_method_check_reports_gap() {
    let out = owgame(&["solve", "--n", "3", "--x", "2,0,1", "--N", "60", "--method", "closed", "--method-check", "dense", "--format", "json"]);
    assert!(out.status.success());
    let doc: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_valid(&doc);
    let gap = doc["metadata"]["method_check"]["max_gap"].as_f64().unwrap();
    assert!(gap <= 1e-9, "{gap}");
    assert_eq!(doc["config"]["method_check"], "dense");
}

#[test]
fn validation_failures_exit_with_2() {
    for args in [
        vec!["solve", "--n", "1"],
        vec!["solve", "--n", "3", "--x", "1,2"],
        vec!["solve", "--rho", "-1"],
        vec!["costs", "--c", "1.5"],
        vec!["limits", "--theta", "0"],
        vec!["oscillate", "--theta", "0.2"],
        vec!["solve", "--bogus"],
    ] {
        let out = owgame(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
    let out = owgame(&["solve", "--n", "3", "--x", "1,2"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("--x"));
}

#[test]
fn overflow_guard_exits_with_3() {
    let out = owgame(&["limits", "--n", "2", "--rho", "300", "--theta", "0.1", "--N-list", "10"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn limits_start_row_is_exact() {
    let out = owgame(&["limits", "--n", "10", "--theta", "0.1", "--rho", "1", "--T", "1", "--N-list", "25,50,100,200"]);
    assert!(out.status.success());
    let (header, rows) = csv_rows(&stdout(&out));
    assert_eq!(rows.len(), 4 * 5);
    for r in rows.iter().filter(|r| num(&r[col(&header, "t")]) == 0.0) {
        assert_eq!(num(&r[col(&header, "V")]), 1.0);
        assert_eq!(num(&r[col(&header, "W")]), 1.0);
    }
    // V approaches g at t = T/2 as N grows.
    let mid: Vec<f64> = rows
        .iter()
        .filter(|r| num(&r[col(&header, "t")]) == 0.5)
        .map(|r| (num(&r[col(&header, "V")]) - num(&r[col(&header, "g")])).abs())
        .collect();
    assert!(mid.windows(2).all(|w| w[1] < w[0]), "{mid:?}");
}

#[test]
fn oscillate_rows_and_start() {
    let out = owgame(&["oscillate", "--n", "10", "--rho", "1", "--T", "1", "--N-list", "100,101", "--t-grid", "200", "--format", "json"]);
    assert!(out.status.success());
    let doc: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_valid(&doc);
    let rows = doc["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 400);
    let cols: Vec<&str> = doc["columns"].as_array().unwrap().iter().map(|c| c.as_str().unwrap()).collect();
    let (t, v) = (cols.iter().position(|&c| c == "t").unwrap(), cols.iter().position(|&c| c == "V").unwrap());
    for r in rows.iter().filter(|r| r[t].as_f64() == Some(0.0)) {
        assert_eq!(r[v].as_f64(), Some(1.0));
    }
}

#[test]
fn costs_vanish_without_inventory() {
    let out = owgame(&["costs", "--n", "3", "--x", "0,0,0", "--N-list", "20,40"]);
    assert!(out.status.success());
    let (header, rows) = csv_rows(&stdout(&out));
    assert_eq!(rows.len(), 6);
    for r in &rows {
        for name in ["total", "impact", "inst_front", "inst_back", "limit_impact", "limit_total"] {
            assert_eq!(num(&r[col(&header, name)]), 0.0, "{name}");
        }
    }
}

#[test]
fn costs_theta_zero_columns() {
    let out = owgame(&["costs", "--n", "3", "--x", "1,0.5,1.5", "--theta", "0", "--N-list", "200,201", "--format", "json"]);
    assert!(out.status.success());
    let doc: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_valid(&doc);
    let cols = doc["columns"].as_array().unwrap();
    assert!(cols.iter().any(|c| c == "limit_even"));
}

#[test]
fn halfgrid_second_half_decreases() {
    let out = owgame(&["halfgrid", "--mode", "second", "--x", "1,-1", "--theta", "1", "--n", "2", "--rho", "1", "--T", "1"]);
    assert!(out.status.success());
    let (header, rows) = csv_rows(&stdout(&out));
    let sup: Vec<f64> = rows.iter().map(|r| num(&r[col(&header, "sup_inventory")])).collect();
    assert_eq!(sup.len(), 4);
    assert!(sup.windows(2).all(|w| w[1] < w[0]), "{sup:?}");
}

#[test]
fn audit_pass_and_negative_control() {
    let out = owgame(&["audit", "--n", "3", "--theta", "0.1", "--N", "50", "--rho", "1", "--T", "1", "--x", "2,0,1"]);
    assert!(out.status.success());
    let doc: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_valid(&doc);
    assert_eq!(doc["report"]["pass"], true);
    assert_eq!(doc["report"]["seed"], 42);

    let out = owgame(&["audit", "--n", "3", "--x", "2,0,1", "--corrupt"]);
    assert_eq!(out.status.code(), Some(4));
    let doc: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_valid(&doc);
    assert_eq!(doc["report"]["pass"], false);
    assert!(doc["report"]["kkt_spread"].as_f64().unwrap() > 1e-3);
}

#[test]
fn audit_degenerate_and_theta_zero_branches() {
    for theta in ["0.5", "0"] {
        let out = owgame(&["audit", "--n", "3", "--theta", theta, "--N", "50", "--x", "2,0,1"]);
        assert!(out.status.success(), "theta = {theta}");
    }
}

#[test]
fn irregular_times_use_dense_solver() {
    let out = owgame(&["solve", "--n", "2", "--x", "1,0", "--times", "0,0.1,0.5,0.6,1", "--format", "json"]);
    assert!(out.status.success());
    let doc: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_valid(&doc);
    assert_eq!(doc["metadata"]["method"], "dense");
    assert_eq!(doc["rows"].as_array().unwrap().len(), 5);
}

#[test]
fn output_dir_env_and_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"n": 3, "x": [1, 2, 3], "N": 12, "theta": 0.2}"#).unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_owgame"))
        .args(["solve", "--config", cfg.to_str().unwrap(), "--N", "8", "--output", "sub/out.csv"])
        .env("OWGAME_OUTPUT_DIR", dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(dir.path().join("sub/out.csv")).unwrap();
    assert!(text.contains(r#""N":8"#));
    assert!(text.contains(r#""theta":0.2"#));
    let (_, rows) = csv_rows(&text);
    assert_eq!(rows.len(), 9);
}

#[test]
fn every_json_command_matches_schema() {
    for args in [
        vec!["limits", "--N-list", "10,20", "--format", "json"],
        vec!["halfgrid", "--N-list", "10,20", "--format", "json"],
        vec!["costs", "--N-list", "10", "--format", "json"],
    ] {
        let out = owgame(&args);
        assert!(out.status.success(), "{args:?}");
        let doc: Value = serde_json::from_str(&stdout(&out)).unwrap();
        assert_valid(&doc);
    }
}

#[test]
fn schema_rejects_malformed_documents() {
    let out = owgame(&["solve", "--N", "4", "--format", "json"]);
    let doc: Value = serde_json::from_str(&stdout(&out)).unwrap();
    let s = schema();
    assert!(s.is_valid(&doc));
    let mut bad = doc.clone();
    bad["schema_version"] = Value::from(2);
    assert!(!s.is_valid(&bad));
    let mut bad = doc.clone();
    bad.as_object_mut().unwrap().remove("metadata");
    assert!(!s.is_valid(&bad));
    let mut bad = doc;
    bad["config"]["unknown_key"] = Value::from(1);
    assert!(!s.is_valid(&bad));
}
