use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const FLAT: &str = r#"{"vertices": ["a", "b"], "mu": [1, 1], "edges": [[0, 1, 1.0]], "h": [1, -2], "c": 0}"#;

fn kwgraph(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kwgraph")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn degree_on_flat_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "flat.json", FLAT);
    let out = kwgraph(&["degree", "--input", &input]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["numeric_degree"], -1);
    assert_eq!(v["theoretical_degree"], -1);
    assert_eq!(v["match"], true);
}

#[test]
fn malformed_input_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "bad.json", "{\"vertices\": [");
    let out = kwgraph(&["solve", "--input", &input]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
    let missing = dir.path().join("nope.json");
    let out = kwgraph(&["solve", "--input", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_data_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let split = write(dir.path(), "split.json", &FLAT.replace("[[0, 1, 1.0]]", "[]"));
    assert_eq!(kwgraph(&["solve", "--input", &split]).status.code(), Some(2));
    let input = write(dir.path(), "flat.json", FLAT);
    assert_eq!(kwgraph(&["enumerate", "--input", &input, "--starts", "0"]).status.code(), Some(2));
    assert_eq!(kwgraph(&["scan", "--input", &input]).status.code(), Some(2));
}

#[test]
fn solve_reports_closed_form_root() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "flat.json", FLAT);
    let out = kwgraph(&["solve", "--input", &input]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let u: Vec<f64> = v["u"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    let l2 = 2f64.ln();
    assert!((u[0] - l2.ln()).abs() < 1e-10 && (u[1] - (l2 / 2.0).ln()).abs() < 1e-10);

    let out = kwgraph(&["solve", "--input", &input, "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("vertex,name,u\n0,a,"));
}

#[test]
fn enumerate_csv_and_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "neg.json", &FLAT.replace("\"c\": 0", "\"c\": -0.05"));
    let report = dir.path().join("out.csv");
    let out = kwgraph(&["enumerate", "--input", &input, "--format", "csv", "--output", report.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&report).unwrap();
    assert_eq!(text.lines().count(), 3, "{text}");
}

#[test]
fn scan_and_lambdastar() {
    let dir = tempfile::tempdir().unwrap();
    let fam = write(dir.path(), "fam.json", r#"{"vertices": ["a", "b"], "mu": [1, 1], "edges": [[0, 1, 1.0]], "h": [1, -2]}"#);
    let out = kwgraph(&["scan", "--input", &fam, "--grid", "-0.3,-0.05", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let counts: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(counts, ["0", "2"]);

    let lam = write(
        dir.path(),
        "lam.json",
        r#"{"vertices": ["a", "b"], "mu": [1, 1], "edges": [[0, 1, 1.0]], "K": [0, -1], "kappa": [-1, -1]}"#,
    );
    let v = json(&kwgraph(&["lambdastar", "--input", &lam]));
    let (lo, hi) = (v["bracket"]["lower"].as_f64().unwrap(), v["bracket"]["upper"].as_f64().unwrap());
    assert!(0.0 < lo && lo < hi && hi < 1.0);
}

#[test]
fn reduce_and_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let p3 = write(
        dir.path(),
        "p3.json",
        r#"{"vertices": ["x", "y", "z"], "mu": [1, 1, 1], "edges": [[0, 1, 1], [1, 2, 1]], "h": [1, 0, -2], "c": 0}"#,
    );
    let v = json(&kwgraph(&["reduce", "--input", &p3]));
    assert_eq!(v["consistency"]["consistent"], true);
    assert_eq!(v["reduction"]["kept_vertices"], serde_json::json!([0, 2]));

    let sweep = write(
        dir.path(),
        "sweep.json",
        r#"{"vertices": ["a", "b"], "mu": [1, 1], "edges": [[0, 1, 1.0]],
            "start": {"h": [1, -2], "c": 0.01}, "end": {"h": [1, 0], "c": 0.01}, "waypoints": 5}"#,
    );
    let v = json(&kwgraph(&["sweep", "--input", &sweep]));
    assert_eq!(v["consistent"], true);
    assert_eq!(v["waypoints"].as_array().unwrap().len(), 5);
}
