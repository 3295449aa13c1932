use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use nsmc::cli::doc::ModelDoc;
use nsmc::cli::eval::evaluate;

const INVENTORY: &str = "measure discounted\nalpha 0.1\ngenerator inventory\ns 4\nS 10\neps 0\n";

const TWO_STATE: &str = "\
measure transient
n 20
reward 1 4
initial 0.5 0.5
matrix base
0.6 0.4
0.3 0.7
end
matrix e1
0.001 -0.001
-0.002 0.002
end
";

fn nsmc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nsmc")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn eval_prints_drift_free_anchor() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "inv.txt", INVENTORY);
    let out = nsmc(&["eval", &model, "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let exact = text.lines().find(|l| l.starts_with("exact,")).unwrap();
    let value: f64 = exact.split(',').nth(1).unwrap().parse().unwrap();
    assert_eq!(format!("{value:.4}"), "64.0915");
}

#[test]
fn malformed_row_sum_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "bad.txt", &TWO_STATE.replace("0.3 0.7", "0.3 0.6"));
    let out = nsmc(&["eval", &model]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 5"));
}

#[test]
fn missing_file_exits_1() {
    assert_eq!(nsmc(&["eval", "/nonexistent/model.txt"]).status.code(), Some(1));
}

#[test]
fn check_rejects_identity() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "id.txt", "measure transient\nn 5\nreward 1 2\ninitial 1 0\nmatrix base\n1 0\n0 1\nend\n");
    let out = nsmc(&["check", &model]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL irreducible-aperiodic"));

    let good = write(dir.path(), "two.txt", TWO_STATE);
    assert!(nsmc(&["check", &good]).status.success());
}

#[test]
fn json_lines_round_trip_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "two.txt", TWO_STATE);
    let out = nsmc(&["eval", &model, "--format", "json-lines"]);
    assert!(out.status.success());
    let rows = evaluate(&ModelDoc::parse(TWO_STATE).unwrap()).unwrap();
    let lines: Vec<serde_json::Value> = String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), rows.len());
    for (json, row) in lines.iter().zip(&rows) {
        assert_eq!(json["name"], row.name.as_str());
        assert_eq!(json["value"].as_f64().unwrap(), row.value);
        assert_eq!(json["rel_error_pct"].as_f64(), row.rel_error_pct);
    }
}

#[test]
fn reproduce_tables_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out_dir in [&a, &b] {
        let out = nsmc(&["reproduce-tables", "--tables", "2,3", "--out-dir", out_dir.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for name in ["table2.csv", "table3.csv", "calibration.md"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    let csv = fs::read_to_string(a.join("table2.csv")).unwrap();
    assert!(csv.starts_with("eps,truncated_true,"));
    assert_eq!(csv.lines().count(), 8);
}

#[test]
fn unknown_table_id_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = nsmc(&["reproduce-tables", "--tables", "7", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}
