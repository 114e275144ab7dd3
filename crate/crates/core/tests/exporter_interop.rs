//! Run trees produced by the Python exporter must load without errors and
//! survive a full `report`.

mod common;

use std::fs;

use common::*;
use fairrank::ingest::{load_run_dir, parse_prediction_log, validate_run, write_csv, write_jsonl, LogFormat};
use tempfile::tempdir;

#[test]
fn exported_tree_validates_and_reports() {
    let tmp = tempdir().unwrap();
    let runs = tmp.path().join("runs");
    write_corpus(&runs);

    let res = run(&["validate", "--runs-dir", runs.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0), "{}", stdout(&res));
    assert!(!stdout(&res).contains("error"));

    let out = tmp.path().join("out");
    let res = run(&[
        "report",
        "--runs-dir",
        runs.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(0));
    for name in ["metrics.csv", "metrics_seed_agg.csv", "selection.json", "report.json"] {
        assert!(out.join(name).is_file(), "{name}");
    }
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert!(report["run_failures"].as_array().unwrap().is_empty());
}

#[test]
fn jsonl_and_csv_logs_load_identically() {
    let tmp = tempdir().unwrap();
    write_corpus(tmp.path());
    let dir = fs::read_dir(tmp.path())
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.is_dir())
        .unwrap();
    let loaded = load_run_dir(&dir).unwrap();
    assert!(loaded.line_issues.is_empty());
    assert!(validate_run(&loaded.data).is_ok());

    let mut jsonl = Vec::new();
    write_jsonl(&loaded.data.records, &mut jsonl).unwrap();
    let mut csv = Vec::new();
    write_csv(&loaded.data.records, &mut csv).unwrap();
    let a = parse_prediction_log(&jsonl, LogFormat::Jsonl).unwrap();
    let b = parse_prediction_log(&csv, LogFormat::Csv).unwrap();
    assert_eq!(a.records, loaded.data.records);
    assert_eq!(b.records, loaded.data.records);

    // swapping the log format inside the run dir changes nothing
    fs::remove_file(dir.join("predictions.jsonl")).unwrap();
    fs::write(dir.join("predictions.csv"), &csv).unwrap();
    assert_eq!(load_run_dir(&dir).unwrap().data, loaded.data);
}
