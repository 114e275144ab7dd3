//! Prediction logs, run manifests, validation and subgroup rebalancing.
//!
//! A run lives in its own directory:
//!
//! ```text
//! <runs_dir>/<run_id>/manifest.json
//! <runs_dir>/<run_id>/predictions.jsonl   (or predictions.csv)
//! ```
//!
//! JSONL lines carry exactly the keys `run_id`, `sample_id`, `score`, `label`
//! and `group`. The CSV alternative uses the header
//! `run_id,sample_id,score,label,group`.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub const CSV_HEADER: [&str; 5] = ["run_id", "sample_id", "score", "label", "group"];
pub const MANIFEST_FILE: &str = "manifest.json";
pub const PREDICTIONS_JSONL: &str = "predictions.jsonl";
pub const PREDICTIONS_CSV: &str = "predictions.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub run_id: String,
    pub sample_id: String,
    pub score: f64,
    pub label: u8,
    pub group: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Validation,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "validation" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?}")),
        }
    }
}

/// Identity of one trained model checkpoint evaluated on one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub algorithm: String,
    pub dataset: String,
    pub attribute: String,
    pub seed: i64,
    pub hparam_id: String,
    pub split: Split,
    pub group_names: Vec<String>,
}

impl RunManifest {
    /// Number of subgroups `m`.
    pub fn num_groups(&self) -> usize {
        self.group_names.len()
    }

    pub fn check(&self) -> Result<(), IngestError> {
        if self.run_id.is_empty() {
            return Err(IngestError::InvalidManifest("run_id is empty".into()));
        }
        if self.group_names.len() < 2 {
            return Err(IngestError::InvalidManifest(format!(
                "run {}: group_names must list at least 2 subgroups, got {}",
                self.run_id,
                self.group_names.len()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunData {
    pub manifest: RunManifest,
    pub records: Vec<PredictionRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogFormat {
    Jsonl,
    Csv,
}

impl LogFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("json") => Some(LogFormat::Jsonl),
            Some("csv") => Some(LogFormat::Csv),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LineErrorKind {
    #[error("malformed line: {0}")]
    MalformedLine(String),
    #[error("field `{field}` out of range: {value}")]
    FieldOutOfRange { field: &'static str, value: String },
    #[error("missing field `{0}`")]
    MissingField(&'static str),
}

/// A rejected line, 1-based.
#[derive(Debug, Clone, PartialEq)]
pub struct LineIssue {
    pub line: usize,
    pub kind: LineErrorKind,
}

impl fmt::Display for LineIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.kind)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedLog {
    pub records: Vec<PredictionRecord>,
    pub issues: Vec<LineIssue>,
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: invalid manifest JSON: {source}")]
    ManifestJson {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("invalid manifest: {0}")]
    InvalidManifest(String),
    #[error("{0}: no predictions.jsonl or predictions.csv found")]
    MissingPredictions(PathBuf),
    #[error("log is not valid UTF-8: {0}")]
    Encoding(#[from] std::str::Utf8Error),
    #[error("CSV header must be `run_id,sample_id,score,label,group`, found `{0}`")]
    CsvHeader(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("subgroup {0} has no samples")]
    EmptySubgroup(u32),
    #[error("group id {group} out of range for {m} subgroups")]
    GroupOutOfRange { group: u32, m: usize },
}

impl IngestError {
    /// Whether the failure is an I/O problem (as opposed to bad content).
    pub fn is_io(&self) -> bool {
        matches!(self, IngestError::Io { .. } | IngestError::MissingPredictions(_))
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> IngestError + '_ {
    move |source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Parses a prediction log. Good lines become records (order preserved); bad
/// lines are collected with their line number and do not stop parsing.
pub fn parse_prediction_log(bytes: &[u8], format: LogFormat) -> Result<ParsedLog, IngestError> {
    let text = std::str::from_utf8(bytes)?;
    match format {
        LogFormat::Jsonl => Ok(parse_jsonl(text)),
        LogFormat::Csv => parse_csv(text),
    }
}

fn parse_jsonl(text: &str) -> ParsedLog {
    let mut out = ParsedLog::default();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match parse_json_line(line) {
            Ok(rec) => out.records.push(rec),
            Err(kind) => out.issues.push(LineIssue { line: idx + 1, kind }),
        }
    }
    out
}

fn parse_json_line(line: &str) -> Result<PredictionRecord, LineErrorKind> {
    let value: Value =
        serde_json::from_str(line).map_err(|e| LineErrorKind::MalformedLine(e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| LineErrorKind::MalformedLine("expected a JSON object".into()))?;
    let get = |key: &'static str| obj.get(key).ok_or(LineErrorKind::MissingField(key));

    let run_id = get("run_id")?
        .as_str()
        .ok_or_else(|| LineErrorKind::MalformedLine("`run_id` must be a string".into()))?
        .to_owned();
    let sample_id = get("sample_id")?
        .as_str()
        .ok_or_else(|| LineErrorKind::MalformedLine("`sample_id` must be a string".into()))?
        .to_owned();
    let score = get("score")?
        .as_f64()
        .ok_or_else(|| LineErrorKind::MalformedLine("`score` must be a number".into()))?;
    let label = json_int(get("label")?, "label")?;
    let group = json_int(get("group")?, "group")?;
    build_record(run_id, sample_id, score, label, group)
}

fn json_int(v: &Value, field: &'static str) -> Result<i64, LineErrorKind> {
    if let Some(i) = v.as_i64() {
        Ok(i)
    } else if v.is_u64() {
        Err(LineErrorKind::FieldOutOfRange {
            field,
            value: v.to_string(),
        })
    } else {
        Err(LineErrorKind::MalformedLine(format!(
            "`{field}` must be an integer"
        )))
    }
}

fn build_record(
    run_id: String,
    sample_id: String,
    score: f64,
    label: i64,
    group: i64,
) -> Result<PredictionRecord, LineErrorKind> {
    if !(0.0..=1.0).contains(&score) {
        return Err(LineErrorKind::FieldOutOfRange {
            field: "score",
            value: score.to_string(),
        });
    }
    if label != 0 && label != 1 {
        return Err(LineErrorKind::FieldOutOfRange {
            field: "label",
            value: label.to_string(),
        });
    }
    let group = u32::try_from(group).map_err(|_| LineErrorKind::FieldOutOfRange {
        field: "group",
        value: group.to_string(),
    })?;
    Ok(PredictionRecord {
        run_id,
        sample_id,
        score,
        label: label as u8,
        group,
    })
}

fn parse_csv(text: &str) -> Result<ParsedLog, IngestError> {
    let mut out = ParsedLog::default();
    if text.trim().is_empty() {
        return Ok(out);
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());
    let header = reader.headers()?.clone();
    if header.iter().map(str::trim).ne(CSV_HEADER.iter().copied()) {
        return Err(IngestError::CsvHeader(header.iter().collect::<Vec<_>>().join(",")));
    }
    for row in reader.records() {
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
                out.issues.push(LineIssue {
                    line,
                    kind: LineErrorKind::MalformedLine(e.to_string()),
                });
                continue;
            }
        };
        let line = row.position().map(|p| p.line() as usize).unwrap_or(0);
        match csv_row(&row) {
            Ok(rec) => out.records.push(rec),
            Err(kind) => out.issues.push(LineIssue { line, kind }),
        }
    }
    Ok(out)
}

fn csv_row(row: &csv::StringRecord) -> Result<PredictionRecord, LineErrorKind> {
    if row.len() != CSV_HEADER.len() {
        return Err(LineErrorKind::MalformedLine(format!(
            "expected {} fields, found {}",
            CSV_HEADER.len(),
            row.len()
        )));
    }
    let field = |i: usize| -> Result<&str, LineErrorKind> {
        let v = &row[i];
        if v.is_empty() {
            Err(LineErrorKind::MissingField(CSV_HEADER[i]))
        } else {
            Ok(v)
        }
    };
    let run_id = field(0)?.to_owned();
    let sample_id = field(1)?.to_owned();
    let score: f64 = field(2)?
        .parse()
        .map_err(|_| LineErrorKind::MalformedLine("`score` must be a number".into()))?;
    let label: i64 = field(3)?
        .parse()
        .map_err(|_| LineErrorKind::MalformedLine("`label` must be an integer".into()))?;
    let group: i64 = field(4)?
        .parse()
        .map_err(|_| LineErrorKind::MalformedLine("`group` must be an integer".into()))?;
    build_record(run_id, sample_id, score, label, group)
}

/// Writes records as JSONL with the canonical key order.
pub fn write_jsonl<W: Write>(records: &[PredictionRecord], mut out: W) -> io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn write_csv<W: Write>(records: &[PredictionRecord], out: W) -> Result<(), IngestError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn load_manifest(path: &Path) -> Result<RunManifest, IngestError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let manifest: RunManifest =
        serde_json::from_slice(&bytes).map_err(|source| IngestError::ManifestJson {
            path: path.to_path_buf(),
            source,
        })?;
    manifest.check()?;
    Ok(manifest)
}

/// Reads a log file, inferring the format from the extension (JSONL by default).
pub fn load_prediction_log(path: &Path) -> Result<ParsedLog, IngestError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let format = LogFormat::from_path(path).unwrap_or(LogFormat::Jsonl);
    parse_prediction_log(&bytes, format)
}

/// A run directory loaded from disk, with any rejected log lines.
#[derive(Debug, Clone)]
pub struct LoadedRun {
    pub dir: PathBuf,
    pub data: RunData,
    pub line_issues: Vec<LineIssue>,
}

pub fn load_run_dir(dir: &Path) -> Result<LoadedRun, IngestError> {
    let manifest = load_manifest(&dir.join(MANIFEST_FILE))?;
    let jsonl = dir.join(PREDICTIONS_JSONL);
    let csv = dir.join(PREDICTIONS_CSV);
    let log_path = if jsonl.is_file() {
        jsonl
    } else if csv.is_file() {
        csv
    } else {
        return Err(IngestError::MissingPredictions(dir.to_path_buf()));
    };
    let parsed = load_prediction_log(&log_path)?;
    Ok(LoadedRun {
        dir: dir.to_path_buf(),
        data: RunData {
            manifest,
            records: parsed.records,
        },
        line_issues: parsed.issues,
    })
}

/// Lists run directories (those holding a manifest) directly under `runs_dir`,
/// sorted by path.
pub fn discover_runs(runs_dir: &Path) -> Result<Vec<PathBuf>, IngestError> {
    let entries = fs::read_dir(runs_dir).map_err(io_err(runs_dir))?;
    let mut dirs = Vec::new();
    for entry in entries {
        let entry = entry.map_err(io_err(runs_dir))?;
        let path = entry.path();
        if path.is_dir() && path.join(MANIFEST_FILE).is_file() {
            dirs.push(path);
        }
    }
    dirs.sort();
    Ok(dirs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationIssue {
    pub severity: Severity,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupCounts {
    pub group: u32,
    pub name: String,
    pub samples: usize,
    pub positives: usize,
    pub negatives: usize,
}

impl GroupCounts {
    /// Per-group AUC needs both label values.
    pub fn auc_defined(&self) -> bool {
        self.positives > 0 && self.negatives > 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub run_id: String,
    pub m: usize,
    pub groups: Vec<GroupCounts>,
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.issues.iter().all(|i| i.severity < Severity::Error)
    }

    pub fn errors(&self) -> impl Iterator<Item = &ValidationIssue> {
        self.issues.iter().filter(|i| i.severity == Severity::Error)
    }

    pub fn all_groups_auc_defined(&self) -> bool {
        self.groups.iter().all(GroupCounts::auc_defined)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.is_ok() { "ok" } else { "FAILED" };
        writeln!(f, "run {} (m = {}): {status}", self.run_id, self.m)?;
        for g in &self.groups {
            writeln!(
                f,
                "  group {} ({}): {} samples, {} positive, {} negative",
                g.group, g.name, g.samples, g.positives, g.negatives
            )?;
        }
        for i in &self.issues {
            let tag = match i.severity {
                Severity::Warning => "warning",
                Severity::Error => "error",
            };
            writeln!(f, "  {tag}: {}", i.message)?;
        }
        Ok(())
    }
}

/// Checks a run for consistency and per-group label coverage. Never fails;
/// problems are reported with a severity.
pub fn validate_run(run: &RunData) -> ValidationReport {
    let m = run.manifest.num_groups();
    let mut groups: Vec<GroupCounts> = (0..m)
        .map(|g| GroupCounts {
            group: g as u32,
            name: run.manifest.group_names[g].clone(),
            samples: 0,
            positives: 0,
            negatives: 0,
        })
        .collect();
    let mut issues = Vec::new();
    let mut out_of_range: BTreeMap<u32, usize> = BTreeMap::new();
    let mut foreign_run_ids: BTreeMap<&str, usize> = BTreeMap::new();
    let mut seen = HashSet::new();
    let mut duplicates = 0usize;
    let (mut pos, mut neg) = (0usize, 0usize);

    for r in &run.records {
        if r.run_id != run.manifest.run_id {
            *foreign_run_ids.entry(r.run_id.as_str()).or_default() += 1;
        }
        if !seen.insert(r.sample_id.as_str()) {
            duplicates += 1;
        }
        if r.label == 1 {
            pos += 1;
        } else {
            neg += 1;
        }
        match groups.get_mut(r.group as usize) {
            Some(g) => {
                g.samples += 1;
                if r.label == 1 {
                    g.positives += 1;
                } else {
                    g.negatives += 1;
                }
            }
            None => *out_of_range.entry(r.group).or_default() += 1,
        }
    }

    let error = |message: String| ValidationIssue {
        severity: Severity::Error,
        message,
    };
    let warning = |message: String| ValidationIssue {
        severity: Severity::Warning,
        message,
    };

    if run.records.is_empty() {
        issues.push(error("run has no prediction records".into()));
    } else {
        if pos == 0 {
            issues.push(error("run has no positives; overall AUC undefined".into()));
        }
        if neg == 0 {
            issues.push(error("run has no negatives; overall AUC undefined".into()));
        }
    }
    for (id, count) in foreign_run_ids {
        issues.push(error(format!(
            "{count} record(s) carry run_id {id:?}, expected {:?}",
            run.manifest.run_id
        )));
    }
    for (group, count) in out_of_range {
        issues.push(error(format!(
            "group {group}: out of range for m = {m} ({count} record(s))"
        )));
    }
    for g in &groups {
        if g.samples == 0 {
            issues.push(warning(format!(
                "group {}: no samples; per-group AUC undefined",
                g.group
            )));
        } else if g.negatives == 0 {
            issues.push(warning(format!(
                "group {}: no negatives; per-group AUC undefined",
                g.group
            )));
        } else if g.positives == 0 {
            issues.push(warning(format!(
                "group {}: no positives; per-group AUC undefined",
                g.group
            )));
        }
    }
    if duplicates > 0 {
        issues.push(warning(format!("{duplicates} duplicate sample_id(s)")));
    }

    ValidationReport {
        run_id: run.manifest.run_id.clone(),
        m,
        groups,
        issues,
    }
}

/// Per-sample weights that make every subgroup equally likely to be drawn:
/// a sample in group `s` gets `1 / (m * n_s)`.
pub fn resampling_weights(group_of_sample: &[u32], m: usize) -> Result<Vec<f64>, IngestError> {
    let mut counts = vec![0usize; m];
    for &g in group_of_sample {
        match counts.get_mut(g as usize) {
            Some(c) => *c += 1,
            None => return Err(IngestError::GroupOutOfRange { group: g, m }),
        }
    }
    if let Some(empty) = counts.iter().position(|&c| c == 0) {
        return Err(IngestError::EmptySubgroup(empty as u32));
    }
    Ok(group_of_sample
        .iter()
        .map(|&g| 1.0 / (m as f64 * counts[g as usize] as f64))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::fsum;
    use proptest::prelude::*;

    fn rec(group: u32, label: u8) -> PredictionRecord {
        PredictionRecord {
            run_id: "r1".into(),
            sample_id: format!("s{group}{label}{}", rand_suffix()),
            score: 0.5,
            label,
            group,
        }
    }

    fn rand_suffix() -> u64 {
        use std::sync::atomic::{AtomicU64, Ordering};
        static N: AtomicU64 = AtomicU64::new(0);
        N.fetch_add(1, Ordering::Relaxed)
    }

    fn manifest(m: usize) -> RunManifest {
        RunManifest {
            run_id: "r1".into(),
            algorithm: "ERM".into(),
            dataset: "toy".into(),
            attribute: "Sex".into(),
            seed: 0,
            hparam_id: "h0".into(),
            split: Split::Test,
            group_names: (0..m).map(|g| format!("g{g}")).collect(),
        }
    }

    #[test]
    fn parses_single_jsonl_record() {
        let line = br#"{"run_id":"r1","sample_id":"s1","score":0.7,"label":1,"group":0}"#;
        let parsed = parse_prediction_log(line, LogFormat::Jsonl).unwrap();
        assert!(parsed.issues.is_empty());
        assert_eq!(
            parsed.records,
            vec![PredictionRecord {
                run_id: "r1".into(),
                sample_id: "s1".into(),
                score: 0.7,
                label: 1,
                group: 0
            }]
        );
    }

    #[test]
    fn empty_stream_is_empty_list() {
        for fmt in [LogFormat::Jsonl, LogFormat::Csv] {
            let parsed = parse_prediction_log(b"", fmt).unwrap();
            assert!(parsed.records.is_empty());
            assert!(parsed.issues.is_empty());
        }
    }

    #[test]
    fn bad_line_reported_and_rest_parsed() {
        let text = concat!(
            r#"{"run_id":"r1","sample_id":"a","score":0.1,"label":0,"group":0}"#,
            "\n",
            r#"{"run_id":"r1","sample_id":"b","score":1.3,"label":1,"group":0}"#,
            "\n",
            r#"{"run_id":"r1","sample_id":"c","score":0.9,"label":1,"group":1}"#,
            "\n"
        );
        let parsed = parse_prediction_log(text.as_bytes(), LogFormat::Jsonl).unwrap();
        assert_eq!(parsed.records.len(), 2);
        assert_eq!(parsed.records[1].sample_id, "c");
        assert_eq!(parsed.issues.len(), 1);
        assert_eq!(parsed.issues[0].line, 2);
        assert!(matches!(
            parsed.issues[0].kind,
            LineErrorKind::FieldOutOfRange { field: "score", .. }
        ));
    }

    #[test]
    fn jsonl_error_kinds() {
        type Check = fn(&LineErrorKind) -> bool;
        let cases: [(&str, Check); 5] = [
            ("not json", |k| matches!(k, LineErrorKind::MalformedLine(_))),
            (
                r#"{"run_id":"r","sample_id":"s","score":0.2,"label":1}"#,
                |k| matches!(k, LineErrorKind::MissingField("group")),
            ),
            (
                r#"{"run_id":"r","sample_id":"s","score":0.2,"label":2,"group":0}"#,
                |k| matches!(k, LineErrorKind::FieldOutOfRange { field: "label", .. }),
            ),
            (
                r#"{"run_id":"r","sample_id":"s","score":0.2,"label":1,"group":-1}"#,
                |k| matches!(k, LineErrorKind::FieldOutOfRange { field: "group", .. }),
            ),
            (
                r#"{"run_id":"r","sample_id":"s","score":"x","label":1,"group":0}"#,
                |k| matches!(k, LineErrorKind::MalformedLine(_)),
            ),
        ];
        for (line, check) in cases {
            let parsed = parse_prediction_log(line.as_bytes(), LogFormat::Jsonl).unwrap();
            assert_eq!(parsed.issues.len(), 1, "{line}");
            assert!(check(&parsed.issues[0].kind), "{line}: {:?}", parsed.issues[0]);
        }
    }

    #[test]
    fn csv_parsing_and_line_numbers() {
        let text = "run_id,sample_id,score,label,group\nr1,a,0.25,0,1\nr1,b,0.5\nr1,c,0.75,1,0\n";
        let parsed = parse_prediction_log(text.as_bytes(), LogFormat::Csv).unwrap();
        assert_eq!(parsed.records.len(), 2);
        assert_eq!(parsed.issues.len(), 1);
        assert_eq!(parsed.issues[0].line, 3);
        assert_eq!(parsed.records[0].group, 1);
    }

    #[test]
    fn csv_rejects_wrong_header() {
        let err = parse_prediction_log(b"a,b,c\n1,2,3\n", LogFormat::Csv).unwrap_err();
        assert!(matches!(err, IngestError::CsvHeader(_)));
    }

    #[test]
    fn manifest_requires_two_groups() {
        assert!(manifest(2).check().is_ok());
        assert!(matches!(
            manifest(1).check(),
            Err(IngestError::InvalidManifest(_))
        ));
    }

    #[test]
    fn manifest_json_keys() {
        let json = r#"{"run_id":"r1","algorithm":"ERM","dataset":"toy","attribute":"Sex",
            "seed":3,"hparam_id":"h0","split":"validation","group_names":["M","F"]}"#;
        let m: RunManifest = serde_json::from_str(json).unwrap();
        assert_eq!(m.split, Split::Validation);
        assert_eq!(m.num_groups(), 2);
    }

    #[test]
    fn validation_counts_ok() {
        let mut records = Vec::new();
        for _ in 0..5 {
            records.push(rec(0, 1));
            records.push(rec(0, 0));
        }
        for _ in 0..3 {
            records.push(rec(1, 1));
        }
        for _ in 0..2 {
            records.push(rec(1, 0));
        }
        let report = validate_run(&RunData {
            manifest: manifest(2),
            records,
        });
        assert!(report.is_ok());
        assert!(report.issues.is_empty());
        assert_eq!(
            (report.groups[0].positives, report.groups[0].negatives),
            (5, 5)
        );
        assert_eq!(
            (report.groups[1].positives, report.groups[1].negatives),
            (3, 2)
        );
    }

    #[test]
    fn validation_flags_degenerate_group() {
        let records = vec![rec(0, 1), rec(0, 0), rec(1, 1), rec(1, 1)];
        let report = validate_run(&RunData {
            manifest: manifest(2),
            records,
        });
        assert!(report.is_ok());
        assert!(!report.all_groups_auc_defined());
        assert!(report
            .issues
            .iter()
            .any(|i| i.message == "group 1: no negatives; per-group AUC undefined"));
    }

    #[test]
    fn validation_flags_out_of_range_group() {
        let records = vec![rec(0, 1), rec(0, 0), rec(1, 1), rec(1, 0), rec(2, 1)];
        let report = validate_run(&RunData {
            manifest: manifest(2),
            records,
        });
        assert!(!report.is_ok());
        assert!(report.errors().any(|i| i.message.contains("group 2: out of range")));
    }

    #[test]
    fn validation_is_pure() {
        let run = RunData {
            manifest: manifest(2),
            records: vec![rec(0, 1), rec(1, 0), rec(5, 1)],
        };
        assert_eq!(validate_run(&run), validate_run(&run));
    }

    #[test]
    fn weights_examples() {
        let w = resampling_weights(&[0, 0, 0, 1], 2).unwrap();
        let expect = [1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0, 0.5];
        for (a, b) in w.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(resampling_weights(&[0, 1], 2).unwrap(), vec![0.5, 0.5]);
        let w = resampling_weights(&[0, 0, 1, 1, 2, 2], 3).unwrap();
        assert!(w.iter().all(|x| (x - 1.0 / 6.0).abs() < 1e-15));
    }

    #[test]
    fn weights_errors() {
        assert!(matches!(
            resampling_weights(&[0, 0], 2),
            Err(IngestError::EmptySubgroup(1))
        ));
        assert!(matches!(
            resampling_weights(&[0, 3], 2),
            Err(IngestError::GroupOutOfRange { group: 3, m: 2 })
        ));
    }

    fn record_strategy() -> impl Strategy<Value = PredictionRecord> {
        (
            "[a-z0-9_]{1,8}",
            "[a-zA-Z0-9 ,\"]{1,10}",
            0.0f64..=1.0,
            0u8..=1,
            0u32..6,
        )
            .prop_map(|(run_id, sample_id, score, label, group)| PredictionRecord {
                run_id,
                sample_id,
                score,
                label,
                group,
            })
    }

    proptest! {
        #[test]
        fn jsonl_round_trip(records in prop::collection::vec(record_strategy(), 0..40)) {
            let mut buf = Vec::new();
            write_jsonl(&records, &mut buf).unwrap();
            let parsed = parse_prediction_log(&buf, LogFormat::Jsonl).unwrap();
            prop_assert!(parsed.issues.is_empty());
            prop_assert_eq!(parsed.records, records);
        }

        #[test]
        fn csv_round_trip(records in prop::collection::vec(record_strategy(), 0..40)) {
            let mut buf = Vec::new();
            write_csv(&records, &mut buf).unwrap();
            let parsed = parse_prediction_log(&buf, LogFormat::Csv).unwrap();
            prop_assert!(parsed.issues.is_empty());
            prop_assert_eq!(parsed.records, records);
        }

        #[test]
        fn weights_sum_to_one_and_permute(
            groups in prop::collection::vec(0u32..4, 4..200),
            seed in any::<u64>(),
        ) {
            let m = 4;
            prop_assume!((0..m as u32).all(|g| groups.contains(&g)));
            let w = resampling_weights(&groups, m).unwrap();
            prop_assert!((fsum(w.iter().copied()) - 1.0).abs() < 1e-12);

            use rand::{seq::SliceRandom, SeedableRng};
            let mut perm: Vec<usize> = (0..groups.len()).collect();
            perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let shuffled: Vec<u32> = perm.iter().map(|&i| groups[i]).collect();
            let w2 = resampling_weights(&shuffled, m).unwrap();
            for (k, &i) in perm.iter().enumerate() {
                prop_assert_eq!(w2[k], w[i]);
            }
        }
    }
}
