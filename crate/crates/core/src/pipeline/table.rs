//! Metrics CSV files: writing per-run and seed-aggregated tables, and reading
//! either back as generic metric rows.
//!
//! Undefined metrics are written as `NA`. Per-group columns beyond a run's own
//! subgroup count (the header is padded to the largest `m` in the corpus) are
//! left empty.

use std::collections::BTreeMap;

use crate::ingest::Split;
use crate::metrics::{MetricBundle, SeedAggregate};

use super::PipelineError;

pub const IDENTITY_COLUMNS: [&str; 6] = ["run_id", "algorithm", "dataset", "attribute", "seed", "split"];
pub const AGGREGATE_IDENTITY_COLUMNS: [&str; 6] =
    ["algorithm", "dataset", "attribute", "hparam_id", "split", "n_seeds"];
pub const NA: &str = "NA";

fn fmt_value(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.6}"),
        None => NA.to_owned(),
    }
}

/// Subgroup index of a per-group column such as `fpr_g3`.
fn group_index(column: &str) -> Option<usize> {
    column.rsplit_once("_g").and_then(|(_, g)| g.parse().ok())
}

fn metric_column_names(m_max: usize) -> Vec<String> {
    let mut names: Vec<String> = [
        "overall_auc",
        "worst_auc",
        "auc_gap",
        "eqodd",
        "bce",
        "ece",
        "threshold",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for prefix in ["auc", "fpr", "fnr", "tprattnr"] {
        names.extend((0..m_max).map(|g| format!("{prefix}_g{g}")));
    }
    names
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String, PipelineError> {
    let bytes = w
        .into_inner()
        .map_err(|e| PipelineError::Domain(format!("csv buffer: {e}")))?;
    String::from_utf8(bytes).map_err(|e| PipelineError::Domain(e.to_string()))
}

/// One row per run, sorted by run id.
pub fn metrics_csv(bundles: &[MetricBundle]) -> Result<String, PipelineError> {
    let mut sorted: Vec<&MetricBundle> = bundles.iter().collect();
    sorted.sort_by(|a, b| a.identity.run_id.cmp(&b.identity.run_id));
    let m_max = sorted.iter().map(|b| b.m()).max().unwrap_or(0);

    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    let mut header: Vec<String> = IDENTITY_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend(metric_column_names(m_max));
    w.write_record(&header)?;
    for b in sorted {
        let id = &b.identity;
        let mut row = vec![
            id.run_id.clone(),
            id.algorithm.clone(),
            id.dataset.clone(),
            id.attribute.clone(),
            id.seed.to_string(),
            id.split.to_string(),
        ];
        for (name, value) in b.metric_columns(m_max) {
            match group_index(&name) {
                Some(g) if g >= b.m() => row.push(String::new()),
                _ => row.push(fmt_value(value)),
            }
        }
        w.write_record(&row)?;
    }
    finish(w)
}

/// One row per (algorithm, dataset, attribute, hparam_id, split), with
/// `_mean` and `_std` columns per metric.
pub fn seed_aggregate_csv(aggregates: &[SeedAggregate]) -> Result<String, PipelineError> {
    let m_max = aggregates.iter().map(|a| a.m).max().unwrap_or(0);
    let names = metric_column_names(m_max);
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    let mut header: Vec<String> = AGGREGATE_IDENTITY_COLUMNS
        .iter()
        .map(|s| s.to_string())
        .collect();
    for n in &names {
        header.push(format!("{n}_mean"));
        header.push(format!("{n}_std"));
    }
    w.write_record(&header)?;
    for a in aggregates {
        let mut row = vec![
            a.algorithm.clone(),
            a.dataset.clone(),
            a.attribute.clone(),
            a.hparam_id.clone(),
            a.split.to_string(),
            a.n_seeds.to_string(),
        ];
        for name in &names {
            match group_index(name) {
                Some(g) if g >= a.m => {
                    row.push(String::new());
                    row.push(String::new());
                }
                _ => {
                    let stat = a.get(name);
                    row.push(fmt_value(stat.map(|s| s.mean)));
                    row.push(fmt_value(stat.map(|s| s.std)));
                }
            }
        }
        w.write_record(&row)?;
    }
    finish(w)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableKind {
    PerRun,
    SeedAggregate,
}

/// A metrics row, independent of which table it came from. For
/// seed-aggregated tables the `run_id` is the hyperparameter id and the
/// values are the seed means.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub run_id: String,
    pub algorithm: String,
    pub dataset: String,
    pub attribute: String,
    pub seed: Option<i64>,
    pub split: Option<Split>,
    /// Present columns only; `None` marks an `NA` cell.
    pub values: BTreeMap<String, Option<f64>>,
}

impl MetricRow {
    pub fn get(&self, column: &str) -> Option<f64> {
        self.values.get(column).copied().flatten()
    }

    /// Subgroup AUCs `auc_g0, auc_g1, ...` up to the first absent column.
    pub fn group_aucs(&self) -> Vec<Option<f64>> {
        (0..)
            .map_while(|g| self.values.get(&format!("auc_g{g}")).copied())
            .collect()
    }

    pub fn from_bundle(b: &MetricBundle) -> Self {
        let id = &b.identity;
        MetricRow {
            run_id: id.run_id.clone(),
            algorithm: id.algorithm.clone(),
            dataset: id.dataset.clone(),
            attribute: id.attribute.clone(),
            seed: Some(id.seed),
            split: Some(id.split),
            values: b.metric_columns(b.m()).into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsTable {
    pub kind: TableKind,
    pub rows: Vec<MetricRow>,
}

fn parse_cell(column: &str, cell: &str, line: u64) -> Result<Option<Option<f64>>, PipelineError> {
    let cell = cell.trim();
    if cell.is_empty() {
        return Ok(None);
    }
    if cell == NA {
        return Ok(Some(None));
    }
    cell.parse::<f64>()
        .map(|v| Some(Some(v).filter(|x| x.is_finite())))
        .map_err(|_| PipelineError::Domain(format!("line {line}: `{column}` is not a number: {cell:?}")))
}

/// Reads a per-run metrics CSV or a seed-aggregated one (detected by header).
/// Only the identity columns are required; metric columns may be any subset.
pub fn read_metrics_csv(text: &str) -> Result<MetricsTable, PipelineError> {
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_owned()).collect();
    let col = |name: &str| header.iter().position(|h| h == name);
    let kind = if col("run_id").is_some() {
        TableKind::PerRun
    } else if col("hparam_id").is_some() && col("n_seeds").is_some() {
        TableKind::SeedAggregate
    } else {
        return Err(PipelineError::Domain(
            "metrics CSV needs a `run_id` column (or `hparam_id` and `n_seeds` for seed aggregates)"
                .into(),
        ));
    };
    let id_col = if kind == TableKind::PerRun { "run_id" } else { "hparam_id" };
    let required = [id_col, "algorithm", "dataset", "attribute"];
    let idx: Vec<usize> = required
        .iter()
        .map(|r| col(r).ok_or_else(|| PipelineError::Domain(format!("metrics CSV lacks `{r}`"))))
        .collect::<Result<_, _>>()?;
    let seed_col = col("seed");
    let split_col = col("split");
    let skip: Vec<&str> = match kind {
        TableKind::PerRun => IDENTITY_COLUMNS.to_vec(),
        TableKind::SeedAggregate => AGGREGATE_IDENTITY_COLUMNS.to_vec(),
    };

    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize| record.get(i).unwrap_or("").trim().to_owned();
        let seed = match seed_col.map(field).filter(|s| !s.is_empty()) {
            Some(s) => Some(s.parse::<i64>().map_err(|_| {
                PipelineError::Domain(format!("line {line}: bad seed {s:?}"))
            })?),
            None => None,
        };
        let split = match split_col.map(field).filter(|s| !s.is_empty()) {
            Some(s) => Some(s.parse::<Split>().map_err(|e| {
                PipelineError::Domain(format!("line {line}: {e}"))
            })?),
            None => None,
        };
        let mut values = BTreeMap::new();
        for (i, name) in header.iter().enumerate() {
            if skip.contains(&name.as_str()) || required.contains(&name.as_str()) {
                continue;
            }
            let metric = match kind {
                TableKind::PerRun => name.as_str(),
                TableKind::SeedAggregate => match name.strip_suffix("_mean") {
                    Some(base) => base,
                    None => continue,
                },
            };
            if let Some(v) = parse_cell(name, record.get(i).unwrap_or(""), line)? {
                values.insert(metric.to_owned(), v);
            }
        }
        rows.push(MetricRow {
            run_id: field(idx[0]),
            algorithm: field(idx[1]),
            dataset: field(idx[2]),
            attribute: field(idx[3]),
            seed,
            split,
            values,
        });
    }
    Ok(MetricsTable { kind, rows })
}
