//! File-tree pipelines behind the `fairrank` commands.
//!
//! Exit codes are shared by every command: 0 success, 1 domain or validation
//! failure, 2 I/O failure. Output files are written to a temporary name and
//! renamed into place, so an interrupted command never leaves a partial file.

pub mod cli;
pub mod table;

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::config::{ComparisonMetric, ConfigError, PipelineConfig, SeedPolicy, SelectionUnit};
use crate::ingest::{
    discover_runs, load_prediction_log, load_run_dir, validate_run, IngestError, LoadedRun,
    Split, MANIFEST_FILE,
};
use crate::metrics::{aggregate_seeds, evaluate_run, MetricBundle, SeedAggregate};
use crate::par::Parallelism;
use crate::selection::{select_report, CandidateInput, SelectionError, SelectionReport, Strategy};
use crate::stats::{
    friedman_test, nemenyi_cd, svg::cd_svg_string, CdLayout, Direction, RankTable, StatsError,
};

pub use table::{metrics_csv, read_metrics_csv, seed_aggregate_csv, MetricRow, MetricsTable, TableKind};

pub const METRICS_FILE: &str = "metrics.csv";
pub const SEED_AGGREGATE_FILE: &str = "metrics_seed_agg.csv";
pub const SELECTION_FILE: &str = "selection.json";
pub const COMPARISON_FILE: &str = "comparison.json";
pub const CD_DIAGRAM_FILE: &str = "cd_diagram.svg";
pub const REPORT_FILE: &str = "report.json";

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_IO: i32 = 2;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error("{0}")]
    Domain(String),
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Io { .. } => EXIT_IO,
            PipelineError::Ingest(e) if e.is_io() => EXIT_IO,
            _ => EXIT_DOMAIN,
        }
    }
}

fn io_error(path: &Path) -> impl FnOnce(io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn read_text(path: &Path) -> Result<String, PipelineError> {
    fs::read_to_string(path).map_err(io_error(path))
}

/// Writes `contents` to `dir/name` via a temporary file and a rename.
pub fn write_atomic(dir: &Path, name: &str, contents: &[u8]) -> Result<PathBuf, PipelineError> {
    fs::create_dir_all(dir).map_err(io_error(dir))?;
    let target = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp"));
    fs::write(&tmp, contents).map_err(io_error(&tmp))?;
    fs::rename(&tmp, &target).map_err(io_error(&target))?;
    Ok(target)
}

fn to_json<T: Serialize>(value: &T) -> Result<String, PipelineError> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// What a command prints and how it exits.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutcome {
    pub exit_code: i32,
    pub stdout: String,
}

// ---------------------------------------------------------------- validate

/// Validates run directories, directories of runs, or bare log files.
pub fn cmd_validate(paths: &[PathBuf]) -> Result<CommandOutcome, PipelineError> {
    let mut out = String::new();
    let mut failed = false;
    let mut seen_ids: HashSet<String> = HashSet::new();
    if paths.is_empty() {
        return Err(PipelineError::Domain("nothing to validate".into()));
    }
    for path in paths {
        let meta = fs::metadata(path).map_err(io_error(path))?;
        if meta.is_file() {
            let parsed = load_prediction_log(path)?;
            let _ = writeln!(
                out,
                "{}: {} record(s), {} rejected line(s)",
                path.display(),
                parsed.records.len(),
                parsed.issues.len()
            );
            for issue in &parsed.issues {
                let _ = writeln!(out, "  error: {issue}");
            }
            failed |= !parsed.issues.is_empty();
            continue;
        }
        let run_dirs = if path.join(MANIFEST_FILE).is_file() {
            vec![path.clone()]
        } else {
            discover_runs(path)?
        };
        if run_dirs.is_empty() {
            let _ = writeln!(out, "{}: no runs found", path.display());
            failed = true;
        }
        for dir in run_dirs {
            match load_run_dir(&dir) {
                Ok(loaded) => {
                    let report = validate_run(&loaded.data);
                    let _ = write!(out, "{}: {report}", dir.display());
                    for issue in &loaded.line_issues {
                        let _ = writeln!(out, "  error: predictions {issue}");
                    }
                    if !seen_ids.insert(loaded.data.manifest.run_id.clone()) {
                        let _ = writeln!(
                            out,
                            "  error: run_id {:?} appears more than once",
                            loaded.data.manifest.run_id
                        );
                        failed = true;
                    }
                    failed |= !report.is_ok() || !loaded.line_issues.is_empty();
                }
                Err(e) if e.is_io() => return Err(e.into()),
                Err(e) => {
                    let _ = writeln!(out, "{}: error: {e}", dir.display());
                    failed = true;
                }
            }
        }
    }
    Ok(CommandOutcome {
        exit_code: if failed { EXIT_DOMAIN } else { EXIT_OK },
        stdout: out,
    })
}

// ---------------------------------------------------------------- evaluate

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RunFailure {
    pub run: String,
    pub reason: String,
}

/// Runs that passed loading and validation, plus what was rejected.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub runs: Vec<LoadedRun>,
    pub failures: Vec<RunFailure>,
}

pub fn load_corpus(runs_dir: &Path, exec: Parallelism) -> Result<Corpus, PipelineError> {
    let dirs = discover_runs(runs_dir)?;
    let loaded = exec.map(&dirs, |d| load_run_dir(d));
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    let mut seen = HashSet::new();
    for (dir, result) in dirs.iter().zip(loaded) {
        let name = dir.display().to_string();
        let run = match result {
            Ok(r) => r,
            Err(e) if e.is_io() => return Err(e.into()),
            Err(e) => {
                failures.push(RunFailure {
                    run: name,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let run_id = run.data.manifest.run_id.clone();
        if !run.line_issues.is_empty() {
            failures.push(RunFailure {
                run: run_id,
                reason: format!(
                    "{} malformed prediction line(s), first: {}",
                    run.line_issues.len(),
                    run.line_issues[0]
                ),
            });
            continue;
        }
        let report = validate_run(&run.data);
        if let Some(err) = report.errors().next() {
            failures.push(RunFailure {
                run: run_id,
                reason: err.message.clone(),
            });
            continue;
        }
        if !seen.insert(run_id.clone()) {
            failures.push(RunFailure {
                run: run_id,
                reason: "duplicate run_id".into(),
            });
            continue;
        }
        runs.push(run);
    }
    for f in &failures {
        log::warn!("skipping {}: {}", f.run, f.reason);
    }
    Ok(Corpus { runs, failures })
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    /// Sorted by run id.
    pub bundles: Vec<MetricBundle>,
    pub aggregates: Vec<SeedAggregate>,
    pub failures: Vec<RunFailure>,
}

impl Evaluation {
    pub fn metrics_csv(&self) -> Result<String, PipelineError> {
        metrics_csv(&self.bundles)
    }

    pub fn seed_aggregate_csv(&self) -> Result<String, PipelineError> {
        seed_aggregate_csv(&self.aggregates)
    }
}

pub fn evaluate_corpus(corpus: &Corpus, cfg: &PipelineConfig, exec: Parallelism) -> Evaluation {
    let results = exec.map(&corpus.runs, |r| evaluate_run(&r.data, &cfg.metric_config));
    let mut failures = corpus.failures.clone();
    let mut bundles = Vec::new();
    for (run, res) in corpus.runs.iter().zip(results) {
        match res {
            Ok(b) => {
                debug_assert!(b.is_consistent());
                bundles.push(b)
            }
            Err(e) => failures.push(RunFailure {
                run: run.data.manifest.run_id.clone(),
                reason: e.to_string(),
            }),
        }
    }
    bundles.sort_by(|a, b| a.identity.run_id.cmp(&b.identity.run_id));

    type SeedKey = (String, String, String, String, Split);
    let mut by_config: BTreeMap<SeedKey, Vec<MetricBundle>> = BTreeMap::new();
    for b in &bundles {
        let id = &b.identity;
        by_config
            .entry((
                id.algorithm.clone(),
                id.dataset.clone(),
                id.attribute.clone(),
                id.hparam_id.clone(),
                id.split,
            ))
            .or_default()
            .push(b.clone());
    }
    let mut aggregates = Vec::new();
    for (key, group) in by_config {
        match aggregate_seeds(&group) {
            Ok(a) => aggregates.push(a),
            Err(e) => failures.push(RunFailure {
                run: format!("{}/{}/{}/{}/{}", key.0, key.1, key.2, key.3, key.4),
                reason: e.to_string(),
            }),
        }
    }
    Evaluation {
        bundles,
        aggregates,
        failures,
    }
}

fn require_runs_dir(cfg: &PipelineConfig) -> Result<&Path, PipelineError> {
    cfg.runs_dir
        .as_deref()
        .ok_or_else(|| PipelineError::Domain("--runs-dir is required".into()))
}

fn evaluate_from_config(cfg: &PipelineConfig) -> Result<Evaluation, PipelineError> {
    let exec = Parallelism::default();
    let corpus = load_corpus(require_runs_dir(cfg)?, exec)?;
    if corpus.runs.is_empty() {
        return Err(PipelineError::Domain(format!(
            "no evaluable runs under {} ({} rejected)",
            require_runs_dir(cfg)?.display(),
            corpus.failures.len()
        )));
    }
    Ok(evaluate_corpus(&corpus, cfg, exec))
}

fn failures_text(failures: &[RunFailure]) -> String {
    failures
        .iter()
        .map(|f| format!("skipped {}: {}\n", f.run, f.reason))
        .collect()
}

pub fn cmd_evaluate(cfg: &PipelineConfig) -> Result<CommandOutcome, PipelineError> {
    let eval = evaluate_from_config(cfg)?;
    let metrics = write_atomic(&cfg.output_dir, METRICS_FILE, eval.metrics_csv()?.as_bytes())?;
    let agg = write_atomic(
        &cfg.output_dir,
        SEED_AGGREGATE_FILE,
        eval.seed_aggregate_csv()?.as_bytes(),
    )?;
    let mut stdout = format!(
        "evaluated {} run(s)\nwrote {}\nwrote {}\n",
        eval.bundles.len(),
        metrics.display(),
        agg.display()
    );
    stdout.push_str(&failures_text(&eval.failures));
    Ok(CommandOutcome {
        exit_code: if eval.failures.is_empty() { EXIT_OK } else { EXIT_DOMAIN },
        stdout,
    })
}

// ---------------------------------------------------------------- select

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSelection {
    pub algorithm: String,
    pub dataset: String,
    pub attribute: String,
    /// Split the candidates were drawn from (`all` when rows carry none).
    pub split: String,
    pub candidates: usize,
    #[serde(flatten)]
    pub report: SelectionReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupFailure {
    pub algorithm: String,
    pub dataset: String,
    pub attribute: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionOutput {
    pub strategy: Strategy,
    pub candidate_unit: SelectionUnit,
    pub selections: Vec<GroupSelection>,
    pub failures: Vec<GroupFailure>,
}

type GroupKey = (String, String, String);

fn group_rows(rows: &[MetricRow]) -> BTreeMap<GroupKey, Vec<&MetricRow>> {
    let mut groups: BTreeMap<GroupKey, Vec<&MetricRow>> = BTreeMap::new();
    for r in rows {
        groups
            .entry((r.algorithm.clone(), r.dataset.clone(), r.attribute.clone()))
            .or_default()
            .push(r);
    }
    groups
}

/// Selects one model per (algorithm, dataset, attribute). Validation rows are
/// preferred as candidates when a group has any.
pub fn select_rows(table: &MetricsTable, strategy: Strategy, exec: Parallelism) -> SelectionOutput {
    let mut selections = Vec::new();
    let mut failures = Vec::new();
    for ((algorithm, dataset, attribute), rows) in group_rows(&table.rows) {
        let has_validation = rows.iter().any(|r| r.split == Some(Split::Validation));
        let pool: Vec<&MetricRow> = if has_validation {
            rows.into_iter()
                .filter(|r| r.split == Some(Split::Validation))
                .collect()
        } else {
            rows
        };
        let split = if has_validation {
            Split::Validation.to_string()
        } else {
            let splits: HashSet<Option<Split>> = pool.iter().map(|r| r.split).collect();
            match (splits.len(), splits.into_iter().next()) {
                (1, Some(Some(s))) => s.to_string(),
                _ => "all".to_owned(),
            }
        };
        let inputs: Vec<CandidateInput> = pool
            .iter()
            .map(|r| CandidateInput {
                run_id: r.run_id.clone(),
                group_auc: r.group_aucs(),
                overall_auc: r.get("overall_auc"),
            })
            .collect();
        match select_report(strategy, &inputs, exec) {
            Ok(report) => selections.push(GroupSelection {
                algorithm,
                dataset,
                attribute,
                split,
                candidates: inputs.len(),
                report,
            }),
            Err(e) => failures.push(GroupFailure {
                algorithm,
                dataset,
                attribute,
                reason: e.to_string(),
            }),
        }
    }
    SelectionOutput {
        strategy,
        candidate_unit: match table.kind {
            TableKind::PerRun => SelectionUnit::Run,
            TableKind::SeedAggregate => SelectionUnit::SeedMean,
        },
        selections,
        failures,
    }
}

fn metrics_path(cfg: &PipelineConfig, explicit: Option<&Path>) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .unwrap_or_else(|| cfg.output_dir.join(METRICS_FILE))
}

pub fn cmd_select(
    cfg: &PipelineConfig,
    metrics: Option<&Path>,
) -> Result<CommandOutcome, PipelineError> {
    let path = metrics_path(cfg, metrics);
    let table = read_metrics_csv(&read_text(&path)?)?;
    let output = select_rows(&table, cfg.strategy, Parallelism::default());
    let json = to_json(&output)?;
    write_atomic(&cfg.output_dir, SELECTION_FILE, json.as_bytes())?;
    let exit_code = if output.selections.is_empty() {
        EXIT_DOMAIN
    } else {
        EXIT_OK
    };
    Ok(CommandOutcome {
        exit_code,
        stdout: json,
    })
}

// ---------------------------------------------------------------- compare

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub metric: ComparisonMetric,
    pub direction: Direction,
    pub k: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub algorithms: Vec<String>,
    pub mean_ranks: BTreeMap<String, f64>,
    pub chi2: f64,
    pub p_value: f64,
    pub alpha: f64,
    pub significant: bool,
    pub iman_davenport_f: Option<f64>,
    pub dropped_rows: usize,
    pub seed_policy: SeedPolicy,
    pub posthoc: bool,
    pub cd: Option<f64>,
    pub groups: Option<Vec<Vec<String>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub table: RankTable,
    pub report: ComparisonReport,
    /// Present when the post-hoc step ran.
    pub layout: Option<CdLayout>,
}

#[derive(Debug, Clone, Copy)]
pub struct CompareOptions {
    pub metric: ComparisonMetric,
    pub alpha: f64,
    pub seed_policy: SeedPolicy,
    pub force_posthoc: bool,
}

impl From<&PipelineConfig> for CompareOptions {
    fn from(cfg: &PipelineConfig) -> Self {
        CompareOptions {
            metric: cfg.comparison_metric,
            alpha: cfg.alpha,
            seed_policy: cfg.seed_policy,
            force_posthoc: cfg.force_posthoc,
        }
    }
}

/// Builds the dataset x attribute rank table for one metric (test rows only,
/// when any exist) and runs Friedman, then Nemenyi if significant or forced.
pub fn compare_rows(rows: &[MetricRow], opts: CompareOptions) -> Result<Comparison, PipelineError> {
    let has_test = rows.iter().any(|r| r.split == Some(Split::Test));
    let rows: Vec<&MetricRow> = rows
        .iter()
        .filter(|r| !has_test || r.split == Some(Split::Test))
        .collect();

    let mut algorithms: Vec<String> = Vec::new();
    for r in &rows {
        if !algorithms.contains(&r.algorithm) {
            algorithms.push(r.algorithm.clone());
        }
    }
    let k = algorithms.len();
    if k < 2 {
        return Err(StatsError::TooFewAlgorithms(k).into());
    }

    type CellKey = (String, String, Option<i64>);
    let mut cells: BTreeMap<CellKey, Vec<Vec<f64>>> = BTreeMap::new();
    for r in &rows {
        let seed = match opts.seed_policy {
            SeedPolicy::RankPerSeed => r.seed,
            SeedPolicy::RankSeedMean => None,
        };
        let entry = cells
            .entry((r.dataset.clone(), r.attribute.clone(), seed))
            .or_insert_with(|| vec![Vec::new(); k]);
        let j = algorithms.iter().position(|a| a == &r.algorithm).expect("listed");
        if let Some(v) = r.get(opts.metric.column()) {
            entry[j].push(v);
        }
    }
    let table_rows: Vec<(String, Vec<Option<f64>>)> = cells
        .into_iter()
        .map(|((dataset, attribute, seed), values)| {
            let label = match seed {
                Some(s) => format!("{dataset}/{attribute}/{s}"),
                None => format!("{dataset}/{attribute}"),
            };
            let means = values.iter().map(|v| crate::numeric::mean(v)).collect();
            (label, means)
        })
        .collect();

    let table = RankTable::from_values(algorithms.clone(), table_rows, opts.metric.direction())?;
    let friedman = friedman_test(&table, opts.alpha)?;
    let posthoc = friedman.significant || opts.force_posthoc;
    let (cd, layout) = if posthoc {
        let cd = nemenyi_cd(k, table.n(), opts.alpha)?;
        let named: Vec<(String, f64)> = algorithms
            .iter()
            .cloned()
            .zip(table.mean_ranks.iter().copied())
            .collect();
        (Some(cd), Some(CdLayout::new(&named, cd)))
    } else {
        (None, None)
    };
    let report = ComparisonReport {
        metric: opts.metric,
        direction: opts.metric.direction(),
        k,
        n: table.n(),
        algorithms: algorithms.clone(),
        mean_ranks: algorithms
            .iter()
            .cloned()
            .zip(table.mean_ranks.iter().copied())
            .collect(),
        chi2: friedman.chi2,
        p_value: friedman.p_value,
        alpha: opts.alpha,
        significant: friedman.significant,
        iman_davenport_f: friedman.iman_davenport_f,
        dropped_rows: table.dropped_rows,
        seed_policy: opts.seed_policy,
        posthoc,
        cd,
        groups: layout.as_ref().map(|l| l.groups.clone()),
    };
    Ok(Comparison {
        table,
        report,
        layout,
    })
}

fn write_comparison(dir: &Path, cmp: &Comparison) -> Result<String, PipelineError> {
    let json = to_json(&cmp.report)?;
    write_atomic(dir, COMPARISON_FILE, json.as_bytes())?;
    if let Some(layout) = &cmp.layout {
        write_atomic(dir, CD_DIAGRAM_FILE, cd_svg_string(layout).as_bytes())?;
    }
    Ok(json)
}

pub fn cmd_compare(
    cfg: &PipelineConfig,
    metrics: Option<&Path>,
) -> Result<CommandOutcome, PipelineError> {
    let path = metrics_path(cfg, metrics);
    let table = read_metrics_csv(&read_text(&path)?)?;
    let cmp = compare_rows(&table.rows, CompareOptions::from(cfg))?;
    let json = write_comparison(&cfg.output_dir, &cmp)?;
    Ok(CommandOutcome {
        exit_code: EXIT_OK,
        stdout: json,
    })
}

// ---------------------------------------------------------------- report

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineReport {
    pub metrics_csv: String,
    pub seed_aggregate_csv: String,
    pub runs_evaluated: usize,
    pub run_failures: Vec<RunFailure>,
    pub selection: SelectionOutput,
    pub comparison: Option<ComparisonReport>,
    pub comparison_error: Option<String>,
    pub cd_diagram: Option<String>,
}

/// Rows of the models picked by `selection`, on the test split when the
/// corpus has it.
fn selected_rows(
    selection: &SelectionOutput,
    per_run: &MetricsTable,
    bundles: &[MetricBundle],
) -> Vec<MetricRow> {
    let identity: BTreeMap<&str, &MetricBundle> = bundles
        .iter()
        .map(|b| (b.identity.run_id.as_str(), b))
        .collect();
    let mut out = Vec::new();
    for sel in &selection.selections {
        let chosen = sel.report.chosen_run_id.as_str();
        let (hparam, seed) = match selection.candidate_unit {
            SelectionUnit::SeedMean => (chosen.to_owned(), None),
            SelectionUnit::Run => match identity.get(chosen) {
                Some(b) => (b.identity.hparam_id.clone(), Some(b.identity.seed)),
                None => continue,
            },
        };
        let matches = |r: &&MetricRow| {
            r.algorithm == sel.algorithm
                && r.dataset == sel.dataset
                && r.attribute == sel.attribute
                && identity.get(r.run_id.as_str()).is_some_and(|b| {
                    b.identity.hparam_id == hparam && seed.is_none_or(|s| b.identity.seed == s)
                })
        };
        let candidates: Vec<&MetricRow> = per_run.rows.iter().filter(matches).collect();
        let test: Vec<&MetricRow> = candidates
            .iter()
            .copied()
            .filter(|r| r.split == Some(Split::Test))
            .collect();
        let picked = if test.is_empty() { candidates } else { test };
        out.extend(picked.into_iter().cloned());
    }
    out
}

/// evaluate, then select per (algorithm, dataset, attribute), then compare
/// the selected models across dataset/attribute rows.
pub fn run_report(cfg: &PipelineConfig) -> Result<(PipelineReport, Option<Comparison>), PipelineError> {
    let eval = evaluate_from_config(cfg)?;
    let metrics_text = eval.metrics_csv()?;
    let agg_text = eval.seed_aggregate_csv()?;
    write_atomic(&cfg.output_dir, METRICS_FILE, metrics_text.as_bytes())?;
    write_atomic(&cfg.output_dir, SEED_AGGREGATE_FILE, agg_text.as_bytes())?;

    // select from the written tables so results match `select` run on the files
    let per_run = read_metrics_csv(&metrics_text)?;
    let candidates = match cfg.selection_unit {
        SelectionUnit::Run => per_run.clone(),
        SelectionUnit::SeedMean => read_metrics_csv(&agg_text)?,
    };
    let selection = select_rows(&candidates, cfg.strategy, Parallelism::default());
    write_atomic(&cfg.output_dir, SELECTION_FILE, to_json(&selection)?.as_bytes())?;

    let chosen = selected_rows(&selection, &per_run, &eval.bundles);
    let (comparison, comparison_error) = match compare_rows(&chosen, CompareOptions::from(cfg)) {
        Ok(c) => {
            write_comparison(&cfg.output_dir, &c)?;
            (Some(c), None)
        }
        Err(e) => {
            log::warn!("comparison skipped: {e}");
            (None, Some(e.to_string()))
        }
    };
    let report = PipelineReport {
        metrics_csv: METRICS_FILE.into(),
        seed_aggregate_csv: SEED_AGGREGATE_FILE.into(),
        runs_evaluated: eval.bundles.len(),
        run_failures: eval.failures.clone(),
        selection,
        comparison: comparison.as_ref().map(|c| c.report.clone()),
        comparison_error,
        cd_diagram: comparison
            .as_ref()
            .and_then(|c| c.layout.as_ref())
            .map(|_| CD_DIAGRAM_FILE.to_owned()),
    };
    write_atomic(&cfg.output_dir, REPORT_FILE, to_json(&report)?.as_bytes())?;
    Ok((report, comparison))
}

pub fn cmd_report(cfg: &PipelineConfig) -> Result<CommandOutcome, PipelineError> {
    let (report, _) = run_report(cfg)?;
    let exit_code = if report.selection.selections.is_empty() || !report.run_failures.is_empty() {
        EXIT_DOMAIN
    } else {
        EXIT_OK
    };
    Ok(CommandOutcome {
        exit_code,
        stdout: to_json(&report)?,
    })
}
