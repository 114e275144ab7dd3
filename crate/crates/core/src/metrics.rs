//! Per-run evaluation metrics, per subgroup and pooled.
//!
//! Everything here is a pure function of its inputs. Scores are model output
//! probabilities in `[0, 1]`, labels are `0`/`1`, and the decision rule is
//! always "predict positive iff score >= threshold".

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::ingest::{RunData, RunManifest, Split};
use crate::numeric::{fsum, mean, sample_std};
use crate::par::Parallelism;

/// Probability clamp for BCE.
pub const BCE_EPS: f64 = 1e-7;

/// Slack when comparing an achieved rate against a target rate, absorbing
/// the rounding in `count / total`.
const RATE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("labels are all identical; metric undefined")]
    DegenerateLabels,
    #[error("empty input")]
    EmptyInput,
    #[error("scores and labels differ in length ({scores} vs {labels})")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("non-finite score at index {0}")]
    NonFiniteScore(usize),
    #[error("rate undefined (zero denominator)")]
    UndefinedRate,
    #[error("equalized odds is defined for binary attributes only (m = {0})")]
    NonBinaryAttribute(usize),
    #[error("bundles disagree on subgroup count ({0} vs {1})")]
    MixedShape(usize, usize),
    #[error("ECE needs at least one bin")]
    ZeroBins,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdRule {
    /// Observed score maximizing F1 on the pooled run.
    MaxF1,
    Fixed(f64),
}

impl fmt::Display for ThresholdRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ThresholdRule::MaxF1 => f.write_str("max_f1"),
            ThresholdRule::Fixed(t) => write!(f, "fixed:{t}"),
        }
    }
}

impl std::str::FromStr for ThresholdRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "max_f1" {
            return Ok(ThresholdRule::MaxF1);
        }
        if let Some(v) = s.strip_prefix("fixed:") {
            return v
                .parse()
                .map(ThresholdRule::Fixed)
                .map_err(|_| format!("bad fixed threshold {v:?}"));
        }
        Err(format!(
            "unknown threshold rule {s:?} (expected max_f1 or fixed:<t>)"
        ))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricConfig {
    pub ece_bins: usize,
    pub tnr_target: f64,
    pub threshold_rule: ThresholdRule,
    /// `true` when label 1 means a finding is present (underdiagnosis = FNR);
    /// `false` for "No Finding"-style labels (underdiagnosis = FPR).
    pub positive_means_finding: bool,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            ece_bins: 10,
            tnr_target: 0.8,
            threshold_rule: ThresholdRule::MaxF1,
            positive_means_finding: true,
        }
    }
}

fn check_inputs(scores: &[f64], labels: &[u8]) -> Result<(), MetricError> {
    if scores.len() != labels.len() {
        return Err(MetricError::LengthMismatch {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(MetricError::NonFiniteScore(i));
    }
    Ok(())
}

fn sorted_indices(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    idx
}

/// Blocks of equal score in ascending order: `(score, positives, negatives)`.
fn tie_blocks(scores: &[f64], labels: &[u8]) -> Vec<(f64, u64, u64)> {
    let mut blocks: Vec<(f64, u64, u64)> = Vec::new();
    for i in sorted_indices(scores) {
        let s = scores[i];
        let is_pos = labels[i] == 1;
        match blocks.last_mut() {
            Some(b) if b.0 == s => {
                if is_pos {
                    b.1 += 1
                } else {
                    b.2 += 1
                }
            }
            _ => blocks.push((s, is_pos as u64, (!is_pos) as u64)),
        }
    }
    blocks
}

/// ROC AUC as the Mann-Whitney statistic, tied pairs counted as one half.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64, MetricError> {
    check_inputs(scores, labels)?;
    let mut neg_below: u128 = 0;
    // twice the Mann-Whitney U, kept integral
    let mut u2: u128 = 0;
    let (mut pos, mut neg) = (0u128, 0u128);
    for (_, p, n) in tie_blocks(scores, labels) {
        let (p, n) = (p as u128, n as u128);
        u2 += 2 * p * neg_below + p * n;
        neg_below += n;
        pos += p;
        neg += n;
    }
    if pos == 0 || neg == 0 {
        return Err(MetricError::DegenerateLabels);
    }
    // evaluated via the larger of auc and 1 - auc, where 1 - w is exact, so
    // that flipping the scores gives exactly 1 - auc
    let d = 2 * pos * neg;
    let w = 1.0 - u2.min(d - u2) as f64 / d as f64;
    Ok(if 2 * u2 <= d { 1.0 - w } else { w })
}

/// Mean binary cross-entropy with probabilities clamped to `[eps, 1 - eps]`.
pub fn bce(scores: &[f64], labels: &[u8]) -> Result<f64, MetricError> {
    check_inputs(scores, labels)?;
    if scores.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    let terms = scores.iter().zip(labels).map(|(&s, &y)| {
        let p = s.clamp(BCE_EPS, 1.0 - BCE_EPS);
        if y == 1 {
            -p.ln()
        } else {
            -(1.0 - p).ln()
        }
    });
    Ok(fsum(terms) / scores.len() as f64)
}

/// Expected calibration error over `bins` equal-width score bins; the last
/// bin is closed on the right.
pub fn ece(scores: &[f64], labels: &[u8], bins: usize) -> Result<f64, MetricError> {
    check_inputs(scores, labels)?;
    if scores.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    if bins == 0 {
        return Err(MetricError::ZeroBins);
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); bins];
    for (i, &s) in scores.iter().enumerate() {
        let b = ((s * bins as f64).floor() as usize).min(bins - 1);
        members[b].push(i);
    }
    let n = scores.len() as f64;
    let gaps = members.iter().filter(|m| !m.is_empty()).map(|m| {
        let k = m.len() as f64;
        let acc = fsum(m.iter().map(|&i| labels[i] as f64)) / k;
        let conf = fsum(m.iter().map(|&i| scores[i])) / k;
        (k / n) * (acc - conf).abs()
    });
    Ok(fsum(gaps))
}

/// F1 as an exact fraction `2tp / (2tp + fp + fn)`.
fn f1_fraction(tp: u64, fp: u64, fn_: u64) -> (u128, u128) {
    let num = 2 * tp as u128;
    (num, num + fp as u128 + fn_ as u128)
}

/// Threshold maximizing F1 of "positive iff score >= t" over the distinct
/// observed scores and 0. Ties go to the largest threshold.
pub fn select_threshold(scores: &[f64], labels: &[u8]) -> Result<f64, MetricError> {
    check_inputs(scores, labels)?;
    let total_pos: u64 = labels.iter().filter(|&&y| y == 1).count() as u64;
    if total_pos == 0 {
        return Err(MetricError::DegenerateLabels);
    }
    let mut blocks = tie_blocks(scores, labels);
    // sweep from the highest score down; 0 is the final (all-positive) rule
    blocks.reverse();
    if blocks.last().is_none_or(|b| b.0 > 0.0) {
        blocks.push((0.0, 0, 0));
    }
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut best: Option<(f64, (u128, u128))> = None;
    for (t, p, n) in blocks {
        tp += p;
        fp += n;
        let (num, den) = f1_fraction(tp, fp, total_pos - tp);
        let better = match best {
            None => true,
            Some((_, (bn, bd))) => num * bd > bn * den,
        };
        if better {
            best = Some((t, (num, den)));
        }
    }
    Ok(best.map(|(t, _)| t).unwrap_or(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConfusionRates {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub threshold: f64,
    pub tpr: Option<f64>,
    pub tnr: Option<f64>,
    pub fpr: Option<f64>,
    pub fnr: Option<f64>,
}

impl ConfusionRates {
    pub fn from_counts(tp: u64, tn: u64, fp: u64, fn_: u64, threshold: f64) -> Self {
        let ratio = |a: u64, b: u64| (a + b > 0).then(|| a as f64 / (a + b) as f64);
        ConfusionRates {
            tp,
            tn,
            fp,
            fn_,
            threshold,
            tpr: ratio(tp, fn_),
            fnr: ratio(fn_, tp),
            tnr: ratio(tn, fp),
            fpr: ratio(fp, tn),
        }
    }
}

pub fn confusion_rates(scores: &[f64], labels: &[u8], threshold: f64) -> ConfusionRates {
    let (mut tp, mut tn, mut fp, mut fn_) = (0, 0, 0, 0);
    for (&s, &y) in scores.iter().zip(labels) {
        match (s >= threshold, y == 1) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    ConfusionRates::from_counts(tp, tn, fp, fn_, threshold)
}

/// TPR at the smallest threshold (observed scores or +inf) whose TNR reaches
/// `target_tnr`. Step function, no interpolation.
pub fn tpr_at_tnr(scores: &[f64], labels: &[u8], target_tnr: f64) -> Result<f64, MetricError> {
    check_inputs(scores, labels)?;
    let blocks = tie_blocks(scores, labels);
    let total_pos: u64 = blocks.iter().map(|b| b.1).sum();
    let total_neg: u64 = blocks.iter().map(|b| b.2).sum();
    if total_pos == 0 || total_neg == 0 {
        return Err(MetricError::DegenerateLabels);
    }
    // at threshold = block score, everything strictly below is negative
    let (mut neg_below, mut pos_below) = (0u64, 0u64);
    for (_, p, n) in &blocks {
        if neg_below as f64 / total_neg as f64 + RATE_SLACK >= target_tnr {
            return Ok((total_pos - pos_below) as f64 / total_pos as f64);
        }
        neg_below += n;
        pos_below += p;
    }
    // +inf: predict nothing positive
    Ok(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EqOddResult {
    pub eqopp0: f64,
    pub eqopp1: f64,
    pub eqodd: f64,
}

pub fn eq_odd(g0: &ConfusionRates, g1: &ConfusionRates) -> Result<EqOddResult, MetricError> {
    let get = |v: Option<f64>| v.ok_or(MetricError::UndefinedRate);
    let eqopp0 = 1.0 - (get(g0.fpr)? - get(g1.fpr)?).abs();
    let eqopp1 = 1.0 - (get(g0.tpr)? - get(g1.tpr)?).abs();
    Ok(EqOddResult {
        eqopp0,
        eqopp1,
        eqodd: 0.5 * (eqopp0 + eqopp1),
    })
}

/// Equalized odds over a full attribute; only binary attributes qualify.
pub fn eq_odd_groups(rates: &[ConfusionRates]) -> Result<EqOddResult, MetricError> {
    match rates {
        [g0, g1] => eq_odd(g0, g1),
        _ => Err(MetricError::NonBinaryAttribute(rates.len())),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunIdentity {
    pub run_id: String,
    pub algorithm: String,
    pub dataset: String,
    pub attribute: String,
    pub seed: i64,
    pub hparam_id: String,
    pub split: Split,
}

impl From<&RunManifest> for RunIdentity {
    fn from(m: &RunManifest) -> Self {
        RunIdentity {
            run_id: m.run_id.clone(),
            algorithm: m.algorithm.clone(),
            dataset: m.dataset.clone(),
            attribute: m.attribute.clone(),
            seed: m.seed,
            hparam_id: m.hparam_id.clone(),
            split: m.split,
        }
    }
}

/// Accessor for one per-group metric column.
type GroupColumn = fn(&GroupMetrics) -> Option<f64>;

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct GroupMetrics {
    pub samples: usize,
    pub auc: Option<f64>,
    pub bce: Option<f64>,
    pub ece: Option<f64>,
    pub fpr: Option<f64>,
    pub fnr: Option<f64>,
    pub tpr_at_tnr: Option<f64>,
}

impl GroupMetrics {
    /// FNR when positives are findings, FPR for "No Finding"-style labels.
    pub fn underdiagnosis(&self, config: &MetricConfig) -> Option<f64> {
        if config.positive_means_finding {
            self.fnr
        } else {
            self.fpr
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricBundle {
    pub identity: RunIdentity,
    pub per_group: Vec<GroupMetrics>,
    pub overall_auc: f64,
    /// Over defined per-group AUCs; `None` when no group AUC is defined.
    pub auc_gap: Option<f64>,
    pub worst_auc: Option<f64>,
    pub eqodd: Option<f64>,
    pub bce: f64,
    pub ece: f64,
    pub threshold: f64,
}

/// Column value of a bundle, in CSV order.
pub type MetricColumn = (String, Option<f64>);

impl MetricBundle {
    pub fn m(&self) -> usize {
        self.per_group.len()
    }

    pub fn group_aucs(&self) -> Vec<Option<f64>> {
        self.per_group.iter().map(|g| g.auc).collect()
    }

    /// True when every subgroup AUC is defined.
    pub fn complete(&self) -> bool {
        self.per_group.iter().all(|g| g.auc.is_some())
    }

    /// Recomputes worst AUC and gap from `per_group` and compares.
    pub fn is_consistent(&self) -> bool {
        let (worst, gap) = worst_and_gap(self.per_group.iter().filter_map(|g| g.auc));
        worst == self.worst_auc && gap == self.auc_gap
    }

    /// Numeric metric columns in CSV order, padded to `m_max` groups.
    pub fn metric_columns(&self, m_max: usize) -> Vec<MetricColumn> {
        let mut cols = vec![
            ("overall_auc".to_owned(), Some(self.overall_auc)),
            ("worst_auc".to_owned(), self.worst_auc),
            ("auc_gap".to_owned(), self.auc_gap),
            ("eqodd".to_owned(), self.eqodd),
            ("bce".to_owned(), Some(self.bce)),
            ("ece".to_owned(), Some(self.ece)),
            ("threshold".to_owned(), Some(self.threshold)),
        ];
        let per_group: [(&str, GroupColumn); 4] = [
            ("auc", |g| g.auc),
            ("fpr", |g| g.fpr),
            ("fnr", |g| g.fnr),
            ("tprattnr", |g| g.tpr_at_tnr),
        ];
        for (prefix, get) in per_group {
            for g in 0..m_max {
                cols.push((
                    format!("{prefix}_g{g}"),
                    self.per_group.get(g).and_then(get),
                ));
            }
        }
        cols
    }
}

fn worst_and_gap<I: Iterator<Item = f64>>(aucs: I) -> (Option<f64>, Option<f64>) {
    let mut lo: Option<f64> = None;
    let mut hi: Option<f64> = None;
    for a in aucs {
        lo = Some(lo.map_or(a, |v| v.min(a)));
        hi = Some(hi.map_or(a, |v| v.max(a)));
    }
    match (lo, hi) {
        (Some(lo), Some(hi)) => (Some(lo), Some(hi - lo)),
        _ => (None, None),
    }
}

/// Evaluates one run: threshold chosen once on the pooled samples, then
/// applied to every subgroup. Undefined per-group values are `None`.
pub fn evaluate_run(run: &RunData, config: &MetricConfig) -> Result<MetricBundle, MetricError> {
    let scores: Vec<f64> = run.records.iter().map(|r| r.score).collect();
    let labels: Vec<u8> = run.records.iter().map(|r| r.label).collect();
    let overall_auc = auc(&scores, &labels)?;
    let threshold = match config.threshold_rule {
        ThresholdRule::MaxF1 => select_threshold(&scores, &labels)?,
        ThresholdRule::Fixed(t) => t,
    };
    let bce_all = bce(&scores, &labels)?;
    let ece_all = ece(&scores, &labels, config.ece_bins)?;

    let m = run.manifest.num_groups();
    let mut group_scores: Vec<Vec<f64>> = vec![Vec::new(); m];
    let mut group_labels: Vec<Vec<u8>> = vec![Vec::new(); m];
    for r in &run.records {
        if let Some(gs) = group_scores.get_mut(r.group as usize) {
            gs.push(r.score);
            group_labels[r.group as usize].push(r.label);
        }
    }

    let mut per_group = Vec::with_capacity(m);
    let mut rates = Vec::with_capacity(m);
    for (s, y) in group_scores.iter().zip(&group_labels) {
        let cr = confusion_rates(s, y, threshold);
        per_group.push(GroupMetrics {
            samples: s.len(),
            auc: auc(s, y).ok(),
            bce: bce(s, y).ok(),
            ece: ece(s, y, config.ece_bins).ok(),
            fpr: cr.fpr,
            fnr: cr.fnr,
            tpr_at_tnr: tpr_at_tnr(s, y, config.tnr_target).ok(),
        });
        rates.push(cr);
    }
    let (worst_auc, auc_gap) = worst_and_gap(per_group.iter().filter_map(|g| g.auc));
    let eqodd = eq_odd_groups(&rates).ok().map(|r| r.eqodd);

    Ok(MetricBundle {
        identity: RunIdentity::from(&run.manifest),
        per_group,
        overall_auc,
        auc_gap,
        worst_auc,
        eqodd,
        bce: bce_all,
        ece: ece_all,
        threshold,
    })
}

/// Evaluates many runs; output order follows input order.
pub fn evaluate_runs(
    runs: &[RunData],
    config: &MetricConfig,
    exec: Parallelism,
) -> Vec<Result<MetricBundle, MetricError>> {
    exec.map(runs, |r| evaluate_run(r, config))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    /// Number of bundles where the metric was defined.
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedAggregate {
    pub algorithm: String,
    pub dataset: String,
    pub attribute: String,
    pub hparam_id: String,
    pub split: Split,
    pub n_seeds: usize,
    pub m: usize,
    /// Same order as [`MetricBundle::metric_columns`]; `None` when undefined
    /// in every bundle.
    pub columns: Vec<(String, Option<MeanStd>)>,
}

impl SeedAggregate {
    pub fn get(&self, column: &str) -> Option<MeanStd> {
        self.columns
            .iter()
            .find(|(c, _)| c == column)
            .and_then(|(_, v)| *v)
    }
}

/// Mean and sample standard deviation per metric across seeds. Metrics are
/// averaged over the bundles where they are defined.
pub fn aggregate_seeds(bundles: &[MetricBundle]) -> Result<SeedAggregate, MetricError> {
    let first = bundles.first().ok_or(MetricError::EmptyInput)?;
    let m = first.m();
    if let Some(b) = bundles.iter().find(|b| b.m() != m) {
        return Err(MetricError::MixedShape(m, b.m()));
    }
    let per_bundle: Vec<Vec<MetricColumn>> =
        bundles.iter().map(|b| b.metric_columns(m)).collect();
    let columns = per_bundle[0]
        .iter()
        .enumerate()
        .map(|(c, (name, _))| {
            let values: Vec<f64> = per_bundle.iter().filter_map(|cols| cols[c].1).collect();
            let stat = mean(&values).map(|mu| MeanStd {
                mean: mu,
                std: sample_std(&values).unwrap_or(0.0),
                n: values.len(),
            });
            (name.clone(), stat)
        })
        .collect();
    let id = &first.identity;
    Ok(SeedAggregate {
        algorithm: id.algorithm.clone(),
        dataset: id.dataset.clone(),
        attribute: id.attribute.clone(),
        hparam_id: id.hparam_id.clone(),
        split: id.split,
        n_seeds: bundles.len(),
        m,
        columns,
    })
}
