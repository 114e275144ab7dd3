//! Fairness evaluation and model selection for binary classifiers.
//!
//! The crate consumes per-sample prediction logs tagged with a sensitive
//! attribute subgroup and provides:
//!
//! - [`ingest`]: parsing and validation of prediction logs and run manifests,
//!   plus subgroup rebalancing weights.
//! - [`metrics`]: AUC, BCE, ECE, threshold selection, confusion rates,
//!   TPR at a target TNR, equalized odds, per-run bundles and seed aggregation.
//! - [`selection`]: Pareto dominance, minimax-Pareto, distance-to-optimal and
//!   overall-AUC model selection.
//! - [`stats`]: per-row ranking, the Friedman test, Nemenyi critical
//!   differences and critical-difference diagrams.
//! - [`pipeline`]: file-tree based pipelines behind the `fairrank` binary.
//!
//! Data-parallel loops (per-run evaluation, dominance filtering) run on rayon
//! when the default `parallel` feature is enabled and fall back to plain
//! iterators otherwise; see [`par::Parallelism`].

pub mod config;
pub mod ingest;
pub mod metrics;
pub mod numeric;
pub mod par;
pub mod pipeline;
pub mod selection;
pub mod stats;

pub use ingest::{PredictionRecord, RunData, RunManifest, Split};
pub use metrics::{MetricBundle, MetricConfig};
pub use par::Parallelism;
pub use selection::{ModelCandidate, ParetoFront, SelectionResult, Strategy};
pub use stats::{CdLayout, Direction, FriedmanResult, RankTable};
