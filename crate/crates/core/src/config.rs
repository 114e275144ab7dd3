//! Pipeline configuration: a flat `key = value` text file, overridable by
//! command-line flags.
//!
//! ```text
//! # metric settings
//! ece_bins = 10
//! tnr_target = 0.8
//! threshold_rule = max_f1
//! positive_means_finding = true
//! # pipeline settings
//! strategy = pareto
//! metric = worst_auc
//! alpha = 0.05
//! seed_policy = rank_seed_mean
//! selection_unit = seed_mean
//! force_posthoc = false
//! ```

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::metrics::MetricConfig;
use crate::selection::Strategy;
use crate::stats::Direction;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("bad value for `{key}`: {message}")]
    BadValue { key: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ComparisonMetric {
    OverallAuc,
    WorstAuc,
    AucGap,
}

impl ComparisonMetric {
    /// Metrics CSV column holding this metric.
    pub fn column(self) -> &'static str {
        match self {
            ComparisonMetric::OverallAuc => "overall_auc",
            ComparisonMetric::WorstAuc => "worst_auc",
            ComparisonMetric::AucGap => "auc_gap",
        }
    }

    /// Larger AUCs are better; a smaller gap is better.
    pub fn direction(self) -> Direction {
        match self {
            ComparisonMetric::AucGap => Direction::LowerBetter,
            _ => Direction::HigherBetter,
        }
    }
}

impl fmt::Display for ComparisonMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.column())
    }
}

impl FromStr for ComparisonMetric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "overall_auc" => Ok(ComparisonMetric::OverallAuc),
            "worst_auc" => Ok(ComparisonMetric::WorstAuc),
            "auc_gap" => Ok(ComparisonMetric::AucGap),
            other => Err(format!(
                "unknown metric {other:?} (expected overall_auc, worst_auc or auc_gap)"
            )),
        }
    }
}

/// Whether seeds are averaged before ranking or ranked individually.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedPolicy {
    RankSeedMean,
    RankPerSeed,
}

impl FromStr for SeedPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rank_seed_mean" => Ok(SeedPolicy::RankSeedMean),
            "rank_per_seed" => Ok(SeedPolicy::RankPerSeed),
            other => Err(format!(
                "unknown seed policy {other:?} (expected rank_seed_mean or rank_per_seed)"
            )),
        }
    }
}

/// What a selection candidate is in the `report` pipeline: a single run, or a
/// hyperparameter setting averaged over its seeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionUnit {
    Run,
    SeedMean,
}

impl FromStr for SelectionUnit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "run" => Ok(SelectionUnit::Run),
            "seed_mean" => Ok(SelectionUnit::SeedMean),
            other => Err(format!(
                "unknown selection unit {other:?} (expected run or seed_mean)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub runs_dir: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub metric_config: MetricConfig,
    pub strategy: Strategy,
    pub comparison_metric: ComparisonMetric,
    pub alpha: f64,
    pub seed_policy: SeedPolicy,
    pub selection_unit: SelectionUnit,
    pub force_posthoc: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            runs_dir: None,
            output_dir: PathBuf::from("fairrank-out"),
            metric_config: MetricConfig::default(),
            strategy: Strategy::ParetoMinimax,
            comparison_metric: ComparisonMetric::WorstAuc,
            alpha: 0.05,
            seed_policy: SeedPolicy::RankSeedMean,
            selection_unit: SelectionUnit::SeedMean,
            force_posthoc: false,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::BadValue {
        key: key.to_owned(),
        message: e.to_string(),
    })
}

pub fn check_alpha(alpha: f64) -> Result<f64, ConfigError> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(alpha)
    } else {
        Err(ConfigError::BadValue {
            key: "alpha".into(),
            message: format!("{alpha} is not in (0, 1)"),
        })
    }
}

impl PipelineConfig {
    /// Sets one key; used for both file entries and flag overrides.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "ece_bins" => {
                let bins: usize = parse(key, value)?;
                if bins == 0 {
                    return Err(ConfigError::BadValue {
                        key: key.into(),
                        message: "must be at least 1".into(),
                    });
                }
                self.metric_config.ece_bins = bins;
            }
            "tnr_target" => {
                let t: f64 = parse(key, value)?;
                if !(0.0..=1.0).contains(&t) {
                    return Err(ConfigError::BadValue {
                        key: key.into(),
                        message: format!("{t} is not in [0, 1]"),
                    });
                }
                self.metric_config.tnr_target = t;
            }
            "threshold_rule" => self.metric_config.threshold_rule = parse(key, value)?,
            "positive_means_finding" => self.metric_config.positive_means_finding = parse(key, value)?,
            "strategy" => self.strategy = parse(key, value)?,
            "metric" | "comparison_metric" => self.comparison_metric = parse(key, value)?,
            "alpha" => self.alpha = check_alpha(parse(key, value)?)?,
            "seed_policy" => self.seed_policy = parse(key, value)?,
            "selection_unit" => self.selection_unit = parse(key, value)?,
            "force_posthoc" => self.force_posthoc = parse(key, value)?,
            "runs_dir" => self.runs_dir = Some(PathBuf::from(value)),
            "output_dir" | "out" => self.output_dir = PathBuf::from(value),
            other => return Err(ConfigError::UnknownKey(other.to_owned())),
        }
        Ok(())
    }

    /// Applies a config file's contents. Blank lines and `#` comments are
    /// ignored.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or(ConfigError::Syntax { line: idx + 1 })?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() {
                return Err(ConfigError::Syntax { line: idx + 1 });
            }
            self.set(key, value)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::ThresholdRule;

    #[test]
    fn parses_all_keys() {
        let mut cfg = PipelineConfig::default();
        cfg.apply_text(
            "# comment\n\
             ece_bins = 15\n\
             tnr_target=0.9\n\
             threshold_rule = fixed:0.5  # inline\n\
             positive_means_finding = false\n\
             strategy = dto\n\
             metric = auc_gap\n\
             alpha = 0.10\n\
             seed_policy = rank_per_seed\n\
             selection_unit = run\n\
             force_posthoc = true\n",
        )
        .unwrap();
        assert_eq!(cfg.metric_config.ece_bins, 15);
        assert_eq!(cfg.metric_config.tnr_target, 0.9);
        assert_eq!(cfg.metric_config.threshold_rule, ThresholdRule::Fixed(0.5));
        assert!(!cfg.metric_config.positive_means_finding);
        assert_eq!(cfg.strategy, Strategy::Dto);
        assert_eq!(cfg.comparison_metric, ComparisonMetric::AucGap);
        assert_eq!(cfg.alpha, 0.10);
        assert_eq!(cfg.seed_policy, SeedPolicy::RankPerSeed);
        assert_eq!(cfg.selection_unit, SelectionUnit::Run);
        assert!(cfg.force_posthoc);
    }

    #[test]
    fn rejects_bad_input() {
        let mut cfg = PipelineConfig::default();
        assert_eq!(
            cfg.apply_text("alpha 0.05"),
            Err(ConfigError::Syntax { line: 1 })
        );
        assert!(matches!(
            cfg.apply_text("colour = blue"),
            Err(ConfigError::UnknownKey(_))
        ));
        assert!(matches!(
            cfg.apply_text("alpha = 1.5"),
            Err(ConfigError::BadValue { .. })
        ));
        assert!(matches!(
            cfg.apply_text("ece_bins = 0"),
            Err(ConfigError::BadValue { .. })
        ));
    }

    #[test]
    fn metric_directions() {
        assert_eq!(ComparisonMetric::AucGap.direction(), Direction::LowerBetter);
        assert_eq!(ComparisonMetric::WorstAuc.direction(), Direction::HigherBetter);
        assert_eq!(ComparisonMetric::OverallAuc.direction(), Direction::HigherBetter);
    }
}
