//! Algorithm comparison across dataset/attribute rows.
//!
//! Values are ranked within each row (rank 1 = best, midranks for ties), the
//! Friedman test checks whether mean ranks differ at all, and the Nemenyi
//! critical difference decides which pairs of algorithms are distinguishable.
//! [`svg::render_cd_svg`] draws the resulting critical-difference diagram.

mod gamma;
mod nemenyi;
pub mod svg;

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::numeric::fsum;

pub use gamma::{chi2_sf, gamma_q, ln_gamma};
pub use nemenyi::{cd_groups, nemenyi_cd, q_alpha, CdLayout};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("undefined value in ranked row")]
    UndefinedValue,
    #[error("need at least 2 rows, have {0}")]
    TooFewRows(usize),
    #[error("need at least 2 algorithms, have {0}")]
    TooFewAlgorithms(usize),
    #[error("row has {got} values, expected {expected}")]
    RowWidth { expected: usize, got: usize },
    #[error("critical difference table covers k = 2..=20, got {0}")]
    UnsupportedK(usize),
    #[error("critical difference table covers alpha 0.05 and 0.10, got {0}")]
    UnsupportedAlpha(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    HigherBetter,
    LowerBetter,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::HigherBetter => "higher_better",
            Direction::LowerBetter => "lower_better",
        })
    }
}

/// Ranks one row: 1 is best, tied values share their mean rank.
pub fn rank_row(values: &[f64], direction: Direction) -> Result<Vec<f64>, StatsError> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::UndefinedValue);
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| match direction {
        Direction::HigherBetter => values[b].total_cmp(&values[a]),
        Direction::LowerBetter => values[a].total_cmp(&values[b]),
    });
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end; (a+b)/2 is a half-integer
        let mid = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = mid;
        }
        start = end;
    }
    Ok(ranks)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankTable {
    pub algorithms: Vec<String>,
    pub row_labels: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub direction: Direction,
    pub mean_ranks: Vec<f64>,
    /// Rows removed because some algorithm had no value.
    pub dropped_rows: usize,
}

impl RankTable {
    /// Builds the table from raw values, dropping any row with an undefined
    /// cell (listwise deletion).
    pub fn from_values(
        algorithms: Vec<String>,
        rows: Vec<(String, Vec<Option<f64>>)>,
        direction: Direction,
    ) -> Result<Self, StatsError> {
        let k = algorithms.len();
        let mut row_labels = Vec::new();
        let mut ranked = Vec::new();
        let mut dropped = 0;
        for (label, values) in rows {
            if values.len() != k {
                return Err(StatsError::RowWidth {
                    expected: k,
                    got: values.len(),
                });
            }
            let complete: Option<Vec<f64>> =
                values.iter().map(|v| v.filter(|x| x.is_finite())).collect();
            match complete {
                Some(vals) => {
                    ranked.push(rank_row(&vals, direction)?);
                    row_labels.push(label);
                }
                None => dropped += 1,
            }
        }
        if dropped > 0 {
            log::info!("dropped {dropped} row(s) with undefined values");
        }
        Ok(Self::from_ranks(algorithms, row_labels, ranked, direction, dropped))
    }

    pub fn from_ranks(
        algorithms: Vec<String>,
        row_labels: Vec<String>,
        rows: Vec<Vec<f64>>,
        direction: Direction,
        dropped_rows: usize,
    ) -> Self {
        let k = algorithms.len();
        let n = rows.len();
        let mean_ranks = (0..k)
            .map(|j| {
                if n == 0 {
                    f64::NAN
                } else {
                    rows.iter().map(|r| r[j]).sum::<f64>() / n as f64
                }
            })
            .collect();
        RankTable {
            algorithms,
            row_labels,
            rows,
            direction,
            mean_ranks,
            dropped_rows,
        }
    }

    pub fn k(&self) -> usize {
        self.algorithms.len()
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn mean_rank(&self, algorithm: &str) -> Option<f64> {
        self.algorithms
            .iter()
            .position(|a| a == algorithm)
            .map(|j| self.mean_ranks[j])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FriedmanResult {
    pub chi2: f64,
    pub df: usize,
    pub p_value: f64,
    pub alpha: f64,
    pub significant: bool,
    /// Iman-Davenport F statistic; informational only, `None` when undefined.
    pub iman_davenport_f: Option<f64>,
}

/// Friedman test on mean ranks with the asymptotic chi-square tail.
pub fn friedman_test(table: &RankTable, alpha: f64) -> Result<FriedmanResult, StatsError> {
    let (k, n) = (table.k(), table.n());
    if k < 2 {
        return Err(StatsError::TooFewAlgorithms(k));
    }
    if n < 2 {
        return Err(StatsError::TooFewRows(n));
    }
    let (kf, nf) = (k as f64, n as f64);
    // sum(R^2) - k(k+1)^2/4; equals the squared deviations from (k+1)/2 when
    // the mean ranks sum to k(k+1)/2, as they do for any real rank table
    let spread = fsum(table.mean_ranks.iter().map(|r| r * r)) - kf * (kf + 1.0) * (kf + 1.0) / 4.0;
    let chi2 = (12.0 * nf / (kf * (kf + 1.0)) * spread).max(0.0);
    let df = k - 1;
    let p_value = chi2_sf(chi2, df);
    let denom = nf * (kf - 1.0) - chi2;
    let iman_davenport_f = (denom > 0.0).then(|| (nf - 1.0) * chi2 / denom);
    Ok(FriedmanResult {
        chi2,
        df,
        p_value,
        alpha,
        significant: p_value < alpha,
        iman_davenport_f,
    })
}
