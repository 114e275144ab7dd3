//! Nemenyi critical difference and the groups drawn on a CD diagram.

use serde::Serialize;

use super::StatsError;

/// Studentized range quantiles divided by sqrt(2), infinite degrees of
/// freedom, for k = 2..=20.
const Q_05: [f64; 19] = [
    1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164, 3.219, 3.268, 3.313, 3.354,
    3.391, 3.426, 3.458, 3.489, 3.517, 3.544,
];
const Q_10: [f64; 19] = [
    1.645, 2.052, 2.291, 2.459, 2.589, 2.693, 2.780, 2.855, 2.920, 2.978, 3.030, 3.077, 3.120,
    3.159, 3.196, 3.230, 3.261, 3.291, 3.319,
];

/// Mean-rank differences within this slack of the CD count as "not larger".
const CD_SLACK: f64 = 1e-12;

pub fn q_alpha(k: usize, alpha: f64) -> Result<f64, StatsError> {
    if !(2..=20).contains(&k) {
        return Err(StatsError::UnsupportedK(k));
    }
    let table = if (alpha - 0.05).abs() < 1e-9 {
        &Q_05
    } else if (alpha - 0.10).abs() < 1e-9 {
        &Q_10
    } else {
        return Err(StatsError::UnsupportedAlpha(alpha));
    };
    Ok(table[k - 2])
}

/// `q_alpha(k) * sqrt(k (k + 1) / (6 N))`.
pub fn nemenyi_cd(k: usize, n: usize, alpha: f64) -> Result<f64, StatsError> {
    let q = q_alpha(k, alpha)?;
    if n < 2 {
        return Err(StatsError::TooFewRows(n));
    }
    let (kf, nf) = (k as f64, n as f64);
    Ok(q * (kf * (kf + 1.0) / (6.0 * nf)).sqrt())
}

/// Sorts by mean rank, then name.
fn sorted(mean_ranks: &[(String, f64)]) -> Vec<(String, f64)> {
    let mut v = mean_ranks.to_vec();
    v.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    v
}

/// Maximal runs of rank-sorted algorithms whose extreme mean ranks differ by
/// at most `cd`. Runs contained in an earlier run are dropped; an isolated
/// algorithm forms a singleton group.
pub fn cd_groups(mean_ranks: &[(String, f64)], cd: f64) -> Vec<Vec<String>> {
    let ranked = sorted(mean_ranks);
    let mut groups = Vec::new();
    let mut last_end = 0usize;
    for i in 0..ranked.len() {
        let mut end = i + 1;
        while end < ranked.len() && ranked[end].1 - ranked[i].1 <= cd + CD_SLACK {
            end += 1;
        }
        if end > last_end {
            groups.push(ranked[i..end].iter().map(|(n, _)| n.clone()).collect());
            last_end = end;
        }
    }
    groups
}

/// Geometry of a critical-difference diagram.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CdLayout {
    pub critical_difference: f64,
    /// Axis spans ranks `1..=k`.
    pub k: usize,
    /// Sorted by mean rank, then name.
    pub algorithm_positions: Vec<(String, f64)>,
    pub groups: Vec<Vec<String>>,
}

impl CdLayout {
    pub fn new(mean_ranks: &[(String, f64)], critical_difference: f64) -> Self {
        CdLayout {
            critical_difference,
            k: mean_ranks.len(),
            algorithm_positions: sorted(mean_ranks),
            groups: cd_groups(mean_ranks, critical_difference),
        }
    }

    pub fn position(&self, name: &str) -> Option<f64> {
        self.algorithm_positions
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, r)| *r)
    }

    /// Whether two algorithms share a group (are not distinguishable).
    pub fn connected(&self, a: &str, b: &str) -> bool {
        self.groups
            .iter()
            .any(|g| g.iter().any(|x| x == a) && g.iter().any(|x| x == b))
    }
}
