//! Model selection over candidate models described by their subgroup AUCs.
//!
//! Three strategies are provided:
//!
//! - **overall**: highest overall AUC.
//! - **pareto_minimax**: among models not dominated in the subgroup-AUC
//!   vector, the one with the best worst-group AUC.
//! - **dto**: smallest normalized Euclidean distance to the utopia point, the
//!   componentwise maximum of all subgroup-AUC vectors.
//!
//! Ties are broken by higher overall AUC, then by the lexicographically
//! smallest run id, so every selection is deterministic.

use std::cmp::Ordering;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::par::Parallelism;

/// Criterion values closer than this (relative) are treated as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SelectionError {
    #[error("no candidates")]
    EmptyCandidates,
    #[error("vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("candidate {0} has a non-finite metric")]
    NonFinite(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Overall,
    ParetoMinimax,
    Dto,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Overall => "overall",
            Strategy::ParetoMinimax => "pareto_minimax",
            Strategy::Dto => "dto",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "overall" => Ok(Strategy::Overall),
            "pareto" | "pareto_minimax" => Ok(Strategy::ParetoMinimax),
            "dto" => Ok(Strategy::Dto),
            other => Err(format!(
                "unknown strategy {other:?} (expected overall, pareto or dto)"
            )),
        }
    }
}

/// A model and its subgroup metric vector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelCandidate {
    pub run_id: String,
    pub group_auc: Vec<f64>,
    pub overall_auc: f64,
}

impl ModelCandidate {
    pub fn new(run_id: impl Into<String>, group_auc: Vec<f64>, overall_auc: f64) -> Self {
        ModelCandidate {
            run_id: run_id.into(),
            group_auc,
            overall_auc,
        }
    }

    /// Worst-group value, the minimax criterion.
    pub fn worst(&self) -> f64 {
        self.group_auc.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParetoFront {
    pub members: Vec<ModelCandidate>,
    pub dominated: Vec<ModelCandidate>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionResult {
    pub strategy: Strategy,
    pub chosen: String,
    pub score: f64,
    pub tie_broken: bool,
}

/// `a` dominates `b`: no worse anywhere, strictly better somewhere.
pub fn dominates(a: &[f64], b: &[f64]) -> Result<bool, SelectionError> {
    if a.len() != b.len() {
        return Err(SelectionError::LengthMismatch(a.len(), b.len()));
    }
    let mut strict = false;
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return Ok(false);
        }
        if x > y {
            strict = true;
        }
    }
    Ok(strict)
}

fn check(candidates: &[ModelCandidate]) -> Result<usize, SelectionError> {
    let first = candidates.first().ok_or(SelectionError::EmptyCandidates)?;
    let m = first.group_auc.len();
    for c in candidates {
        if c.group_auc.len() != m {
            return Err(SelectionError::LengthMismatch(m, c.group_auc.len()));
        }
        if !c.overall_auc.is_finite() || c.group_auc.iter().any(|v| !v.is_finite()) {
            return Err(SelectionError::NonFinite(c.run_id.clone()));
        }
    }
    Ok(m)
}

pub fn pareto_front(candidates: &[ModelCandidate]) -> Result<ParetoFront, SelectionError> {
    pareto_front_with(candidates, Parallelism::default())
}

/// Pareto front with an explicit execution strategy. Members and dominated
/// candidates keep their input order.
pub fn pareto_front_with(
    candidates: &[ModelCandidate],
    exec: Parallelism,
) -> Result<ParetoFront, SelectionError> {
    check(candidates)?;
    let on_front = exec.map_range(candidates.len(), |i| {
        let target = &candidates[i].group_auc;
        !candidates
            .iter()
            .any(|c| dominates(&c.group_auc, target).unwrap_or(false))
    });
    let mut front = ParetoFront {
        members: Vec::new(),
        dominated: Vec::new(),
    };
    for (c, keep) in candidates.iter().zip(on_front) {
        if keep {
            front.members.push(c.clone());
        } else {
            front.dominated.push(c.clone());
        }
    }
    Ok(front)
}

fn tied(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIE_TOLERANCE * a.abs().max(b.abs()).max(1.0)
}

/// Picks the candidate with the best criterion (`better` says whether the
/// first value beats the second), then breaks ties by overall AUC and run id.
fn pick<F>(
    strategy: Strategy,
    candidates: &[ModelCandidate],
    criterion: &[f64],
    better: F,
) -> SelectionResult
where
    F: Fn(f64, f64) -> bool,
{
    let best = criterion
        .iter()
        .copied()
        .reduce(|a, b| if better(b, a) { b } else { a })
        .expect("non-empty");
    let mut contenders: Vec<usize> = (0..candidates.len())
        .filter(|&i| tied(criterion[i], best))
        .collect();
    let tie_broken = contenders.len() > 1;
    contenders.sort_by(|&i, &j| {
        let (a, b) = (&candidates[i], &candidates[j]);
        b.overall_auc
            .total_cmp(&a.overall_auc)
            .then_with(|| a.run_id.cmp(&b.run_id))
    });
    let winner = contenders[0];
    SelectionResult {
        strategy,
        chosen: candidates[winner].run_id.clone(),
        score: criterion[winner],
        tie_broken,
    }
}

/// Front member with the largest worst-group AUC.
pub fn select_pareto_minimax(
    candidates: &[ModelCandidate],
) -> Result<SelectionResult, SelectionError> {
    let front = pareto_front(candidates)?;
    Ok(minimax_on_front(&front.members))
}

fn minimax_on_front(members: &[ModelCandidate]) -> SelectionResult {
    let worst: Vec<f64> = members.iter().map(ModelCandidate::worst).collect();
    pick(Strategy::ParetoMinimax, members, &worst, |a, b| a > b)
}

/// Componentwise maximum of all subgroup vectors.
pub fn dto_utopia(candidates: &[ModelCandidate]) -> Result<Vec<f64>, SelectionError> {
    let m = check(candidates)?;
    let mut u = vec![f64::NEG_INFINITY; m];
    for c in candidates {
        for (slot, &v) in u.iter_mut().zip(&c.group_auc) {
            *slot = slot.max(v);
        }
    }
    Ok(u)
}

/// Euclidean distance to `utopia` divided by `sqrt(m)`.
pub fn dto_distance(group_auc: &[f64], utopia: &[f64]) -> f64 {
    let m = group_auc.len().max(1) as f64;
    let ss: f64 = group_auc
        .iter()
        .zip(utopia)
        .map(|(a, u)| (u - a) * (u - a))
        .sum();
    ss.sqrt() / m.sqrt()
}

pub fn select_dto(candidates: &[ModelCandidate]) -> Result<SelectionResult, SelectionError> {
    let utopia = dto_utopia(candidates)?;
    let dist: Vec<f64> = candidates
        .iter()
        .map(|c| dto_distance(&c.group_auc, &utopia))
        .collect();
    Ok(pick(Strategy::Dto, candidates, &dist, |a, b| a < b))
}

/// Highest overall AUC; ties go to the smallest run id.
pub fn select_overall(candidates: &[ModelCandidate]) -> Result<SelectionResult, SelectionError> {
    let first = candidates.first().ok_or(SelectionError::EmptyCandidates)?;
    if let Some(c) = candidates.iter().find(|c| !c.overall_auc.is_finite()) {
        return Err(SelectionError::NonFinite(c.run_id.clone()));
    }
    let best = candidates
        .iter()
        .map(|c| c.overall_auc)
        .fold(first.overall_auc, f64::max);
    let mut contenders: Vec<&ModelCandidate> = candidates
        .iter()
        .filter(|c| tied(c.overall_auc, best))
        .collect();
    let tie_broken = contenders.len() > 1;
    contenders.sort_by(|a, b| a.run_id.cmp(&b.run_id));
    Ok(SelectionResult {
        strategy: Strategy::Overall,
        chosen: contenders[0].run_id.clone(),
        score: contenders[0].overall_auc,
        tie_broken,
    })
}

pub fn select(
    strategy: Strategy,
    candidates: &[ModelCandidate],
) -> Result<SelectionResult, SelectionError> {
    match strategy {
        Strategy::Overall => select_overall(candidates),
        Strategy::ParetoMinimax => select_pareto_minimax(candidates),
        Strategy::Dto => select_dto(candidates),
    }
}

/// Candidate as read from metrics, where subgroup or overall AUCs may be
/// undefined.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateInput {
    pub run_id: String,
    pub group_auc: Vec<Option<f64>>,
    pub overall_auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Exclusion {
    pub run_id: String,
    pub reason: String,
}

/// Selection outcome in its serialized report form.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionReport {
    pub strategy: Strategy,
    pub chosen_run_id: String,
    pub criterion_value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub front_size: Option<usize>,
    pub excluded: Vec<Exclusion>,
    pub tie_broken: bool,
    /// Whether the chosen model is Pareto optimal among the candidates with a
    /// complete subgroup vector; `None` if it has an incomplete vector.
    pub on_front: Option<bool>,
}

fn defined(v: Option<f64>) -> Option<f64> {
    v.filter(|x| x.is_finite())
}

/// Runs `strategy` over raw inputs, excluding candidates whose required
/// metrics are undefined and recording why.
pub fn select_report(
    strategy: Strategy,
    inputs: &[CandidateInput],
    exec: Parallelism,
) -> Result<SelectionReport, SelectionError> {
    let mut excluded = Vec::new();
    let mut complete = Vec::new();
    let mut overall_only = Vec::new();
    for c in inputs {
        let groups: Option<Vec<f64>> = c.group_auc.iter().map(|v| defined(*v)).collect();
        let overall = defined(c.overall_auc);
        match (overall, groups) {
            (Some(o), Some(g)) if !g.is_empty() => {
                complete.push(ModelCandidate::new(c.run_id.clone(), g, o))
            }
            (Some(o), _) => {
                if strategy == Strategy::Overall {
                    overall_only.push(ModelCandidate::new(c.run_id.clone(), Vec::new(), o));
                } else {
                    excluded.push(Exclusion {
                        run_id: c.run_id.clone(),
                        reason: "undefined subgroup AUC".into(),
                    });
                }
            }
            (None, _) => excluded.push(Exclusion {
                run_id: c.run_id.clone(),
                reason: "undefined overall AUC".into(),
            }),
        }
    }
    for e in &excluded {
        log::info!("excluding {} from {strategy} selection: {}", e.run_id, e.reason);
    }

    let front = if complete.is_empty() {
        None
    } else {
        Some(pareto_front_with(&complete, exec)?)
    };
    let (result, front_size) = match strategy {
        Strategy::Overall => {
            let mut pool = complete.clone();
            pool.extend(overall_only);
            (select_overall(&pool)?, None)
        }
        Strategy::ParetoMinimax => {
            let front = front.as_ref().ok_or(SelectionError::EmptyCandidates)?;
            (minimax_on_front(&front.members), Some(front.members.len()))
        }
        Strategy::Dto => (select_dto(&complete)?, None),
    };
    let on_front = front.as_ref().and_then(|f| {
        let in_complete = complete.iter().any(|c| c.run_id == result.chosen);
        in_complete.then(|| f.members.iter().any(|c| c.run_id == result.chosen))
    });
    Ok(SelectionReport {
        strategy,
        chosen_run_id: result.chosen,
        criterion_value: result.score,
        front_size,
        excluded,
        tie_broken: result.tie_broken,
        on_front,
    })
}

/// Deterministic ordering used when listing candidates.
pub fn by_run_id(a: &ModelCandidate, b: &ModelCandidate) -> Ordering {
    a.run_id.cmp(&b.run_id)
}

#[cfg(test)]
mod tests {
    use super::*;
    use super::Strategy;
    use proptest::prelude::*;
    use proptest::strategy::Strategy as _;

    fn c(id: &str, v: &[f64], overall: f64) -> ModelCandidate {
        ModelCandidate::new(id, v.to_vec(), overall)
    }

    fn toy() -> Vec<ModelCandidate> {
        vec![
            c("a", &[0.9, 0.7], 0.85),
            c("b", &[0.8, 0.8], 0.82),
            c("c", &[0.85, 0.65], 0.80),
        ]
    }

    /// Brute-force front: indices of candidates no other candidate dominates.
    fn front_oracle(cands: &[ModelCandidate]) -> Vec<usize> {
        (0..cands.len())
            .filter(|&i| {
                !(0..cands.len()).any(|j| {
                    let (a, b) = (&cands[j].group_auc, &cands[i].group_auc);
                    a.iter().zip(b).all(|(x, y)| x >= y) && a.iter().zip(b).any(|(x, y)| x > y)
                })
            })
            .collect()
    }

    #[test]
    fn dominance_examples() {
        assert!(dominates(&[0.9, 0.8], &[0.9, 0.7]).unwrap());
        assert!(!dominates(&[0.9, 0.7], &[0.8, 0.8]).unwrap());
        assert!(!dominates(&[0.8, 0.8], &[0.9, 0.7]).unwrap());
        assert!(!dominates(&[0.5, 0.5], &[0.5, 0.5]).unwrap());
        assert_eq!(
            dominates(&[0.5], &[0.5, 0.5]),
            Err(SelectionError::LengthMismatch(1, 2))
        );
    }

    #[test]
    fn front_examples() {
        let cands = toy();
        let front = pareto_front(&cands).unwrap();
        let ids: Vec<&str> = front.members.iter().map(|c| c.run_id.as_str()).collect();
        assert_eq!(ids, ["a", "b"]);
        assert_eq!(front_oracle(&cands), vec![0, 1]);
        assert_eq!(front.dominated[0].run_id, "c");

        let single = pareto_front(&cands[..1]).unwrap();
        assert_eq!(single.members.len(), 1);

        let twins = [c("x", &[0.7, 0.7], 0.7), c("y", &[0.7, 0.7], 0.7)];
        assert_eq!(pareto_front(&twins).unwrap().members.len(), 2);
        assert_eq!(pareto_front(&[]), Err(SelectionError::EmptyCandidates));
    }

    #[test]
    fn minimax_examples() {
        let r = select_pareto_minimax(&toy()).unwrap();
        assert_eq!(r.chosen, "b");
        assert_eq!(r.score, 0.8);
        assert!(!r.tie_broken);
        let r = select_pareto_minimax(&toy()[2..]).unwrap();
        assert_eq!(r.chosen, "c");
    }

    #[test]
    fn utopia_examples() {
        assert_eq!(dto_utopia(&toy()[..2]).unwrap(), vec![0.9, 0.8]);
        assert_eq!(dto_utopia(&toy()[..1]).unwrap(), vec![0.9, 0.7]);
        let mut reordered = toy();
        reordered.rotate_left(2);
        assert_eq!(dto_utopia(&reordered).unwrap(), vec![0.9, 0.8]);
    }

    #[test]
    fn dto_examples() {
        let cands = toy();
        let u = dto_utopia(&cands).unwrap();
        let d: Vec<f64> = cands.iter().map(|c| dto_distance(&c.group_auc, &u)).collect();
        // hand computation: sqrt(0.01)/sqrt(2), same, sqrt(0.0025+0.0225)/sqrt(2)
        assert!((d[0] - 0.0707107).abs() < 1e-6);
        assert!((d[1] - 0.0707107).abs() < 1e-6);
        assert!((d[2] - 0.1118034).abs() < 1e-6);
        let r = select_dto(&cands).unwrap();
        assert_eq!(r.chosen, "a");
        assert!(r.tie_broken);

        let with_utopia = [c("p", &[0.9, 0.8], 0.5), c("q", &[0.8, 0.7], 0.9)];
        let r = select_dto(&with_utopia).unwrap();
        assert_eq!((r.chosen.as_str(), r.score), ("p", 0.0));
        let r = select_dto(&with_utopia[1..]).unwrap();
        assert_eq!(r.score, 0.0);
    }

    #[test]
    fn overall_examples() {
        let cands = [
            c("o1", &[0.5, 0.5], 91.83),
            c("o2", &[0.5, 0.5], 91.55),
            c("o3", &[0.5, 0.5], 91.20),
        ];
        assert_eq!(select_overall(&cands).unwrap().chosen, "o1");
        assert_eq!(select_overall(&cands[2..]).unwrap().chosen, "o3");
        let tie = [c("z", &[], 0.9), c("m", &[], 0.9)];
        let r = select_overall(&tie).unwrap();
        assert_eq!(r.chosen, "m");
        assert!(r.tie_broken);
        assert_eq!(select_overall(&[]), Err(SelectionError::EmptyCandidates));
    }

    /// Sweep consistent with a reported row of (overall, worst, gap) triples:
    /// overall 91.83/87.53/4.70, DTO 91.55/91.37/1.43, Pareto 91.20/92.38/1.04,
    /// plus a lopsided model that only shifts the utopia point.
    #[test]
    fn sweep_replay_reproduces_triples() {
        let cands = [
            c("overall_pick", &[87.53, 92.23, 92.23, 92.00], 91.83),
            c("dto_pick", &[91.37, 92.80, 92.80, 92.80], 91.55),
            c("pareto_pick", &[92.38, 92.38, 92.38, 93.42], 91.20),
            c("lopsided", &[80.0, 99.0, 99.0, 80.0], 90.00),
        ];
        let triple = |id: &str| {
            let m = cands.iter().find(|c| c.run_id == id).unwrap();
            let hi = m.group_auc.iter().copied().fold(f64::MIN, f64::max);
            (m.overall_auc, m.worst(), ((hi - m.worst()) * 100.0).round() / 100.0)
        };
        let o = select_overall(&cands).unwrap();
        let d = select_dto(&cands).unwrap();
        let p = select_pareto_minimax(&cands).unwrap();
        assert_eq!(triple(&o.chosen), (91.83, 87.53, 4.70));
        assert_eq!(triple(&d.chosen), (91.55, 91.37, 1.43));
        assert_eq!(triple(&p.chosen), (91.20, 92.38, 1.04));
    }

    #[test]
    fn report_excludes_incomplete_candidates() {
        let inputs = vec![
            CandidateInput {
                run_id: "full".into(),
                group_auc: vec![Some(0.8), Some(0.7)],
                overall_auc: Some(0.75),
            },
            CandidateInput {
                run_id: "partial".into(),
                group_auc: vec![Some(0.9), None],
                overall_auc: Some(0.95),
            },
        ];
        let r = select_report(Strategy::ParetoMinimax, &inputs, Parallelism::Sequential).unwrap();
        assert_eq!(r.chosen_run_id, "full");
        assert_eq!(r.front_size, Some(1));
        assert_eq!(r.excluded[0].run_id, "partial");
        assert_eq!(r.on_front, Some(true));

        let r = select_report(Strategy::Overall, &inputs, Parallelism::Sequential).unwrap();
        assert_eq!(r.chosen_run_id, "partial");
        assert!(r.excluded.is_empty());
        assert_eq!(r.on_front, None);

        let only_partial = &inputs[1..];
        assert_eq!(
            select_report(Strategy::Dto, only_partial, Parallelism::Sequential),
            Err(SelectionError::EmptyCandidates)
        );
    }

    #[test]
    fn overall_pick_need_not_be_on_front() {
        let inputs: Vec<CandidateInput> = [("hi", [0.6, 0.9], 0.95), ("dom", [0.7, 0.95], 0.9)]
            .into_iter()
            .map(|(id, g, o)| CandidateInput {
                run_id: id.into(),
                group_auc: g.iter().map(|v| Some(*v)).collect(),
                overall_auc: Some(o),
            })
            .collect();
        let r = select_report(Strategy::Overall, &inputs, Parallelism::Sequential).unwrap();
        assert_eq!(r.chosen_run_id, "hi");
        assert_eq!(r.on_front, Some(false));
    }

    fn candidate_set() -> impl proptest::strategy::Strategy<Value = Vec<ModelCandidate>> {
        (1usize..=5).prop_flat_map(|m| {
            prop::collection::vec(
                (prop::collection::vec(0u32..=20, m), 0u32..=20),
                1..60,
            )
            .prop_map(|rows| {
                rows.into_iter()
                    .enumerate()
                    .map(|(i, (g, o))| {
                        ModelCandidate::new(
                            format!("r{i:03}"),
                            g.into_iter().map(|v| 0.5 + v as f64 / 40.0).collect(),
                            0.5 + o as f64 / 40.0,
                        )
                    })
                    .collect()
            })
        })
    }

    proptest! {
        #[test]
        fn front_matches_oracle(cands in candidate_set()) {
            let front = pareto_front(&cands).unwrap();
            let expect: Vec<String> =
                front_oracle(&cands).into_iter().map(|i| cands[i].run_id.clone()).collect();
            let got: Vec<String> = front.members.iter().map(|c| c.run_id.clone()).collect();
            prop_assert_eq!(got, expect);
            let seq = pareto_front_with(&cands, Parallelism::Sequential).unwrap();
            prop_assert_eq!(seq, front);
        }

        #[test]
        fn minimax_is_global_maximin_and_undominated(cands in candidate_set()) {
            let r = select_pareto_minimax(&cands).unwrap();
            let global = cands.iter().map(ModelCandidate::worst).fold(f64::MIN, f64::max);
            prop_assert_eq!(r.score, global);
            let chosen = cands.iter().find(|c| c.run_id == r.chosen).unwrap();
            for c in &cands {
                prop_assert!(!dominates(&c.group_auc, &chosen.group_auc).unwrap());
            }
        }

        #[test]
        fn affine_map_keeps_choices(cands in candidate_set(), a in 0.5f64..3.0, b in -1.0f64..1.0) {
            let mapped: Vec<ModelCandidate> = cands
                .iter()
                .map(|c| ModelCandidate::new(
                    c.run_id.clone(),
                    c.group_auc.iter().map(|v| a * v + b).collect(),
                    a * c.overall_auc + b,
                ))
                .collect();
            for s in [Strategy::Overall, Strategy::ParetoMinimax, Strategy::Dto] {
                prop_assert_eq!(
                    select(s, &cands).unwrap().chosen,
                    select(s, &mapped).unwrap().chosen
                );
            }
        }

        #[test]
        fn front_permutation_invariant(cands in candidate_set()) {
            let mut rev = cands.clone();
            rev.reverse();
            let mut a = pareto_front(&cands).unwrap().members;
            let mut b = pareto_front(&rev).unwrap().members;
            a.sort_by(by_run_id);
            b.sort_by(by_run_id);
            prop_assert_eq!(a, b);
        }

        #[test]
        fn dominance_irreflexive_antisymmetric(
            a in prop::collection::vec(0u32..5, 3),
            b in prop::collection::vec(0u32..5, 3),
        ) {
            let a: Vec<f64> = a.into_iter().map(f64::from).collect();
            let b: Vec<f64> = b.into_iter().map(f64::from).collect();
            prop_assert!(!dominates(&a, &a).unwrap());
            prop_assert!(!(dominates(&a, &b).unwrap() && dominates(&b, &a).unwrap()));
        }
    }
}
