use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Per-period priority scores `P_t(s)`, higher pulled first. Periods past
/// the last stored one repeat it. Ties go to the earlier state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrioritySchedule<S = f64> {
    scores: Vec<Vec<S>>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ScheduleFile {
    Periods(Vec<Vec<f64>>),
    Constant(Vec<f64>),
    Keyed { scores: Vec<Vec<f64>> },
}

impl<S: Scalar> PrioritySchedule<S> {
    pub fn new(scores: Vec<Vec<S>>) -> Self {
        assert!(!scores.is_empty(), "schedule needs at least one period");
        Self { scores }
    }

    /// The same scores in every period.
    pub fn constant(scores: Vec<S>) -> Self {
        Self { scores: vec![scores] }
    }

    /// Scores `|S| − rank` from a best-first state order.
    pub fn from_order(order: &[usize]) -> Self {
        let n = order.len();
        let mut scores = vec![S::zero(); n];
        for (rank, &s) in order.iter().enumerate() {
            scores[s] = S::from_usize(n - rank).expect("small integer");
        }
        Self::constant(scores)
    }

    pub fn periods(&self) -> usize {
        self.scores.len()
    }

    pub fn n_states(&self) -> usize {
        self.scores[0].len()
    }

    pub fn at(&self, t: usize) -> &[S] {
        &self.scores[t.clamp(1, self.scores.len()) - 1]
    }

    /// States best-first at period `t`.
    pub fn ranking(&self, t: usize) -> Vec<usize> {
        ranking(self.at(t))
    }

    pub fn map_scalar<T: Scalar>(&self, f: impl Fn(&S) -> T) -> PrioritySchedule<T> {
        PrioritySchedule { scores: self.scores.iter().map(|r| r.iter().map(&f).collect()).collect() }
    }
}

impl PrioritySchedule<f64> {
    /// Parse a JSON score file: a list of per-period lists, one list used
    /// for every period, or `{"scores": [[...], ...]}`.
    pub fn from_json(text: &str, n_states: usize) -> Result<Self> {
        let parsed: ScheduleFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let scores = match parsed {
            ScheduleFile::Periods(p) | ScheduleFile::Keyed { scores: p } => p,
            ScheduleFile::Constant(c) => vec![c],
        };
        if scores.is_empty() {
            return Err(Error::Parse("priority file lists no periods".into()));
        }
        if let Some(bad) = scores.iter().find(|r| r.len() != n_states) {
            return Err(Error::Dimension(format!("priority row has {} scores for {n_states} states", bad.len())));
        }
        Ok(Self { scores })
    }

    pub fn from_file(path: &Path, n_states: usize) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?, n_states)
    }
}

/// Indices sorted by descending score; the stable sort keeps earlier states
/// ahead on ties.
pub fn ranking<S: Scalar>(scores: &[S]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(std::cmp::Ordering::Equal));
    order
}

/// Pull `budget` arms greedily, best state first.
pub fn priority_greedy_action<S: Scalar>(scores: &[S], counts: &[u64], budget: u64) -> Result<Vec<u64>> {
    let arms: u64 = counts.iter().sum();
    if budget > arms {
        return Err(Error::BudgetExceedsArms { budget, arms });
    }
    let mut pulls = vec![0; counts.len()];
    let mut rem = budget;
    for s in ranking(scores) {
        let take = rem.min(counts[s]);
        pulls[s] = take;
        rem -= take;
        if rem == 0 {
            break;
        }
    }
    Ok(pulls)
}
