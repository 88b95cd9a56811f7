//! Run-quality measures: top-k AUC over oracle calls and two diversity
//! scores.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::fingerprint::{tanimoto, Fingerprint, FingerprintError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("k must be at least 1")]
    ZeroK,
    #[error("budget must be at least 1")]
    ZeroBudget,
    #[error("k = {k} exceeds budget {budget}")]
    KExceedsBudget { k: usize, budget: usize },
    #[error("record has {calls} calls, more than the budget {budget}")]
    OverBudget { calls: usize, budget: usize },
    #[error("need at least two items, got {0}")]
    TooFew(usize),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Fingerprint(#[from] FingerprintError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Score(f64);

impl Eq for Score {}

impl PartialOrd for Score {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Score {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Mean of the best `k` fitnesses seen after each call. Calls without a
/// score (failed evaluations) repeat the previous value; before the first
/// score the curve is 0.
pub fn topk_curve(calls: &[Option<f64>], k: usize) -> Result<Vec<f64>, MetricsError> {
    if k == 0 {
        return Err(MetricsError::ZeroK);
    }
    let mut heap: BinaryHeap<Reverse<Score>> = BinaryHeap::with_capacity(k + 1);
    let mut sum = 0.0;
    let mut curve = Vec::with_capacity(calls.len());
    for call in calls {
        if let Some(f) = *call {
            heap.push(Reverse(Score(f)));
            sum += f;
            if heap.len() > k {
                let Reverse(Score(dropped)) = heap.pop().expect("non-empty");
                sum -= dropped;
            }
        }
        curve.push(if heap.is_empty() { 0.0 } else { sum / heap.len() as f64 });
    }
    Ok(curve)
}

/// Step-rule area under the top-k curve normalized by `budget`. A run that
/// stopped early holds its last value up to the budget.
pub fn topk_auc(calls: &[Option<f64>], k: usize, budget: usize) -> Result<f64, MetricsError> {
    if budget == 0 {
        return Err(MetricsError::ZeroBudget);
    }
    if k > budget {
        return Err(MetricsError::KExceedsBudget { k, budget });
    }
    if calls.len() > budget {
        return Err(MetricsError::OverBudget {
            calls: calls.len(),
            budget,
        });
    }
    let curve = topk_curve(calls, k)?;
    let last = curve.last().copied().unwrap_or(0.0);
    let total: f64 = curve.iter().sum::<f64>() + last * (budget - curve.len()) as f64;
    Ok(total / budget as f64)
}

/// Sum of per-objective top-k AUCs.
pub fn sum_of_aucs(
    per_objective: &[Vec<Option<f64>>],
    k: usize,
    budget: usize,
) -> Result<f64, MetricsError> {
    per_objective.iter().map(|c| topk_auc(c, k, budget)).sum()
}

/// Mean pairwise Tanimoto distance.
pub fn structural_diversity(fps: &[Fingerprint]) -> Result<f64, MetricsError> {
    if fps.len() < 2 {
        return Err(MetricsError::TooFew(fps.len()));
    }
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..fps.len() {
        for j in i + 1..fps.len() {
            total += 1.0 - tanimoto(&fps[i], &fps[j])?;
            pairs += 1;
        }
    }
    Ok(total / pairs as f64)
}

/// Mean pairwise Euclidean distance between objective vectors.
pub fn objective_diversity<P: AsRef<[f64]>>(points: &[P]) -> Result<f64, MetricsError> {
    if points.len() < 2 {
        return Err(MetricsError::TooFew(points.len()));
    }
    let dim = points[0].as_ref().len();
    if let Some(p) = points.iter().find(|p| p.as_ref().len() != dim) {
        return Err(MetricsError::DimensionMismatch {
            expected: dim,
            found: p.as_ref().len(),
        });
    }
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let d2: f64 = points[i]
                .as_ref()
                .iter()
                .zip(points[j].as_ref())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            total += d2.sqrt();
            pairs += 1;
        }
    }
    Ok(total / pairs as f64)
}
