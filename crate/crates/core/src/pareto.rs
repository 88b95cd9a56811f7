//! Dominance, Pareto frontiers, exact hypervolume and weighted-sum
//! aggregation over normalized, maximized objective vectors.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest objective count the hypervolume routine accepts.
pub const MAX_HV_DIMENSION: usize = 5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParetoError {
    #[error("no points given")]
    Empty,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("hypervolume supports at most {MAX_HV_DIMENSION} objectives, got {0}")]
    UnsupportedDimension(usize),
    #[error("objective value {0} outside [0, 1]")]
    OutOfRange(f64),
}

/// Normalized score vector of one molecule, labelled by its canonical SMILES.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectivePoint {
    pub values: Vec<f64>,
    pub label: String,
}

impl ObjectivePoint {
    pub fn new(values: Vec<f64>, label: impl Into<String>) -> Result<Self, ParetoError> {
        if let Some(&bad) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(ParetoError::OutOfRange(bad));
        }
        Ok(ObjectivePoint {
            values,
            label: label.into(),
        })
    }
}

/// Mutually non-dominated points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoSet {
    pub points: Vec<ObjectivePoint>,
}

impl ParetoSet {
    pub fn hypervolume(&self) -> Result<f64, ParetoError> {
        let vs: Vec<&[f64]> = self.points.iter().map(|p| p.values.as_slice()).collect();
        hypervolume(&vs)
    }
}

fn check_dims(a: &[f64], b: &[f64]) -> Result<(), ParetoError> {
    if a.len() != b.len() {
        return Err(ParetoError::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(())
}

/// Weak dominance: `a` is at least as good as `b` in every objective.
pub fn dominates(a: &[f64], b: &[f64]) -> Result<bool, ParetoError> {
    check_dims(a, b)?;
    Ok(a.iter().zip(b).all(|(x, y)| x >= y))
}

/// Weak dominance with at least one strictly better objective.
pub fn strictly_dominates(a: &[f64], b: &[f64]) -> Result<bool, ParetoError> {
    Ok(dominates(a, b)? && a != b)
}

/// Indices of the frontier. Among identical vectors only the one with the
/// smallest label survives. Output is sorted by index.
///
/// Points are visited in lexicographically descending order, so any
/// dominator of a point is visited before it; a point survives when no
/// already kept point weakly dominates it.
pub fn frontier_indices(points: &[ObjectivePoint]) -> Result<Vec<usize>, ParetoError> {
    let first = points.first().ok_or(ParetoError::Empty)?;
    for p in points {
        check_dims(&first.values, &p.values)?;
    }
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| {
        let (a, b) = (&points[i], &points[j]);
        b.values
            .iter()
            .zip(&a.values)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| (a.label.as_str(), i).cmp(&(b.label.as_str(), j)))
    });
    let mut keep: Vec<usize> = Vec::new();
    for i in order {
        let p = &points[i].values;
        if !keep.iter().any(|&k| points[k].values.iter().zip(p).all(|(x, y)| x >= y)) {
            keep.push(i);
        }
    }
    keep.sort_unstable();
    Ok(keep)
}

pub fn pareto_frontier(points: &[ObjectivePoint]) -> Result<ParetoSet, ParetoError> {
    let idx = frontier_indices(points)?;
    Ok(ParetoSet {
        points: idx.into_iter().map(|i| points[i].clone()).collect(),
    })
}

/// Exact measure of the union of boxes `[0, p]`. The empty set has volume 0.
pub fn hypervolume<P: AsRef<[f64]>>(points: &[P]) -> Result<f64, ParetoError> {
    let Some(first) = points.first() else {
        return Ok(0.0);
    };
    let dim = first.as_ref().len();
    if dim > MAX_HV_DIMENSION {
        return Err(ParetoError::UnsupportedDimension(dim));
    }
    let mut pts = Vec::with_capacity(points.len());
    for p in points {
        let p = p.as_ref();
        check_dims(first.as_ref(), p)?;
        if let Some(&bad) = p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(ParetoError::OutOfRange(bad));
        }
        pts.push(p.to_vec());
    }
    if dim == 0 {
        return Ok(1.0);
    }
    Ok(slice_volume(nondominated(pts), dim))
}

fn nondominated(mut pts: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    pts.sort_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
    pts.dedup();
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(pts.len());
    for p in pts {
        if !out.iter().any(|q| q.iter().zip(&p).all(|(x, y)| x >= y)) {
            out.push(p);
        }
    }
    out
}

/// Sweeps the last coordinate from the top; each slab contributes its
/// thickness times the volume of the points above it, one dimension down.
fn slice_volume(mut pts: Vec<Vec<f64>>, dim: usize) -> f64 {
    match dim {
        1 => pts.iter().map(|p| p[0]).fold(0.0, f64::max),
        2 => {
            pts.sort_by(|a, b| b[0].total_cmp(&a[0]));
            let mut best_y = 0.0;
            let mut area = 0.0;
            for p in &pts {
                if p[1] > best_y {
                    area += p[0] * (p[1] - best_y);
                    best_y = p[1];
                }
            }
            area
        }
        _ => {
            let last = dim - 1;
            pts.sort_by(|a, b| b[last].total_cmp(&a[last]));
            let mut volume = 0.0;
            let mut above: Vec<Vec<f64>> = Vec::new();
            for i in 0..pts.len() {
                above.push(pts[i][..last].to_vec());
                let z = pts[i][last];
                let z_next = pts.get(i + 1).map_or(0.0, |p| p[last]);
                if z > z_next {
                    above = nondominated(above);
                    volume += (z - z_next) * slice_volume(above.clone(), last);
                }
            }
            volume
        }
    }
}

/// Volume lost when each point is removed from `points`.
pub fn hypervolume_contributions<P: AsRef<[f64]>>(points: &[P]) -> Result<Vec<f64>, ParetoError> {
    let total = hypervolume(points)?;
    (0..points.len())
        .map(|i| {
            let rest: Vec<&[f64]> = points
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, p)| p.as_ref())
                .collect();
            Ok((total - hypervolume(&rest)?).max(0.0))
        })
        .collect()
}

/// Σ wᵢ·vᵢ.
pub fn aggregate_sum(values: &[f64], weights: &[f64]) -> Result<f64, ParetoError> {
    check_dims(values, weights)?;
    Ok(values.iter().zip(weights).map(|(v, w)| v * w).sum())
}

/// Picks `n` survivors. A frontier larger than `n` is cut to the `n`
/// members with the largest hypervolume contribution; a smaller one is
/// topped up with the best remaining points by weighted sum. Ties go to
/// the smaller label. Returned indices are in selection order.
pub fn select_survivors(
    points: &[ObjectivePoint],
    weights: &[f64],
    n: usize,
) -> Result<Vec<usize>, ParetoError> {
    let front = frontier_indices(points)?;
    if front.len() >= n {
        let vals: Vec<&[f64]> = front.iter().map(|&i| points[i].values.as_slice()).collect();
        let contrib = hypervolume_contributions(&vals)?;
        let mut order: Vec<usize> = (0..front.len()).collect();
        order.sort_by(|&a, &b| {
            contrib[b]
                .total_cmp(&contrib[a])
                .then_with(|| points[front[a]].label.cmp(&points[front[b]].label))
        });
        return Ok(order.into_iter().take(n).map(|k| front[k]).collect());
    }
    let mut rest: Vec<(f64, usize)> = Vec::new();
    for (i, p) in points.iter().enumerate() {
        if !front.contains(&i) {
            rest.push((aggregate_sum(&p.values, weights)?, i));
        }
    }
    rest.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then_with(|| points[a.1].label.cmp(&points[b.1].label))
    });
    let mut out = front;
    out.extend(rest.into_iter().take(n - out.len()).map(|(_, i)| i));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pt(v: &[f64], label: &str) -> ObjectivePoint {
        ObjectivePoint::new(v.to_vec(), label).unwrap()
    }

    #[test]
    fn dominance_examples() {
        assert!(dominates(&[0.9, 0.9], &[0.5, 0.5]).unwrap());
        assert!(!dominates(&[0.9, 0.1], &[0.1, 0.9]).unwrap());
        assert!(!dominates(&[0.1, 0.9], &[0.9, 0.1]).unwrap());
        assert!(dominates(&[0.4, 0.4], &[0.4, 0.4]).unwrap());
        assert!(!strictly_dominates(&[0.4, 0.4], &[0.4, 0.4]).unwrap());
        assert_eq!(
            dominates(&[0.1], &[0.1, 0.2]),
            Err(ParetoError::DimensionMismatch { expected: 1, found: 2 })
        );
    }

    #[test]
    fn frontier_examples() {
        assert_eq!(frontier_indices(&[pt(&[0.3, 0.3], "C")]).unwrap(), vec![0]);
        let three = [pt(&[0.8, 0.2], "a"), pt(&[0.2, 0.8], "b"), pt(&[0.5, 0.5], "c")];
        assert_eq!(frontier_indices(&three).unwrap(), vec![0, 1, 2]);
        assert_eq!(frontier_indices(&[]), Err(ParetoError::Empty));
    }

    #[test]
    fn duplicates_keep_smallest_label() {
        let pts = [pt(&[0.5, 0.5], "CCO"), pt(&[0.5, 0.5], "CC"), pt(&[0.1, 0.1], "C")];
        assert_eq!(frontier_indices(&pts).unwrap(), vec![1]);
    }

    #[test]
    fn hypervolume_examples() {
        assert_eq!(hypervolume(&[[1.0, 1.0]]).unwrap(), 1.0);
        assert_eq!(hypervolume(&[[0.5, 0.5]]).unwrap(), 0.25);
        let v = hypervolume(&[[0.8, 0.2], [0.5, 0.5], [0.2, 0.8]]).unwrap();
        assert_abs_diff_eq!(v, 0.37, epsilon = 1e-12);
        assert_eq!(hypervolume::<[f64; 2]>(&[]).unwrap(), 0.0);
        assert_eq!(
            hypervolume(&[[0.1; 6]]),
            Err(ParetoError::UnsupportedDimension(6))
        );
        assert_eq!(hypervolume(&[[1.5, 0.1]]), Err(ParetoError::OutOfRange(1.5)));
    }

    #[test]
    fn three_d_inclusion_exclusion() {
        // two boxes overlapping in [0,.5]x[0,.5]x[0,.5]
        let v = hypervolume(&[[1.0, 0.5, 0.5], [0.5, 1.0, 1.0]]).unwrap();
        assert_abs_diff_eq!(v, 0.25 + 0.5 - 0.125, epsilon = 1e-12);
    }

    #[test]
    fn aggregate_examples() {
        assert_abs_diff_eq!(aggregate_sum(&[0.2, 0.3, 0.5], &[1.0; 3]).unwrap(), 1.0);
        assert_eq!(aggregate_sum(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(aggregate_sum(&[0.5, 0.5], &[2.0, 1.0]).unwrap(), 1.5);
        assert!(aggregate_sum(&[0.5], &[2.0, 1.0]).is_err());
    }

    #[test]
    fn survivors_cut_and_fill() {
        let pts = [
            pt(&[0.9, 0.1], "a"),
            pt(&[0.5, 0.5], "b"),
            pt(&[0.1, 0.9], "c"),
            pt(&[0.4, 0.4], "d"),
            pt(&[0.1, 0.1], "e"),
        ];
        let cut = select_survivors(&pts, &[1.0, 1.0], 1).unwrap();
        assert_eq!(cut, vec![1]);
        let fill = select_survivors(&pts, &[1.0, 1.0], 4).unwrap();
        assert_eq!(fill, vec![0, 1, 2, 3]);
        let all = select_survivors(&pts, &[1.0, 1.0], 10).unwrap();
        assert_eq!(all.len(), 5);
    }
}
