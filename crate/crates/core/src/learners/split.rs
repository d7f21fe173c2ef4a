use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    /// Binary Gini impurity; targets must be 0.0 or 1.0.
    Gini,
    /// Mean squared deviation of real-valued targets.
    Variance,
}

/// Running sufficient statistics of the targets in a node.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct NodeStats {
    pub count: usize,
    pub sum: f64,
    pub sum_sq: f64,
}

impl NodeStats {
    #[inline]
    pub fn push(&mut self, y: f64) {
        self.count += 1;
        self.sum += y;
        self.sum_sq += y * y;
    }

    #[inline]
    pub fn minus(&self, other: &NodeStats) -> NodeStats {
        NodeStats {
            count: self.count - other.count,
            sum: self.sum - other.sum,
            sum_sq: self.sum_sq - other.sum_sq,
        }
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.count as f64
    }
}

#[inline]
pub(crate) fn impurity(criterion: Criterion, s: &NodeStats) -> f64 {
    let n = s.count as f64;
    match criterion {
        Criterion::Gini => {
            let p1 = s.sum / n;
            let p0 = (n - s.sum) / n;
            1.0 - p0 * p0 - p1 * p1
        }
        Criterion::Variance => {
            let m = s.sum / n;
            (s.sum_sq / n - m * m).max(0.0)
        }
    }
}

/// Weighted impurity decrease of splitting `parent` into `left` and the rest.
#[inline]
pub(crate) fn impurity_decrease(criterion: Criterion, parent: &NodeStats, parent_impurity: f64, left: &NodeStats) -> f64 {
    let right = parent.minus(left);
    let n = parent.count as f64;
    parent_impurity
        - (left.count as f64 / n) * impurity(criterion, left)
        - (right.count as f64 / n) * impurity(criterion, &right)
}

/// Threshold between two consecutive distinct sorted values such that
/// `lo <= t < hi`.
#[inline]
pub(crate) fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid >= hi {
        lo
    } else {
        mid
    }
}

/// Gini impurity `1 - p0^2 - p1^2` of a list of binary labels.
pub fn gini_impurity(labels: &[bool]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::invalid("gini impurity of an empty node"));
    }
    let mut stats = NodeStats::default();
    for &l in labels {
        stats.push(if l { 1.0 } else { 0.0 });
    }
    Ok(impurity(Criterion::Gini, &stats))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Split {
    /// Column index in the dataset the split was searched on.
    pub feature: usize,
    pub threshold: f64,
    pub impurity_decrease: f64,
}

impl Split {
    /// Strict improvement; earlier candidates win ties, which yields the
    /// lowest-feature, lowest-threshold rule when candidates are visited in
    /// that order.
    #[inline]
    pub(crate) fn beats(decrease: f64, best: &Option<Split>) -> bool {
        decrease > 0.0 && best.is_none_or(|b| decrease > b.impurity_decrease)
    }
}

/// Best axis-aligned split of the node holding `rows`.
///
/// Rows go left when `value <= threshold`. Thresholds are midpoints between
/// consecutive distinct values. Returns `None` when no split has a positive
/// impurity decrease with both children holding `min_samples_leaf` rows.
/// `rows` may repeat indices (bootstrap duplicates).
pub fn best_split(
    data: &Dataset,
    targets: &[f64],
    rows: &[usize],
    candidates: &[usize],
    criterion: Criterion,
    min_samples_leaf: usize,
) -> Option<Split> {
    let mut scratch = Vec::with_capacity(rows.len());
    best_split_with(data, targets, rows, candidates, criterion, min_samples_leaf, &mut scratch)
}

pub(crate) fn best_split_with(
    data: &Dataset,
    targets: &[f64],
    rows: &[usize],
    candidates: &[usize],
    criterion: Criterion,
    min_samples_leaf: usize,
    scratch: &mut Vec<(f64, usize)>,
) -> Option<Split> {
    let min_leaf = min_samples_leaf.max(1);
    if rows.len() < 2 * min_leaf {
        return None;
    }
    let mut parent = NodeStats::default();
    for &r in rows {
        parent.push(targets[r]);
    }
    let parent_impurity = impurity(criterion, &parent);
    if parent_impurity <= 0.0 {
        return None;
    }

    let mut sorted_candidates = candidates.to_vec();
    sorted_candidates.sort_unstable();
    sorted_candidates.dedup();

    let mut best: Option<Split> = None;
    for &feature in &sorted_candidates {
        let column = data.column(feature);
        scratch.clear();
        scratch.extend(rows.iter().map(|&r| (column[r], r)));
        scratch.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

        let mut left = NodeStats::default();
        for i in 0..scratch.len() - 1 {
            left.push(targets[scratch[i].1]);
            let (lo, hi) = (scratch[i].0, scratch[i + 1].0);
            if lo == hi || left.count < min_leaf {
                continue;
            }
            if parent.count - left.count < min_leaf {
                break;
            }
            let decrease = impurity_decrease(criterion, &parent, parent_impurity, &left);
            if Split::beats(decrease, &best) {
                best = Some(Split { feature, threshold: midpoint(lo, hi), impurity_decrease: decrease });
            }
        }
    }
    best
}
