//! Independent reference implementations used by several test targets.
#![allow(dead_code)]

use embedprobe::learners::Dataset;
use embedprobe::rng;
use rand::Rng;

/// One small classification problem.
pub struct Case {
    pub columns: Vec<Vec<f64>>,
    pub labels: Vec<bool>,
    /// Node membership; may repeat rows like a bootstrap sample.
    pub rows: Vec<usize>,
}

impl Case {
    pub fn dataset(&self) -> Dataset {
        Dataset::from_columns(self.columns.clone()).unwrap()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.labels.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect()
    }
}

/// Every dataset with 2..=8 samples and 1..=3 features that the oracle
/// tests sweep: small integer values so that ties are common.
pub fn small_corpus(n_cases: usize, seed: u64) -> Vec<Case> {
    let mut s = rng::stream(seed);
    (0..n_cases)
        .map(|i| {
            let n = s.random_range(2..=8);
            let f = s.random_range(1..=3);
            let levels = s.random_range(1..=5);
            let columns = (0..f).map(|_| (0..n).map(|_| s.random_range(0..levels) as f64 * 0.5).collect()).collect();
            let labels = (0..n).map(|_| s.random_bool(0.5)).collect();
            let rows = if i % 3 == 0 { (0..n).map(|_| s.random_range(0..n)).collect() } else { (0..n).collect() };
            Case { columns, labels, rows }
        })
        .collect()
}

pub fn gini(pos: usize, n: usize) -> f64 {
    let nf = n as f64;
    let p1 = pos as f64 / nf;
    let p0 = (n - pos) as f64 / nf;
    1.0 - p0 * p0 - p1 * p1
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleSplit {
    pub feature: usize,
    pub threshold: f64,
    pub decrease: f64,
}

/// Try every feature and every midpoint between distinct values, counting
/// both children from scratch. First strictly best candidate wins.
pub fn brute_force_split(columns: &[Vec<f64>], labels: &[bool], rows: &[usize], min_leaf: usize) -> Option<OracleSplit> {
    let n = rows.len();
    let pos = rows.iter().filter(|&&r| labels[r]).count();
    let parent = gini(pos, n);
    let mut best: Option<OracleSplit> = None;
    for (feature, col) in columns.iter().enumerate() {
        let mut values: Vec<f64> = rows.iter().map(|&r| col[r]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for w in values.windows(2) {
            let threshold = (w[0] + w[1]) / 2.0;
            let left: Vec<usize> = rows.iter().copied().filter(|&r| col[r] <= threshold).collect();
            let right: Vec<usize> = rows.iter().copied().filter(|&r| col[r] > threshold).collect();
            if left.len() < min_leaf || right.len() < min_leaf {
                continue;
            }
            let lp = left.iter().filter(|&&r| labels[r]).count();
            let rp = right.iter().filter(|&&r| labels[r]).count();
            let decrease = parent
                - (left.len() as f64 / n as f64) * gini(lp, left.len())
                - (right.len() as f64 / n as f64) * gini(rp, right.len());
            if decrease > 0.0 && best.is_none_or(|b| decrease > b.decrease) {
                best = Some(OracleSplit { feature, threshold, decrease });
            }
        }
    }
    best
}

/// Grow a full Gini tree with the brute-force splitter and return its
/// normalized MDI, accumulating nodes in pre-order.
pub fn brute_force_mdi(columns: &[Vec<f64>], labels: &[bool], rows: &[usize]) -> Vec<f64> {
    fn grow(columns: &[Vec<f64>], labels: &[bool], rows: &[usize], root: f64, acc: &mut [f64]) {
        let Some(s) = brute_force_split(columns, labels, rows, 1) else { return };
        acc[s.feature] += rows.len() as f64 / root * s.decrease;
        let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| columns[s.feature][i] <= s.threshold);
        grow(columns, labels, &l, root, acc);
        grow(columns, labels, &r, root, acc);
    }
    let mut acc = vec![0.0; columns.len()];
    grow(columns, labels, rows, rows.len() as f64, &mut acc);
    let sum: f64 = acc.iter().sum();
    if sum > 0.0 {
        acc.iter_mut().for_each(|v| *v /= sum);
    }
    acc
}
