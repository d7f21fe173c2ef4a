//! Gradient-boosted regression trees under logistic loss.
//!
//! Each round fits a variance-criterion tree to the residuals `y - p` and
//! sets each leaf to the Newton step `sum(r) / sum(p (1 - p))`. Trees are
//! grown level by level so one pass over a presorted column (exact mode) or
//! a binned column (histogram mode) scores every open node at once.

use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::forest::validate_training_input;
use super::split::{impurity, impurity_decrease, midpoint, Criterion, NodeStats, Split};
use super::tree::{Tree, TreeNode};
use super::Dataset;
use crate::error::{Error, Result};
use crate::rng;

const MAX_LEAF_STEP: f64 = 10.0;
const MIN_HESSIAN: f64 = 1e-12;
const PROB_CLAMP: f64 = 1e-6;
const NONE: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    Exact,
    Histogram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbtParams {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Row fraction sampled without replacement per round.
    pub subsample: f64,
    /// Histogram mode only.
    pub max_bins: usize,
}

impl Default for GbtParams {
    fn default() -> Self {
        GbtParams {
            n_rounds: 200,
            learning_rate: 0.1,
            max_depth: 6,
            min_samples_leaf: 2,
            subsample: 1.0,
            max_bins: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    pub trees: Vec<Tree>,
    pub learning_rate: f64,
    /// Log-odds of the training positive rate.
    pub base_score: f64,
    pub n_features: usize,
    pub feature_map: Vec<usize>,
    pub mode: SplitMode,
    pub params: GbtParams,
    pub degenerate: bool,
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl GbtModel {
    pub fn raw_score(&self, row: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict(row)).sum();
        self.base_score + self.learning_rate * sum
    }

    pub fn score(&self, row: &[f64]) -> f64 {
        sigmoid(self.raw_score(row))
    }
}

pub fn train_gbt(
    data: &Dataset,
    labels: &[bool],
    params: &GbtParams,
    mode: SplitMode,
    seed: u64,
) -> Result<GbtModel> {
    let (pos, neg) = validate_training_input(data, labels)?;
    if !(params.learning_rate >= 0.0 && params.learning_rate.is_finite()) {
        return Err(Error::invalid("learning_rate must be finite and non-negative"));
    }
    if !(params.subsample > 0.0 && params.subsample <= 1.0) {
        return Err(Error::invalid("subsample must be in (0, 1]"));
    }
    let n = data.n_rows();
    let prior = (pos as f64 / n as f64).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    let base_score = (prior / (1.0 - prior)).ln();
    let mut model = GbtModel {
        trees: Vec::with_capacity(params.n_rounds),
        learning_rate: params.learning_rate,
        base_score,
        n_features: data.n_features(),
        feature_map: data.feature_map().to_vec(),
        mode,
        params: params.clone(),
        degenerate: pos == 0 || neg == 0,
    };
    if model.degenerate {
        return Ok(model);
    }

    let finder = match mode {
        SplitMode::Exact => Finder::Exact(presort(data)),
        SplitMode::Histogram => Finder::Histogram(Binned::new(data, params.max_bins.max(2))),
    };
    let y: Vec<f64> = labels.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect();
    let mut raw = vec![base_score; n];
    let mut residuals = vec![0.0; n];
    let mut hessians = vec![0.0; n];
    let mut stream = rng::stream(seed);
    let n_sub = ((params.subsample * n as f64).round() as usize).clamp(1, n);
    let mut row_buf = vec![0.0; data.n_features()];

    for _ in 0..params.n_rounds {
        for i in 0..n {
            let p = sigmoid(raw[i]);
            residuals[i] = y[i] - p;
            hessians[i] = p * (1.0 - p);
        }
        let in_sample: Vec<usize> = if n_sub == n {
            (0..n).collect()
        } else {
            let mut v = index::sample(&mut stream, n, n_sub).into_vec();
            v.sort_unstable();
            v
        };
        let (mut tree, leaf_of) = grow_level_wise(
            data,
            &residuals,
            &in_sample,
            params.max_depth,
            params.min_samples_leaf,
            &finder,
        );
        set_newton_leaves(&mut tree, &in_sample, &leaf_of, &residuals, &hessians);

        if n_sub == n {
            for &i in &in_sample {
                raw[i] += params.learning_rate * leaf_value(&tree, leaf_of[i] as usize);
            }
        } else {
            for (i, r) in raw.iter_mut().enumerate() {
                data.fill_row(i, &mut row_buf);
                *r += params.learning_rate * tree.predict(&row_buf);
            }
        }
        model.trees.push(tree);
    }
    Ok(model)
}

fn leaf_value(tree: &Tree, id: usize) -> f64 {
    match tree.nodes[id] {
        TreeNode::Leaf { value, .. } => value,
        TreeNode::Internal { .. } => unreachable!("rows end in leaves"),
    }
}

fn set_newton_leaves(tree: &mut Tree, rows: &[usize], leaf_of: &[u32], residuals: &[f64], hessians: &[f64]) {
    let mut grad = vec![0.0; tree.nodes.len()];
    let mut hess = vec![0.0; tree.nodes.len()];
    for &i in rows {
        let leaf = leaf_of[i] as usize;
        grad[leaf] += residuals[i];
        hess[leaf] += hessians[i];
    }
    for (id, node) in tree.nodes.iter_mut().enumerate() {
        if let TreeNode::Leaf { value, .. } = node {
            *value = if hess[id] < MIN_HESSIAN {
                0.0
            } else {
                (grad[id] / hess[id]).clamp(-MAX_LEAF_STEP, MAX_LEAF_STEP)
            };
        }
    }
}

pub(crate) enum Finder {
    Exact(Vec<Vec<u32>>),
    Histogram(Binned),
}

/// Row order of each column sorted by (value, row).
pub(crate) fn presort(data: &Dataset) -> Vec<Vec<u32>> {
    (0..data.n_features())
        .map(|j| {
            let col = data.column(j);
            let mut order: Vec<u32> = (0..data.n_rows() as u32).collect();
            order.sort_unstable_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
            order
        })
        .collect()
}

pub(crate) struct Binned {
    /// Upper edge of every bin except the last, per feature.
    edges: Vec<Vec<f64>>,
    bins: Vec<Vec<u8>>,
}

impl Binned {
    pub(crate) fn new(data: &Dataset, max_bins: usize) -> Self {
        let max_bins = max_bins.min(256);
        let mut edges = Vec::with_capacity(data.n_features());
        let mut bins = Vec::with_capacity(data.n_features());
        for j in 0..data.n_features() {
            let col = data.column(j);
            let e = quantile_edges(col, max_bins);
            bins.push(col.iter().map(|&x| e.partition_point(|&edge| edge < x) as u8).collect());
            edges.push(e);
        }
        Binned { edges, bins }
    }
}

/// At most `max_bins - 1` cut points, each a midpoint between two distinct
/// neighbouring values at (approximately) equal-count quantiles.
pub(crate) fn quantile_edges(values: &[f64], max_bins: usize) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let n = sorted.len();
    let mut distinct = sorted.clone();
    distinct.dedup();
    if distinct.len() <= max_bins {
        return distinct.windows(2).map(|w| midpoint(w[0], w[1])).collect();
    }
    let mut edges = Vec::with_capacity(max_bins - 1);
    for q in 1..max_bins {
        let pos = (q * n / max_bins).clamp(1, n - 1);
        // move to the next value change at or after the quantile position
        let mut p = pos;
        while p < n && sorted[p] == sorted[p - 1] {
            p += 1;
        }
        if p < n {
            let e = midpoint(sorted[p - 1], sorted[p]);
            if edges.last().is_none_or(|&last| e > last) {
                edges.push(e);
            }
        }
    }
    edges
}

struct Open {
    node: usize,
    stats: NodeStats,
    impurity: f64,
}

/// Grow one variance tree over `rows` (ascending). Returns the tree and the
/// leaf id of every in-sample row (`NONE` elsewhere).
pub(crate) fn grow_level_wise(
    data: &Dataset,
    targets: &[f64],
    rows: &[usize],
    max_depth: usize,
    min_samples_leaf: usize,
    finder: &Finder,
) -> (Tree, Vec<u32>) {
    let n = data.n_rows();
    let min_leaf = min_samples_leaf.max(1);
    let mut slot_of = vec![NONE; n];
    for &r in rows {
        slot_of[r] = 0;
    }
    let mut leaf_of = vec![NONE; n];
    let mut nodes = vec![TreeNode::Leaf { value: 0.0, weight: rows.len() as f64 }];
    let mut open = vec![0usize];
    let mut depth = 0;

    while !open.is_empty() {
        // node statistics in ascending row order
        let mut stats = vec![NodeStats::default(); open.len()];
        for &r in rows {
            let s = slot_of[r];
            if s != NONE {
                stats[s as usize].push(targets[r]);
            }
        }
        let slots: Vec<Open> = open
            .iter()
            .zip(&stats)
            .map(|(&node, s)| Open { node, stats: *s, impurity: impurity(Criterion::Variance, s) })
            .collect();

        let splits: Vec<Option<Split>> = if depth >= max_depth {
            vec![None; slots.len()]
        } else {
            match finder {
                Finder::Exact(orders) => exact_level(data, targets, &slot_of, &slots, orders, min_leaf),
                Finder::Histogram(binned) => histogram_level(targets, rows, &slot_of, &slots, binned, min_leaf),
            }
        };

        // children of slot s get slots 2k, 2k+1 among the splitting slots
        let mut child_slot = vec![(NONE, NONE); slots.len()];
        let mut next_open = Vec::new();
        for (s, (slot, split)) in slots.iter().zip(&splits).enumerate() {
            let weight = slot.stats.count as f64;
            match split {
                Some(split) => {
                    let left = nodes.len();
                    nodes.push(TreeNode::Leaf { value: 0.0, weight: 0.0 });
                    nodes.push(TreeNode::Leaf { value: 0.0, weight: 0.0 });
                    nodes[slot.node] = TreeNode::Internal {
                        feature: split.feature,
                        threshold: split.threshold,
                        left,
                        right: left + 1,
                        weight,
                        impurity_decrease: split.impurity_decrease,
                    };
                    child_slot[s] = (next_open.len() as u32, next_open.len() as u32 + 1);
                    next_open.push(left);
                    next_open.push(left + 1);
                }
                None => {
                    nodes[slot.node] = TreeNode::Leaf { value: 0.0, weight };
                }
            }
        }
        for &r in rows {
            let s = slot_of[r];
            if s == NONE {
                continue;
            }
            match &splits[s as usize] {
                Some(split) => {
                    let (l, rt) = child_slot[s as usize];
                    slot_of[r] = if data.value(r, split.feature) <= split.threshold { l } else { rt };
                }
                None => {
                    leaf_of[r] = slots[s as usize].node as u32;
                    slot_of[r] = NONE;
                }
            }
        }
        open = next_open;
        depth += 1;
    }

    // leaf weights
    let mut counts = vec![0usize; nodes.len()];
    for &r in rows {
        counts[leaf_of[r] as usize] += 1;
    }
    for (id, node) in nodes.iter_mut().enumerate() {
        if let TreeNode::Leaf { weight, .. } = node {
            *weight = counts[id] as f64;
        }
    }
    (Tree { nodes }, leaf_of)
}

fn exact_level(
    data: &Dataset,
    targets: &[f64],
    slot_of: &[u32],
    slots: &[Open],
    orders: &[Vec<u32>],
    min_leaf: usize,
) -> Vec<Option<Split>> {
    let k = slots.len();
    let mut best: Vec<Option<Split>> = vec![None; k];
    let splittable: Vec<bool> = slots
        .iter()
        .map(|s| s.stats.count >= 2 * min_leaf && s.impurity > 0.0)
        .collect();
    if !splittable.iter().any(|&b| b) {
        return best;
    }
    let mut left = vec![NodeStats::default(); k];
    let mut last = vec![f64::NAN; k];
    for (feature, order) in orders.iter().enumerate() {
        let col = data.column(feature);
        left.iter_mut().for_each(|l| *l = NodeStats::default());
        last.iter_mut().for_each(|v| *v = f64::NAN);
        for &row in order {
            let s = slot_of[row as usize];
            if s == NONE || !splittable[s as usize] {
                continue;
            }
            let s = s as usize;
            let v = col[row as usize];
            let slot = &slots[s];
            if left[s].count > 0 && v != last[s] {
                let l = &left[s];
                if l.count >= min_leaf && slot.stats.count - l.count >= min_leaf {
                    let d = impurity_decrease(Criterion::Variance, &slot.stats, slot.impurity, l);
                    if Split::beats(d, &best[s]) {
                        best[s] = Some(Split { feature, threshold: midpoint(last[s], v), impurity_decrease: d });
                    }
                }
            }
            left[s].push(targets[row as usize]);
            last[s] = v;
        }
    }
    best
}

fn histogram_level(
    targets: &[f64],
    rows: &[usize],
    slot_of: &[u32],
    slots: &[Open],
    binned: &Binned,
    min_leaf: usize,
) -> Vec<Option<Split>> {
    let k = slots.len();
    let mut best: Vec<Option<Split>> = vec![None; k];
    let splittable: Vec<bool> = slots
        .iter()
        .map(|s| s.stats.count >= 2 * min_leaf && s.impurity > 0.0)
        .collect();
    if !splittable.iter().any(|&b| b) {
        return best;
    }
    let mut hist: Vec<NodeStats> = Vec::new();
    for (feature, edges) in binned.edges.iter().enumerate() {
        let n_bins = edges.len() + 1;
        if n_bins < 2 {
            continue;
        }
        hist.clear();
        hist.resize(k * n_bins, NodeStats::default());
        let bins = &binned.bins[feature];
        for &r in rows {
            let s = slot_of[r];
            if s == NONE || !splittable[s as usize] {
                continue;
            }
            hist[s as usize * n_bins + bins[r] as usize].push(targets[r]);
        }
        for (s, slot) in slots.iter().enumerate() {
            if !splittable[s] {
                continue;
            }
            let h = &hist[s * n_bins..(s + 1) * n_bins];
            let mut left = NodeStats::default();
            for (b, edge) in edges.iter().enumerate() {
                if h[b].count == 0 {
                    continue;
                }
                left.count += h[b].count;
                left.sum += h[b].sum;
                left.sum_sq += h[b].sum_sq;
                let right = slot.stats.count - left.count;
                if right < min_leaf {
                    break;
                }
                if left.count < min_leaf || right == 0 {
                    continue;
                }
                let d = impurity_decrease(Criterion::Variance, &slot.stats, slot.impurity, &left);
                if Split::beats(d, &best[s]) {
                    best[s] = Some(Split { feature, threshold: *edge, impurity_decrease: d });
                }
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::split::best_split;
    use rand::Rng;

    fn xor_data(n: usize, seed: u64) -> (Dataset, Vec<bool>) {
        let mut s = rng::stream(seed);
        let (mut a, mut b, mut labels) = (Vec::new(), Vec::new(), Vec::new());
        for _ in 0..n {
            let x: f64 = s.random_range(-1.0..1.0);
            let y: f64 = s.random_range(-1.0..1.0);
            a.push(x);
            b.push(y);
            labels.push((x > 0.0) != (y > 0.0));
        }
        (Dataset::from_columns(vec![a, b]).unwrap(), labels)
    }

    fn accuracy(m: &GbtModel, data: &Dataset, labels: &[bool]) -> f64 {
        let mut row = vec![0.0; data.n_features()];
        let hits = (0..data.n_rows())
            .filter(|&i| {
                data.fill_row(i, &mut row);
                (m.score(&row) >= 0.5) == labels[i]
            })
            .count();
        hits as f64 / data.n_rows() as f64
    }

    #[test]
    fn learns_xor_at_depth_two() {
        let (data, labels) = xor_data(200, 4);
        let params = GbtParams { n_rounds: 100, max_depth: 2, min_samples_leaf: 1, ..Default::default() };
        for mode in [SplitMode::Exact, SplitMode::Histogram] {
            let m = train_gbt(&data, &labels, &params, mode, 0).unwrap();
            let acc = accuracy(&m, &data, &labels);
            assert!(acc >= 0.95, "{mode:?}: {acc}");
        }
    }

    #[test]
    fn zero_learning_rate_is_a_no_op() {
        let (data, labels) = xor_data(50, 1);
        let params = GbtParams { n_rounds: 1, learning_rate: 0.0, ..Default::default() };
        let m = train_gbt(&data, &labels, &params, SplitMode::Exact, 0).unwrap();
        let expected = sigmoid(m.base_score);
        for i in 0..data.n_rows() {
            assert_eq!(m.score(&[data.value(i, 0), data.value(i, 1)]), expected);
        }
    }

    #[test]
    fn exact_and_histogram_agree_closely() {
        let mut s = rng::stream(9);
        let n = 200;
        let cols: Vec<Vec<f64>> = (0..5).map(|_| (0..n).map(|_| s.random_range(-2.0..2.0)).collect()).collect();
        let labels: Vec<bool> = (0..n)
            .map(|i| cols[0][i] + 0.5 * cols[1][i] + s.random_range(-0.5..0.5) > 0.0)
            .collect();
        let data = Dataset::from_columns(cols).unwrap();
        let params = GbtParams { n_rounds: 50, max_depth: 3, ..Default::default() };
        let exact = train_gbt(&data, &labels, &params, SplitMode::Exact, 0).unwrap();
        let hist = train_gbt(&data, &labels, &params, SplitMode::Histogram, 0).unwrap();
        let diff = (accuracy(&exact, &data, &labels) - accuracy(&hist, &data, &labels)).abs();
        assert!(diff <= 0.05, "{diff}");
    }

    #[test]
    fn level_wise_exact_matches_reference_split_per_node() {
        let mut s = rng::stream(21);
        let n = 60;
        let cols: Vec<Vec<f64>> = (0..4).map(|_| (0..n).map(|_| (s.random_range(0..20) as f64) / 4.0).collect()).collect();
        let targets: Vec<f64> = (0..n).map(|_| s.random_range(-1.0..1.0)).collect();
        let data = Dataset::from_columns(cols).unwrap();
        let rows: Vec<usize> = (0..n).collect();
        let finder = Finder::Exact(presort(&data));
        let (tree, _) = grow_level_wise(&data, &targets, &rows, 4, 2, &finder);

        fn check(tree: &Tree, id: usize, rows: Vec<usize>, data: &Dataset, targets: &[f64]) {
            let reference = best_split(data, targets, &rows, &[0, 1, 2, 3], Criterion::Variance, 2);
            match &tree.nodes[id] {
                TreeNode::Internal { feature, threshold, left, right, impurity_decrease, weight } => {
                    let r = reference.expect("reference finds a split");
                    assert_eq!((r.feature, r.threshold, r.impurity_decrease), (*feature, *threshold, *impurity_decrease));
                    assert_eq!(*weight, rows.len() as f64);
                    let (l, rt): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| data.value(i, *feature) <= *threshold);
                    check(tree, *left, l, data, targets);
                    check(tree, *right, rt, data, targets);
                }
                TreeNode::Leaf { .. } => {}
            }
        }
        check(&tree, 0, rows, &data, &targets);
        assert!(tree.internal_nodes().count() >= 3);
    }

    #[test]
    fn quantile_edges_cap_bin_count() {
        let values: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        let e = quantile_edges(&values, 64);
        assert!(e.len() <= 63 && e.len() >= 60);
        assert!(e.windows(2).all(|w| w[0] < w[1]));
        let few = quantile_edges(&[3.0, 1.0, 2.0, 2.0], 64);
        assert_eq!(few, vec![1.5, 2.5]);
    }

    #[test]
    fn single_class_is_degenerate() {
        let data = Dataset::from_columns(vec![vec![1.0, 2.0, 3.0]]).unwrap();
        let m = train_gbt(&data, &[false, false, false], &GbtParams::default(), SplitMode::Exact, 0).unwrap();
        assert!(m.degenerate);
        assert!(m.trees.is_empty());
        assert!(m.score(&[1.0]) < 1e-5);
    }

    #[test]
    fn subsampling_is_seeded() {
        let (data, labels) = xor_data(80, 2);
        let params = GbtParams { n_rounds: 10, subsample: 0.5, max_depth: 2, ..Default::default() };
        let a = train_gbt(&data, &labels, &params, SplitMode::Exact, 3).unwrap();
        let b = train_gbt(&data, &labels, &params, SplitMode::Exact, 3).unwrap();
        assert_eq!(a, b);
    }
}
