//! Random forest of Gini trees.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::split::{best_split_with, Criterion, NodeStats};
use super::tree::{Tree, TreeNode};
use super::Dataset;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Features drawn per node; `None` means `ceil(sqrt(n_features))`.
    pub features_per_split: Option<usize>,
    /// Grow each tree on a bootstrap resample; otherwise on every row once.
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams { n_trees: 100, max_depth: 12, min_samples_leaf: 2, features_per_split: None, bootstrap: true }
    }
}

impl ForestParams {
    pub fn mtry(&self, n_features: usize) -> usize {
        let m = self
            .features_per_split
            .unwrap_or_else(|| (n_features as f64).sqrt().ceil() as usize);
        m.clamp(1, n_features.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<Tree>,
    pub n_features: usize,
    pub feature_map: Vec<usize>,
    /// Out-of-bag scoring is never computed.
    pub oob_disabled: bool,
    pub params: ForestParams,
    pub degenerate: bool,
}

impl ForestModel {
    /// Mean leaf score across trees.
    pub fn score(&self, row: &[f64]) -> f64 {
        let total: f64 = self.trees.iter().map(|t| t.predict(row)).sum();
        total / self.trees.len() as f64
    }
}

pub(crate) fn validate_training_input(data: &Dataset, labels: &[bool]) -> Result<(usize, usize)> {
    if data.n_rows() != labels.len() {
        return Err(Error::invalid(format!(
            "{} rows but {} labels",
            data.n_rows(),
            labels.len()
        )));
    }
    if data.n_rows() < 2 {
        return Err(Error::invalid("need at least 2 training rows"));
    }
    if data.n_features() == 0 {
        return Err(Error::invalid("need at least one feature"));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    Ok((pos, labels.len() - pos))
}

pub fn train_forest(data: &Dataset, labels: &[bool], params: &ForestParams, seed: u64) -> Result<ForestModel> {
    let (pos, neg) = validate_training_input(data, labels)?;
    if params.n_trees == 0 {
        return Err(Error::invalid("forest needs at least one tree"));
    }
    let n = data.n_rows();
    let mut model = ForestModel {
        trees: Vec::with_capacity(params.n_trees),
        n_features: data.n_features(),
        feature_map: data.feature_map().to_vec(),
        oob_disabled: true,
        params: params.clone(),
        degenerate: false,
    };
    if pos == 0 || neg == 0 {
        model.degenerate = true;
        model.trees.push(Tree::leaf(pos as f64 / n as f64, n as f64));
        return Ok(model);
    }

    let targets: Vec<f64> = labels.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect();
    let mtry = params.mtry(data.n_features());
    let mut grower = Grower {
        data,
        targets: &targets,
        params,
        mtry,
        nodes: Vec::new(),
        scratch: Vec::with_capacity(n),
    };
    for t in 0..params.n_trees {
        let mut stream = rng::stream(rng::derive(seed, t as u64));
        let mut rows: Vec<usize> = if params.bootstrap {
            (0..n).map(|_| stream.random_range(0..n)).collect()
        } else {
            (0..n).collect()
        };
        grower.nodes = Vec::new();
        grower.grow(&mut rows, 0, &mut stream);
        model.trees.push(Tree { nodes: std::mem::take(&mut grower.nodes) });
    }
    Ok(model)
}

struct Grower<'a> {
    data: &'a Dataset,
    targets: &'a [f64],
    params: &'a ForestParams,
    mtry: usize,
    nodes: Vec<TreeNode>,
    scratch: Vec<(f64, usize)>,
}

impl Grower<'_> {
    fn grow(&mut self, rows: &mut [usize], depth: usize, stream: &mut rng::Stream) -> usize {
        let mut stats = NodeStats::default();
        for &r in rows.iter() {
            stats.push(self.targets[r]);
        }
        let id = self.nodes.len();
        let weight = rows.len() as f64;
        self.nodes.push(TreeNode::Leaf { value: stats.mean(), weight });

        let pure = stats.sum == 0.0 || stats.sum == stats.count as f64;
        if depth >= self.params.max_depth || pure {
            return id;
        }
        let n_features = self.data.n_features();
        let candidates = if self.mtry >= n_features {
            (0..n_features).collect::<Vec<_>>()
        } else {
            index::sample(stream, n_features, self.mtry).into_vec()
        };
        let split = best_split_with(
            self.data,
            self.targets,
            rows,
            &candidates,
            Criterion::Gini,
            self.params.min_samples_leaf,
            &mut self.scratch,
        );
        let Some(split) = split else { return id };

        let column = self.data.column(split.feature);
        let mid = partition(rows, |r| column[r] <= split.threshold);
        let (left_rows, right_rows) = rows.split_at_mut(mid);
        let left = self.grow(left_rows, depth + 1, stream);
        let right = self.grow(right_rows, depth + 1, stream);
        self.nodes[id] = TreeNode::Internal {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
            weight,
            impurity_decrease: split.impurity_decrease,
        };
        id
    }
}

/// Stable in-place partition; returns the number of rows satisfying `pred`.
pub(crate) fn partition(rows: &mut [usize], pred: impl Fn(usize) -> bool) -> usize {
    let (mut yes, no): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&r| pred(r));
    let mid = yes.len();
    yes.extend(no);
    rows.copy_from_slice(&yes);
    mid
}

#[cfg(test)]
mod tests {
    use super::*;

    fn separable() -> (Dataset, Vec<bool>) {
        let xs: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let labels = xs.iter().map(|&x| x >= 20.0).collect();
        (Dataset::from_columns(vec![xs]).unwrap(), labels)
    }

    #[test]
    fn separable_data_is_learned() {
        let (data, labels) = separable();
        let params = ForestParams { n_trees: 50, ..Default::default() };
        let model = train_forest(&data, &labels, &params, 11).unwrap();
        let correct = (0..data.n_rows())
            .filter(|&i| (model.score(&[data.value(i, 0)]) >= 0.5) == labels[i])
            .count();
        assert_eq!(correct, data.n_rows());
    }

    #[test]
    fn same_seed_same_model() {
        let (data, labels) = separable();
        let params = ForestParams { n_trees: 10, ..Default::default() };
        let a = train_forest(&data, &labels, &params, 5).unwrap();
        let b = train_forest(&data, &labels, &params, 5).unwrap();
        assert_eq!(a, b);
        let c = train_forest(&data, &labels, &params, 6).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn single_class_is_degenerate() {
        let data = Dataset::from_columns(vec![vec![1.0, 2.0, 3.0]]).unwrap();
        let m = train_forest(&data, &[true, true, true], &ForestParams::default(), 0).unwrap();
        assert!(m.degenerate);
        assert_eq!(m.score(&[0.0]), 1.0);
    }

    #[test]
    fn respects_depth_and_leaf_limits() {
        let xs: Vec<f64> = (0..64).map(|i| ((i * 37) % 64) as f64).collect();
        let labels: Vec<bool> = (0..64).map(|i| i % 3 == 0).collect();
        let data = Dataset::from_columns(vec![xs]).unwrap();
        let params = ForestParams { n_trees: 5, max_depth: 3, min_samples_leaf: 4, ..Default::default() };
        let m = train_forest(&data, &labels, &params, 2).unwrap();
        for t in &m.trees {
            assert!(t.depth() <= 3);
            for n in &t.nodes {
                match n {
                    TreeNode::Leaf { weight, .. } => assert!(*weight >= 4.0),
                    TreeNode::Internal { impurity_decrease, .. } => assert!(*impurity_decrease >= 0.0),
                }
            }
        }
    }

    #[test]
    fn mtry_default_is_ceil_sqrt() {
        let p = ForestParams::default();
        assert_eq!(p.mtry(64), 8);
        assert_eq!(p.mtry(10), 4);
        assert_eq!(p.mtry(1), 1);
    }
}
