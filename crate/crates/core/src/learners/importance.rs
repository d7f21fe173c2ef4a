//! Mean decrease in impurity.

use serde::{Deserialize, Serialize};

use super::tree::{Tree, TreeNode};
use super::Model;
use crate::data::{DimensionId, N_DIMS};

/// Normalized MDI per embedding dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ImportanceVector {
    pub values: Vec<f64>,
}

impl ImportanceVector {
    pub fn zeros() -> Self {
        ImportanceVector { values: vec![0.0; N_DIMS] }
    }

    pub fn get(&self, dim: DimensionId) -> f64 {
        self.values[dim.index()]
    }

    /// Dimensions by descending importance, ties by lower index.
    pub fn ranking(&self) -> Vec<DimensionId> {
        let mut dims: Vec<DimensionId> = DimensionId::all().collect();
        dims.sort_by(|a, b| {
            self.values[b.index()]
                .total_cmp(&self.values[a.index()])
                .then(a.cmp(b))
        });
        dims
    }
}

/// Per-tree sum of `(node weight / root weight) * impurity decrease`,
/// averaged over trees and normalized to sum to one.
pub(crate) fn local_importances(trees: &[Tree], n_features: usize) -> Vec<f64> {
    let mut totals = vec![0.0; n_features];
    if trees.is_empty() {
        return totals;
    }
    for tree in trees {
        let root = tree.root_weight();
        if root <= 0.0 {
            continue;
        }
        for node in &tree.nodes {
            if let TreeNode::Internal { feature, weight, impurity_decrease, .. } = node {
                totals[*feature] += weight / root * impurity_decrease;
            }
        }
    }
    let n_trees = trees.len() as f64;
    totals.iter_mut().for_each(|v| *v /= n_trees);
    let sum: f64 = totals.iter().sum();
    if sum > 0.0 {
        totals.iter_mut().for_each(|v| *v /= sum);
    }
    totals
}

/// MDI importance mapped onto the 64 embedding dimensions through the
/// model's feature map. Dimensions the model never saw get zero.
pub fn mdi_importance(model: &Model) -> ImportanceVector {
    let local = model.feature_importances();
    let mut out = ImportanceVector::zeros();
    for (j, &v) in local.iter().enumerate() {
        let dim = model.feature_map().get(j).copied().unwrap_or(j);
        if dim < N_DIMS {
            out.values[dim] += v;
        }
    }
    out
}
