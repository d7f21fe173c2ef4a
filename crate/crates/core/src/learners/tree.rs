use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    Internal {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        /// Number of (possibly duplicated) training rows reaching the node.
        weight: f64,
        impurity_decrease: f64,
    },
    Leaf {
        value: f64,
        weight: f64,
    },
}

impl TreeNode {
    pub fn weight(&self) -> f64 {
        match self {
            TreeNode::Internal { weight, .. } | TreeNode::Leaf { weight, .. } => *weight,
        }
    }
}

/// Binary tree stored as an arena; the root is node 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn leaf(value: f64, weight: f64) -> Self {
        Tree { nodes: vec![TreeNode::Leaf { value, weight }] }
    }

    #[inline]
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Internal { feature, threshold, left, right, .. } => {
                    i = if row[*feature] <= *threshold { *left } else { *right };
                }
                TreeNode::Leaf { value, .. } => return *value,
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], i: usize) -> usize {
            match &nodes[i] {
                TreeNode::Internal { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
                TreeNode::Leaf { .. } => 0,
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn root_weight(&self) -> f64 {
        self.nodes[0].weight()
    }

    pub fn internal_nodes(&self) -> impl Iterator<Item = &TreeNode> {
        self.nodes.iter().filter(|n| matches!(n, TreeNode::Internal { .. }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn stump(feature: usize, threshold: f64, lo: f64, hi: f64) -> Tree {
        Tree {
            nodes: vec![
                TreeNode::Internal { feature, threshold, left: 1, right: 2, weight: 4.0, impurity_decrease: 0.5 },
                TreeNode::Leaf { value: lo, weight: 2.0 },
                TreeNode::Leaf { value: hi, weight: 2.0 },
            ],
        }
    }

    #[test]
    fn routes_by_threshold() {
        let t = stump(1, 0.5, 0.1, 0.9);
        assert_eq!(t.predict(&[9.0, 0.5]), 0.1);
        assert_eq!(t.predict(&[9.0, 0.6]), 0.9);
        assert_eq!(t.depth(), 1);
        assert_eq!(Tree::leaf(0.7, 3.0).depth(), 0);
    }
}
