//! Tree-ensemble learners for one-vs-rest classification.
//!
//! Random forests grow Gini trees on bootstrap resamples. Gradient boosting
//! fits variance-criterion regression trees to logistic-loss residuals, with
//! an exact (presorted) or a 64-bin histogram split finder. Every model
//! reports mean-decrease-in-impurity importances.

mod dataset;
mod forest;
mod gbt;
mod importance;
mod split;
mod tree;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use dataset::Dataset;
pub use forest::{train_forest, ForestModel, ForestParams};
pub use gbt::{train_gbt, GbtModel, GbtParams, SplitMode};
pub use importance::{mdi_importance, ImportanceVector};
pub use split::{best_split, gini_impurity, Criterion, Split};
pub use tree::{Tree, TreeNode};

use crate::error::{Error, Result};

/// The four learner families an experiment draws from.
///
/// The three boosting flavours share one implementation: the
/// scikit-learn-like and XGBoost-like variants use exact split search, the
/// LightGBM-like variant uses histogram split search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    RandomForest,
    GbtSklearnLike,
    GbtXgboostLike,
    GbtLightgbmLike,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::RandomForest,
        Algorithm::GbtSklearnLike,
        Algorithm::GbtXgboostLike,
        Algorithm::GbtLightgbmLike,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::RandomForest => "random_forest",
            Algorithm::GbtSklearnLike => "gbt_sklearn_like",
            Algorithm::GbtXgboostLike => "gbt_xgboost_like",
            Algorithm::GbtLightgbmLike => "gbt_lightgbm_like",
        }
    }

    pub fn split_mode(self) -> Option<SplitMode> {
        match self {
            Algorithm::RandomForest => None,
            Algorithm::GbtSklearnLike | Algorithm::GbtXgboostLike => Some(SplitMode::Exact),
            Algorithm::GbtLightgbmLike => Some(SplitMode::Histogram),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .iter()
            .copied()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown algorithm {s:?}")))
    }
}

/// Hyperparameters for every learner family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerSettings {
    pub forest: ForestParams,
    pub gbt: GbtParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    Forest(ForestModel),
    Gbt(GbtModel),
}

impl Model {
    pub fn n_features(&self) -> usize {
        match self {
            Model::Forest(m) => m.n_features,
            Model::Gbt(m) => m.n_features,
        }
    }

    pub fn feature_map(&self) -> &[usize] {
        match self {
            Model::Forest(m) => &m.feature_map,
            Model::Gbt(m) => &m.feature_map,
        }
    }

    /// True when training saw a single class and fell back to a constant.
    pub fn is_degenerate(&self) -> bool {
        match self {
            Model::Forest(m) => m.degenerate,
            Model::Gbt(m) => m.degenerate,
        }
    }

    pub fn trees(&self) -> &[Tree] {
        match self {
            Model::Forest(m) => &m.trees,
            Model::Gbt(m) => &m.trees,
        }
    }

    fn score_local(&self, row: &[f64]) -> f64 {
        match self {
            Model::Forest(m) => m.score(row),
            Model::Gbt(m) => m.score(row),
        }
    }

    /// Positive-class score in `[0, 1]`.
    ///
    /// `features` is either the model's own column layout or, for a model
    /// trained on a dimension subset, a full 64-vector that is gathered
    /// through the model's feature map.
    pub fn predict(&self, features: &[f64]) -> Result<f64> {
        let n = self.n_features();
        if features.len() == n {
            return Ok(self.score_local(features));
        }
        let map = self.feature_map();
        if features.len() == crate::N_DIMS && map.len() == n && map.iter().all(|&d| d < features.len()) {
            let row: Vec<f64> = map.iter().map(|&d| features[d]).collect();
            return Ok(self.score_local(&row));
        }
        Err(Error::invalid(format!(
            "model expects {n} features, got {}",
            features.len()
        )))
    }

    pub fn predict_dataset(&self, data: &Dataset) -> Vec<f64> {
        let mut row = vec![0.0; data.n_features()];
        (0..data.n_rows())
            .map(|i| {
                data.fill_row(i, &mut row);
                self.score_local(&row)
            })
            .collect()
    }

    /// Normalized MDI over the model's own columns.
    pub fn feature_importances(&self) -> Vec<f64> {
        importance::local_importances(self.trees(), self.n_features())
    }
}

/// Train the learner family `algorithm` on `data` with binary `labels`.
pub fn train(
    algorithm: Algorithm,
    settings: &LearnerSettings,
    data: &Dataset,
    labels: &[bool],
    seed: u64,
) -> Result<Model> {
    match algorithm.split_mode() {
        None => train_forest(data, labels, &settings.forest, seed).map(Model::Forest),
        Some(mode) => train_gbt(data, labels, &settings.gbt, mode, seed).map(Model::Gbt),
    }
}
