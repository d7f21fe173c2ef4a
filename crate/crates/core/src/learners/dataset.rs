use crate::data::EmbeddingSample;
use crate::error::{Error, Result};

/// Column-major feature matrix.
///
/// `feature_map[j]` is the original embedding dimension of column `j`;
/// subsets built with [`Dataset::select`] keep the mapping.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    columns: Vec<Vec<f64>>,
    feature_map: Vec<usize>,
    n_rows: usize,
}

impl Dataset {
    pub fn from_columns(columns: Vec<Vec<f64>>) -> Result<Self> {
        let n_rows = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != n_rows) {
            return Err(Error::invalid("ragged feature columns"));
        }
        if columns.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite feature value"));
        }
        let feature_map = (0..columns.len()).collect();
        Ok(Dataset { columns, feature_map, n_rows })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let width = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::invalid("ragged feature rows"));
        }
        let columns = (0..width).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
        Self::from_columns(columns)
    }

    /// Features of `samples` plus one-vs-rest labels for `target`.
    pub fn from_samples(samples: &[EmbeddingSample], target: crate::LandCoverClass) -> (Self, Vec<bool>) {
        let columns = (0..crate::N_DIMS)
            .map(|j| samples.iter().map(|s| s.features[j]).collect())
            .collect();
        let labels = samples.iter().map(|s| s.label == target).collect();
        let data = Dataset {
            columns,
            feature_map: (0..crate::N_DIMS).collect(),
            n_rows: samples.len(),
        };
        (data, labels)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn value(&self, row: usize, feature: usize) -> f64 {
        self.columns[feature][row]
    }

    pub fn feature_map(&self) -> &[usize] {
        &self.feature_map
    }

    pub fn fill_row(&self, row: usize, out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(&self.columns) {
            *o = c[row];
        }
    }

    /// Columns `features` (local indices), in the given order.
    pub fn select(&self, features: &[usize]) -> Dataset {
        Dataset {
            columns: features.iter().map(|&j| self.columns[j].clone()).collect(),
            feature_map: features.iter().map(|&j| self.feature_map[j]).collect(),
            n_rows: self.n_rows,
        }
    }

    /// Rows `rows`, in the given order.
    pub fn take_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            columns: self
                .columns
                .iter()
                .map(|c| rows.iter().map(|&i| c[i]).collect())
                .collect(),
            feature_map: self.feature_map.clone(),
            n_rows: rows.len(),
        }
    }

    /// Reorder columns; used by tests checking relabeling symmetry.
    pub fn permute_columns(&self, perm: &[usize]) -> Dataset {
        let mut out = self.select(perm);
        out.feature_map = (0..perm.len()).collect();
        out
    }
}
