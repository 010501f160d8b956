//! Random forests of CART classification trees.
//!
//! Trees split on `x[feature] <= threshold` (left) and maximise the decrease
//! in class-weighted Gini impurity. Thresholds are midpoints between
//! consecutive values observed at the node, so one-hot columns split at 0.5.
//! Each tree draws its bootstrap resample and per-node feature subsets from
//! `ChaCha8(mix(seed, tree_index))`; fitting in parallel gives the same forest
//! as fitting sequentially.

mod json;
mod tree;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::EncodedMatrix;
use crate::error::{Error, Result};

pub use json::{forest_from_json, forest_from_value, forest_to_json, forest_to_value, round9};
pub use tree::{Node, Tree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    /// `floor(sqrt(d))` columns per node, at least one.
    Sqrt,
    All,
}

impl MaxFeatures {
    pub fn count(self, n_features: usize) -> usize {
        match self {
            MaxFeatures::Sqrt => ((n_features as f64).sqrt().floor() as usize).max(1),
            MaxFeatures::All => n_features,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassWeighting {
    None,
    Balanced,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_features: MaxFeatures,
    pub min_samples_split: usize,
    pub max_depth: Option<usize>,
    pub bootstrap: bool,
    pub class_weighting: ClassWeighting,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_features: MaxFeatures::Sqrt,
            min_samples_split: 2,
            max_depth: None,
            bootstrap: true,
            class_weighting: ClassWeighting::Balanced,
            seed: 0,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidConfig("forest.n_trees must be at least 1".into()));
        }
        if self.min_samples_split < 2 {
            return Err(Error::InvalidConfig(
                "forest.min_samples_split must be at least 2".into(),
            ));
        }
        Ok(())
    }

    /// A single deterministic tree on the full data; useful for tests.
    pub fn single_tree() -> Self {
        ForestParams {
            n_trees: 1,
            max_features: MaxFeatures::All,
            bootstrap: false,
            class_weighting: ClassWeighting::None,
            ..Self::default()
        }
    }
}

/// `N / (K * N_k)` for every class present in `labels`.
pub fn balanced_weights(labels: &[u32]) -> BTreeMap<u32, f64> {
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    for &l in labels {
        *counts.entry(l).or_default() += 1;
    }
    let n = labels.len() as f64;
    let k = counts.len() as f64;
    counts
        .into_iter()
        .map(|(class, count)| (class, n / (k * count as f64)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    classes: Vec<u32>,
    n_features: usize,
    trees: Vec<Tree>,
    params: ForestParams,
}

impl Forest {
    pub fn fit(matrix: &EncodedMatrix, params: &ForestParams) -> Result<Self> {
        params.validate()?;
        if matrix.n_rows() == 0 {
            return Err(Error::EmptyDataset);
        }
        let mut classes = matrix.labels.clone();
        classes.sort_unstable();
        classes.dedup();
        let targets: Vec<usize> = matrix
            .labels
            .iter()
            .map(|l| classes.binary_search(l).expect("label in class list"))
            .collect();
        let class_weights: Vec<f64> = match params.class_weighting {
            ClassWeighting::None => vec![1.0; classes.len()],
            ClassWeighting::Balanced => {
                let w = balanced_weights(&matrix.labels);
                classes.iter().map(|c| w[c]).collect()
            }
        };
        let binned = tree::BinnedMatrix::new(matrix);
        let trees = (0..params.n_trees)
            .into_par_iter()
            .map(|t| tree::grow(&binned, &targets, classes.len(), &class_weights, params, t))
            .collect();
        Ok(Forest {
            classes,
            n_features: matrix.n_cols,
            trees,
            params: *params,
        })
    }

    pub(crate) fn from_parts(
        classes: Vec<u32>,
        n_features: usize,
        trees: Vec<Tree>,
        params: ForestParams,
    ) -> Self {
        Forest {
            classes,
            n_features,
            trees,
            params,
        }
    }

    pub fn classes(&self) -> &[u32] {
        &self.classes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn params(&self) -> &ForestParams {
        &self.params
    }

    /// True when every tree is a single leaf predicting one class.
    pub fn is_constant(&self) -> bool {
        self.classes.len() == 1
    }

    /// Mean of the per-tree leaf distributions, indexed like [`classes`](Self::classes).
    pub fn predict_proba(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: row.len(),
            });
        }
        let mut acc = vec![0.0; self.classes.len()];
        for tree in &self.trees {
            for (a, p) in acc.iter_mut().zip(tree.leaf(row)) {
                *a += p;
            }
        }
        let n = self.trees.len() as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        Ok(acc)
    }

    /// Most probable class; ties go to the smaller label.
    pub fn predict(&self, row: &[f64]) -> Result<u32> {
        let proba = self.predict_proba(row)?;
        Ok(self.classes[argmax(&proba)])
    }

    pub fn predict_matrix(&self, matrix: &EncodedMatrix) -> Result<Vec<u32>> {
        matrix.rows().map(|r| self.predict(r)).collect()
    }
}

/// Index of the first maximum.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
