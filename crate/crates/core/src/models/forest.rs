//! Bagged random forest with soft voting.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use super::config::ForestConfig;
use super::tree::{train_tree_weighted, DecisionTree, TreeData};
use crate::error::{Error, Result};
use crate::features::SparseRow;
use crate::rng::{derive_named, derive_seed, rng_from_seed};

#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    trees: Vec<DecisionTree>,
    n_features: usize,
}

impl Forest {
    pub fn from_trees(trees: Vec<DecisionTree>) -> Result<Self> {
        let n_features = trees.first().ok_or(Error::Empty("forest"))?.n_features();
        if trees.iter().any(|t| t.n_features() != n_features) {
            return Err(Error::FeatureMismatch("trees disagree on feature count".into()));
        }
        Ok(Forest { trees, n_features })
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Mean of the per-tree positive-class probabilities.
    pub fn predict_proba(&self, row: &SparseRow) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict_proba(row)).sum();
        sum / self.trees.len() as f64
    }
}

/// Bootstrap draw counts for tree `index`: `n` draws with replacement.
pub fn bootstrap_weights(n: usize, master_seed: u64, index: usize) -> Vec<f64> {
    let mut rng = rng_from_seed(derive_seed(master_seed, index as u64));
    let mut w = vec![0.0; n];
    for _ in 0..n {
        w[rng.gen_range(0..n)] += 1.0;
    }
    w
}

/// Trains ensemble member `index`. Depends only on the master seed and the
/// index, so members can be trained in any order or in parallel.
pub fn train_bagged_tree(data: &TreeData<'_>, cfg: &ForestConfig, index: usize) -> Result<DecisionTree> {
    let weights = bootstrap_weights(data.len(), cfg.seed, index);
    let split_seed = derive_named(derive_seed(cfg.seed, index as u64), "splits");
    train_tree_weighted(data, &weights, cfg, split_seed)
}

pub fn train_forest(rows: &[SparseRow], labels: &[bool], n_features: usize, cfg: &ForestConfig) -> Result<Forest> {
    cfg.validate()?;
    let data = TreeData::new(rows, labels, n_features)?;
    let trees = (0..cfg.n_estimators)
        .map(|i| train_bagged_tree(&data, cfg, i))
        .collect::<Result<Vec<_>>>()?;
    Forest::from_trees(trees)
}
