//! Exhaustive hyperparameter search for the forest with k-fold CV.

use alloc::vec;
use alloc::vec::Vec;

use super::config::{Criterion, ForestConfig, MaxFeatures};
use super::forest::train_forest;
use crate::error::{Error, Result};
use crate::eval::{fold_split, kfold, mean_std, metrics};
use crate::features::SparseRow;

#[derive(Debug, Clone, PartialEq)]
pub struct ForestGrid {
    pub criterion: Vec<Criterion>,
    pub max_depth: Vec<usize>,
    pub max_features: Vec<MaxFeatures>,
    pub n_estimators: Vec<usize>,
}

impl Default for ForestGrid {
    /// Brackets the per-category defaults.
    fn default() -> Self {
        ForestGrid {
            criterion: vec![Criterion::Gini],
            max_depth: vec![7, 8],
            max_features: vec![MaxFeatures::Log2, MaxFeatures::Sqrt],
            n_estimators: vec![200, 800, 1000],
        }
    }
}

impl ForestGrid {
    pub fn single(cfg: &ForestConfig) -> Self {
        ForestGrid {
            criterion: vec![cfg.criterion],
            max_depth: vec![cfg.max_depth],
            max_features: vec![cfg.max_features],
            n_estimators: vec![cfg.n_estimators],
        }
    }

    pub fn len(&self) -> usize {
        self.criterion.len() * self.max_depth.len() * self.max_features.len() * self.n_estimators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every combination, criterion varying slowest and tree count fastest.
    pub fn combinations(&self, seed: u64) -> Vec<ForestConfig> {
        let mut out = Vec::with_capacity(self.len());
        for &criterion in &self.criterion {
            for &max_depth in &self.max_depth {
                for &max_features in &self.max_features {
                    for &n_estimators in &self.n_estimators {
                        out.push(ForestConfig {
                            criterion,
                            max_depth,
                            max_features,
                            n_estimators,
                            seed,
                        });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub config: ForestConfig,
    pub fold_accuracy: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub best: ForestConfig,
    pub table: Vec<GridRow>,
}

/// Checks the fold count against the data and returns the folds.
pub fn cv_folds(labels: &[bool], folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    let pos = labels.iter().filter(|&&y| y).count();
    let smallest = pos.min(labels.len() - pos);
    if folds > smallest {
        return Err(Error::InvalidArgument(alloc::format!("{folds} folds but the smallest class has {smallest} examples")));
    }
    let ids: Vec<usize> = (0..labels.len()).collect();
    kfold(&ids, folds, seed)
}

/// Accuracy of `cfg` on each fold.
pub fn cv_accuracy(rows: &[SparseRow], labels: &[bool], n_features: usize, cfg: &ForestConfig, folds: &[Vec<usize>]) -> Result<Vec<f64>> {
    (0..folds.len())
        .map(|f| fold_accuracy(rows, labels, n_features, cfg, folds, f))
        .collect()
}

pub fn fold_accuracy(rows: &[SparseRow], labels: &[bool], n_features: usize, cfg: &ForestConfig, folds: &[Vec<usize>], f: usize) -> Result<f64> {
    let (train, test) = fold_split(folds, f);
    let tr_rows: Vec<SparseRow> = train.iter().map(|&i| rows[i].clone()).collect();
    let tr_y: Vec<bool> = train.iter().map(|&i| labels[i]).collect();
    let forest = train_forest(&tr_rows, &tr_y, n_features, cfg)?;
    let pred: Vec<bool> = test.iter().map(|&i| forest.predict_proba(&rows[i]) > 0.5).collect();
    let truth: Vec<bool> = test.iter().map(|&i| labels[i]).collect();
    Ok(metrics(&truth, &pred)?.accuracy)
}

/// Highest mean accuracy wins; the earliest row wins ties.
pub fn select_best(table: &[GridRow]) -> Result<ForestConfig> {
    let mut best: Option<&GridRow> = None;
    for row in table {
        if best.map_or(true, |b| row.mean > b.mean) {
            best = Some(row);
        }
    }
    best.map(|r| r.config).ok_or(Error::Empty("grid"))
}

pub fn grid_row(config: ForestConfig, fold_accuracy: Vec<f64>) -> Result<GridRow> {
    let (mean, std) = mean_std(&fold_accuracy)?;
    Ok(GridRow {
        config,
        fold_accuracy,
        mean,
        std,
    })
}

pub fn grid_search(rows: &[SparseRow], labels: &[bool], n_features: usize, grid: &ForestGrid, folds: usize, seed: u64) -> Result<GridResult> {
    if grid.is_empty() {
        return Err(Error::InvalidConfig("empty hyperparameter grid".into()));
    }
    if folds < 2 {
        return Err(Error::InvalidArgument("grid search needs at least 2 folds".into()));
    }
    if rows.len() != labels.len() {
        return Err(Error::shape("grid_search", alloc::format!("{} labels", rows.len()), alloc::format!("{}", labels.len())));
    }
    let parts = cv_folds(labels, folds, seed)?;
    let table = grid
        .combinations(seed)
        .into_iter()
        .map(|cfg| grid_row(cfg, cv_accuracy(rows, labels, n_features, &cfg, &parts)?))
        .collect::<Result<Vec<_>>>()?;
    Ok(GridResult {
        best: select_best(&table)?,
        table,
    })
}
