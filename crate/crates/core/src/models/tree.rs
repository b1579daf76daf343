//! CART classification trees on sparse rows, split by Gini impurity.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use super::config::ForestConfig;
use crate::error::{Error, Result};
use crate::features::SparseRow;
use crate::rng::{rng_from_seed, Rng};

/// `1 - Σ (n_k / n)²`.
pub fn gini_impurity(counts: &[f64]) -> Result<f64> {
    let total: f64 = counts.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidArgument("gini impurity of an empty node".into()));
    }
    Ok(1.0 - counts.iter().map(|c| (c / total) * (c / total)).sum::<f64>())
}

/// Binary-class shorthand for [`gini_impurity`].
fn gini2(pos: f64, neg: f64) -> f64 {
    let n = pos + neg;
    if n <= 0.0 {
        return 0.0;
    }
    let (p, q) = (pos / n, neg / n);
    1.0 - p * p - q * q
}

/// Training rows in sparse form with column posting lists.
#[derive(Debug, Clone)]
pub struct TreeData<'a> {
    pub rows: &'a [SparseRow],
    pub labels: &'a [bool],
    pub n_features: usize,
    columns: Vec<Vec<(u32, f64)>>,
}

impl<'a> TreeData<'a> {
    pub fn new(rows: &'a [SparseRow], labels: &'a [bool], n_features: usize) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Empty("tree training data"));
        }
        if rows.len() != labels.len() {
            return Err(Error::shape("tree training data", alloc::format!("{} labels", rows.len()), alloc::format!("{}", labels.len())));
        }
        let mut columns = vec![Vec::new(); n_features];
        for (r, row) in rows.iter().enumerate() {
            for &(c, v) in row {
                let col = columns
                    .get_mut(c as usize)
                    .ok_or_else(|| Error::FeatureMismatch(alloc::format!("column {c} outside {n_features} features")))?;
                if v != 0.0 {
                    col.push((r as u32, v));
                }
            }
        }
        Ok(TreeData {
            rows,
            labels,
            n_features,
            columns,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Flat node: `feature < 0` marks a leaf. Rows with `value <= threshold`
/// go left.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeNode {
    pub feature: i64,
    pub threshold: f64,
    pub left: u32,
    pub right: u32,
    /// Positive-class fraction of the training rows that reached the node.
    pub value: f64,
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        self.feature < 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    nodes: Vec<TreeNode>,
    n_features: usize,
}

fn lookup(row: &SparseRow, feature: u32) -> f64 {
    row.binary_search_by_key(&feature, |(c, _)| *c).map(|i| row[i].1).unwrap_or(0.0)
}

impl DecisionTree {
    pub fn from_nodes(nodes: Vec<TreeNode>, n_features: usize) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::InvalidArgument("a tree needs at least one node".into()));
        }
        for n in &nodes {
            if !n.is_leaf() && (n.feature as usize >= n_features || n.left as usize >= nodes.len() || n.right as usize >= nodes.len()) {
                return Err(Error::InvalidArgument("tree node points outside the tree".into()));
            }
        }
        Ok(DecisionTree { nodes, n_features })
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn predict_proba(&self, row: &SparseRow) -> f64 {
        let mut i = 0usize;
        loop {
            let n = &self.nodes[i];
            if n.is_leaf() {
                return n.value;
            }
            i = if lookup(row, n.feature as u32) <= n.threshold { n.left } else { n.right } as usize;
        }
    }

    /// Edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn go(nodes: &[TreeNode], i: usize) -> usize {
            let n = &nodes[i];
            if n.is_leaf() {
                0
            } else {
                1 + go(nodes, n.left as usize).max(go(nodes, n.right as usize))
            }
        }
        go(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }
}

struct Split {
    feature: u32,
    threshold: f64,
    improvement: f64,
}

struct Builder<'d, 'a> {
    data: &'d TreeData<'a>,
    max_depth: usize,
    max_features: usize,
    rng: Rng,
    perm: Vec<u32>,
    /// `stamp[row] == current` marks membership of the node being split.
    stamp: Vec<u32>,
    current: u32,
    nodes: Vec<TreeNode>,
}

impl Builder<'_, '_> {
    fn totals(&self, members: &[(u32, f64)]) -> (f64, f64) {
        members.iter().fold((0.0, 0.0), |(p, n), &(r, w)| {
            if self.data.labels[r as usize] {
                (p + w, n)
            } else {
                (p, n + w)
            }
        })
    }

    /// Best threshold on one feature, `None` if the feature is constant
    /// within the node.
    fn best_threshold(&self, feature: u32, pos: f64, neg: f64, weights: &[f64]) -> Option<Split> {
        // (value, positive weight, negative weight)
        let mut vals: Vec<(f64, f64, f64)> = Vec::new();
        let (mut nz_pos, mut nz_neg) = (0.0, 0.0);
        for &(r, v) in &self.data.columns[feature as usize] {
            if self.stamp[r as usize] != self.current {
                continue;
            }
            let w = weights[r as usize];
            if self.data.labels[r as usize] {
                vals.push((v, w, 0.0));
                nz_pos += w;
            } else {
                vals.push((v, 0.0, w));
                nz_neg += w;
            }
        }
        let (zero_pos, zero_neg) = (pos - nz_pos, neg - nz_neg);
        if zero_pos + zero_neg > 1e-12 {
            vals.push((0.0, zero_pos, zero_neg));
        }
        vals.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64, f64)> = Vec::with_capacity(vals.len());
        for (v, p, n) in vals {
            match merged.last_mut() {
                Some(last) if last.0 == v => {
                    last.1 += p;
                    last.2 += n;
                }
                _ => merged.push((v, p, n)),
            }
        }
        if merged.len() < 2 {
            return None;
        }
        let total = pos + neg;
        let parent = gini2(pos, neg);
        let (mut lp, mut ln) = (0.0, 0.0);
        let mut best: Option<Split> = None;
        for w in merged.windows(2) {
            lp += w[0].1;
            ln += w[0].2;
            let (rp, rn) = (pos - lp, neg - ln);
            let child = ((lp + ln) * gini2(lp, ln) + (rp + rn) * gini2(rp, rn)) / total;
            let improvement = parent - child;
            if best.as_ref().map_or(true, |b| improvement > b.improvement) {
                best = Some(Split {
                    feature,
                    threshold: 0.5 * (w[0].0 + w[1].0),
                    improvement,
                });
            }
        }
        best
    }

    fn choose_split(&mut self, members: &[(u32, f64)], pos: f64, neg: f64, weights: &[f64]) -> Option<Split> {
        self.current += 1;
        for &(r, _) in members {
            self.stamp[r as usize] = self.current;
        }
        let n = self.perm.len();
        let mut informative = 0;
        let mut best: Option<Split> = None;
        // lazy Fisher-Yates: constant features do not count towards the budget
        for i in 0..n {
            let j = self.rng.gen_range(i..n);
            self.perm.swap(i, j);
            let f = self.perm[i];
            if let Some(s) = self.best_threshold(f, pos, neg, weights) {
                informative += 1;
                if best.as_ref().map_or(true, |b| s.improvement > b.improvement) {
                    best = Some(s);
                }
                if informative >= self.max_features {
                    break;
                }
            }
        }
        best
    }

    fn grow(&mut self, members: Vec<(u32, f64)>, depth: usize, weights: &[f64]) -> u32 {
        let (pos, neg) = self.totals(&members);
        let id = self.nodes.len() as u32;
        self.nodes.push(TreeNode {
            feature: -1,
            threshold: 0.0,
            left: 0,
            right: 0,
            value: pos / (pos + neg),
        });
        let pure = pos <= 0.0 || neg <= 0.0;
        if pure || depth >= self.max_depth || pos + neg < 2.0 {
            return id;
        }
        let Some(split) = self.choose_split(&members, pos, neg, weights) else {
            return id;
        };
        let (left, right): (Vec<_>, Vec<_>) = members
            .into_iter()
            .partition(|&(r, _)| lookup(&self.data.rows[r as usize], split.feature) <= split.threshold);
        let l = self.grow(left, depth + 1, weights);
        let r = self.grow(right, depth + 1, weights);
        let node = &mut self.nodes[id as usize];
        node.feature = i64::from(split.feature);
        node.threshold = split.threshold;
        node.left = l;
        node.right = r;
        id
    }
}

/// Grows one tree on weighted rows. A row's weight is the number of times
/// it was drawn; rows with weight 0 are absent.
pub fn train_tree_weighted(data: &TreeData<'_>, weights: &[f64], cfg: &ForestConfig, seed: u64) -> Result<DecisionTree> {
    cfg.validate()?;
    if weights.len() != data.len() {
        return Err(Error::shape("train_tree", alloc::format!("{} weights", data.len()), alloc::format!("{}", weights.len())));
    }
    let members: Vec<(u32, f64)> = weights
        .iter()
        .enumerate()
        .filter(|(_, w)| **w > 0.0)
        .map(|(r, w)| (r as u32, *w))
        .collect();
    if members.is_empty() {
        return Err(Error::Empty("tree training sample"));
    }
    let mut b = Builder {
        data,
        max_depth: cfg.max_depth,
        max_features: cfg.max_features.resolve(data.n_features),
        rng: rng_from_seed(seed),
        perm: (0..data.n_features as u32).collect(),
        stamp: vec![0; data.len()],
        current: 0,
        nodes: Vec::new(),
    };
    b.grow(members, 0, weights);
    DecisionTree::from_nodes(b.nodes, data.n_features)
}

/// Grows one tree on every row with unit weight. `feature_subset_seed`
/// drives the per-split feature sampling.
pub fn train_tree(rows: &[SparseRow], labels: &[bool], n_features: usize, cfg: &ForestConfig, feature_subset_seed: u64) -> Result<DecisionTree> {
    let data = TreeData::new(rows, labels, n_features)?;
    train_tree_weighted(&data, &vec![1.0; rows.len()], cfg, feature_subset_seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::config::MaxFeatures;

    fn cfg(depth: usize, mf: MaxFeatures) -> ForestConfig {
        ForestConfig {
            max_depth: depth,
            max_features: mf,
            n_estimators: 1,
            ..ForestConfig::default()
        }
    }

    #[test]
    fn gini_examples() {
        assert_eq!(gini_impurity(&[4.0, 0.0]).unwrap(), 0.0);
        assert_eq!(gini_impurity(&[2.0, 2.0]).unwrap(), 0.5);
        assert_eq!(gini_impurity(&[3.0, 1.0]).unwrap(), 0.375);
        assert!(gini_impurity(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn separating_feature_gives_stump() {
        // feature 0 only in positives, feature 1 only in negatives
        let rows: Vec<SparseRow> = (0..20).map(|i| if i % 2 == 0 { vec![(0, 1.0)] } else { vec![(1, 1.0)] }).collect();
        let labels: Vec<bool> = (0..20).map(|i| i % 2 == 0).collect();
        let t = train_tree(&rows, &labels, 2, &cfg(7, MaxFeatures::All), 1).unwrap();
        assert_eq!(t.depth(), 1);
        for (r, y) in rows.iter().zip(&labels) {
            assert_eq!(t.predict_proba(r) > 0.5, *y);
        }
    }

    #[test]
    fn single_class_is_one_leaf() {
        let rows: Vec<SparseRow> = (0..5).map(|i| vec![(0, i as f64)]).collect();
        let t = train_tree(&rows, &[true; 5], 1, &cfg(7, MaxFeatures::All), 0).unwrap();
        assert_eq!(t.nodes().len(), 1);
        assert_eq!(t.predict_proba(&vec![]), 1.0);
    }

    #[test]
    fn empty_data_is_an_error() {
        assert!(train_tree(&[], &[], 3, &cfg(3, MaxFeatures::All), 0).is_err());
    }

    #[test]
    fn midpoint_threshold() {
        let rows: Vec<SparseRow> = vec![vec![(0, 0.2)], vec![(0, 0.4)], vec![(0, 0.8)], vec![(0, 1.0)]];
        let t = train_tree(&rows, &[false, false, true, true], 1, &cfg(3, MaxFeatures::All), 0).unwrap();
        assert_eq!(t.nodes()[0].threshold, 0.6000000000000001);
    }

    #[test]
    fn depth_is_bounded_and_pure_nodes_unsplit() {
        // labels depend on a fine threshold so deep trees would help
        let rows: Vec<SparseRow> = (0..64).map(|i| vec![(0, i as f64), (1, ((i * 7) % 13) as f64)]).collect();
        let labels: Vec<bool> = (0..64).map(|i| (i / 3) % 2 == 0).collect();
        for depth in 1..6 {
            let t = train_tree(&rows, &labels, 2, &cfg(depth, MaxFeatures::All), 3).unwrap();
            assert!(t.depth() <= depth);
            let data = TreeData::new(&rows, &labels, 2).unwrap();
            // every internal node must have had both classes
            for n in t.nodes().iter().filter(|n| !n.is_leaf()) {
                assert!(n.value > 0.0 && n.value < 1.0);
            }
            assert_eq!(data.len(), 64);
        }
    }
}
