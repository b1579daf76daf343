//! Train/test splits and k-fold partitions.

use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, PartialEq)]
pub struct SplitPlan<T> {
    pub train_ids: Vec<T>,
    pub test_ids: Vec<T>,
    pub seed: u64,
    pub test_fraction: f64,
}

/// `round(n · fraction)`, halves away from zero.
pub fn test_size(n: usize, test_fraction: f64) -> usize {
    libm::round(n as f64 * test_fraction) as usize
}

fn check(n: usize, test_fraction: f64) -> Result<()> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidArgument(alloc::format!("test fraction {test_fraction} outside (0, 1)")));
    }
    if n < 2 {
        return Err(Error::InvalidArgument(alloc::format!("cannot split {n} examples")));
    }
    Ok(())
}

/// Shuffles under `seed`; the first `round(n · fraction)` ids form the test set.
pub fn split<T: Clone>(ids: &[T], test_fraction: f64, seed: u64) -> Result<SplitPlan<T>> {
    check(ids.len(), test_fraction)?;
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.shuffle(&mut rng_from_seed(seed));
    let k = test_size(ids.len(), test_fraction);
    Ok(SplitPlan {
        test_ids: order[..k].iter().map(|&i| ids[i].clone()).collect(),
        train_ids: order[k..].iter().map(|&i| ids[i].clone()).collect(),
        seed,
        test_fraction,
    })
}

/// Like [`split`] but keeps the class balance in the test set. The test set
/// still has exactly `round(n · fraction)` ids; per-class quotas are assigned
/// by largest remainder.
pub fn split_stratified<T: Clone>(ids: &[T], labels: &[bool], test_fraction: f64, seed: u64) -> Result<SplitPlan<T>> {
    check(ids.len(), test_fraction)?;
    if labels.len() != ids.len() {
        return Err(Error::shape("split_stratified", alloc::format!("{} labels", ids.len()), alloc::format!("{}", labels.len())));
    }
    let total = test_size(ids.len(), test_fraction);
    let mut rng = rng_from_seed(seed);
    let mut classes: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, &y) in labels.iter().enumerate() {
        classes[usize::from(y)].push(i);
    }
    for c in &mut classes {
        c.shuffle(&mut rng);
    }
    let exact: [f64; 2] = [0, 1].map(|c| classes[c].len() as f64 * test_fraction);
    let mut quota: [usize; 2] = exact.map(|e| libm::floor(e) as usize);
    // hand out the remaining slots by largest fractional part, class 0 first on ties
    let mut by_rem = [0usize, 1];
    by_rem.sort_by(|&a, &b| (exact[b] - quota[b] as f64).total_cmp(&(exact[a] - quota[a] as f64)));
    let mut left = total - quota[0] - quota[1];
    for c in by_rem.into_iter().cycle() {
        if left == 0 {
            break;
        }
        if quota[c] < classes[c].len() {
            quota[c] += 1;
            left -= 1;
        }
    }
    let mut test = Vec::with_capacity(total);
    let mut train = Vec::with_capacity(ids.len() - total);
    for c in 0..2 {
        test.extend_from_slice(&classes[c][..quota[c]]);
        train.extend_from_slice(&classes[c][quota[c]..]);
    }
    test.shuffle(&mut rng);
    train.shuffle(&mut rng);
    Ok(SplitPlan {
        test_ids: test.into_iter().map(|i| ids[i].clone()).collect(),
        train_ids: train.into_iter().map(|i| ids[i].clone()).collect(),
        seed,
        test_fraction,
    })
}

/// Shuffles, then cuts into `k` folds whose sizes differ by at most one
/// (the first `n mod k` folds get the extra id).
pub fn kfold<T: Clone>(ids: &[T], k: usize, seed: u64) -> Result<Vec<Vec<T>>> {
    if k < 2 {
        return Err(Error::InvalidArgument(alloc::format!("k-fold needs k >= 2, got {k}")));
    }
    if k > ids.len() {
        return Err(Error::InvalidArgument(alloc::format!("{k} folds over {} examples", ids.len())));
    }
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.shuffle(&mut rng_from_seed(seed));
    let (base, extra) = (ids.len() / k, ids.len() % k);
    let mut folds = Vec::with_capacity(k);
    let mut at = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        folds.push(order[at..at + size].iter().map(|&i| ids[i].clone()).collect());
        at += size;
    }
    Ok(folds)
}

/// Fold `f` as test, the rest as train, preserving fold order.
pub fn fold_split<T: Clone>(folds: &[Vec<T>], f: usize) -> (Vec<T>, Vec<T>) {
    let train = folds.iter().enumerate().filter(|(i, _)| *i != f).flat_map(|(_, v)| v.iter().cloned()).collect();
    (train, folds[f].clone())
}
