//! Aggregation over repeated runs or folds.

use alloc::vec::Vec;

use super::metrics::Metrics;
use crate::error::{Error, Result};

/// Mean and population standard deviation.
pub fn mean_std(xs: &[f64]) -> Result<(f64, f64)> {
    if xs.is_empty() {
        return Err(Error::Empty("mean of no values"));
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    Ok((mean, libm::sqrt(var)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub runs: Vec<Metrics>,
    pub mean_f1: f64,
    pub std_f1: f64,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
}

impl RunSummary {
    pub fn from_runs(runs: Vec<Metrics>) -> Result<Self> {
        let f1: Vec<f64> = runs.iter().map(|m| m.f1).collect();
        let acc: Vec<f64> = runs.iter().map(|m| m.accuracy).collect();
        let (mean_f1, std_f1) = mean_std(&f1)?;
        let (mean_accuracy, std_accuracy) = mean_std(&acc)?;
        Ok(RunSummary {
            runs,
            mean_f1,
            std_f1,
            mean_accuracy,
            std_accuracy,
        })
    }
}

/// Calls `run` with seeds `base_seed..base_seed + n_runs` in order.
pub fn repeated_runs<F>(n_runs: usize, base_seed: u64, mut run: F) -> Result<RunSummary>
where
    F: FnMut(u64) -> Result<Metrics>,
{
    if n_runs == 0 {
        return Err(Error::InvalidArgument("n_runs must be at least 1".into()));
    }
    let runs = (0..n_runs as u64).map(|i| run(base_seed.wrapping_add(i))).collect::<Result<Vec<_>>>()?;
    RunSummary::from_runs(runs)
}
