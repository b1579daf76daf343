//! Mini-batch training loop shared by the neural classifiers.

use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::features::PAD;
use crate::nn::{AdamState, Tensor};
use crate::rng::{derive_named, rng_from_seed, Rng};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

/// Mean training loss per epoch.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub epoch_losses: Vec<f64>,
}

/// Runs `epochs` passes of Adam over shuffled mini-batches. `step` gets the
/// current parameters, the example indices of one batch and a per-run RNG,
/// and returns the batch loss and one gradient per parameter.
pub fn fit<F>(params: &mut [Tensor], n: usize, schedule: &Schedule, mut step: F) -> Result<TrainLog>
where
    F: FnMut(&[Tensor], &[usize], &mut Rng) -> Result<(f64, Vec<Tensor>)>,
{
    if n == 0 {
        return Err(Error::Empty("training data"));
    }
    if schedule.batch_size == 0 || schedule.batch_size > n {
        return Err(Error::InvalidConfig(alloc::format!("batch_size {} must lie in 1..={n}", schedule.batch_size)));
    }
    let mut adam = AdamState::new(params, schedule.lr);
    let mut shuffle_rng = rng_from_seed(derive_named(schedule.seed, "shuffle"));
    let mut step_rng = rng_from_seed(derive_named(schedule.seed, "dropout"));
    let mut order: Vec<usize> = (0..n).collect();
    let mut log = TrainLog::default();
    for _ in 0..schedule.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut total = 0.0;
        for batch in order.chunks(schedule.batch_size) {
            let (loss, grads) = step(params, batch, &mut step_rng)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite("training loss"));
            }
            adam.step(params, &grads)?;
            total += loss * batch.len() as f64;
        }
        log.epoch_losses.push(total / n as f64);
    }
    Ok(log)
}

/// Number of leading positions before trailing padding.
pub fn real_len(seq: &[u32]) -> usize {
    seq.iter().rposition(|&t| t != PAD).map_or(0, |i| i + 1)
}

pub fn check_labels(n_seqs: usize, labels: &[bool]) -> Result<()> {
    if n_seqs == 0 {
        return Err(Error::Empty("training data"));
    }
    if n_seqs != labels.len() {
        return Err(Error::shape("labels", alloc::format!("{n_seqs}"), alloc::format!("{}", labels.len())));
    }
    Ok(())
}

pub fn check_ids(seqs: &[Vec<u32>], vocab_size: usize) -> Result<()> {
    match seqs.iter().flatten().find(|&&t| t as usize >= vocab_size) {
        Some(t) => Err(Error::FeatureMismatch(alloc::format!("token id {t} outside vocabulary of {vocab_size}"))),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_len_ignores_trailing_pad() {
        assert_eq!(real_len(&[5, 6, 0, 0]), 2);
        assert_eq!(real_len(&[0, 0]), 0);
        assert_eq!(real_len(&[2, 0, 7]), 3);
    }

    #[test]
    fn oversized_batch_rejected() {
        let mut p = [Tensor::scalar(0.0)];
        let s = Schedule { lr: 0.1, batch_size: 5, epochs: 1, seed: 0 };
        assert!(fit(&mut p, 4, &s, |_, _, _| Ok((0.0, alloc::vec![Tensor::scalar(0.0)]))).is_err());
    }

    #[test]
    fn fits_a_quadratic() {
        let mut p = [Tensor::scalar(3.0)];
        let s = Schedule { lr: 0.1, batch_size: 1, epochs: 300, seed: 0 };
        let log = fit(&mut p, 1, &s, |p, _, _| {
            let x = p[0].data()[0];
            Ok((x * x, alloc::vec![Tensor::scalar(2.0 * x)]))
        })
        .unwrap();
        assert!(p[0].data()[0].abs() < 0.05);
        assert!(log.epoch_losses.last().unwrap() < &log.epoch_losses[0]);
    }
}
