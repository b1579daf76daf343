//! Central finite-difference comparison against analytic gradients.

use alloc::vec::Vec;

use rand::seq::SliceRandom;

use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// A scalar function of a parameter list that also reports its gradient.
pub trait Differentiable {
    fn loss_and_gradients(&self, params: &[Tensor]) -> Result<(f64, Vec<Tensor>)>;
}

impl<F> Differentiable for F
where
    F: Fn(&[Tensor]) -> Result<(f64, Vec<Tensor>)>,
{
    fn loss_and_gradients(&self, params: &[Tensor]) -> Result<(f64, Vec<Tensor>)> {
        self(params)
    }
}

/// Relative error used by [`gradient_check`].
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Largest relative error between analytic and central-difference gradients
/// over the sampled coordinates. `max_samples = None` checks every
/// coordinate.
pub fn gradient_check(model: &impl Differentiable, params: &[Tensor], epsilon: f64, max_samples: Option<usize>, rng: &mut Rng) -> Result<f64> {
    if !(1e-6..=1e-3).contains(&epsilon) {
        return Err(Error::InvalidArgument(alloc::format!("epsilon {epsilon} outside [1e-6, 1e-3]")));
    }
    let (loss, grads) = model.loss_and_gradients(params)?;
    if !loss.is_finite() || !grads.iter().all(Tensor::is_finite) {
        return Err(Error::NonFinite("analytic gradient"));
    }
    if grads.len() != params.len() {
        return Err(Error::shape("gradient_check", alloc::format!("{} gradients", params.len()), alloc::format!("{}", grads.len())));
    }
    let mut coords: Vec<(usize, usize)> = params.iter().enumerate().flat_map(|(p, t)| (0..t.len()).map(move |i| (p, i))).collect();
    if let Some(n) = max_samples {
        if n < coords.len() {
            coords.shuffle(rng);
            coords.truncate(n);
        }
    }
    let mut work = params.to_vec();
    let mut worst = 0.0f64;
    for (p, i) in coords {
        let orig = work[p].data()[i];
        work[p].data_mut()[i] = orig + epsilon;
        let up = model.loss_and_gradients(&work)?.0;
        work[p].data_mut()[i] = orig - epsilon;
        let down = model.loss_and_gradients(&work)?.0;
        work[p].data_mut()[i] = orig;
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::NonFinite("finite-difference probe"));
        }
        let numeric = (up - down) / (2.0 * epsilon);
        worst = worst.max(relative_error(grads[p].data()[i], numeric));
    }
    Ok(worst)
}
