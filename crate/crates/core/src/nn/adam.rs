use alloc::vec::Vec;

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Bias-corrected Adam.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl AdamState {
    pub fn new(params: &[Tensor], lr: f64) -> Self {
        AdamState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            v: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: &mut [Tensor], grads: &[Tensor]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != params.len() {
            return Err(Error::shape("adam_step", alloc::format!("{} tensors", self.m.len()), alloc::format!("{} params, {} grads", params.len(), grads.len())));
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.m) {
            if p.shape() != g.shape() || p.shape() != m.shape() {
                return Err(Error::shape("adam_step", alloc::format!("{:?}", p.shape()), alloc::format!("{:?}", g.shape())));
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - libm::pow(self.beta1, t as f64);
        let c2 = 1.0 - libm::pow(self.beta2, t as f64);
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            for (((pv, &gv), mv), vv) in p.data_mut().iter_mut().zip(g.data()).zip(m.data_mut()).zip(v.data_mut()) {
                *mv = self.beta1 * *mv + (1.0 - self.beta1) * gv;
                *vv = self.beta2 * *vv + (1.0 - self.beta2) * gv * gv;
                let m_hat = *mv / c1;
                let v_hat = *vv / c2;
                *pv -= self.lr * m_hat / (libm::sqrt(v_hat) + self.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = vec![Tensor::vector(vec![1.0, -2.0])];
        let mut s = AdamState::new(&p, 0.1);
        s.step(&mut p, &[Tensor::zeros(&[2])]).unwrap();
        assert_eq!(p[0].data(), &[1.0, -2.0]);
        assert_eq!(s.steps(), 1);
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let mut p = vec![Tensor::vector(vec![0.0, 0.0, 0.0])];
        let mut s = AdamState::new(&p, 0.01);
        s.step(&mut p, &[Tensor::vector(vec![3.0, -0.5, 1e-3])]).unwrap();
        // m_hat / sqrt(v_hat) = g / |g|
        for (got, sign) in p[0].data().iter().zip([-1.0, 1.0, -1.0]) {
            assert!((got - sign * 0.01).abs() < 1e-7, "{got}");
        }
    }

    #[test]
    fn constant_gradient_update_tends_to_lr() {
        let mut p = vec![Tensor::vector(vec![0.0])];
        let mut s = AdamState::new(&p, 1e-3);
        let g = [Tensor::vector(vec![-0.25])];
        let mut last = 0.0;
        for _ in 0..5000 {
            let before = p[0].data()[0];
            s.step(&mut p, &g).unwrap();
            last = p[0].data()[0] - before;
        }
        assert!((last - 1e-3).abs() < 1e-9, "{last}");
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut p = vec![Tensor::vector(vec![0.0; 2])];
        let mut s = AdamState::new(&p, 0.1);
        assert!(s.step(&mut p, &[Tensor::zeros(&[3])]).is_err());
        assert!(s.step(&mut p, &[]).is_err());
    }
}
