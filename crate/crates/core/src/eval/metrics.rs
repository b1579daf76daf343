//! Confusion-matrix metrics with label 1 as the positive class.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Metrics {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl Metrics {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize, tn: usize) -> Result<Self> {
        let n = tp + fp + fn_ + tn;
        if n == 0 {
            return Err(Error::Empty("metrics input"));
        }
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        Ok(Metrics {
            tp,
            fp,
            fn_,
            tn,
            accuracy: ratio(tp + tn, n),
            precision,
            recall,
            f1,
        })
    }
}

pub fn metrics(y_true: &[bool], y_pred: &[bool]) -> Result<Metrics> {
    if y_true.len() != y_pred.len() {
        return Err(Error::shape("metrics", alloc::format!("{} predictions", y_true.len()), alloc::format!("{}", y_pred.len())));
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for (&t, &p) in y_true.iter().zip(y_pred) {
        match (t, p) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    Metrics::from_counts(tp, fp, fn_, tn)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    #[test]
    fn examples() {
        let m = metrics(&[true, false, true], &[true, false, true]).unwrap();
        assert_eq!((m.accuracy, m.precision, m.recall, m.f1), (1.0, 1.0, 1.0, 1.0));

        let m = Metrics::from_counts(2, 1, 1, 6).unwrap();
        assert_eq!(m.accuracy, 0.8);
        assert!((m.precision - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.recall - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.f1 - 2.0 / 3.0).abs() < 1e-15);

        let m = metrics(&[true, false, true, false], &[false; 4]).unwrap();
        assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn errors() {
        assert!(metrics(&[true], &[]).is_err());
        assert!(metrics(&[], &[]).is_err());
    }

    /// Exhaustive check over every truth/prediction pair of length 4 against
    /// a definition written from the per-example sums.
    #[test]
    fn exhaustive_length_four() {
        for t in 0u32..16 {
            for p in 0u32..16 {
                let yt: Vec<bool> = (0..4).map(|i| t >> i & 1 == 1).collect();
                let yp: Vec<bool> = (0..4).map(|i| p >> i & 1 == 1).collect();
                let m = metrics(&yt, &yp).unwrap();
                let tp = (t & p).count_ones() as f64;
                let pred_pos = p.count_ones() as f64;
                let true_pos = t.count_ones() as f64;
                let agree = (!(t ^ p) & 0xF).count_ones() as f64;
                assert_eq!(m.accuracy, agree / 4.0);
                let prec = if pred_pos == 0.0 { 0.0 } else { tp / pred_pos };
                let rec = if true_pos == 0.0 { 0.0 } else { tp / true_pos };
                assert_eq!(m.precision, prec);
                assert_eq!(m.recall, rec);
                let f1 = if tp == 0.0 { 0.0 } else { 2.0 * tp / (pred_pos + true_pos) };
                assert!((m.f1 - f1).abs() < 1e-15);
                // complementing both sides keeps accuracy
                let ct: Vec<bool> = yt.iter().map(|b| !b).collect();
                let cp: Vec<bool> = yp.iter().map(|b| !b).collect();
                assert_eq!(metrics(&ct, &cp).unwrap().accuracy, m.accuracy);
            }
        }
    }
}
