//! Embedding → (Bi)LSTM → sigmoid unit.

use alloc::vec::Vec;

use rand::Rng as _;

use super::config::RecurrentConfig;
use super::train::{check_ids, check_labels, fit, real_len, Schedule, TrainLog};
use crate::error::{Error, Result};
use crate::nn::layers::{bilstm, lstm_sequence, push_dense, DenseVars, LstmVars};
use crate::nn::params::{uniform, EMBEDDING_INIT};
use crate::nn::{LstmCellParams, ParamSet, Tape, Tensor, Var};
use crate::rng::{derive_named, rng_from_seed, Rng};

pub fn init_recurrent(vocab_size: usize, cfg: &RecurrentConfig) -> Result<ParamSet> {
    cfg.validate()?;
    if vocab_size == 0 {
        return Err(Error::InvalidConfig("empty vocabulary".into()));
    }
    let mut rng = rng_from_seed(derive_named(cfg.seed, "init"));
    let mut p = ParamSet::new();
    p.push("embed", uniform(&mut rng, EMBEDDING_INIT, &[vocab_size, cfg.embed_dim]));
    LstmCellParams::init(&mut rng, cfg.embed_dim, cfg.hidden_dim)?.push_into(&mut p, "lstm_fwd");
    if cfg.bidirectional {
        LstmCellParams::init(&mut rng, cfg.embed_dim, cfg.hidden_dim)?.push_into(&mut p, "lstm_bwd");
    }
    let out = if cfg.bidirectional { 2 * cfg.hidden_dim } else { cfg.hidden_dim };
    push_dense(&mut p, &mut rng, "head", out, 1);
    Ok(p)
}

/// Positive-class probabilities `[B × 1]` for a batch of padded sequences.
/// With `dropout`, the pooled state is dropped out using the given RNG.
pub fn recurrent_forward(tape: &mut Tape, vars: &[Var], cfg: &RecurrentConfig, batch: &[&[u32]], dropout: Option<&mut Rng>) -> Result<Var> {
    let expected = if cfg.bidirectional { 9 } else { 6 };
    if vars.len() != expected {
        return Err(Error::shape("recurrent parameters", alloc::format!("{expected}"), alloc::format!("{}", vars.len())));
    }
    let b = batch.len();
    let steps = batch.iter().map(|s| real_len(s)).max().unwrap_or(0).max(1);
    // time-major ids, one gather for the whole batch
    let mut ids = Vec::with_capacity(steps * b);
    let mut masks = Vec::with_capacity(steps);
    for t in 0..steps {
        let mut m = Vec::with_capacity(b);
        for s in batch {
            let id = s.get(t).copied().unwrap_or(crate::features::PAD);
            ids.push(id);
            m.push(if t < real_len(s) { 1.0 } else { 0.0 });
        }
        masks.push(m);
    }
    let emb = tape.gather(vars[0], &ids)?;
    let xs = (0..steps).map(|t| tape.slice_rows(emb, t * b, b)).collect::<Result<Vec<_>>>()?;
    let lstm = |i: usize| LstmVars {
        w: vars[i],
        u: vars[i + 1],
        b: vars[i + 2],
        hidden: cfg.hidden_dim,
    };
    let (mut pooled, head) = if cfg.bidirectional {
        (bilstm(tape, &xs, Some(&masks), &lstm(1), &lstm(4))?.1, DenseVars { w: vars[7], b: vars[8] })
    } else {
        (lstm_sequence(tape, &xs, Some(&masks), &lstm(1), false)?.1, DenseVars { w: vars[4], b: vars[5] })
    };
    if let (Some(rng), true) = (dropout, cfg.dropout > 0.0) {
        let keep = 1.0 - cfg.dropout;
        let shape = tape.value(pooled).shape().to_vec();
        let n = tape.value(pooled).len();
        let mask = (0..n).map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 }).collect();
        let mask = tape.leaf(Tensor::new(shape, mask)?);
        pooled = tape.mul(pooled, mask)?;
    }
    let logits = head.apply(tape, pooled)?;
    Ok(tape.sigmoid(logits))
}

/// Mean BCE of one batch and its gradient for every parameter.
pub fn recurrent_loss(params: &[Tensor], cfg: &RecurrentConfig, batch: &[&[u32]], targets: &[f64], dropout: Option<&mut Rng>) -> Result<(f64, Vec<Tensor>)> {
    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|t| tape.leaf(t.clone())).collect();
    let p = recurrent_forward(&mut tape, &vars, cfg, batch, dropout)?;
    let loss = tape.bce_mean(p, targets)?;
    let mut grads = tape.backward(loss)?;
    let g = vars.iter().zip(params).map(|(v, t)| grads.take_or_zeros(*v, t)).collect();
    Ok((tape.value(loss).data()[0], g))
}

pub fn fit_recurrent(seqs: &[Vec<u32>], labels: &[bool], vocab_size: usize, cfg: &RecurrentConfig) -> Result<(ParamSet, TrainLog)> {
    check_labels(seqs.len(), labels)?;
    check_ids(seqs, vocab_size)?;
    let mut params = init_recurrent(vocab_size, cfg)?;
    let schedule = Schedule {
        lr: cfg.lr,
        batch_size: cfg.batch_size,
        epochs: cfg.epochs,
        seed: cfg.seed,
    };
    let log = fit(params.tensors_mut(), seqs.len(), &schedule, |p, idx, rng| {
        let batch: Vec<&[u32]> = idx.iter().map(|&i| seqs[i].as_slice()).collect();
        let y: Vec<f64> = idx.iter().map(|&i| f64::from(u8::from(labels[i]))).collect();
        recurrent_loss(p, cfg, &batch, &y, Some(rng))
    })?;
    Ok((params, log))
}

pub const PREDICT_BATCH: usize = 256;

pub fn predict_recurrent(params: &ParamSet, cfg: &RecurrentConfig, seqs: &[Vec<u32>]) -> Result<Vec<f64>> {
    let vocab_size = params.get("embed").map(Tensor::rows).ok_or(Error::FeatureMismatch("missing embedding".into()))?;
    check_ids(seqs, vocab_size)?;
    let mut out = Vec::with_capacity(seqs.len());
    for chunk in seqs.chunks(PREDICT_BATCH) {
        let mut tape = Tape::new();
        let vars = params.bind(&mut tape);
        let batch: Vec<&[u32]> = chunk.iter().map(Vec::as_slice).collect();
        let p = recurrent_forward(&mut tape, &vars, cfg, &batch, None)?;
        out.extend_from_slice(tape.value(p).data());
    }
    Ok(out)
}

/// All-zero head: every prediction is exactly 0.5.
pub fn zero_head(params: &mut ParamSet) {
    for name in ["head.w", "head.b"] {
        if let Some(t) = params.get_mut(name) {
            t.data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n: usize) -> (Vec<Vec<u32>>, Vec<bool>) {
        // label = token 7 present; filler tokens 3..7 and 8..12
        let mut rng = rng_from_seed(11);
        let mut seqs = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let len = rng.gen_range(3..7);
            let mut s: Vec<u32> = (0..len).map(|_| if rng.gen_bool(0.5) { rng.gen_range(3..7) } else { rng.gen_range(8..12) }).collect();
            let y = i % 2 == 0;
            if y {
                let pos = rng.gen_range(0..len);
                s[pos] = 7;
            }
            s.resize(8, 0);
            seqs.push(s);
            labels.push(y);
        }
        (seqs, labels)
    }

    fn small(bidirectional: bool) -> RecurrentConfig {
        RecurrentConfig {
            embed_dim: 8,
            hidden_dim: 8,
            bidirectional,
            lr: 0.02,
            batch_size: 10,
            epochs: 30,
            dropout: 0.0,
            seed: 4,
        }
    }

    fn accuracy(p: &[f64], y: &[bool]) -> f64 {
        p.iter().zip(y).filter(|(p, y)| (**p > 0.5) == **y).count() as f64 / y.len() as f64
    }

    #[test]
    fn untrained_model_is_near_half() {
        let (seqs, _) = toy(20);
        let cfg = RecurrentConfig { epochs: 0, ..small(false) };
        let p = predict_recurrent(&init_recurrent(12, &cfg).unwrap(), &cfg, &seqs).unwrap();
        let mean = p.iter().sum::<f64>() / p.len() as f64;
        assert!((mean - 0.5).abs() < 0.05);
    }

    #[test]
    fn zero_head_ties_to_half() {
        let (seqs, _) = toy(5);
        let cfg = small(true);
        let mut params = init_recurrent(12, &cfg).unwrap();
        zero_head(&mut params);
        for p in predict_recurrent(&params, &cfg, &seqs).unwrap() {
            assert_eq!(p, 0.5);
        }
    }

    #[test]
    fn learns_token_presence() {
        let (seqs, labels) = toy(50);
        for bi in [false, true] {
            let cfg = small(bi);
            let (params, log) = fit_recurrent(&seqs, &labels, 12, &cfg).unwrap();
            let p = predict_recurrent(&params, &cfg, &seqs).unwrap();
            assert_eq!(accuracy(&p, &labels), 1.0, "bidirectional={bi} losses {:?}", log.epoch_losses);
        }
    }

    #[test]
    fn same_seed_same_parameters() {
        let (seqs, labels) = toy(20);
        let cfg = RecurrentConfig { epochs: 2, dropout: 0.2, ..small(true) };
        let a = fit_recurrent(&seqs, &labels, 12, &cfg).unwrap().0;
        let b = fit_recurrent(&seqs, &labels, 12, &cfg).unwrap().0;
        assert_eq!(a, b);
    }

    #[test]
    fn padding_does_not_change_predictions() {
        let cfg = small(true);
        let params = init_recurrent(12, &cfg).unwrap();
        let short = vec![vec![3, 7, 9]];
        let long = vec![vec![3, 7, 9, 0, 0, 0, 0]];
        let a = predict_recurrent(&params, &cfg, &short).unwrap();
        let b = predict_recurrent(&params, &cfg, &long).unwrap();
        assert!((a[0] - b[0]).abs() < 1e-15);
        // and batching with a longer sequence does not either
        let mixed = vec![vec![3, 7, 9, 0, 0], vec![4, 4, 4, 4, 4]];
        let c = predict_recurrent(&params, &cfg, &mixed).unwrap();
        assert!((a[0] - c[0]).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        let cfg = small(false);
        assert!(fit_recurrent(&[], &[], 12, &cfg).is_err());
        assert!(fit_recurrent(&[vec![3]], &[true], 12, &cfg).is_err()); // batch > data
        assert!(fit_recurrent(&vec![vec![30]; 10], &[true; 10], 12, &cfg).is_err());
    }
}
