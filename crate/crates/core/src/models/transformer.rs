//! Small encoder-only transformer classifying from the CLS position.

use alloc::vec::Vec;

use super::config::TransformerConfig;
use super::train::{check_ids, check_labels, fit, real_len, Schedule, TrainLog};
use crate::error::{Error, Result};
use crate::features::{CLS, PAD};
use crate::nn::layers::{push_dense, push_encoder_block, DenseVars, EncoderBlockVars, ENCODER_BLOCK_PARAMS};
use crate::nn::params::{uniform, EMBEDDING_INIT};
use crate::nn::{ParamSet, Tape, Tensor, Var};
use crate::rng::{derive_named, rng_from_seed};

pub fn init_transformer(vocab_size: usize, cfg: &TransformerConfig) -> Result<ParamSet> {
    cfg.validate()?;
    if vocab_size == 0 {
        return Err(Error::InvalidConfig("empty vocabulary".into()));
    }
    let mut rng = rng_from_seed(derive_named(cfg.seed, "init"));
    let mut p = ParamSet::new();
    p.push("tok_embed", uniform(&mut rng, EMBEDDING_INIT, &[vocab_size, cfg.d_model]));
    p.push("pos_embed", uniform(&mut rng, EMBEDDING_INIT, &[cfg.max_len, cfg.d_model]));
    for l in 0..cfg.layers {
        push_encoder_block(&mut p, &mut rng, &alloc::format!("block{l}"), cfg.d_model, cfg.ff_dim);
    }
    push_dense(&mut p, &mut rng, "head", cfg.d_model, 1);
    Ok(p)
}

fn check_sequences(seqs: &[Vec<u32>], cfg: &TransformerConfig) -> Result<()> {
    for s in seqs {
        if s.first() != Some(&CLS) {
            return Err(Error::FeatureMismatch("transformer input must start with the CLS token".into()));
        }
        if real_len(s) > cfg.max_len {
            return Err(Error::FeatureMismatch(alloc::format!("sequence longer than max_len {}", cfg.max_len)));
        }
    }
    Ok(())
}

/// Positive-class probabilities `[B × 1]`.
pub fn transformer_forward(tape: &mut Tape, vars: &[Var], cfg: &TransformerConfig, batch: &[&[u32]]) -> Result<Var> {
    let expected = 2 + ENCODER_BLOCK_PARAMS.len() * cfg.layers + 2;
    if vars.len() != expected {
        return Err(Error::shape("transformer parameters", alloc::format!("{expected}"), alloc::format!("{}", vars.len())));
    }
    let b = batch.len();
    let len = batch.iter().map(|s| real_len(s)).max().unwrap_or(1).max(1);
    let mut ids = Vec::with_capacity(b * len);
    let mut positions = Vec::with_capacity(b * len);
    let mut key_bias = Vec::with_capacity(b);
    for s in batch {
        let n = real_len(s);
        for t in 0..len {
            ids.push(if t < n { s[t] } else { PAD });
            positions.push(t as u32);
        }
        key_bias.push((0..len).map(|t| if t < n { 0.0 } else { f64::NEG_INFINITY }).collect::<Vec<_>>());
    }
    let tok = tape.gather(vars[0], &ids)?;
    let pos = tape.gather(vars[1], &positions)?;
    let mut x = tape.add(tok, pos)?;
    for l in 0..cfg.layers {
        let start = 2 + l * ENCODER_BLOCK_PARAMS.len();
        let block = EncoderBlockVars::from_vars(&vars[start..start + ENCODER_BLOCK_PARAMS.len()], cfg.heads);
        x = block.apply(tape, x, len, &key_bias)?;
    }
    let cls = (0..b).map(|s| tape.slice_rows(x, s * len, 1)).collect::<Result<Vec<_>>>()?;
    let cls = tape.concat_rows(&cls)?;
    let head = DenseVars {
        w: vars[expected - 2],
        b: vars[expected - 1],
    };
    let logits = head.apply(tape, cls)?;
    Ok(tape.sigmoid(logits))
}

pub fn transformer_loss(params: &[Tensor], cfg: &TransformerConfig, batch: &[&[u32]], targets: &[f64]) -> Result<(f64, Vec<Tensor>)> {
    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|t| tape.leaf(t.clone())).collect();
    let p = transformer_forward(&mut tape, &vars, cfg, batch)?;
    let loss = tape.bce_mean(p, targets)?;
    let mut grads = tape.backward(loss)?;
    let g = vars.iter().zip(params).map(|(v, t)| grads.take_or_zeros(*v, t)).collect();
    Ok((tape.value(loss).data()[0], g))
}

pub fn fit_transformer(seqs: &[Vec<u32>], labels: &[bool], vocab_size: usize, cfg: &TransformerConfig) -> Result<(ParamSet, TrainLog)> {
    check_labels(seqs.len(), labels)?;
    check_ids(seqs, vocab_size)?;
    check_sequences(seqs, cfg)?;
    let mut params = init_transformer(vocab_size, cfg)?;
    let schedule = Schedule {
        lr: cfg.lr,
        batch_size: cfg.batch_size,
        epochs: cfg.epochs,
        seed: cfg.seed,
    };
    let log = fit(params.tensors_mut(), seqs.len(), &schedule, |p, idx, _| {
        let batch: Vec<&[u32]> = idx.iter().map(|&i| seqs[i].as_slice()).collect();
        let y: Vec<f64> = idx.iter().map(|&i| f64::from(u8::from(labels[i]))).collect();
        transformer_loss(p, cfg, &batch, &y)
    })?;
    Ok((params, log))
}

pub fn predict_transformer(params: &ParamSet, cfg: &TransformerConfig, seqs: &[Vec<u32>]) -> Result<Vec<f64>> {
    let vocab_size = params.get("tok_embed").map(Tensor::rows).ok_or(Error::FeatureMismatch("missing token embedding".into()))?;
    check_ids(seqs, vocab_size)?;
    check_sequences(seqs, cfg)?;
    let mut out = Vec::with_capacity(seqs.len());
    for chunk in seqs.chunks(super::recurrent::PREDICT_BATCH) {
        let mut tape = Tape::new();
        let vars = params.bind(&mut tape);
        let batch: Vec<&[u32]> = chunk.iter().map(Vec::as_slice).collect();
        let p = transformer_forward(&mut tape, &vars, cfg, &batch)?;
        out.extend_from_slice(tape.value(p).data());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::tape::bce_loss;
    use crate::rng::Rng;
    use alloc::vec;
    use rand::Rng as _;

    fn toy(n: usize, rng: &mut Rng) -> (Vec<Vec<u32>>, Vec<bool>) {
        let mut seqs = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let len = rng.gen_range(3..8);
            let mut s = vec![CLS];
            s.extend((0..len).map(|_| if rng.gen_bool(0.5) { rng.gen_range(3..7) } else { rng.gen_range(8..14) }));
            let y = i % 2 == 1;
            if y {
                let at = rng.gen_range(1..s.len());
                s[at] = 7;
            }
            s.resize(10, PAD);
            seqs.push(s);
            labels.push(y);
        }
        (seqs, labels)
    }

    fn small() -> TransformerConfig {
        TransformerConfig {
            layers: 1,
            heads: 2,
            d_model: 16,
            ff_dim: 32,
            max_len: 10,
            lr: 5e-3,
            batch_size: 8,
            epochs: 25,
            paper_protocol: false,
            seed: 3,
        }
    }

    #[test]
    fn learns_token_presence() {
        let mut rng = rng_from_seed(5);
        let (seqs, labels) = toy(48, &mut rng);
        let cfg = small();
        let (params, log) = fit_transformer(&seqs, &labels, 14, &cfg).unwrap();
        let p = predict_transformer(&params, &cfg, &seqs).unwrap();
        let acc = p.iter().zip(&labels).filter(|(p, y)| (**p > 0.5) == **y).count();
        assert_eq!(acc, 48, "losses {:?}", log.epoch_losses);
    }

    #[test]
    fn zero_layers_is_logistic_on_cls() {
        let cfg = TransformerConfig { layers: 0, ..small() };
        let params = init_transformer(14, &cfg).unwrap();
        assert_eq!(params.len(), 4);
        let seqs = vec![vec![CLS, 5, 6, PAD], vec![CLS, 9, PAD, PAD]];
        let p = predict_transformer(&params, &cfg, &seqs).unwrap();
        // CLS at position 0 in both, so identical outputs
        assert_eq!(p[0], p[1]);
        let x: Vec<f64> = params.get("tok_embed").unwrap().row(CLS as usize).iter().zip(params.get("pos_embed").unwrap().row(0)).map(|(a, b)| a + b).collect();
        let z: f64 = x.iter().zip(params.get("head.w").unwrap().data()).map(|(a, w)| a * w).sum::<f64>() + params.get("head.b").unwrap().data()[0];
        assert!((p[0] - 1.0 / (1.0 + libm::exp(-z))).abs() < 1e-12);
    }

    #[test]
    fn padding_is_masked() {
        let cfg = small();
        let params = init_transformer(14, &cfg).unwrap();
        let a = predict_transformer(&params, &cfg, &[vec![CLS, 5, 7]]).unwrap();
        let b = predict_transformer(&params, &cfg, &[vec![CLS, 5, 7, PAD, PAD, PAD]]).unwrap();
        let c = predict_transformer(&params, &cfg, &[vec![CLS, 5, 7, PAD, PAD], vec![CLS, 4, 4, 4, 4, 4, 4]]).unwrap();
        assert!((a[0] - b[0]).abs() < 1e-12);
        assert!((a[0] - c[0]).abs() < 1e-12);
    }

    #[test]
    fn missing_cls_rejected() {
        let cfg = small();
        let params = init_transformer(14, &cfg).unwrap();
        assert!(predict_transformer(&params, &cfg, &[vec![5, 6]]).is_err());
    }

    #[test]
    fn loss_matches_scalar_bce() {
        let cfg = small();
        let params = init_transformer(14, &cfg).unwrap();
        let seqs = [vec![CLS, 5, 7], vec![CLS, 9]];
        let p = predict_transformer(&params, &cfg, &seqs).unwrap();
        let batch: Vec<&[u32]> = seqs.iter().map(Vec::as_slice).collect();
        let (loss, _) = transformer_loss(params.tensors(), &cfg, &batch, &[1.0, 0.0]).unwrap();
        let expected = 0.5 * (bce_loss(p[0], 1.0) + bce_loss(p[1], 0.0));
        assert!((loss - expected).abs() < 1e-12);
    }
}
