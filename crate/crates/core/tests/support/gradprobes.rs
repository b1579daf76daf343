//! Finite-difference probes for each differentiable layer. Each probe turns
//! the layer output into a scalar with fixed random weights so every
//! gradient coordinate is of order one, then returns the worst relative
//! error between the analytic and numeric gradients.

#![allow(dead_code)]

use edtweetlab_core::features::CLS;
use edtweetlab_core::models::transformer::transformer_loss;
use edtweetlab_core::models::TransformerConfig;
use edtweetlab_core::nn::layers::{attention, bilstm, lstm_step, push_encoder_block, EncoderBlockVars, LstmVars};
use edtweetlab_core::nn::params::uniform;
use edtweetlab_core::nn::{gradient_check, LstmCellParams, Tape, Tensor, Var};
use edtweetlab_core::rng::{rng_from_seed, Rng};
use edtweetlab_core::Result;
use edtweetlab_core::models::transformer::init_transformer;

pub const EPSILON: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;
pub const SEEDS: [u64; 5] = [11, 22, 33, 44, 55];

fn probe_weights(rng: &mut Rng, n: usize) -> Vec<f64> {
    uniform(rng, 1.0, &[n]).into_data()
}

fn finish(tape: &Tape, loss: Var, vars: &[Var], params: &[Tensor]) -> Result<(f64, Vec<Tensor>)> {
    let mut g = tape.backward(loss)?;
    let grads = vars.iter().zip(params).map(|(v, p)| g.take_or_zeros(*v, p)).collect();
    Ok((tape.value(loss).data()[0], grads))
}

/// One LSTM step; inputs and previous state are differentiated too.
pub fn lstm_cell(seed: u64) -> Result<f64> {
    let mut rng = rng_from_seed(seed);
    let (input, hidden) = (4, 3);
    let cell = LstmCellParams::init(&mut rng, input, hidden)?;
    let params = vec![
        cell.w.clone(),
        cell.u.clone(),
        uniform(&mut rng, 0.5, &[4 * hidden]),
        uniform(&mut rng, 1.0, &[1, input]),
        uniform(&mut rng, 1.0, &[1, hidden]),
        uniform(&mut rng, 1.0, &[1, hidden]),
    ];
    let (wh, wc) = (probe_weights(&mut rng, hidden), probe_weights(&mut rng, hidden));
    let f = |p: &[Tensor]| {
        let mut t = Tape::new();
        let v: Vec<Var> = p.iter().map(|x| t.leaf(x.clone())).collect();
        let lv = LstmVars { w: v[0], u: v[1], b: v[2], hidden };
        let (h, c) = lstm_step(&mut t, v[3], v[4], v[5], &lv, None)?;
        let a = t.weighted_sum(h, &wh)?;
        let b = t.weighted_sum(c, &wc)?;
        let loss = t.add(a, b)?;
        finish(&t, loss, &v, p)
    };
    gradient_check(&f, &params, EPSILON, None, &mut rng)
}

/// Bidirectional layer over a batch of two sequences, the second one
/// padded after two steps.
pub fn bilstm_layer(seed: u64) -> Result<f64> {
    let mut rng = rng_from_seed(seed);
    let (steps, input, hidden) = (4, 3, 3);
    let fwd = LstmCellParams::init(&mut rng, input, hidden)?;
    let bwd = LstmCellParams::init(&mut rng, input, hidden)?;
    let mut params = vec![fwd.w, fwd.u, fwd.b, bwd.w, bwd.u, bwd.b];
    for _ in 0..steps {
        params.push(uniform(&mut rng, 1.0, &[2, input]));
    }
    let masks: Vec<Vec<f64>> = (0..steps).map(|t| vec![1.0, if t < 2 { 1.0 } else { 0.0 }]).collect();
    let weights: Vec<Vec<f64>> = (0..=steps).map(|_| probe_weights(&mut rng, 2 * 2 * hidden)).collect();
    let f = |p: &[Tensor]| {
        let mut t = Tape::new();
        let v: Vec<Var> = p.iter().map(|x| t.leaf(x.clone())).collect();
        let lf = LstmVars { w: v[0], u: v[1], b: v[2], hidden };
        let lb = LstmVars { w: v[3], u: v[4], b: v[5], hidden };
        let (outs, last) = bilstm(&mut t, &v[6..], Some(&masks), &lf, &lb)?;
        let mut loss = t.weighted_sum(last, &weights[steps])?;
        for (o, w) in outs.iter().zip(&weights) {
            let s = t.weighted_sum(*o, w)?;
            loss = t.add(loss, s)?;
        }
        finish(&t, loss, &v, p)
    };
    gradient_check(&f, &params, EPSILON, None, &mut rng)
}

/// Plain scaled dot-product attention with one masked key, then a full
/// encoder block (multi-head attention, feed-forward, residuals and layer
/// norms) over two padded sequences.
pub fn attention_block(seed: u64) -> Result<f64> {
    let mut rng = rng_from_seed(seed);
    let qkv = vec![uniform(&mut rng, 1.0, &[3, 4]), uniform(&mut rng, 1.0, &[3, 4]), uniform(&mut rng, 1.0, &[3, 4])];
    let w_att = probe_weights(&mut rng, 12);
    let f = |p: &[Tensor]| {
        let mut t = Tape::new();
        let v: Vec<Var> = p.iter().map(|x| t.leaf(x.clone())).collect();
        let (out, _) = attention(&mut t, v[0], v[1], v[2], Some(&[0.0, f64::NEG_INFINITY, 0.0]))?;
        let loss = t.weighted_sum(out, &w_att)?;
        finish(&t, loss, &v, p)
    };
    let plain = gradient_check(&f, &qkv, EPSILON, None, &mut rng)?;

    let (d_model, ff, heads, seq_len) = (8, 12, 2, 4);
    let mut ps = edtweetlab_core::nn::ParamSet::new();
    push_encoder_block(&mut ps, &mut rng, "b", d_model, ff);
    // non-trivial layer-norm affine parameters
    for name in ["b.ln1.gain", "b.ln1.bias", "b.ln2.gain", "b.ln2.bias"] {
        let t = ps.get_mut(name).unwrap();
        let noise = uniform(&mut rng, 0.3, &[d_model]);
        t.data_mut().iter_mut().zip(noise.data()).for_each(|(a, b)| *a += b);
    }
    let mut params = ps.tensors().to_vec();
    params.push(uniform(&mut rng, 1.0, &[2 * seq_len, d_model]));
    let bias = vec![vec![0.0; seq_len], vec![0.0, 0.0, f64::NEG_INFINITY, f64::NEG_INFINITY]];
    let w_blk = probe_weights(&mut rng, 2 * seq_len * d_model);
    let g = |p: &[Tensor]| {
        let mut t = Tape::new();
        let v: Vec<Var> = p.iter().map(|x| t.leaf(x.clone())).collect();
        let blk = EncoderBlockVars::from_vars(&v[..15], heads);
        let y = blk.apply(&mut t, v[15], seq_len, &bias)?;
        let loss = t.weighted_sum(y, &w_blk)?;
        finish(&t, loss, &v, p)
    };
    let block = gradient_check(&g, &params, EPSILON, None, &mut rng)?;
    Ok(plain.max(block))
}

/// The whole classifier: embeddings, two encoder blocks, CLS pooling, the
/// sigmoid head and the mean BCE loss.
pub fn mini_transformer(seed: u64) -> Result<f64> {
    let mut rng = rng_from_seed(seed);
    let cfg = TransformerConfig {
        layers: 2,
        heads: 2,
        d_model: 8,
        ff_dim: 12,
        max_len: 6,
        seed,
        ..TransformerConfig::default()
    };
    let mut ps = init_transformer(9, &cfg)?;
    for name in ["block0.ln1.gain", "block1.ln2.bias", "head.b"] {
        let t = ps.get_mut(name).unwrap();
        let n = t.len();
        let noise = uniform(&mut rng, 0.3, &[n]);
        t.data_mut().iter_mut().zip(noise.data()).for_each(|(a, b)| *a += b);
    }
    let seqs: Vec<Vec<u32>> = vec![vec![CLS, 4, 5, 6, 7], vec![CLS, 8, 3, 0, 0], vec![CLS, 5, 0, 0, 0]];
    let batch: Vec<&[u32]> = seqs.iter().map(Vec::as_slice).collect();
    let f = |p: &[Tensor]| transformer_loss(p, &cfg, &batch, &[1.0, 0.0, 1.0]);
    gradient_check(&f, ps.tensors(), EPSILON, None, &mut rng)
}
