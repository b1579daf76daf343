//! Recurrent and attention layers built on the tape, plus eager entry points
//! that evaluate a single layer on plain tensors.

use alloc::vec;
use alloc::vec::Vec;

use super::params::{xavier, ParamSet};
use super::tape::{Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Gate column blocks in the fused weight matrices.
pub const GATE_ORDER: [char; 4] = ['i', 'f', 'o', 'g'];

/// LSTM weights with the four gates fused column-wise in `i, f, o, g` order:
/// `w` is `input × 4H`, `u` is `H × 4H`, `b` is `4H`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCellParams {
    pub w: Tensor,
    pub u: Tensor,
    pub b: Tensor,
    pub hidden: usize,
}

impl LstmCellParams {
    pub fn init(rng: &mut Rng, input: usize, hidden: usize) -> Result<Self> {
        if input == 0 || hidden == 0 {
            return Err(Error::InvalidArgument("LSTM sizes must be positive".into()));
        }
        let w = xavier(rng, input, 4 * hidden, &[input, 4 * hidden]);
        let u = xavier(rng, hidden, 4 * hidden, &[hidden, 4 * hidden]);
        let mut b = Tensor::zeros(&[4 * hidden]);
        b.data_mut()[hidden..2 * hidden].iter_mut().for_each(|v| *v = 1.0);
        Ok(LstmCellParams { w, u, b, hidden })
    }

    pub fn zeros(input: usize, hidden: usize) -> Self {
        LstmCellParams {
            w: Tensor::zeros(&[input, 4 * hidden]),
            u: Tensor::zeros(&[hidden, 4 * hidden]),
            b: Tensor::zeros(&[4 * hidden]),
            hidden,
        }
    }

    pub fn input_size(&self) -> usize {
        self.w.rows()
    }

    pub fn validate(&self) -> Result<()> {
        let h = self.hidden;
        if h == 0 {
            return Err(Error::InvalidArgument("LSTM hidden size must be positive".into()));
        }
        if self.w.cols() != 4 * h || self.u.shape() != [h, 4 * h] || self.b.len() != 4 * h {
            return Err(Error::shape(
                "LstmCellParams",
                alloc::format!("w[_×{}], u[{h}×{}], b[{}]", 4 * h, 4 * h, 4 * h),
                alloc::format!("w{:?}, u{:?}, b{:?}", self.w.shape(), self.u.shape(), self.b.shape()),
            ));
        }
        Ok(())
    }

    /// Bias slice of one gate (`'i'`, `'f'`, `'o'` or `'g'`).
    pub fn gate_bias(&self, gate: char) -> &[f64] {
        let k = GATE_ORDER.iter().position(|g| *g == gate).expect("known gate");
        &self.b.data()[k * self.hidden..(k + 1) * self.hidden]
    }

    pub fn gate_bias_mut(&mut self, gate: char) -> &mut [f64] {
        let k = GATE_ORDER.iter().position(|g| *g == gate).expect("known gate");
        let h = self.hidden;
        &mut self.b.data_mut()[k * h..(k + 1) * h]
    }

    pub fn push_into(&self, params: &mut ParamSet, prefix: &str) {
        params.push(alloc::format!("{prefix}.w"), self.w.clone());
        params.push(alloc::format!("{prefix}.u"), self.u.clone());
        params.push(alloc::format!("{prefix}.b"), self.b.clone());
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LstmVars {
    pub w: Var,
    pub u: Var,
    pub b: Var,
    pub hidden: usize,
}

impl LstmVars {
    pub fn bind(tape: &mut Tape, p: &LstmCellParams) -> Self {
        LstmVars {
            w: tape.leaf(p.w.clone()),
            u: tape.leaf(p.u.clone()),
            b: tape.leaf(p.b.clone()),
            hidden: p.hidden,
        }
    }
}

/// One LSTM step over a batch. Rows whose `mask` entry is 0 keep their
/// previous state.
pub fn lstm_step(tape: &mut Tape, x: Var, h: Var, c: Var, p: &LstmVars, mask: Option<&[f64]>) -> Result<(Var, Var)> {
    let hs = p.hidden;
    let zx = tape.matmul(x, p.w)?;
    let zh = tape.matmul(h, p.u)?;
    let z = tape.add(zx, zh)?;
    let z = tape.add_row(z, p.b)?;
    let i = tape.slice_cols(z, 0, hs)?;
    let i = tape.sigmoid(i);
    let f = tape.slice_cols(z, hs, hs)?;
    let f = tape.sigmoid(f);
    let o = tape.slice_cols(z, 2 * hs, hs)?;
    let o = tape.sigmoid(o);
    let g = tape.slice_cols(z, 3 * hs, hs)?;
    let g = tape.tanh(g);
    let keep = tape.mul(f, c)?;
    let write = tape.mul(i, g)?;
    let c_new = tape.add(keep, write)?;
    let tc = tape.tanh(c_new);
    let h_new = tape.mul(o, tc)?;
    match mask {
        Some(m) => Ok((tape.blend(h_new, h, m)?, tape.blend(c_new, c, m)?)),
        None => Ok((h_new, c_new)),
    }
}

/// Runs an LSTM over `xs` (one `B × in` input per step). Returns hidden
/// states indexed by time step and the final hidden state. With `reverse`
/// the sequence is consumed from the last step to the first.
pub fn lstm_sequence(tape: &mut Tape, xs: &[Var], masks: Option<&[Vec<f64>]>, p: &LstmVars, reverse: bool) -> Result<(Vec<Var>, Var)> {
    let batch = xs.first().map(|x| tape.value(*x).rows()).ok_or(Error::Empty("LSTM input sequence"))?;
    let mut h = tape.leaf(Tensor::zeros(&[batch, p.hidden]));
    let mut c = tape.leaf(Tensor::zeros(&[batch, p.hidden]));
    let mut outs = vec![h; xs.len()];
    let order: Vec<usize> = if reverse { (0..xs.len()).rev().collect() } else { (0..xs.len()).collect() };
    for t in order {
        let m = masks.map(|ms| ms[t].as_slice());
        let (h2, c2) = lstm_step(tape, xs[t], h, c, p, m)?;
        h = h2;
        c = c2;
        outs[t] = h;
    }
    Ok((outs, h))
}

/// Forward and reversed LSTM passes; step `t` of the output is the two
/// hidden states at `t` side by side. Also returns both final states
/// concatenated.
pub fn bilstm(tape: &mut Tape, xs: &[Var], masks: Option<&[Vec<f64>]>, fwd: &LstmVars, bwd: &LstmVars) -> Result<(Vec<Var>, Var)> {
    let (hf, last_f) = lstm_sequence(tape, xs, masks, fwd, false)?;
    let (hb, last_b) = lstm_sequence(tape, xs, masks, bwd, true)?;
    let outs = hf
        .iter()
        .zip(&hb)
        .map(|(a, b)| tape.concat_cols(&[*a, *b]))
        .collect::<Result<Vec<_>>>()?;
    let last = tape.concat_cols(&[last_f, last_b])?;
    Ok((outs, last))
}

/// `softmax(q·kᵀ/√d + key_bias)·v`. Returns the output and the attention
/// weights.
pub fn attention(tape: &mut Tape, q: Var, k: Var, v: Var, key_bias: Option<&[f64]>) -> Result<(Var, Var)> {
    let d = tape.value(q).cols();
    if tape.value(k).cols() != d || tape.value(k).rows() != tape.value(v).rows() {
        return Err(Error::shape(
            "attention",
            alloc::format!("q[_×{d}], k[T×{d}], v[T×_]"),
            alloc::format!("k{:?}, v{:?}", tape.value(k).shape(), tape.value(v).shape()),
        ));
    }
    let logits = tape.matmul_bt(q, k)?;
    let mut logits = tape.scale(logits, 1.0 / libm::sqrt(d as f64));
    if let Some(bias) = key_bias {
        logits = tape.add_column_bias(logits, bias.to_vec())?;
    }
    let weights = tape.softmax_rows(logits)?;
    let out = tape.matmul(weights, v)?;
    Ok((out, weights))
}

/// `0` for real positions, `-inf` for padded ones.
pub fn key_padding_bias(valid: &[bool]) -> Vec<f64> {
    valid.iter().map(|&ok| if ok { 0.0 } else { f64::NEG_INFINITY }).collect()
}

/// Dense layer weights: `w` is `in × out`, `b` is `out`.
#[derive(Debug, Clone, Copy)]
pub struct DenseVars {
    pub w: Var,
    pub b: Var,
}

impl DenseVars {
    pub fn apply(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let y = tape.matmul(x, self.w)?;
        tape.add_row(y, self.b)
    }
}

pub fn push_dense(params: &mut ParamSet, rng: &mut Rng, prefix: &str, input: usize, output: usize) {
    params.push(alloc::format!("{prefix}.w"), xavier(rng, input, output, &[input, output]));
    params.push(alloc::format!("{prefix}.b"), Tensor::zeros(&[output]));
}

/// Parameters of one post-norm encoder block.
#[derive(Debug, Clone, Copy)]
pub struct EncoderBlockVars {
    pub q: DenseVars,
    /// Keys have no bias: it would shift every logit of a query row by the
    /// same amount and cancel in the softmax.
    pub k: Var,
    pub v: DenseVars,
    pub o: DenseVars,
    pub ln1_gain: Var,
    pub ln1_bias: Var,
    pub ff1: DenseVars,
    pub ff2: DenseVars,
    pub ln2_gain: Var,
    pub ln2_bias: Var,
    pub heads: usize,
}

pub const ENCODER_BLOCK_PARAMS: [&str; 15] = [
    "q.w", "q.b", "k.w", "v.w", "v.b", "o.w", "o.b", "ln1.gain", "ln1.bias", "ff1.w", "ff1.b", "ff2.w", "ff2.b", "ln2.gain", "ln2.bias",
];

pub fn push_encoder_block(params: &mut ParamSet, rng: &mut Rng, prefix: &str, d_model: usize, ff_dim: usize) {
    push_dense(params, rng, &alloc::format!("{prefix}.q"), d_model, d_model);
    params.push(alloc::format!("{prefix}.k.w"), xavier(rng, d_model, d_model, &[d_model, d_model]));
    for p in ["v", "o"] {
        push_dense(params, rng, &alloc::format!("{prefix}.{p}"), d_model, d_model);
    }
    params.push(alloc::format!("{prefix}.ln1.gain"), Tensor::filled(&[d_model], 1.0));
    params.push(alloc::format!("{prefix}.ln1.bias"), Tensor::zeros(&[d_model]));
    push_dense(params, rng, &alloc::format!("{prefix}.ff1"), d_model, ff_dim);
    push_dense(params, rng, &alloc::format!("{prefix}.ff2"), ff_dim, d_model);
    params.push(alloc::format!("{prefix}.ln2.gain"), Tensor::filled(&[d_model], 1.0));
    params.push(alloc::format!("{prefix}.ln2.bias"), Tensor::zeros(&[d_model]));
}

impl EncoderBlockVars {
    /// Builds from 15 consecutive vars in [`ENCODER_BLOCK_PARAMS`] order.
    pub fn from_vars(v: &[Var], heads: usize) -> Self {
        let d = |i: usize| DenseVars { w: v[i], b: v[i + 1] };
        EncoderBlockVars {
            q: d(0),
            k: v[2],
            v: d(3),
            o: d(5),
            ln1_gain: v[7],
            ln1_bias: v[8],
            ff1: d(9),
            ff2: d(11),
            ln2_gain: v[13],
            ln2_bias: v[14],
            heads,
        }
    }

    /// `x` stacks `key_bias.len()` sequences of `seq_len` rows each.
    pub fn apply(&self, tape: &mut Tape, x: Var, seq_len: usize, key_bias: &[Vec<f64>]) -> Result<Var> {
        let d_model = tape.value(x).cols();
        if d_model % self.heads != 0 {
            return Err(Error::InvalidConfig(alloc::format!("d_model {d_model} not divisible by {} heads", self.heads)));
        }
        if tape.value(x).rows() != seq_len * key_bias.len() {
            return Err(Error::shape("encoder block", alloc::format!("{} rows", seq_len * key_bias.len()), alloc::format!("{}", tape.value(x).rows())));
        }
        let dk = d_model / self.heads;
        let q = self.q.apply(tape, x)?;
        let k = tape.matmul(x, self.k)?;
        let v = self.v.apply(tape, x)?;
        let mut per_head: Vec<[Var; 3]> = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            per_head.push([tape.slice_cols(q, h * dk, dk)?, tape.slice_cols(k, h * dk, dk)?, tape.slice_cols(v, h * dk, dk)?]);
        }
        let mut seqs = Vec::with_capacity(key_bias.len());
        for (s, bias) in key_bias.iter().enumerate() {
            let mut heads = Vec::with_capacity(self.heads);
            for [qh, kh, vh] in &per_head {
                let qs = tape.slice_rows(*qh, s * seq_len, seq_len)?;
                let ks = tape.slice_rows(*kh, s * seq_len, seq_len)?;
                let vs = tape.slice_rows(*vh, s * seq_len, seq_len)?;
                heads.push(attention(tape, qs, ks, vs, Some(bias))?.0);
            }
            seqs.push(tape.concat_cols(&heads)?);
        }
        let attended = tape.concat_rows(&seqs)?;
        let attended = self.o.apply(tape, attended)?;
        let res1 = tape.add(x, attended)?;
        let x1 = tape.layer_norm(res1, self.ln1_gain, self.ln1_bias)?;
        let f = self.ff1.apply(tape, x1)?;
        let f = tape.gelu(f);
        let f = self.ff2.apply(tape, f)?;
        let res2 = tape.add(x1, f)?;
        tape.layer_norm(res2, self.ln2_gain, self.ln2_bias)
    }
}

fn check_vector(t: &Tensor, len: usize, what: &'static str) -> Result<()> {
    if t.len() != len {
        return Err(Error::shape(what, alloc::format!("[{len}]"), alloc::format!("{:?}", t.shape())));
    }
    Ok(())
}

/// Single LSTM step on plain vectors: returns `(h, c)`.
pub fn lstm_cell_forward(x: &Tensor, h_prev: &Tensor, c_prev: &Tensor, p: &LstmCellParams) -> Result<(Tensor, Tensor)> {
    p.validate()?;
    check_vector(x, p.input_size(), "lstm_cell_forward x")?;
    check_vector(h_prev, p.hidden, "lstm_cell_forward h_prev")?;
    check_vector(c_prev, p.hidden, "lstm_cell_forward c_prev")?;
    let mut tape = Tape::new();
    let vars = LstmVars::bind(&mut tape, p);
    let x = tape.leaf(x.clone().reshape(&[1, p.input_size()])?);
    let h = tape.leaf(h_prev.clone().reshape(&[1, p.hidden])?);
    let c = tape.leaf(c_prev.clone().reshape(&[1, p.hidden])?);
    let (h, c) = lstm_step(&mut tape, x, h, c, &vars, None)?;
    Ok((
        tape.value(h).clone().reshape(&[p.hidden])?,
        tape.value(c).clone().reshape(&[p.hidden])?,
    ))
}

/// Bidirectional LSTM over a `T × in` sequence, producing `T × 2H`.
pub fn bilstm_forward(seq: &Tensor, fwd: &LstmCellParams, bwd: &LstmCellParams) -> Result<Tensor> {
    fwd.validate()?;
    bwd.validate()?;
    let (t_len, input) = seq.as_matrix();
    if t_len == 0 || seq.is_empty() {
        return Err(Error::Empty("bilstm_forward sequence"));
    }
    if input != fwd.input_size() || input != bwd.input_size() || fwd.hidden != bwd.hidden {
        return Err(Error::shape("bilstm_forward", alloc::format!("[T×{}]", fwd.input_size()), alloc::format!("{:?}", seq.shape())));
    }
    let mut tape = Tape::new();
    let fv = LstmVars::bind(&mut tape, fwd);
    let bv = LstmVars::bind(&mut tape, bwd);
    let s = tape.leaf(seq.clone().reshape(&[t_len, input])?);
    let xs = (0..t_len).map(|t| tape.slice_rows(s, t, 1)).collect::<Result<Vec<_>>>()?;
    let (outs, _) = bilstm(&mut tape, &xs, None, &fv, &bv)?;
    let out = tape.concat_rows(&outs)?;
    Ok(tape.value(out).clone())
}

/// Scaled dot-product attention on `T × d` matrices. Keys whose `key_valid`
/// entry is false receive zero weight. Returns `(output, weights)`.
pub fn attention_forward(q: &Tensor, k: &Tensor, v: &Tensor, key_valid: Option<&[bool]>) -> Result<(Tensor, Tensor)> {
    if q.is_empty() || k.is_empty() {
        return Err(Error::Empty("attention input"));
    }
    if let Some(m) = key_valid {
        if m.len() != k.rows() {
            return Err(Error::shape("attention mask", alloc::format!("{}", k.rows()), alloc::format!("{}", m.len())));
        }
    }
    let mut tape = Tape::new();
    let (qv, kv, vv) = (tape.leaf(q.clone()), tape.leaf(k.clone()), tape.leaf(v.clone()));
    let bias = key_valid.map(key_padding_bias);
    let (out, w) = attention(&mut tape, qv, kv, vv, bias.as_deref())?;
    Ok((tape.value(out).clone(), tape.value(w).clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use proptest::prelude::*;

    #[test]
    fn zero_cell_outputs_zero() {
        let p = LstmCellParams::zeros(3, 2);
        let (h, c) = lstm_cell_forward(&Tensor::vector(vec![0.3, -1.0, 2.0]), &Tensor::zeros(&[2]), &Tensor::zeros(&[2]), &p).unwrap();
        assert_eq!(h.data(), [0.0, 0.0]);
        assert_eq!(c.data(), [0.0, 0.0]);
    }

    #[test]
    fn zero_cell_halves_previous_memory() {
        let p = LstmCellParams::zeros(3, 2);
        let (h, c) = lstm_cell_forward(&Tensor::vector(vec![1.0, 1.0, 1.0]), &Tensor::zeros(&[2]), &Tensor::filled(&[2], 1.0), &p).unwrap();
        assert_eq!(c.data(), [0.5, 0.5]);
        let expected = 0.5 * 0.5f64.tanh();
        assert!((h.data()[0] - expected).abs() < 1e-15);
        assert!((h.data()[0] - 0.2311).abs() < 1e-4);
    }

    #[test]
    fn init_sets_forget_bias() {
        let p = LstmCellParams::init(&mut rng_from_seed(0), 4, 3).unwrap();
        assert_eq!(p.gate_bias('f'), [1.0; 3]);
        assert_eq!(p.gate_bias('i'), [0.0; 3]);
        assert!(LstmCellParams::init(&mut rng_from_seed(0), 4, 0).is_err());
    }

    #[test]
    fn cell_shapes_are_checked() {
        let p = LstmCellParams::zeros(3, 2);
        assert!(lstm_cell_forward(&Tensor::zeros(&[4]), &Tensor::zeros(&[2]), &Tensor::zeros(&[2]), &p).is_err());
        let bad = LstmCellParams::zeros(3, 0);
        assert!(lstm_cell_forward(&Tensor::zeros(&[3]), &Tensor::zeros(&[0]), &Tensor::zeros(&[0]), &bad).is_err());
    }

    /// One step computed directly from the gate equations.
    fn oracle_step(x: &[f64], h: &[f64], c: &[f64], p: &LstmCellParams) -> (Vec<f64>, Vec<f64>) {
        let hs = p.hidden;
        let sig = |z: f64| 1.0 / (1.0 + (-z).exp());
        let pre = |gate: usize, j: usize| {
            let col = gate * hs + j;
            let mut z = p.b.data()[col];
            for (k, xv) in x.iter().enumerate() {
                z += xv * p.w.get(k, col);
            }
            for (k, hv) in h.iter().enumerate() {
                z += hv * p.u.get(k, col);
            }
            z
        };
        let mut h2 = vec![0.0; hs];
        let mut c2 = vec![0.0; hs];
        for j in 0..hs {
            let (i, f, o, g) = (sig(pre(0, j)), sig(pre(1, j)), sig(pre(2, j)), pre(3, j).tanh());
            c2[j] = f * c[j] + i * g;
            h2[j] = o * c2[j].tanh();
        }
        (h2, c2)
    }

    #[test]
    fn cell_matches_gate_equations() {
        let mut rng = rng_from_seed(17);
        let p = LstmCellParams::init(&mut rng, 4, 3).unwrap();
        let x = crate::nn::params::uniform(&mut rng, 1.0, &[4]);
        let h = crate::nn::params::uniform(&mut rng, 1.0, &[3]);
        let c = crate::nn::params::uniform(&mut rng, 1.0, &[3]);
        let (h1, c1) = lstm_cell_forward(&x, &h, &c, &p).unwrap();
        let (h2, c2) = oracle_step(x.data(), h.data(), c.data(), &p);
        for j in 0..3 {
            assert!((h1.data()[j] - h2[j]).abs() < 1e-14);
            assert!((c1.data()[j] - c2[j]).abs() < 1e-14);
        }
    }

    #[test]
    fn bilstm_single_step_is_two_cells() {
        let mut rng = rng_from_seed(3);
        let f = LstmCellParams::init(&mut rng, 2, 3).unwrap();
        let b = LstmCellParams::init(&mut rng, 2, 3).unwrap();
        let x = Tensor::vector(vec![0.4, -0.7]);
        let out = bilstm_forward(&x.clone().reshape(&[1, 2]).unwrap(), &f, &b).unwrap();
        let z = Tensor::zeros(&[3]);
        let (hf, _) = lstm_cell_forward(&x, &z, &z, &f).unwrap();
        let (hb, _) = lstm_cell_forward(&x, &z, &z, &b).unwrap();
        assert_eq!(&out.data()[..3], hf.data());
        assert_eq!(&out.data()[3..], hb.data());
    }

    #[test]
    fn bilstm_palindrome_symmetry() {
        let mut rng = rng_from_seed(8);
        let p = LstmCellParams::init(&mut rng, 2, 3).unwrap();
        let rows = [[0.1, 0.9], [-0.5, 0.2], [0.7, 0.7], [-0.5, 0.2], [0.1, 0.9]];
        let seq = Tensor::matrix(5, 2, rows.iter().flatten().copied().collect()).unwrap();
        let out = bilstm_forward(&seq, &p, &p).unwrap();
        for t in 0..5 {
            let a = out.row(t);
            let b = out.row(4 - t);
            for j in 0..3 {
                assert!((a[j] - b[3 + j]).abs() < 1e-14);
                assert!((a[3 + j] - b[j]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn bilstm_zero_weights_zero_output() {
        let p = LstmCellParams::zeros(2, 3);
        let seq = Tensor::matrix(4, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]).unwrap();
        let out = bilstm_forward(&seq, &p, &p).unwrap();
        assert_eq!(out.shape(), [4, 6]);
        assert!(out.data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn attention_single_key_returns_value() {
        let q = Tensor::matrix(1, 2, vec![0.3, 2.0]).unwrap();
        let k = Tensor::matrix(1, 2, vec![-1.0, 0.5]).unwrap();
        let v = Tensor::matrix(1, 2, vec![7.0, -3.0]).unwrap();
        let (out, w) = attention_forward(&q, &k, &v, None).unwrap();
        assert_eq!(out.data(), v.data());
        assert_eq!(w.data(), [1.0]);
    }

    #[test]
    fn orthogonal_query_averages_values() {
        let q = Tensor::matrix(1, 2, vec![1.0, 0.0]).unwrap();
        let k = Tensor::matrix(3, 2, vec![0.0, 1.0, 0.0, -2.0, 0.0, 5.0]).unwrap();
        let v = Tensor::matrix(3, 2, vec![1.0, 2.0, 3.0, 4.0, 8.0, 0.0]).unwrap();
        let (out, _) = attention_forward(&q, &k, &v, None).unwrap();
        assert!((out.data()[0] - 4.0).abs() < 1e-12);
        assert!((out.data()[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn masked_keys_get_no_weight() {
        let mut rng = rng_from_seed(1);
        let q = crate::nn::params::uniform(&mut rng, 1.0, &[3, 4]);
        let k = crate::nn::params::uniform(&mut rng, 1.0, &[3, 4]);
        let v = crate::nn::params::uniform(&mut rng, 1.0, &[3, 4]);
        let (_, w) = attention_forward(&q, &k, &v, Some(&[true, false, true])).unwrap();
        for r in 0..3 {
            assert_eq!(w.get(r, 1), 0.0);
        }
        assert!(attention_forward(&q, &k, &v, Some(&[true])).is_err());
    }

    proptest! {
        #[test]
        fn attention_rows_sum_to_one(seed: u64, t in 1usize..6, d in 1usize..5) {
            let mut rng = rng_from_seed(seed);
            let q = crate::nn::params::uniform(&mut rng, 3.0, &[t, d]);
            let k = crate::nn::params::uniform(&mut rng, 3.0, &[t, d]);
            let v = crate::nn::params::uniform(&mut rng, 3.0, &[t, d]);
            let (_, w) = attention_forward(&q, &k, &v, None).unwrap();
            for r in 0..t {
                prop_assert!((w.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }

        #[test]
        fn lstm_hidden_is_bounded(seed: u64) {
            let mut rng = rng_from_seed(seed);
            let p = LstmCellParams {
                w: crate::nn::params::uniform(&mut rng, 5.0, &[3, 8]),
                u: crate::nn::params::uniform(&mut rng, 5.0, &[2, 8]),
                b: crate::nn::params::uniform(&mut rng, 5.0, &[8]),
                hidden: 2,
            };
            let x = crate::nn::params::uniform(&mut rng, 10.0, &[3]);
            let h = crate::nn::params::uniform(&mut rng, 1.0, &[2]);
            let c = crate::nn::params::uniform(&mut rng, 10.0, &[2]);
            let (h1, c1) = lstm_cell_forward(&x, &h, &c, &p).unwrap();
            prop_assert!(h1.data().iter().all(|v| v.abs() <= 1.0));
            prop_assert!(c1.is_finite());
            let again = lstm_cell_forward(&x, &h, &c, &p).unwrap();
            prop_assert_eq!(again.0, h1);
        }
    }
}
