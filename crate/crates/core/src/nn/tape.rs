//! Reverse-mode automatic differentiation over a linear tape.
//!
//! Every operation appends a node holding its forward value. `backward`
//! walks the tape once in reverse and accumulates adjoints.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::tensor::{matmul, matmul_at, matmul_bt, Tensor};
use crate::error::{Error, Result};

/// Probabilities are clamped to `[P_CLAMP, 1 - P_CLAMP]` inside the loss.
pub const P_CLAMP: f64 = 1e-7;
const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    MatMulBt(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    AddColumnBias(Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Sigmoid(Var),
    Tanh(Var),
    Gelu(Var),
    SliceCols(Var, usize),
    ConcatCols(Vec<Var>),
    SliceRows(Var, usize),
    ConcatRows(Vec<Var>),
    SoftmaxRows(Var),
    Gather(Var, Vec<u32>),
    LayerNorm { x: Var, gain: Var, xhat: Vec<f64>, rstd: Vec<f64>, bias: Var },
    Blend(Var, Var, Vec<f64>),
    BceMean(Var, Vec<f64>),
    WeightedSum(Var, Vec<f64>),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn mismatch(op: &'static str, a: &Tensor, b: &Tensor) -> Error {
    Error::shape(op, alloc::format!("{:?}", a.shape()), alloc::format!("{:?}", b.shape()))
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + libm::tanh(GELU_C * (x + 0.044715 * x * x * x)))
}

fn gelu_grad(x: f64) -> f64 {
    let u = GELU_C * (x + 0.044715 * x * x * x);
    let t = libm::tanh(u);
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044715 * x * x)
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        debug_assert!(value.data().iter().all(|v| !v.is_nan()), "NaN produced on tape");
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn dims(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.as_matrix()
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.dims(a);
        let (k2, n) = self.dims(b);
        if k != k2 {
            return Err(mismatch("matmul", self.value(a), self.value(b)));
        }
        let out = matmul(self.value(a).data(), self.value(b).data(), m, k, n);
        Ok(self.push(Tensor::matrix(m, n, out)?, Op::MatMul(a, b)))
    }

    /// `a · bᵀ`.
    pub fn matmul_bt(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.dims(a);
        let (n, k2) = self.dims(b);
        if k != k2 {
            return Err(mismatch("matmul_bt", self.value(a), self.value(b)));
        }
        let out = matmul_bt(self.value(a).data(), self.value(b).data(), m, k, n);
        Ok(self.push(Tensor::matrix(m, n, out)?, Op::MatMulBt(a, b)))
    }

    fn zip(&mut self, a: Var, b: Var, op: &'static str, f: impl Fn(f64, f64) -> f64, node: Op) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.as_matrix() != tb.as_matrix() {
            return Err(mismatch(op, ta, tb));
        }
        let (m, n) = ta.as_matrix();
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| f(*x, *y)).collect();
        Ok(self.push(Tensor::matrix(m, n, data)?, node))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip(a, b, "add", |x, y| x + y, Op::Add(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip(a, b, "mul", |x, y| x * y, Op::Mul(a, b))
    }

    /// Adds the single row `bias[1×n]` to every row of `a[m×n]`.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (m, n) = self.dims(a);
        let tb = self.value(bias);
        if tb.len() != n {
            return Err(mismatch("add_row", self.value(a), tb));
        }
        let b = tb.data().to_vec();
        let mut data = self.value(a).data().to_vec();
        for row in data.chunks_mut(n.max(1)) {
            for (x, y) in row.iter_mut().zip(&b) {
                *x += y;
            }
        }
        Ok(self.push(Tensor::matrix(m, n, data)?, Op::AddRow(a, bias)))
    }

    /// Adds a constant per-column offset to every row (key padding masks).
    pub fn add_column_bias(&mut self, a: Var, bias: Vec<f64>) -> Result<Var> {
        let (m, n) = self.dims(a);
        if bias.len() != n {
            return Err(Error::shape("add_column_bias", alloc::format!("{n}"), alloc::format!("{}", bias.len())));
        }
        let mut data = self.value(a).data().to_vec();
        for row in data.chunks_mut(n.max(1)) {
            for (x, y) in row.iter_mut().zip(&bias) {
                *x += y;
            }
        }
        Ok(self.push(Tensor::matrix(m, n, data)?, Op::AddColumnBias(a)))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let t = self.value(a).map(|x| x * s);
        self.push(t, Op::Scale(a, s))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let t = self.value(a).map(sigmoid);
        self.push(t, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let t = self.value(a).map(libm::tanh);
        self.push(t, Op::Tanh(a))
    }

    /// GELU, tanh approximation.
    pub fn gelu(&mut self, a: Var) -> Var {
        let t = self.value(a).map(gelu);
        self.push(t, Op::Gelu(a))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, width: usize) -> Result<Var> {
        let (m, n) = self.dims(a);
        if start + width > n {
            return Err(Error::shape("slice_cols", alloc::format!("{} cols", start + width), alloc::format!("{n}")));
        }
        let src = self.value(a).data();
        let mut data = Vec::with_capacity(m * width);
        for r in 0..m {
            data.extend_from_slice(&src[r * n + start..r * n + start + width]);
        }
        Ok(self.push(Tensor::matrix(m, width, data)?, Op::SliceCols(a, start)))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let m = parts.first().map(|p| self.dims(*p).0).ok_or(Error::Empty("concat_cols"))?;
        let mut widths = Vec::with_capacity(parts.len());
        for p in parts {
            let (r, c) = self.dims(*p);
            if r != m {
                return Err(mismatch("concat_cols", self.value(parts[0]), self.value(*p)));
            }
            widths.push(c);
        }
        let n: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(m * n);
        for r in 0..m {
            for (p, w) in parts.iter().zip(&widths) {
                data.extend_from_slice(&self.value(*p).data()[r * w..(r + 1) * w]);
            }
        }
        Ok(self.push(Tensor::matrix(m, n, data)?, Op::ConcatCols(parts.to_vec())))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, count: usize) -> Result<Var> {
        let (m, n) = self.dims(a);
        if start + count > m {
            return Err(Error::shape("slice_rows", alloc::format!("{} rows", start + count), alloc::format!("{m}")));
        }
        let data = self.value(a).data()[start * n..(start + count) * n].to_vec();
        Ok(self.push(Tensor::matrix(count, n, data)?, Op::SliceRows(a, start)))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let n = parts.first().map(|p| self.dims(*p).1).ok_or(Error::Empty("concat_rows"))?;
        let mut data = Vec::new();
        let mut m = 0;
        for p in parts {
            let (r, c) = self.dims(*p);
            if c != n {
                return Err(mismatch("concat_rows", self.value(parts[0]), self.value(*p)));
            }
            data.extend_from_slice(self.value(*p).data());
            m += r;
        }
        Ok(self.push(Tensor::matrix(m, n, data)?, Op::ConcatRows(parts.to_vec())))
    }

    /// Row-wise softmax with max subtraction. A row that is entirely `-inf`
    /// yields zeros.
    pub fn softmax_rows(&mut self, a: Var) -> Result<Var> {
        let (m, n) = self.dims(a);
        let mut data = self.value(a).data().to_vec();
        for row in data.chunks_mut(n.max(1)) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if max == f64::NEG_INFINITY {
                row.iter_mut().for_each(|x| *x = 0.0);
                continue;
            }
            let mut sum = 0.0;
            for x in row.iter_mut() {
                *x = libm::exp(*x - max);
                sum += *x;
            }
            for x in row.iter_mut() {
                *x /= sum;
            }
        }
        Ok(self.push(Tensor::matrix(m, n, data)?, Op::SoftmaxRows(a)))
    }

    /// Rows of `table` selected by `ids`.
    pub fn gather(&mut self, table: Var, ids: &[u32]) -> Result<Var> {
        let (v, d) = self.dims(table);
        let src = self.value(table).data();
        let mut data = Vec::with_capacity(ids.len() * d);
        for &id in ids {
            let id = id as usize;
            if id >= v {
                return Err(Error::InvalidArgument(alloc::format!("id {id} outside table of {v} rows")));
            }
            data.extend_from_slice(&src[id * d..(id + 1) * d]);
        }
        Ok(self.push(Tensor::matrix(ids.len(), d, data)?, Op::Gather(table, ids.to_vec())))
    }

    /// Per-row normalization followed by the affine `gain`, `bias` rows.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Result<Var> {
        let (m, n) = self.dims(x);
        if self.value(gain).len() != n || self.value(bias).len() != n {
            return Err(mismatch("layer_norm", self.value(x), self.value(gain)));
        }
        let g = self.value(gain).data().to_vec();
        let b = self.value(bias).data().to_vec();
        let src = self.value(x).data();
        let mut xhat = vec![0.0; m * n];
        let mut rstd = vec![0.0; m];
        let mut out = vec![0.0; m * n];
        for r in 0..m {
            let row = &src[r * n..(r + 1) * n];
            let mean = row.iter().sum::<f64>() / n as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            let s = 1.0 / libm::sqrt(var + LN_EPS);
            rstd[r] = s;
            for c in 0..n {
                let h = (row[c] - mean) * s;
                xhat[r * n + c] = h;
                out[r * n + c] = h * g[c] + b[c];
            }
        }
        Ok(self.push(Tensor::matrix(m, n, out)?, Op::LayerNorm { x, gain, xhat, rstd, bias }))
    }

    /// Row `r` becomes `mask[r] * new + (1 - mask[r]) * old`.
    pub fn blend(&mut self, new: Var, old: Var, mask: &[f64]) -> Result<Var> {
        let (m, n) = self.dims(new);
        if self.dims(old) != (m, n) || mask.len() != m {
            return Err(mismatch("blend", self.value(new), self.value(old)));
        }
        let (a, b) = (self.value(new).data(), self.value(old).data());
        let mut data = Vec::with_capacity(m * n);
        for r in 0..m {
            let k = mask[r];
            for c in 0..n {
                data.push(k * a[r * n + c] + (1.0 - k) * b[r * n + c]);
            }
        }
        Ok(self.push(Tensor::matrix(m, n, data)?, Op::Blend(new, old, mask.to_vec())))
    }

    /// Mean binary cross-entropy of probabilities `p[n×1]` against 0/1 targets.
    pub fn bce_mean(&mut self, p: Var, targets: &[f64]) -> Result<Var> {
        let tp = self.value(p);
        if tp.len() != targets.len() || targets.is_empty() {
            return Err(Error::shape("bce_mean", alloc::format!("{}", targets.len()), alloc::format!("{:?}", tp.shape())));
        }
        let total: f64 = tp.data().iter().zip(targets).map(|(&p, &y)| bce_loss(p, y)).sum();
        let loss = total / targets.len() as f64;
        Ok(self.push(Tensor::scalar(loss), Op::BceMean(p, targets.to_vec())))
    }

    /// `Σ weights ⊙ a` as a scalar; a generic probe loss for gradient checks.
    pub fn weighted_sum(&mut self, a: Var, weights: &[f64]) -> Result<Var> {
        let t = self.value(a);
        if t.len() != weights.len() {
            return Err(Error::shape("weighted_sum", alloc::format!("{}", t.len()), alloc::format!("{}", weights.len())));
        }
        let s = t.data().iter().zip(weights).map(|(x, w)| x * w).sum();
        Ok(self.push(Tensor::scalar(s), Op::WeightedSum(a, weights.to_vec())))
    }

    /// Adjoints of every node with respect to the scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.value(loss).len() != 1 {
            return Err(Error::InvalidArgument(String::from("backward needs a scalar loss")));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            let y = &node.value;
            let (m, n) = y.as_matrix();
            let send = |grads: &mut Vec<Option<Tensor>>, v: Var, t: Tensor| match &mut grads[v.0] {
                Some(acc) => acc.add_assign(&t),
                slot @ None => {
                    let shape = self.nodes[v.0].value.shape().to_vec();
                    *slot = Some(t.reshape(&shape).expect("gradient shape matches value"));
                }
            };
            let gd = g.data();
            match &node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    let k = ta.cols();
                    let da = matmul_bt(gd, tb.data(), m, n, k);
                    let db = matmul_at(ta.data(), gd, m, k, n);
                    send(&mut grads, *a, Tensor::matrix(m, k, da)?);
                    send(&mut grads, *b, Tensor::matrix(k, n, db)?);
                }
                Op::MatMulBt(a, b) => {
                    // y[m×n] = a[m×k] · b[n×k]ᵀ
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    let k = ta.cols();
                    let da = matmul(gd, tb.data(), m, n, k);
                    let db = matmul_at(gd, ta.data(), m, n, k);
                    send(&mut grads, *a, Tensor::matrix(m, k, da)?);
                    send(&mut grads, *b, Tensor::matrix(n, k, db)?);
                }
                Op::Add(a, b) => {
                    send(&mut grads, *a, g.clone());
                    send(&mut grads, *b, g);
                }
                Op::AddRow(a, b) => {
                    let mut db = vec![0.0; n];
                    for row in gd.chunks(n.max(1)) {
                        for (acc, v) in db.iter_mut().zip(row) {
                            *acc += v;
                        }
                    }
                    send(&mut grads, *a, g);
                    send(&mut grads, *b, Tensor::vector(db));
                }
                Op::AddColumnBias(a) => send(&mut grads, *a, g),
                Op::Mul(a, b) => {
                    let (ta, tb) = (self.value(*a).data(), self.value(*b).data());
                    let da = gd.iter().zip(tb).map(|(g, b)| g * b).collect();
                    let db = gd.iter().zip(ta).map(|(g, a)| g * a).collect();
                    send(&mut grads, *a, Tensor::matrix(m, n, da)?);
                    send(&mut grads, *b, Tensor::matrix(m, n, db)?);
                }
                Op::Scale(a, s) => send(&mut grads, *a, g.map(|v| v * s)),
                Op::Sigmoid(a) => {
                    let d = gd.iter().zip(y.data()).map(|(g, y)| g * y * (1.0 - y)).collect();
                    send(&mut grads, *a, Tensor::matrix(m, n, d)?);
                }
                Op::Tanh(a) => {
                    let d = gd.iter().zip(y.data()).map(|(g, y)| g * (1.0 - y * y)).collect();
                    send(&mut grads, *a, Tensor::matrix(m, n, d)?);
                }
                Op::Gelu(a) => {
                    let x = self.value(*a).data();
                    let d = gd.iter().zip(x).map(|(g, x)| g * gelu_grad(*x)).collect();
                    send(&mut grads, *a, Tensor::matrix(m, n, d)?);
                }
                Op::SliceCols(a, start) => {
                    let (am, an) = self.dims(*a);
                    let mut d = vec![0.0; am * an];
                    for r in 0..m {
                        d[r * an + start..r * an + start + n].copy_from_slice(&gd[r * n..(r + 1) * n]);
                    }
                    send(&mut grads, *a, Tensor::matrix(am, an, d)?);
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let w = self.dims(*p).1;
                        let mut d = Vec::with_capacity(m * w);
                        for r in 0..m {
                            d.extend_from_slice(&gd[r * n + offset..r * n + offset + w]);
                        }
                        offset += w;
                        send(&mut grads, *p, Tensor::matrix(m, w, d)?);
                    }
                }
                Op::SliceRows(a, start) => {
                    let (am, an) = self.dims(*a);
                    let mut d = vec![0.0; am * an];
                    d[start * an..(start + m) * an].copy_from_slice(gd);
                    send(&mut grads, *a, Tensor::matrix(am, an, d)?);
                }
                Op::ConcatRows(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let r = self.dims(*p).0;
                        let d = gd[offset * n..(offset + r) * n].to_vec();
                        offset += r;
                        send(&mut grads, *p, Tensor::matrix(r, n, d)?);
                    }
                }
                Op::SoftmaxRows(a) => {
                    let mut d = vec![0.0; m * n];
                    for r in 0..m {
                        let yr = &y.data()[r * n..(r + 1) * n];
                        let gr = &gd[r * n..(r + 1) * n];
                        let dot: f64 = yr.iter().zip(gr).map(|(y, g)| y * g).sum();
                        for c in 0..n {
                            d[r * n + c] = yr[c] * (gr[c] - dot);
                        }
                    }
                    send(&mut grads, *a, Tensor::matrix(m, n, d)?);
                }
                Op::Gather(table, ids) => {
                    let (v, dcols) = self.dims(*table);
                    let mut d = vec![0.0; v * dcols];
                    for (r, &id) in ids.iter().enumerate() {
                        let id = id as usize;
                        for c in 0..dcols {
                            d[id * dcols + c] += gd[r * dcols + c];
                        }
                    }
                    send(&mut grads, *table, Tensor::matrix(v, dcols, d)?);
                }
                Op::LayerNorm { x, gain, xhat, rstd, bias } => {
                    let gv = self.value(*gain).data();
                    let mut dg = vec![0.0; n];
                    let mut db = vec![0.0; n];
                    let mut dx = vec![0.0; m * n];
                    for r in 0..m {
                        let gr = &gd[r * n..(r + 1) * n];
                        let hr = &xhat[r * n..(r + 1) * n];
                        let mut sum_dh = 0.0;
                        let mut sum_dh_h = 0.0;
                        for c in 0..n {
                            dg[c] += gr[c] * hr[c];
                            db[c] += gr[c];
                            let dh = gr[c] * gv[c];
                            sum_dh += dh;
                            sum_dh_h += dh * hr[c];
                        }
                        let nf = n as f64;
                        for c in 0..n {
                            let dh = gr[c] * gv[c];
                            dx[r * n + c] = rstd[r] / nf * (nf * dh - sum_dh - hr[c] * sum_dh_h);
                        }
                    }
                    send(&mut grads, *x, Tensor::matrix(m, n, dx)?);
                    send(&mut grads, *gain, Tensor::vector(dg));
                    send(&mut grads, *bias, Tensor::vector(db));
                }
                Op::Blend(new, old, mask) => {
                    let mut dn = vec![0.0; m * n];
                    let mut dold = vec![0.0; m * n];
                    for r in 0..m {
                        for c in 0..n {
                            dn[r * n + c] = mask[r] * gd[r * n + c];
                            dold[r * n + c] = (1.0 - mask[r]) * gd[r * n + c];
                        }
                    }
                    send(&mut grads, *new, Tensor::matrix(m, n, dn)?);
                    send(&mut grads, *old, Tensor::matrix(m, n, dold)?);
                }
                Op::BceMean(p, targets) => {
                    let tp = self.value(*p);
                    let scale = gd[0] / targets.len() as f64;
                    let d = tp
                        .data()
                        .iter()
                        .zip(targets)
                        .map(|(&p, &y)| {
                            if p < P_CLAMP || p > 1.0 - P_CLAMP {
                                0.0
                            } else {
                                scale * ((1.0 - y) / (1.0 - p) - y / p)
                            }
                        })
                        .collect();
                    let (pm, pn) = tp.as_matrix();
                    send(&mut grads, *p, Tensor::matrix(pm, pn, d)?);
                }
                Op::WeightedSum(a, w) => {
                    let (am, an) = self.dims(*a);
                    let d = w.iter().map(|w| w * gd[0]).collect();
                    send(&mut grads, *a, Tensor::matrix(am, an, d)?);
                }
            }
        }
        Ok(Gradients { grads })
    }
}

/// Binary cross-entropy of one probability against a 0/1 target, with the
/// probability clamped to `[1e-7, 1 - 1e-7]`.
pub fn bce_loss(p: f64, y: f64) -> f64 {
    let p = p.clamp(P_CLAMP, 1.0 - P_CLAMP);
    -(y * libm::log(p) + (1.0 - y) * libm::log(1.0 - p))
}

#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient of `v`, or zeros shaped like `like` when `v` did not
    /// influence the loss.
    pub fn take_or_zeros(&mut self, v: Var, like: &Tensor) -> Tensor {
        self.grads
            .get_mut(v.0)
            .and_then(Option::take)
            .unwrap_or_else(|| Tensor::zeros(like.shape()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::gradient_check;
    use crate::nn::params::uniform;
    use crate::rng::rng_from_seed;

    #[test]
    fn bce_examples() {
        assert!((bce_loss(0.5, 1.0) - core::f64::consts::LN_2).abs() < 1e-15);
        assert!((bce_loss(0.5, 0.0) - core::f64::consts::LN_2).abs() < 1e-15);
        assert!(bce_loss(1.0, 1.0) < 1e-6);
        assert!(bce_loss(1.0, 1.0) > 0.0);
        assert!((bce_loss(0.9, 0.0) - 2.302585).abs() < 1e-6);
        assert!(bce_loss(0.0, 1.0).is_finite());
    }

    #[test]
    fn softmax_handles_large_and_masked_logits() {
        let mut t = Tape::new();
        let a = t.leaf(Tensor::matrix(2, 3, vec![1000.0, 1001.0, 999.0, f64::NEG_INFINITY, 0.0, f64::NEG_INFINITY]).unwrap());
        let s = t.softmax_rows(a).unwrap();
        let v = t.value(s);
        assert!(v.is_finite());
        assert!((v.row(0).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(v.row(1), [0.0, 1.0, 0.0]);
    }

    #[test]
    fn backward_needs_scalar() {
        let mut t = Tape::new();
        let a = t.leaf(Tensor::zeros(&[2]));
        assert!(t.backward(a).is_err());
    }

    #[test]
    fn mismatched_shapes_are_errors() {
        let mut t = Tape::new();
        let a = t.leaf(Tensor::zeros(&[2, 3]));
        let b = t.leaf(Tensor::zeros(&[2, 3]));
        assert!(t.matmul(a, b).is_err());
        let c = t.leaf(Tensor::zeros(&[3, 2]));
        assert!(t.add(a, c).is_err());
    }

    /// Every op the models use, checked through one composite probe.
    #[test]
    fn composite_gradient_check() {
        for seed in 0..5 {
            let mut rng = rng_from_seed(seed);
            let params = vec![
                uniform(&mut rng, 1.0, &[3, 4]),
                uniform(&mut rng, 1.0, &[4, 4]),
                uniform(&mut rng, 1.0, &[4]),
                uniform(&mut rng, 1.0, &[4]),
                uniform(&mut rng, 1.0, &[5, 4]),
            ];
            let probe: Vec<f64> = (0..3 * 2).map(|i| (i as f64 * 0.37).sin()).collect();
            let f = |p: &[Tensor]| -> Result<(f64, Vec<Tensor>)> {
                let mut t = Tape::new();
                let v: Vec<Var> = p.iter().map(|x| t.leaf(x.clone())).collect();
                let h = t.matmul(v[0], v[1])?;
                let h = t.add_row(h, v[2])?;
                let g = t.gelu(h);
                let ln = t.layer_norm(g, v[3], v[2])?;
                let emb = t.gather(v[4], &[1, 3, 1])?;
                let mixed = t.mul(ln, emb)?;
                let s = t.matmul_bt(mixed, h)?;
                let s = t.add_column_bias(s, vec![0.0, f64::NEG_INFINITY, 0.5])?;
                let w = t.softmax_rows(s)?;
                let o = t.matmul(w, emb)?;
                let a = t.slice_cols(o, 1, 2)?;
                let b = t.tanh(a);
                let r0 = t.slice_rows(h, 0, 3)?;
                let r1 = t.slice_cols(r0, 0, 2)?;
                let r1 = t.sigmoid(r1);
                let blended = t.blend(b, r1, &[1.0, 0.0, 1.0])?;
                let cat = t.concat_cols(&[blended, r1])?;
                let cat = t.concat_rows(&[cat, cat])?;
                let cat = t.scale(cat, 0.7);
                let head = t.slice_cols(cat, 0, 2)?;
                let loss = t.weighted_sum(head, &[probe.clone(), probe.clone()].concat())?;
                // keep every layer-norm output in play so no gradient is structurally zero
                let ln_probe: Vec<f64> = (0..12).map(|i| (i as f64 * 0.91).cos()).collect();
                let ln_loss = t.weighted_sum(ln, &ln_probe)?;
                let loss = t.add(loss, ln_loss)?;
                let p2 = t.sigmoid(r1);
                let bce = t.bce_mean(p2, &[1.0, 0.0, 1.0, 0.0, 1.0, 1.0])?;
                let total = t.add(loss, bce)?;
                let mut grads = t.backward(total)?;
                let gs = v.iter().zip(p).map(|(var, x)| grads.take_or_zeros(*var, x)).collect();
                Ok((t.value(total).data()[0], gs))
            };
            let err = gradient_check(&f, &params, 1e-5, None, &mut rng).unwrap();
            assert!(err < 1e-4, "seed {seed}: {err}");
        }
    }
}
