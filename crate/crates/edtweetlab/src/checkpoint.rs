//! Binary model container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic    8 bytes  "EDTWLAB\0"
//! version  u32      currently 1
//! meta     u32 length + UTF-8 `key=value` lines (model kind and config)
//! vocab    u32 length + UTF-8: `n_docs` line, then `term<TAB>df` lines
//! count    u32 number of tensors
//! tensor   u32 name length, name, u32 rank, u64 per dimension,
//!          then every element as an f64
//! ```
//!
//! Forests are stored as one `[nodes × 5]` tensor per tree with columns
//! feature (-1 for leaves), threshold, left, right, value.

use std::collections::BTreeMap;
use std::path::Path;

use edtweetlab_core::features::Vocabulary;
use edtweetlab_core::models::{
    Criterion, DecisionTree, Forest, ForestConfig, MaxFeatures, ModelBody, ModelConfig, ModelKind, RecurrentConfig, TrainedModel,
    TransformerConfig, TreeNode,
};
use edtweetlab_core::nn::{ParamSet, Tensor};

use crate::error::{write_atomic, AppError, Result};

pub const MAGIC: &[u8; 8] = b"EDTWLAB\0";
pub const VERSION: u32 = 1;

fn config_pairs(model: &TrainedModel) -> Vec<(&'static str, String)> {
    let mut m = vec![("kind", model.kind.to_string())];
    match &model.config {
        ModelConfig::Forest(c) => {
            m.push(("criterion", c.criterion.to_string()));
            m.push(("max_depth", c.max_depth.to_string()));
            m.push(("max_features", c.max_features.to_string()));
            m.push(("n_estimators", c.n_estimators.to_string()));
            m.push(("seed", c.seed.to_string()));
            if let ModelBody::Forest(f) = &model.body {
                m.push(("n_features", f.n_features().to_string()));
            }
        }
        ModelConfig::Recurrent(c) => {
            m.push(("embed_dim", c.embed_dim.to_string()));
            m.push(("hidden_dim", c.hidden_dim.to_string()));
            m.push(("bidirectional", c.bidirectional.to_string()));
            m.push(("lr", c.lr.to_string()));
            m.push(("batch_size", c.batch_size.to_string()));
            m.push(("epochs", c.epochs.to_string()));
            m.push(("dropout", c.dropout.to_string()));
            m.push(("seed", c.seed.to_string()));
        }
        ModelConfig::Transformer(c) => {
            m.push(("layers", c.layers.to_string()));
            m.push(("heads", c.heads.to_string()));
            m.push(("d_model", c.d_model.to_string()));
            m.push(("ff_dim", c.ff_dim.to_string()));
            m.push(("max_len", c.max_len.to_string()));
            m.push(("lr", c.lr.to_string()));
            m.push(("batch_size", c.batch_size.to_string()));
            m.push(("epochs", c.epochs.to_string()));
            m.push(("paper_protocol", c.paper_protocol.to_string()));
            m.push(("seed", c.seed.to_string()));
        }
    }
    m
}

fn tree_tensor(t: &DecisionTree) -> Tensor {
    let data = t
        .nodes()
        .iter()
        .flat_map(|n| [n.feature as f64, n.threshold, f64::from(n.left), f64::from(n.right), n.value])
        .collect();
    Tensor::matrix(t.nodes().len(), 5, data).expect("shape matches data")
}

fn vocab_text(v: &Vocabulary) -> String {
    let mut s = format!("{}\n", v.n_docs());
    for (t, df) in v.terms().iter().zip(v.doc_freqs()) {
        s.push_str(&format!("{t}\t{df}\n"));
    }
    s
}

fn put_blob(out: &mut Vec<u8>, bytes: &[u8]) {
    out.extend_from_slice(&(bytes.len() as u32).to_le_bytes());
    out.extend_from_slice(bytes);
}

pub fn encode(model: &TrainedModel) -> Result<Vec<u8>> {
    model.validate()?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let meta: String = config_pairs(model).into_iter().map(|(k, v)| format!("{k}={v}\n")).collect();
    put_blob(&mut out, meta.as_bytes());
    put_blob(&mut out, model.vocab.as_ref().map(vocab_text).unwrap_or_default().as_bytes());
    let tensors: Vec<(String, Tensor)> = match &model.body {
        ModelBody::Forest(f) => f.trees().iter().enumerate().map(|(i, t)| (format!("tree{i}"), tree_tensor(t))).collect(),
        ModelBody::Neural(p) => p.iter().map(|(n, t)| (n.to_string(), t.clone())).collect(),
    };
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, t) in &tensors {
        put_blob(&mut out, name.as_bytes());
        out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &x in t.data() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        let s = self.bytes.get(self.pos..end)?;
        self.pos = end;
        Some(s)
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }

    fn u64(&mut self) -> Option<u64> {
        self.take(8).map(|b| u64::from_le_bytes(b.try_into().unwrap()))
    }

    fn blob(&mut self) -> Option<&'a str> {
        let n = self.u32()? as usize;
        std::str::from_utf8(self.take(n)?).ok()
    }
}

struct Meta<'a> {
    map: BTreeMap<&'a str, &'a str>,
}

impl<'a> Meta<'a> {
    fn parse(text: &'a str) -> Option<Self> {
        let map = text.lines().map(|l| l.split_once('=')).collect::<Option<_>>()?;
        Some(Meta { map })
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> std::result::Result<T, String> {
        let raw = self.map.get(key).ok_or_else(|| format!("missing {key}"))?;
        raw.parse().map_err(|_| format!("bad {key} {raw:?}"))
    }
}

fn parse_vocab(text: &str) -> std::result::Result<Option<Vocabulary>, String> {
    let mut lines = text.lines();
    let Some(first) = lines.next() else { return Ok(None) };
    let n_docs = first.parse().map_err(|_| "bad vocabulary header".to_string())?;
    let mut terms = Vec::new();
    let mut dfs = Vec::new();
    for l in lines {
        let (t, df) = l.split_once('\t').ok_or("bad vocabulary line")?;
        terms.push(t.to_string());
        dfs.push(df.parse().map_err(|_| "bad document frequency".to_string())?);
    }
    Vocabulary::from_parts(terms, dfs, n_docs).map(Some).map_err(|e| e.to_string())
}

fn tree_from_tensor(t: &Tensor, n_features: usize) -> std::result::Result<DecisionTree, String> {
    if t.shape().len() != 2 || t.cols() != 5 {
        return Err("tree tensor must be [nodes x 5]".into());
    }
    let nodes = (0..t.rows())
        .map(|r| {
            let v = t.row(r);
            TreeNode { feature: v[0] as i64, threshold: v[1], left: v[2] as u32, right: v[3] as u32, value: v[4] }
        })
        .collect();
    DecisionTree::from_nodes(nodes, n_features).map_err(|e| e.to_string())
}

fn decode_inner(bytes: &[u8]) -> std::result::Result<TrainedModel, String> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8) != Some(MAGIC.as_slice()) {
        return Err("not a model checkpoint".into());
    }
    let version = r.u32().ok_or("truncated header")?;
    if version != VERSION {
        return Err(format!("unsupported checkpoint version {version}"));
    }
    let meta = Meta::parse(r.blob().ok_or("truncated metadata")?).ok_or("bad metadata")?;
    let vocab = parse_vocab(r.blob().ok_or("truncated vocabulary")?)?;
    let count = r.u32().ok_or("truncated tensor count")?;
    let mut tensors = Vec::new();
    for _ in 0..count {
        let name = r.blob().ok_or("truncated tensor name")?.to_string();
        let rank = r.u32().ok_or("truncated tensor rank")?;
        let shape = (0..rank).map(|_| r.u64().map(|d| d as usize)).collect::<Option<Vec<_>>>().ok_or("truncated shape")?;
        let len = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).ok_or("tensor too large")?;
        let raw = r.take(len.checked_mul(8).ok_or("tensor too large")?).ok_or("truncated tensor data")?;
        let data = raw.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect();
        tensors.push((name, Tensor::new(shape, data).map_err(|e| e.to_string())?));
    }
    if r.pos != bytes.len() {
        return Err("trailing bytes after tensors".into());
    }
    let kind: ModelKind = meta.get("kind")?;
    let seed = meta.get("seed")?;
    let (body, config) = match kind {
        ModelKind::Forest => {
            let n_features = meta.get("n_features")?;
            let trees = tensors.iter().map(|(_, t)| tree_from_tensor(t, n_features)).collect::<std::result::Result<Vec<_>, _>>()?;
            let cfg = ForestConfig {
                criterion: meta.get::<Criterion>("criterion")?,
                max_depth: meta.get("max_depth")?,
                max_features: meta.get::<MaxFeatures>("max_features")?,
                n_estimators: meta.get("n_estimators")?,
                seed,
            };
            (ModelBody::Forest(Forest::from_trees(trees).map_err(|e| e.to_string())?), ModelConfig::Forest(cfg))
        }
        ModelKind::Rnn | ModelKind::BiLstm => {
            let cfg = RecurrentConfig {
                embed_dim: meta.get("embed_dim")?,
                hidden_dim: meta.get("hidden_dim")?,
                bidirectional: meta.get("bidirectional")?,
                lr: meta.get("lr")?,
                batch_size: meta.get("batch_size")?,
                epochs: meta.get("epochs")?,
                dropout: meta.get("dropout")?,
                seed,
            };
            (ModelBody::Neural(ParamSet::from_pairs(tensors)), ModelConfig::Recurrent(cfg))
        }
        ModelKind::Transformer => {
            let cfg = TransformerConfig {
                layers: meta.get("layers")?,
                heads: meta.get("heads")?,
                d_model: meta.get("d_model")?,
                ff_dim: meta.get("ff_dim")?,
                max_len: meta.get("max_len")?,
                lr: meta.get("lr")?,
                batch_size: meta.get("batch_size")?,
                epochs: meta.get("epochs")?,
                paper_protocol: meta.get("paper_protocol")?,
                seed,
            };
            (ModelBody::Neural(ParamSet::from_pairs(tensors)), ModelConfig::Transformer(cfg))
        }
    };
    let model = TrainedModel { kind, body, config, vocab, train_wall_clock_seconds: None };
    model.validate().map_err(|e| e.to_string())?;
    Ok(model)
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<TrainedModel> {
    decode_inner(bytes).map_err(|m| AppError::format(path, m))
}

pub fn save(model: &TrainedModel, path: &Path) -> Result<()> {
    write_atomic(path, &encode(model)?)
}

pub fn load(path: &Path) -> Result<TrainedModel> {
    let bytes = std::fs::read(path).map_err(|e| AppError::io(path, e))?;
    decode(&bytes, path)
}
