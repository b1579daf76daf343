//! The four classifier families behind one trained-model type.

pub mod config;
pub mod forest;
pub mod grid;
pub mod recurrent;
pub mod train;
pub mod transformer;
pub mod tree;

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

pub use config::{Criterion, ForestConfig, MaxFeatures, RecurrentConfig, TransformerConfig};
pub use forest::{train_bagged_tree, train_forest, Forest};
pub use grid::{grid_search, ForestGrid, GridResult, GridRow};
pub use train::TrainLog;
pub use tree::{gini_impurity, train_tree, DecisionTree, TreeData, TreeNode};

use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, Vocabulary};
use crate::nn::ParamSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ModelKind {
    Forest,
    Rnn,
    BiLstm,
    Transformer,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Forest, ModelKind::Rnn, ModelKind::BiLstm, ModelKind::Transformer];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Forest => "forest",
            ModelKind::Rnn => "rnn",
            ModelKind::BiLstm => "bilstm",
            ModelKind::Transformer => "transformer",
        }
    }

    /// Whether the model consumes TF-IDF rows rather than token sequences.
    pub fn uses_tfidf(self) -> bool {
        self == ModelKind::Forest
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidConfig(alloc::format!("unknown model {s:?} (forest, rnn, bilstm, transformer)")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelConfig {
    Forest(ForestConfig),
    Recurrent(RecurrentConfig),
    Transformer(TransformerConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelBody {
    Forest(Forest),
    Neural(ParamSet),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub probability: f64,
    pub label: bool,
}

impl Prediction {
    /// Exactly 0.5 goes to class 0.
    pub fn from_probability(probability: f64) -> Self {
        Prediction {
            probability,
            label: probability > 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub kind: ModelKind,
    pub body: ModelBody,
    pub config: ModelConfig,
    pub vocab: Option<Vocabulary>,
    /// Set by callers that time training; not part of the model itself.
    pub train_wall_clock_seconds: Option<f64>,
}

impl TrainedModel {
    pub fn forest(forest: Forest, cfg: ForestConfig, vocab: Option<Vocabulary>) -> Self {
        TrainedModel {
            kind: ModelKind::Forest,
            body: ModelBody::Forest(forest),
            config: ModelConfig::Forest(cfg),
            vocab,
            train_wall_clock_seconds: None,
        }
    }

    /// Checks that body, config and kind belong together.
    pub fn validate(&self) -> Result<()> {
        let ok = match (&self.body, &self.config, self.kind) {
            (ModelBody::Forest(_), ModelConfig::Forest(_), ModelKind::Forest) => true,
            (ModelBody::Neural(_), ModelConfig::Recurrent(c), ModelKind::Rnn) => !c.bidirectional,
            (ModelBody::Neural(_), ModelConfig::Recurrent(c), ModelKind::BiLstm) => c.bidirectional,
            (ModelBody::Neural(_), ModelConfig::Transformer(_), ModelKind::Transformer) => true,
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(alloc::format!("{} model has an inconsistent body or config", self.kind)))
        }
    }

    pub fn predict_proba(&self, features: &FeatureMatrix) -> Result<Vec<f64>> {
        self.validate()?;
        match (&self.body, &self.config) {
            (ModelBody::Forest(f), _) => {
                let (n, rows) = features
                    .as_tfidf()
                    .ok_or_else(|| Error::FeatureMismatch("forest needs TF-IDF rows".into()))?;
                if n != f.n_features() {
                    return Err(Error::FeatureMismatch(alloc::format!("model has {} features, input has {n}", f.n_features())));
                }
                Ok(rows.iter().map(|r| f.predict_proba(r)).collect())
            }
            (ModelBody::Neural(p), cfg) => {
                let (_, seqs) = features
                    .as_sequences()
                    .ok_or_else(|| Error::FeatureMismatch(alloc::format!("{} needs token sequences", self.kind)))?;
                match cfg {
                    ModelConfig::Recurrent(c) => recurrent::predict_recurrent(p, c, seqs),
                    ModelConfig::Transformer(c) => transformer::predict_transformer(p, c, seqs),
                    ModelConfig::Forest(_) => unreachable!("validated above"),
                }
            }
        }
    }

    pub fn predict(&self, features: &FeatureMatrix) -> Result<Vec<Prediction>> {
        Ok(self.predict_proba(features)?.into_iter().map(Prediction::from_probability).collect())
    }
}

fn expect_tfidf(x: &FeatureMatrix) -> Result<(usize, &[crate::features::SparseRow])> {
    x.as_tfidf().ok_or_else(|| Error::FeatureMismatch("expected TF-IDF rows".into()))
}

fn expect_sequences(x: &FeatureMatrix) -> Result<&[Vec<u32>]> {
    x.as_sequences()
        .map(|(_, s)| s)
        .ok_or_else(|| Error::FeatureMismatch("expected token sequences".into()))
}

/// Vocabulary size to size embeddings by: the vocabulary if given, else one
/// past the largest id seen.
fn embedding_rows(seqs: &[Vec<u32>], vocab: Option<&Vocabulary>) -> usize {
    match vocab {
        Some(v) => v.len(),
        None => seqs.iter().flatten().max().map_or(crate::features::RESERVED as usize, |&m| m as usize + 1),
    }
}

pub fn fit_forest(x: &FeatureMatrix, y: &[bool], cfg: &ForestConfig, vocab: Option<&Vocabulary>) -> Result<TrainedModel> {
    let (n, rows) = expect_tfidf(x)?;
    let forest = train_forest(rows, y, n, cfg)?;
    Ok(TrainedModel::forest(forest, *cfg, vocab.cloned()))
}

pub fn train_recurrent(x: &FeatureMatrix, y: &[bool], cfg: &RecurrentConfig, vocab: Option<&Vocabulary>) -> Result<TrainedModel> {
    let seqs = expect_sequences(x)?;
    let (params, _) = recurrent::fit_recurrent(seqs, y, embedding_rows(seqs, vocab), cfg)?;
    Ok(TrainedModel {
        kind: if cfg.bidirectional { ModelKind::BiLstm } else { ModelKind::Rnn },
        body: ModelBody::Neural(params),
        config: ModelConfig::Recurrent(*cfg),
        vocab: vocab.cloned(),
        train_wall_clock_seconds: None,
    })
}

pub fn train_transformer(x: &FeatureMatrix, y: &[bool], cfg: &TransformerConfig, vocab: Option<&Vocabulary>) -> Result<TrainedModel> {
    let seqs = expect_sequences(x)?;
    let (params, _) = transformer::fit_transformer(seqs, y, embedding_rows(seqs, vocab), cfg)?;
    Ok(TrainedModel {
        kind: ModelKind::Transformer,
        body: ModelBody::Neural(params),
        config: ModelConfig::Transformer(*cfg),
        vocab: vocab.cloned(),
        train_wall_clock_seconds: None,
    })
}

/// Trains whichever family `config` names. Recurrent configs become `Rnn`
/// or `BiLstm` by their `bidirectional` flag.
pub fn train_model(x: &FeatureMatrix, y: &[bool], config: &ModelConfig, vocab: Option<&Vocabulary>) -> Result<TrainedModel> {
    match config {
        ModelConfig::Forest(c) => fit_forest(x, y, c, vocab),
        ModelConfig::Recurrent(c) => train_recurrent(x, y, c, vocab),
        ModelConfig::Transformer(c) => train_transformer(x, y, c, vocab),
    }
}
