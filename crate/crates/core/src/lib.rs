//! Core of the tweet classification pipeline.
//!
//! Everything in this crate is pure computation over owned data: record
//! filtering, tokenization and near-duplicate removal, TF-IDF and sequence
//! featurization, a small reverse-mode autodiff engine with the recurrent and
//! attention layers the neural classifiers need, the classifier families
//! themselves, and the split/metric machinery used to score them.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, wall-clock
//! timing, thread pools and the command line live in the `edtweetlab` crate.

#![cfg_attr(not(test), no_std)]
#![warn(missing_debug_implementations, rust_2018_idioms)]

extern crate alloc;

pub mod corpus;
pub mod error;
pub mod eval;
pub mod features;
pub mod models;
pub mod nn;
pub mod rng;
pub mod textprep;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::corpus::{Corpus, KeywordSets, RawTweet, SourceSet};
    pub use crate::error::{Error, Result};
    pub use crate::eval::{kfold, metrics, split, Metrics, SplitPlan};
    pub use crate::features::{FeatureMatrix, LabeledTweet, Vocabulary};
    pub use crate::models::{ForestConfig, RecurrentConfig, TrainedModel, TransformerConfig};
    pub use crate::textprep::{CleanTweet, DedupConfig, StopList};
}
