//! Pipeline stages that turn archives into cleaned, labeled text and
//! fitted models.

use std::path::{Path, PathBuf};

use edtweetlab_core::corpus::{corpus_stats, filter_keywords, filter_language, merge_and_dedup, Corpus, CorpusStats, KeywordSets, SourceSet};
use edtweetlab_core::features::{build_vocabulary, encode_sequences, label_distribution, term_frequencies, tfidf, Category, FeatureMatrix, LabelCount, LabeledTweet, Vocabulary};
use edtweetlab_core::models::{train_bagged_tree, Forest, ForestConfig, ModelKind, TrainedModel, TreeData};
use edtweetlab_core::textprep::{dedup_by_similarity, CleanTweet, DedupConfig, Removal, StopList};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::archive::load_archive;
use crate::config::Config;
use crate::error::{read_to_string, AppError, Result};
use crate::tables::{join_labels, read_clean, read_labels};

pub fn load_stoplist(path: Option<&Path>) -> Result<StopList> {
    match path {
        Some(p) => {
            let list = StopList::parse(&read_to_string(p)?);
            if list.is_empty() {
                return Err(AppError::format(p, "stop-word list is empty"));
            }
            Ok(list)
        }
        None => Ok(StopList::english()),
    }
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub corpus: Corpus,
    pub stats: CorpusStats,
    /// Lines skipped as malformed, plus within-file duplicate ids.
    pub rejected: usize,
    /// Tweets dropped for mentioning no keyword phrase.
    pub off_topic: usize,
}

pub fn ingest(inputs: &[(PathBuf, SourceSet)], stop: &StopList, keywords: Option<&KeywordSets>) -> Result<Ingested> {
    if inputs.is_empty() {
        return Err(AppError::Config("no archive files to ingest".into()));
    }
    let mut corpora = Vec::with_capacity(inputs.len());
    let mut rejected = 0;
    for (path, set) in inputs {
        let (c, r) = load_archive(path, *set)?;
        corpora.push(c);
        rejected += r;
    }
    let corpus = filter_language(&merge_and_dedup(&corpora), stop)?;
    let stats = corpus_stats(&corpus);
    let (corpus, off_topic) = match keywords {
        Some(k) => {
            let kept = filter_keywords(&corpus, k);
            let dropped = corpus.len() - kept.len();
            (kept, dropped)
        }
        None => (corpus, 0),
    };
    Ok(Ingested { corpus, stats, rejected, off_topic })
}

#[derive(Debug, Clone)]
pub struct Preprocessed {
    pub clean: Vec<CleanTweet>,
    pub removed: Vec<Removal>,
}

/// Tokenizes, drops near-duplicates on the full token text, then removes
/// stop words.
pub fn preprocess(corpus: &Corpus, stop: &StopList, dedup: &DedupConfig) -> Result<Preprocessed> {
    let tokenized = corpus.tweets().iter().map(|t| CleanTweet::from_text(t.id.clone(), &t.text)).collect();
    let out = dedup_by_similarity(tokenized, dedup)?;
    Ok(Preprocessed {
        clean: out.kept.iter().map(|t| t.without_stopwords(stop)).collect(),
        removed: out.removed,
    })
}

#[derive(Debug, Clone)]
pub struct Labeled {
    pub data: Vec<LabeledTweet>,
    pub unmatched_labels: usize,
    /// SHA-256 over ids, text and labels in order, hex encoded.
    pub hash: String,
}

pub fn dataset_hash(data: &[LabeledTweet]) -> String {
    let mut h = Sha256::new();
    for t in data {
        h.update(t.clean.id.as_bytes());
        h.update(b"\t");
        h.update(t.clean.normalized_text.as_bytes());
        h.update(b"\t");
        h.update(t.labels.map(u8::from));
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

pub fn label(clean: &[CleanTweet], labels: &[(String, [bool; 4])]) -> Result<Labeled> {
    let (data, unmatched_labels) = join_labels(clean, labels);
    if data.is_empty() {
        return Err(AppError::Training("no tweet has a label".into()));
    }
    let hash = dataset_hash(&data);
    Ok(Labeled { data, unmatched_labels, hash })
}

pub fn load_labeled(clean_path: &Path, labels_path: &Path) -> Result<Labeled> {
    let labels = read_labels(labels_path)?;
    label(&read_clean(clean_path)?, &labels)
}

#[derive(Debug, Clone)]
pub struct Stats {
    pub top_terms: Vec<(String, usize)>,
    pub labels: Option<[LabelCount; 4]>,
}

/// Term ranking over the labeled subset when labels are given, otherwise
/// over every cleaned tweet.
pub fn stats(clean: &[CleanTweet], labeled: Option<&[LabeledTweet]>, top_k: usize) -> Result<Stats> {
    let (top_terms, labels) = match labeled {
        Some(data) => {
            let tweets: Vec<CleanTweet> = data.iter().map(|t| t.clean.clone()).collect();
            (term_frequencies(&tweets, top_k)?, Some(label_distribution(data)?))
        }
        None => (term_frequencies(clean, top_k)?, None),
    };
    Ok(Stats { top_terms, labels })
}

/// Model input for one model family, built against `vocab`.
pub fn featurize(kind: ModelKind, tweets: &[CleanTweet], vocab: &Vocabulary, cfg: &Config) -> Result<FeatureMatrix> {
    Ok(match kind {
        ModelKind::Forest => tfidf(tweets, vocab),
        ModelKind::Rnn | ModelKind::BiLstm => encode_sequences(tweets, vocab, cfg.max_len, false)?,
        ModelKind::Transformer => encode_sequences(tweets, vocab, cfg.transformer.max_len, true)?,
    })
}

/// Trees are trained in parallel; each depends only on the seed and its
/// index, so the forest equals the sequential one.
pub fn train_forest_parallel(x: &FeatureMatrix, y: &[bool], cfg: &ForestConfig, vocab: Option<&Vocabulary>) -> Result<TrainedModel> {
    cfg.validate()?;
    let (n, rows) = x.as_tfidf().ok_or_else(|| AppError::Training("forest needs TF-IDF rows".into()))?;
    let data = TreeData::new(rows, y, n)?;
    let trees = (0..cfg.n_estimators)
        .into_par_iter()
        .map(|i| train_bagged_tree(&data, cfg, i))
        .collect::<edtweetlab_core::Result<Vec<_>>>()?;
    Ok(TrainedModel::forest(Forest::from_trees(trees)?, *cfg, vocab.cloned()))
}

/// Fits `kind` with the given seed on already featurized data.
pub fn fit(kind: ModelKind, cat: Category, x: &FeatureMatrix, y: &[bool], vocab: &Vocabulary, cfg: &Config, forest: Option<ForestConfig>, seed: u64) -> Result<TrainedModel> {
    let model = match kind {
        ModelKind::Forest => {
            let fc = ForestConfig { seed, ..forest.unwrap_or_else(|| cfg.forest_for(cat)) };
            train_forest_parallel(x, y, &fc, Some(vocab))
        }
        ModelKind::Rnn => Ok(edtweetlab_core::models::train_recurrent(x, y, &edtweetlab_core::models::RecurrentConfig { seed, ..cfg.rnn }, Some(vocab))?),
        ModelKind::BiLstm => Ok(edtweetlab_core::models::train_recurrent(x, y, &edtweetlab_core::models::RecurrentConfig { seed, ..cfg.bilstm }, Some(vocab))?),
        ModelKind::Transformer => Ok(edtweetlab_core::models::train_transformer(x, y, &edtweetlab_core::models::TransformerConfig { seed, ..cfg.transformer }, Some(vocab))?),
    };
    model.map_err(|e| match e {
        AppError::Core(edtweetlab_core::Error::InvalidConfig(m)) => AppError::Config(m),
        AppError::Core(c) => AppError::training(c),
        other => other,
    })
}

/// Fits one model on every labeled tweet for a category.
pub fn train_full(kind: ModelKind, cat: Category, data: &[LabeledTweet], cfg: &Config, forest: Option<ForestConfig>) -> Result<TrainedModel> {
    let tweets: Vec<CleanTweet> = data.iter().map(|t| t.clean.clone()).collect();
    let y: Vec<bool> = data.iter().map(|t| t.label(cat)).collect();
    let vocab = build_vocabulary(&tweets, cfg.min_df).map_err(AppError::training)?;
    let x = featurize(kind, &tweets, &vocab, cfg)?;
    fit(kind, cat, &x, &y, &vocab, cfg, forest, cfg.seed)
}
