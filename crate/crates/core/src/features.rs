//! Vocabulary, term statistics, TF-IDF rows and padded id sequences.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::textprep::CleanTweet;

pub const PAD: u32 = 0;
pub const UNK: u32 = 1;
pub const CLS: u32 = 2;
/// Number of reserved ids; the first real term gets this id.
pub const RESERVED: u32 = 3;

pub const DEFAULT_MIN_DF: usize = 2;
pub const DEFAULT_MAX_LEN: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    index: BTreeMap<String, u32>,
    terms: Vec<String>,
    doc_freq: Vec<usize>,
    n_docs: usize,
}

impl Vocabulary {
    /// Rebuilds a vocabulary from its terms in id order (reserved ids
    /// excluded) plus their document frequencies.
    pub fn from_parts(terms: Vec<String>, doc_freq: Vec<usize>, n_docs: usize) -> Result<Self> {
        if terms.len() != doc_freq.len() {
            return Err(Error::InvalidArgument("terms and document frequencies differ in length".into()));
        }
        let mut index = BTreeMap::new();
        for (i, t) in terms.iter().enumerate() {
            if index.insert(t.clone(), RESERVED + i as u32).is_some() {
                return Err(Error::InvalidArgument(alloc::format!("duplicate vocabulary term {t:?}")));
            }
        }
        Ok(Vocabulary {
            index,
            terms,
            doc_freq,
            n_docs,
        })
    }

    /// Total ids including the reserved ones.
    pub fn len(&self) -> usize {
        self.terms.len() + RESERVED as usize
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Number of real terms (TF-IDF width).
    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn id(&self, term: &str) -> Option<u32> {
        self.index.get(term).copied()
    }

    pub fn term(&self, id: u32) -> Option<&str> {
        match id {
            PAD => Some("[PAD]"),
            UNK => Some("[UNK]"),
            CLS => Some("[CLS]"),
            _ => self.terms.get((id - RESERVED) as usize).map(String::as_str),
        }
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn doc_freq(&self, id: u32) -> usize {
        id.checked_sub(RESERVED)
            .and_then(|i| self.doc_freq.get(i as usize))
            .copied()
            .unwrap_or(0)
    }

    pub fn doc_freqs(&self) -> &[usize] {
        &self.doc_freq
    }

    /// Smoothed idf: `ln((1 + N) / (1 + df)) + 1`.
    pub fn idf(&self, id: u32) -> f64 {
        let n = self.n_docs as f64;
        let df = self.doc_freq(id) as f64;
        libm::log((1.0 + n) / (1.0 + df)) + 1.0
    }
}

struct TermCounts {
    total: BTreeMap<String, usize>,
    docs: BTreeMap<String, usize>,
}

fn count_terms(tweets: &[CleanTweet]) -> TermCounts {
    let mut total: BTreeMap<String, usize> = BTreeMap::new();
    let mut docs: BTreeMap<String, usize> = BTreeMap::new();
    for t in tweets {
        let mut in_doc: Vec<&str> = Vec::with_capacity(t.tokens.len());
        for tok in &t.tokens {
            *total.entry(tok.clone()).or_default() += 1;
            in_doc.push(tok);
        }
        in_doc.sort_unstable();
        in_doc.dedup();
        for tok in in_doc {
            *docs.entry(tok.to_string()).or_default() += 1;
        }
    }
    TermCounts { total, docs }
}

/// Descending count, ascending term on ties.
fn ranked(counts: BTreeMap<String, usize>) -> Vec<(String, usize)> {
    let mut v: Vec<(String, usize)> = counts.into_iter().collect();
    // BTreeMap iteration is already lexicographic, so a stable sort suffices
    v.sort_by(|a, b| b.1.cmp(&a.1));
    v
}

/// Every term with document frequency ≥ `min_df`, most frequent first.
pub fn build_vocabulary(tweets: &[CleanTweet], min_df: usize) -> Result<Vocabulary> {
    if min_df == 0 {
        return Err(Error::InvalidArgument("min_df must be at least 1".into()));
    }
    let TermCounts { total, docs } = count_terms(tweets);
    let mut terms = Vec::new();
    let mut doc_freq = Vec::new();
    for (term, _) in ranked(total) {
        let df = docs[&term];
        if df >= min_df {
            terms.push(term);
            doc_freq.push(df);
        }
    }
    Vocabulary::from_parts(terms, doc_freq, tweets.len())
}

/// The `top_k` most repeated terms by total occurrences.
pub fn term_frequencies(tweets: &[CleanTweet], top_k: usize) -> Result<Vec<(String, usize)>> {
    if top_k == 0 {
        return Err(Error::InvalidArgument("top_k must be at least 1".into()));
    }
    let mut v = ranked(count_terms(tweets).total);
    v.truncate(top_k);
    Ok(v)
}

/// Sparse row: `(term column, weight)` sorted by column. Columns are
/// vocabulary ids minus [`RESERVED`].
pub type SparseRow = Vec<(u32, f64)>;

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureRows {
    Tfidf { n_features: usize, rows: Vec<SparseRow> },
    Sequences { max_len: usize, rows: Vec<Vec<u32>> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub row_ids: Vec<String>,
    pub rows: FeatureRows,
}

impl FeatureMatrix {
    pub fn len(&self) -> usize {
        self.row_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.row_ids.is_empty()
    }

    pub fn as_tfidf(&self) -> Option<(usize, &[SparseRow])> {
        match &self.rows {
            FeatureRows::Tfidf { n_features, rows } => Some((*n_features, rows)),
            FeatureRows::Sequences { .. } => None,
        }
    }

    pub fn as_sequences(&self) -> Option<(usize, &[Vec<u32>])> {
        match &self.rows {
            FeatureRows::Sequences { max_len, rows } => Some((*max_len, rows)),
            FeatureRows::Tfidf { .. } => None,
        }
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> FeatureMatrix {
        let row_ids = indices.iter().map(|&i| self.row_ids[i].clone()).collect();
        let rows = match &self.rows {
            FeatureRows::Tfidf { n_features, rows } => FeatureRows::Tfidf {
                n_features: *n_features,
                rows: indices.iter().map(|&i| rows[i].clone()).collect(),
            },
            FeatureRows::Sequences { max_len, rows } => FeatureRows::Sequences {
                max_len: *max_len,
                rows: indices.iter().map(|&i| rows[i].clone()).collect(),
            },
        };
        FeatureMatrix { row_ids, rows }
    }
}

/// `tf · idf` per in-vocabulary term, then L2-normalized per row.
pub fn tfidf(tweets: &[CleanTweet], vocab: &Vocabulary) -> FeatureMatrix {
    let rows = tweets
        .iter()
        .map(|t| {
            let mut tf: BTreeMap<u32, usize> = BTreeMap::new();
            for tok in &t.tokens {
                if let Some(id) = vocab.id(tok) {
                    *tf.entry(id).or_default() += 1;
                }
            }
            let mut row: SparseRow = tf
                .into_iter()
                .map(|(id, n)| (id - RESERVED, n as f64 * vocab.idf(id)))
                .collect();
            let norm = libm::sqrt(row.iter().map(|(_, w)| w * w).sum::<f64>());
            if norm > 0.0 {
                for (_, w) in &mut row {
                    *w /= norm;
                }
            }
            row
        })
        .collect();
    FeatureMatrix {
        row_ids: tweets.iter().map(|t| t.id.clone()).collect(),
        rows: FeatureRows::Tfidf {
            n_features: vocab.n_terms(),
            rows,
        },
    }
}

/// Optional CLS, then token ids (UNK for unknown terms), truncated and
/// right-padded to exactly `max_len`.
pub fn encode_sequences(tweets: &[CleanTweet], vocab: &Vocabulary, max_len: usize, with_cls: bool) -> Result<FeatureMatrix> {
    if max_len < 2 {
        return Err(Error::InvalidArgument("max_len must be at least 2".into()));
    }
    let rows = tweets
        .iter()
        .map(|t| {
            let mut row = Vec::with_capacity(max_len);
            if with_cls {
                row.push(CLS);
            }
            row.extend(t.tokens.iter().map(|tok| vocab.id(tok).unwrap_or(UNK)));
            row.truncate(max_len);
            row.resize(max_len, PAD);
            row
        })
        .collect();
    Ok(FeatureMatrix {
        row_ids: tweets.iter().map(|t| t.id.clone()).collect(),
        rows: FeatureRows::Sequences { max_len, rows },
    })
}

/// Binary task index, 0-based: suffers, promotes, informative, scientific.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Category(u8);

impl Category {
    pub const ALL: [Category; 4] = [Category(0), Category(1), Category(2), Category(3)];

    /// From the 1-based number used in files and on the command line.
    pub fn new(number: u8) -> Result<Self> {
        if (1..=4).contains(&number) {
            Ok(Category(number - 1))
        } else {
            Err(Error::InvalidArgument(alloc::format!("category must be 1..=4, got {number}")))
        }
    }

    pub fn number(self) -> u8 {
        self.0 + 1
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn description(self) -> &'static str {
        match self.0 {
            0 => "Having eating disorders or not",
            1 => "Encouraging eating disorders or not",
            2 => "Informative or not",
            _ => "Scientific or not",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledTweet {
    pub clean: CleanTweet,
    pub labels: [bool; 4],
}

impl LabeledTweet {
    pub fn label(&self, c: Category) -> bool {
        self.labels[c.index()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelCount {
    pub positives: usize,
    pub negatives: usize,
    pub fraction: f64,
}

impl LabelCount {
    /// Positive share as a percentage with one decimal.
    pub fn percent(&self) -> f64 {
        libm::round(self.fraction * 1000.0) / 10.0
    }
}

pub fn label_distribution(data: &[LabeledTweet]) -> Result<[LabelCount; 4]> {
    if data.is_empty() {
        return Err(Error::Empty("label distribution of an empty set"));
    }
    let n = data.len();
    Ok(Category::ALL.map(|c| {
        let positives = data.iter().filter(|t| t.label(c)).count();
        LabelCount {
            positives,
            negatives: n - positives,
            fraction: positives as f64 / n as f64,
        }
    }))
}
