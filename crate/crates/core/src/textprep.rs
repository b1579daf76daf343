//! Tokenization, stop-word removal and near-duplicate filtering.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

const SHIPPED_STOPWORDS: &str = include_str!("../data/stopwords_en.txt");

/// An ordered stop-word list. Order matters: the language heuristic only
/// looks at the head of the list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StopList {
    words: Vec<String>,
    set: BTreeSet<String>,
}

impl StopList {
    /// Parses one token per line. Blank lines and `#` comments are skipped,
    /// repeated entries keep their first position.
    pub fn parse(text: &str) -> Self {
        let mut words = Vec::new();
        let mut set = BTreeSet::new();
        for line in text.lines() {
            let w = line.trim();
            if w.is_empty() || w.starts_with('#') {
                continue;
            }
            let w = w.to_lowercase();
            if set.insert(w.clone()) {
                words.push(w);
            }
        }
        StopList { words, set }
    }

    /// The list shipped in `data/stopwords_en.txt`.
    pub fn english() -> Self {
        Self::parse(SHIPPED_STOPWORDS)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.set.contains(token)
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// The first `n` entries as a set.
    pub fn top(&self, n: usize) -> BTreeSet<&str> {
        self.words.iter().take(n).map(String::as_str).collect()
    }
}

/// A tokenized tweet. `normalized_text` is always `tokens.join(" ")`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CleanTweet {
    pub id: String,
    pub tokens: Vec<String>,
    pub normalized_text: String,
}

impl CleanTweet {
    pub fn from_tokens(id: impl Into<String>, tokens: Vec<String>) -> Self {
        let normalized_text = tokens.join(" ");
        CleanTweet {
            id: id.into(),
            tokens,
            normalized_text,
        }
    }

    /// Tokenizes `text` and wraps the result.
    pub fn from_text(id: impl Into<String>, text: &str) -> Self {
        Self::from_tokens(id, tokenize(text))
    }

    pub fn without_stopwords(&self, stop: &StopList) -> Self {
        Self::from_tokens(self.id.clone(), remove_stopwords(&self.tokens, stop))
    }
}

/// Lowercases, drops URLs, strips leading `#`/`@` and every remaining
/// non-alphanumeric character. Empty tokens are dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .filter_map(|raw| {
            let lower = raw.to_lowercase();
            if lower.starts_with("http://") || lower.starts_with("https://") {
                return None;
            }
            let token: String = lower
                .trim_start_matches(['#', '@'])
                .chars()
                .filter(|c| c.is_alphanumeric())
                .collect();
            (!token.is_empty()).then_some(token)
        })
        .collect()
}

pub fn remove_stopwords(tokens: &[String], stop: &StopList) -> Vec<String> {
    tokens
        .iter()
        .filter(|t| !stop.contains(t))
        .cloned()
        .collect()
}

/// Character-level edit distance, two-row dynamic programme.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    levenshtein_chars(&a, &b, usize::MAX).unwrap_or(usize::MAX)
}

/// Edit distance, or `None` as soon as it provably exceeds `limit`.
fn levenshtein_chars(a: &[char], b: &[char], limit: usize) -> Option<usize> {
    if a.len().abs_diff(b.len()) > limit {
        return None;
    }
    if a.is_empty() {
        return Some(b.len());
    }
    if b.is_empty() {
        return Some(a.len());
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = alloc::vec![0usize; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        let mut row_min = cur[0];
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            let del = prev[j + 1] + 1;
            let ins = cur[j] + 1;
            let v = sub.min(del).min(ins);
            cur[j + 1] = v;
            row_min = row_min.min(v);
        }
        // every path to the final cell crosses this row
        if row_min > limit {
            return None;
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    let d = prev[b.len()];
    (d <= limit).then_some(d)
}

fn ratio(dist: usize, longest: usize) -> f64 {
    if longest == 0 {
        1.0
    } else {
        (longest - dist) as f64 / longest as f64
    }
}

/// Normalized Levenshtein similarity `1 - d / max(|a|, |b|)` over chars.
/// Two empty strings are identical (similarity 1).
pub fn similarity(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let d = levenshtein_chars(&a, &b, usize::MAX).unwrap_or(usize::MAX);
    ratio(d, a.len().max(b.len()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimilarityMeasure {
    NormalizedLevenshtein,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DedupConfig {
    pub threshold: f64,
    pub measure: SimilarityMeasure,
}

impl Default for DedupConfig {
    fn default() -> Self {
        DedupConfig {
            threshold: 0.80,
            measure: SimilarityMeasure::NormalizedLevenshtein,
        }
    }
}

impl DedupConfig {
    pub fn with_threshold(threshold: f64) -> Result<Self> {
        let cfg = DedupConfig {
            threshold,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(Error::InvalidConfig(alloc::format!(
                "similarity threshold must lie in (0, 1], got {}",
                self.threshold
            )));
        }
        Ok(())
    }
}

/// A tweet dropped by the near-duplicate filter and the kept tweet that
/// triggered the removal.
#[derive(Debug, Clone, PartialEq)]
pub struct Removal {
    pub removed_id: String,
    pub kept_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DedupOutcome {
    pub kept: Vec<CleanTweet>,
    pub removed: Vec<Removal>,
}

/// Greedy forward scan: a tweet is dropped when its similarity to some
/// earlier kept tweet is strictly above the threshold. The first such kept
/// tweet (in input order) is logged as the trigger.
pub fn dedup_by_similarity(tweets: Vec<CleanTweet>, cfg: &DedupConfig) -> Result<DedupOutcome> {
    cfg.validate()?;
    let mut kept: Vec<CleanTweet> = Vec::new();
    let mut kept_chars: Vec<Vec<char>> = Vec::new();
    let mut removed = Vec::new();

    for tweet in tweets {
        let chars: Vec<char> = tweet.normalized_text.chars().collect();
        let trigger = kept_chars.iter().enumerate().find_map(|(k, other)| {
            let longest = chars.len().max(other.len());
            // similarity > t  <=>  d < (1 - t) * longest
            let limit = max_distance_above(cfg.threshold, longest)?;
            let d = levenshtein_chars(&chars, other, limit)?;
            let s = ratio(d, longest);
            (s > cfg.threshold).then_some((k, s))
        });
        match trigger {
            Some((k, score)) => removed.push(Removal {
                removed_id: tweet.id,
                kept_id: kept[k].id.clone(),
                score,
            }),
            None => {
                kept_chars.push(chars);
                kept.push(tweet);
            }
        }
    }
    Ok(DedupOutcome { kept, removed })
}

/// Largest edit distance that could still give similarity above `threshold`
/// for strings whose longer side has `longest` chars. `None` when no distance
/// qualifies.
fn max_distance_above(threshold: f64, longest: usize) -> Option<usize> {
    if longest == 0 {
        return (1.0 > threshold).then_some(0);
    }
    (0..=longest).rev().find(|&d| ratio(d, longest) > threshold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn toks(words: &[&str]) -> Vec<String> {
        words.iter().map(|s| s.to_string()).collect()
    }

    /// Full-matrix recursion, kept independent of the banded implementation.
    fn oracle_distance(a: &str, b: &str) -> usize {
        let a: Vec<char> = a.chars().collect();
        let b: Vec<char> = b.chars().collect();
        let mut m = vec![vec![0usize; b.len() + 1]; a.len() + 1];
        for (i, row) in m.iter_mut().enumerate() {
            row[0] = i;
        }
        for j in 0..=b.len() {
            m[0][j] = j;
        }
        for i in 1..=a.len() {
            for j in 1..=b.len() {
                let cost = if a[i - 1] == b[j - 1] { 0 } else { 1 };
                m[i][j] = (m[i - 1][j] + 1).min(m[i][j - 1] + 1).min(m[i - 1][j - 1] + cost);
            }
        }
        m[a.len()][b.len()]
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("#COVID19 is hard"), toks(&["covid19", "is", "hard"]));
        assert_eq!(tokenize("Binge!! https://t.co/x"), toks(&["binge"]));
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("@user HTTP://X.co ##edtw"), toks(&["user", "edtw"]));
        assert_eq!(tokenize("!!! ..."), Vec::<String>::new());
    }

    #[test]
    fn stopword_examples() {
        let stop = StopList::english();
        assert_eq!(remove_stopwords(&toks(&["the", "eat"]), &stop), toks(&["eat"]));
        assert!(remove_stopwords(&[], &stop).is_empty());
        assert_eq!(
            remove_stopwords(&toks(&["people", "do", "not", "eat"]), &stop),
            toks(&["people", "eat"])
        );
    }

    #[test]
    fn shipped_list_keeps_domain_terms() {
        let stop = StopList::english();
        for t in ["eat", "disorder", "food", "recovery", "edtw", "binge", "people", "anorexic", "research", "study", "problem"] {
            assert!(!stop.contains(t), "{t} must not be a stop word");
        }
        assert!(stop.len() >= 50);
    }

    #[test]
    fn similarity_examples() {
        assert_eq!(similarity("same text", "same text"), 1.0);
        assert!((similarity("abc", "abd") - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(similarity("aaaa", "bbbb"), 0.0);
        assert_eq!(similarity("", ""), 1.0);
        assert_eq!(similarity("", "ab"), 0.0);
    }

    #[test]
    fn hashtag_variant_is_removed() {
        // one trailing hashtag of 4 chars plus its separating space
        let a = CleanTweet::from_text("1", "binge eating makes me sad today and always");
        let b = CleanTweet::from_text("2", "binge eating makes me sad today and always #edtw");
        let s = similarity(&a.normalized_text, &b.normalized_text);
        assert_eq!(oracle_distance(&a.normalized_text, &b.normalized_text), 5);
        assert!(s > 0.8 && s < 1.0, "{s}");
        let out = dedup_by_similarity(vec![a, b], &DedupConfig::default()).unwrap();
        assert_eq!(out.kept.len(), 1);
        assert_eq!(out.removed[0].removed_id, "2");
        assert_eq!(out.removed[0].kept_id, "1");
    }

    #[test]
    fn boundary_pair_is_kept() {
        // 10 chars, 2 substitutions -> exactly 0.8
        let a = CleanTweet::from_tokens("a", toks(&["abcdefghij"]));
        let b = CleanTweet::from_tokens("b", toks(&["abcdefghxy"]));
        assert_eq!(similarity(&a.normalized_text, &b.normalized_text), 0.8);
        let out = dedup_by_similarity(vec![a, b], &DedupConfig::default()).unwrap();
        assert_eq!(out.kept.len(), 2);
        assert!(out.removed.is_empty());
    }

    #[test]
    fn threshold_validation() {
        assert!(DedupConfig::with_threshold(0.0).is_err());
        assert!(DedupConfig::with_threshold(1.5).is_err());
        assert!(DedupConfig::with_threshold(1.0).is_ok());
    }

    #[test]
    fn threshold_one_never_removes() {
        let a = CleanTweet::from_text("1", "x y");
        let b = CleanTweet::from_text("2", "x y");
        let out = dedup_by_similarity(vec![a, b], &DedupConfig::with_threshold(1.0).unwrap()).unwrap();
        assert_eq!(out.kept.len(), 2);
    }

    proptest! {
        #[test]
        fn levenshtein_matches_oracle(a in "[abc ]{0,12}", b in "[abc ]{0,12}") {
            prop_assert_eq!(levenshtein(&a, &b), oracle_distance(&a, &b));
        }

        #[test]
        fn similarity_symmetric_bounded(a in "\\PC{0,16}", b in "\\PC{0,16}") {
            let s = similarity(&a, &b);
            prop_assert!((0.0..=1.0).contains(&s));
            prop_assert_eq!(s, similarity(&b, &a));
            prop_assert_eq!(s == 1.0, a == b);
        }

        #[test]
        fn bounded_distance_agrees(a in "[ab]{0,10}", b in "[ab]{0,10}", limit in 0usize..12) {
            let ac: Vec<char> = a.chars().collect();
            let bc: Vec<char> = b.chars().collect();
            let d = oracle_distance(&a, &b);
            let got = levenshtein_chars(&ac, &bc, limit);
            if d <= limit { prop_assert_eq!(got, Some(d)); } else { prop_assert_eq!(got, None); }
        }

        #[test]
        fn tokenize_is_idempotent_on_normalized_text(text in "\\PC{0,40}") {
            let t = CleanTweet::from_text("x", &text);
            prop_assert_eq!(tokenize(&t.normalized_text), t.tokens);
        }

        #[test]
        fn dedup_kept_set_is_clean_and_partitions(words in proptest::collection::vec("[ab]{1,4}( [ab]{1,3})?", 0..25)) {
            let tweets: Vec<CleanTweet> = words.iter().enumerate()
                .map(|(i, w)| CleanTweet::from_text(alloc::format!("{i}"), w)).collect();
            let cfg = DedupConfig::default();
            let out = dedup_by_similarity(tweets.clone(), &cfg).unwrap();
            prop_assert_eq!(out.kept.len() + out.removed.len(), tweets.len());
            for i in 0..out.kept.len() {
                for j in i + 1..out.kept.len() {
                    prop_assert!(similarity(&out.kept[i].normalized_text, &out.kept[j].normalized_text) <= cfg.threshold);
                }
            }
            prop_assert_eq!(dedup_by_similarity(tweets, &cfg).unwrap(), out);
        }
    }
}
