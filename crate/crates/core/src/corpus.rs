//! Tweet records, keyword sets and the record-level filters applied after
//! ingestion: retweets, duplicates and non-English tweets.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::textprep::StopList;

/// Which keyword account captured a tweet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SourceSet {
    Set1,
    Set2,
    Set3,
}

impl SourceSet {
    pub const ALL: [SourceSet; 3] = [SourceSet::Set1, SourceSet::Set2, SourceSet::Set3];

    pub fn index(self) -> usize {
        match self {
            SourceSet::Set1 => 0,
            SourceSet::Set2 => 1,
            SourceSet::Set3 => 2,
        }
    }

    pub fn from_number(n: u8) -> Result<Self> {
        match n {
            1 => Ok(SourceSet::Set1),
            2 => Ok(SourceSet::Set2),
            3 => Ok(SourceSet::Set3),
            _ => Err(Error::InvalidArgument(alloc::format!("source set must be 1, 2 or 3, got {n}"))),
        }
    }

    pub fn number(self) -> u8 {
        self.index() as u8 + 1
    }
}

impl fmt::Display for SourceSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "set{}", self.number())
    }
}

/// UTC instant as nanoseconds since the Unix epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(pub i64);

/// Handle into a corpus [`Interner`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Symbol(u32);

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Interner {
    strings: Vec<String>,
    index: BTreeMap<String, Symbol>,
}

impl Interner {
    pub fn intern(&mut self, s: &str) -> Symbol {
        if let Some(sym) = self.index.get(s) {
            return *sym;
        }
        let sym = Symbol(self.strings.len() as u32);
        self.strings.push(s.to_string());
        self.index.insert(s.to_string(), sym);
        sym
    }

    pub fn resolve(&self, sym: Symbol) -> &str {
        &self.strings[sym.0 as usize]
    }

    pub fn len(&self) -> usize {
        self.strings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strings.is_empty()
    }
}

/// Replaces tabs and line breaks with spaces, collapses whitespace runs and
/// trims the ends.
pub fn sanitize_field(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    for word in raw.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawTweet {
    pub id: String,
    pub timestamp: Timestamp,
    pub author: Symbol,
    pub text: String,
    pub is_retweet: bool,
    /// Language hint from the archive; `None` when the column was `-`.
    pub lang: Option<String>,
    pub source_set: SourceSet,
}

/// A record as it comes off the wire, before interning.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TweetRecord {
    pub id: String,
    pub timestamp: Timestamp,
    pub author: String,
    pub text: String,
    /// `None` when the archive carries no flag for this record.
    pub retweet_flag: Option<bool>,
    pub lang: Option<String>,
    pub source_set: SourceSet,
}

impl TweetRecord {
    /// Explicit flag wins; otherwise Twitter's `RT @` prefix convention.
    pub fn is_retweet(&self) -> bool {
        self.retweet_flag
            .unwrap_or_else(|| self.text.to_lowercase().starts_with("rt @"))
    }
}

/// Per-set record counts at each filter stage of the last cleaning pass.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StageCounts {
    pub raw: [usize; 3],
    pub after_retweets: [usize; 3],
    pub after_duplicates: [usize; 3],
    pub after_language: [usize; 3],
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    tweets: Vec<RawTweet>,
    ids: BTreeSet<String>,
    pub provenance: Vec<String>,
    interner: Interner,
    stages: StageCounts,
}

impl Corpus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_provenance(name: impl Into<String>) -> Self {
        Corpus {
            provenance: alloc::vec![name.into()],
            ..Self::default()
        }
    }

    /// Appends a record. Returns `false` (and leaves the corpus unchanged)
    /// when the id is already present.
    pub fn insert(&mut self, record: TweetRecord) -> bool {
        if self.ids.contains(&record.id) {
            return false;
        }
        let is_retweet = record.is_retweet();
        let author = self.interner.intern(&record.author);
        let set = record.source_set.index();
        self.ids.insert(record.id.clone());
        self.tweets.push(RawTweet {
            id: record.id,
            timestamp: record.timestamp,
            author,
            text: record.text,
            is_retweet,
            lang: record.lang,
            source_set: record.source_set,
        });
        self.stages.raw[set] += 1;
        self.stages.after_retweets[set] += 1;
        self.stages.after_duplicates[set] += 1;
        self.stages.after_language[set] += 1;
        true
    }

    fn push_resolved(&mut self, tweet: &RawTweet, from: &Interner) {
        let author = from.resolve(tweet.author);
        let mut t = tweet.clone();
        t.author = self.interner.intern(author);
        self.ids.insert(t.id.clone());
        self.tweets.push(t);
    }

    pub fn tweets(&self) -> &[RawTweet] {
        &self.tweets
    }

    pub fn len(&self) -> usize {
        self.tweets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tweets.is_empty()
    }

    pub fn author(&self, tweet: &RawTweet) -> &str {
        self.interner.resolve(tweet.author)
    }

    pub fn interner(&self) -> &Interner {
        &self.interner
    }

    pub fn stages(&self) -> &StageCounts {
        &self.stages
    }

    fn counts_by_set<'a>(tweets: impl Iterator<Item = &'a RawTweet>) -> [usize; 3] {
        let mut c = [0; 3];
        for t in tweets {
            c[t.source_set.index()] += 1;
        }
        c
    }
}

/// Concatenates corpora, orders by (timestamp, ingestion order), drops
/// retweets, then drops any record whose id or sanitized text was already
/// seen. The earliest record of a duplicate group survives.
pub fn merge_and_dedup(corpora: &[Corpus]) -> Corpus {
    let mut all: Vec<(&RawTweet, &Interner)> = corpora
        .iter()
        .flat_map(|c| c.tweets.iter().map(move |t| (t, &c.interner)))
        .collect();
    // stable: ties keep ingestion order
    all.sort_by_key(|(t, _)| t.timestamp);

    let raw = Corpus::counts_by_set(all.iter().map(|(t, _)| *t));
    all.retain(|(t, _)| !t.is_retweet);
    let after_retweets = Corpus::counts_by_set(all.iter().map(|(t, _)| *t));

    let mut out = Corpus {
        provenance: corpora.iter().flat_map(|c| c.provenance.iter().cloned()).collect(),
        ..Corpus::default()
    };
    let mut seen_text: BTreeSet<&str> = BTreeSet::new();
    for (t, interner) in &all {
        if out.ids.contains(&t.id) || seen_text.contains(t.text.as_str()) {
            continue;
        }
        seen_text.insert(t.text.as_str());
        out.push_resolved(t, interner);
    }
    let after_duplicates = Corpus::counts_by_set(out.tweets.iter());
    out.stages = StageCounts {
        raw,
        after_retweets,
        after_duplicates,
        after_language: after_duplicates,
    };
    out
}

/// Fraction of stop-list hits among a text's tokens that qualifies an
/// untagged tweet as English.
pub const ENGLISH_HIT_RATIO: f64 = 0.10;
/// How many of the most frequent stop words the heuristic consults.
pub const ENGLISH_TOP_STOPWORDS: usize = 50;

/// Whitespace tokens, lowercased, with every non-alphanumeric char removed.
fn language_tokens(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| w.to_lowercase().chars().filter(|c| c.is_alphanumeric()).collect::<String>())
        .filter(|w| !w.is_empty())
        .collect()
}

/// `(hits, tokens)` of a text against the head of the stop list.
pub fn stopword_hits(text: &str, stop: &StopList) -> (usize, usize) {
    let top = stop.top(ENGLISH_TOP_STOPWORDS);
    let tokens = language_tokens(text);
    let hits = tokens.iter().filter(|t| top.contains(t.as_str())).count();
    (hits, tokens.len())
}

pub fn looks_english(tweet: &RawTweet, stop: &StopList) -> bool {
    match tweet.lang.as_deref() {
        Some(lang) => lang == "en",
        None => {
            let (hits, n) = stopword_hits(&tweet.text, stop);
            n > 0 && hits as f64 >= ENGLISH_HIT_RATIO * n as f64
        }
    }
}

pub fn filter_language(corpus: &Corpus, stop: &StopList) -> Result<Corpus> {
    if stop.is_empty() {
        return Err(Error::InvalidArgument("language filter needs a nonempty stop list".into()));
    }
    let mut out = Corpus {
        provenance: corpus.provenance.clone(),
        ..Corpus::default()
    };
    for t in corpus.tweets.iter().filter(|t| looks_english(t, stop)) {
        out.push_resolved(t, &corpus.interner);
    }
    out.stages = StageCounts {
        after_language: Corpus::counts_by_set(out.tweets.iter()),
        ..corpus.stages
    };
    Ok(out)
}

/// The three keyword lists used to capture tweets, one per account.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeywordSets {
    pub set1: Vec<String>,
    pub set2: Vec<String>,
    pub set3: Vec<String>,
}

impl Default for KeywordSets {
    fn default() -> Self {
        let own = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect();
        KeywordSets {
            set1: own(&[
                "anorexia",
                "anorexic",
                "dietary disorders",
                "inappetence",
                "feeding disorder",
                "food problem",
                "binge eating",
                "anorectic",
            ]),
            set2: own(&[
                "eating disorders",
                "bulimia",
                "food issues",
                "loss of appetite",
                "food issue",
                "food hater",
                "eat healthier",
                "disturbed eating habits",
                "abnormal eating habits",
                "abnormal eating habit",
            ]),
            set3: own(&[
                "binge-vomit syndrome",
                "bingeing",
                "bulimarexia",
                "anorexic skinny",
                "eating healthy",
            ]),
        }
    }
}

impl KeywordSets {
    pub fn new(set1: Vec<String>, set2: Vec<String>, set3: Vec<String>) -> Result<Self> {
        let lower = |v: Vec<String>| v.into_iter().map(|p| p.to_lowercase()).collect();
        let sets = KeywordSets {
            set1: lower(set1),
            set2: lower(set2),
            set3: lower(set3),
        };
        sets.validate()?;
        Ok(sets)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for (phrase, _) in self.iter() {
            if phrase.trim().is_empty() {
                return Err(Error::InvalidConfig("empty keyword phrase".into()));
            }
            if !seen.insert(phrase) {
                return Err(Error::InvalidConfig(alloc::format!("keyword {phrase:?} appears twice")));
            }
        }
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, SourceSet)> {
        self.set1
            .iter()
            .map(|p| (p.as_str(), SourceSet::Set1))
            .chain(self.set2.iter().map(|p| (p.as_str(), SourceSet::Set2)))
            .chain(self.set3.iter().map(|p| (p.as_str(), SourceSet::Set3)))
    }
}

/// Every configured phrase occurring in `text` (case-insensitive substring),
/// in set order.
pub fn keyword_match<'a>(text: &str, sets: &'a KeywordSets) -> Vec<(&'a str, SourceSet)> {
    let lower = text.to_lowercase();
    sets.iter().filter(|(p, _)| lower.contains(*p)).collect()
}

/// Keeps tweets mentioning at least one keyword phrase. Stage counts carry
/// over unchanged.
pub fn filter_keywords(corpus: &Corpus, sets: &KeywordSets) -> Corpus {
    let mut out = Corpus {
        provenance: corpus.provenance.clone(),
        stages: corpus.stages,
        ..Corpus::default()
    };
    for t in corpus.tweets.iter().filter(|t| !keyword_match(&t.text, sets).is_empty()) {
        out.push_resolved(t, &corpus.interner);
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CorpusStats {
    pub per_set: StageCounts,
    pub raw: usize,
    pub after_retweets: usize,
    pub after_duplicates: usize,
    pub after_language: usize,
}

impl CorpusStats {
    pub fn stages(&self) -> [usize; 4] {
        [self.raw, self.after_retweets, self.after_duplicates, self.after_language]
    }
}

pub fn corpus_stats(corpus: &Corpus) -> CorpusStats {
    let s = corpus.stages;
    let sum = |a: [usize; 3]| a.iter().sum();
    CorpusStats {
        per_set: s,
        raw: sum(s.raw),
        after_retweets: sum(s.after_retweets),
        after_duplicates: sum(s.after_duplicates),
        after_language: sum(s.after_language),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::vec;
    use proptest::prelude::*;

    fn rec(id: &str, ts: i64, text: &str, rt: Option<bool>, lang: Option<&str>) -> TweetRecord {
        TweetRecord {
            id: id.into(),
            timestamp: Timestamp(ts),
            author: format!("user{}", ts % 3),
            text: text.into(),
            retweet_flag: rt,
            lang: lang.map(Into::into),
            source_set: SourceSet::Set1,
        }
    }

    fn corpus(records: Vec<TweetRecord>) -> Corpus {
        let mut c = Corpus::new();
        for r in records {
            assert!(c.insert(r));
        }
        c
    }

    #[test]
    fn shared_id_across_corpora_is_dropped() {
        let a = corpus(vec![rec("1", 1, "a", Some(false), None), rec("2", 2, "b", Some(false), None)]);
        let b = corpus(vec![rec("2", 3, "c", Some(false), None), rec("3", 4, "d", Some(false), None)]);
        assert_eq!(merge_and_dedup(&[a, b]).len(), 3);
    }

    #[test]
    fn retweets_are_dropped() {
        let c = corpus(vec![
            rec("1", 1, "a", Some(false), None),
            rec("2", 2, "b", Some(true), None),
            rec("3", 3, "RT @x: c", None, None),
        ]);
        let m = merge_and_dedup(&[c]);
        assert_eq!(m.len(), 1);
        assert_eq!(m.tweets()[0].id, "1");
    }

    #[test]
    fn identical_text_keeps_earliest() {
        // ingestion order puts the later tweet first
        let c = corpus(vec![rec("late", 20, "same", Some(false), None), rec("early", 10, "same", Some(false), None)]);
        let m = merge_and_dedup(&[c]);
        assert_eq!(m.len(), 1);
        assert_eq!(m.tweets()[0].id, "early");
    }

    #[test]
    fn timestamp_ties_follow_file_order() {
        let a = corpus(vec![rec("a", 5, "x", Some(false), None)]);
        let b = corpus(vec![rec("b", 5, "x", Some(false), None)]);
        let m = merge_and_dedup(&[a.clone(), b.clone()]);
        assert_eq!(m.tweets()[0].id, "a");
        let m = merge_and_dedup(&[b, a]);
        assert_eq!(m.tweets()[0].id, "b");
    }

    #[test]
    fn language_rule() {
        let stop = StopList::english();
        let c = corpus(vec![
            rec("en", 1, "hola", Some(false), Some("en")),
            rec("es", 2, "the is on", Some(false), Some("es")),
            rec("guess", 3, "the cat is on the mat", Some(false), None),
            rec("nope", 4, "gato perro casa", Some(false), None),
        ]);
        let f = filter_language(&c, &stop).unwrap();
        let ids: Vec<&str> = f.tweets().iter().map(|t| t.id.as_str()).collect();
        assert_eq!(ids, ["en", "guess"]);
        // the, is, on, the
        assert_eq!(stopword_hits("the cat is on the mat", &stop), (4, 6));
        assert!(filter_language(&c, &StopList::parse("")).is_err());
    }

    #[test]
    fn keyword_examples() {
        let sets = KeywordSets::default();
        assert_eq!(keyword_match("my anorexia recovery", &sets), vec![("anorexia", SourceSet::Set1)]);
        assert_eq!(keyword_match("Loss of Appetite today", &sets), vec![("loss of appetite", SourceSet::Set2)]);
        assert!(keyword_match("nothing relevant here", &sets).is_empty());
        sets.validate().unwrap();
        assert_eq!((sets.set1.len(), sets.set2.len(), sets.set3.len()), (8, 10, 5));
    }

    #[test]
    fn keyword_filter_keeps_mentions() {
        let mut c = Corpus::new();
        for (id, text) in [("1", "my anorexia story"), ("2", "lunch was fine"), ("3", "Eating Healthy again")] {
            c.insert(TweetRecord {
                id: id.into(),
                timestamp: Timestamp(0),
                author: "a".into(),
                text: text.into(),
                retweet_flag: Some(false),
                lang: None,
                source_set: SourceSet::Set1,
            });
        }
        let kept = filter_keywords(&c, &KeywordSets::default());
        assert_eq!(kept.tweets().iter().map(|t| t.id.as_str()).collect::<Vec<_>>(), ["1", "3"]);
        assert_eq!(kept.author(&kept.tweets()[0]), "a");
    }

    #[test]
    fn keyword_sets_reject_shared_phrase() {
        let r = KeywordSets::new(vec!["a".into()], vec!["A".into()], vec![]);
        assert!(r.is_err());
    }

    #[test]
    fn stats_examples() {
        assert_eq!(corpus_stats(&Corpus::new()).stages(), [0, 0, 0, 0]);
        let mut recs = Vec::new();
        for i in 0..10 {
            let rt = i == 3 || i == 7;
            let text = if i == 9 { "tweet 0".into() } else { format!("tweet {i}") };
            recs.push(rec(&format!("{i}"), i, &text, Some(rt), Some("en")));
        }
        let m = merge_and_dedup(&[corpus(recs)]);
        let s = corpus_stats(&filter_language(&m, &StopList::english()).unwrap());
        assert_eq!(s.stages(), [10, 8, 7, 7]);
        assert_eq!(s.per_set.raw, [10, 0, 0]);
    }

    #[test]
    fn sanitize_examples() {
        assert_eq!(sanitize_field("a\tb\nc"), "a b c");
        assert_eq!(sanitize_field("  x  "), "x");
        assert_eq!(sanitize_field("no change"), "no change");
        assert_eq!(sanitize_field("\r\n"), "");
    }

    proptest! {
        #[test]
        fn sanitized_has_no_breaks(raw in "[a-z \\t\\r\\n\\u{a0}é]{0,40}") {
            let s = sanitize_field(&raw);
            prop_assert!(!s.contains(['\t', '\n', '\r']));
            prop_assert!(!s.contains("  "));
            prop_assert_eq!(s.trim(), s.as_str());
            prop_assert_eq!(sanitize_field(&s), s.clone());
        }

        #[test]
        fn merge_is_idempotent_and_monotone(
            rows in proptest::collection::vec((0u8..20, 0i64..5, 0u8..6, any::<bool>(), prop_oneof![Just(None), Just(Some("en")), Just(Some("fr"))]), 0..40)
        ) {
            let mut c = Corpus::new();
            for (i, (id, ts, text, rt, lang)) in rows.iter().enumerate() {
                let mut r = rec(&format!("{id}"), *ts, &format!("the text {text}"), Some(*rt), *lang);
                r.source_set = SourceSet::ALL[i % 3];
                c.insert(r);
            }
            let once = merge_and_dedup(core::slice::from_ref(&c));
            let twice = merge_and_dedup(core::slice::from_ref(&once));
            prop_assert_eq!(once.tweets(), twice.tweets());
            prop_assert_eq!(once.interner(), twice.interner());
            let s = corpus_stats(&filter_language(&once, &StopList::english()).unwrap()).stages();
            prop_assert!(s.windows(2).all(|w| w[0] >= w[1]));
        }

        #[test]
        fn keyword_hits_are_substrings(text in "[a-z ]{0,30}(anorexia|bulimia|eating healthy)?[A-Za-z ]{0,10}") {
            let sets = KeywordSets::default();
            let lower = text.to_lowercase();
            for (p, _) in keyword_match(&text, &sets) {
                prop_assert!(lower.contains(p));
            }
        }
    }
}
