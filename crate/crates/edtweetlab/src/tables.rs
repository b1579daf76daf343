//! Cleaned-text TSV, label CSV, dedup removal log and statistics tables.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;

use edtweetlab_core::features::{Category, LabelCount, LabeledTweet};
use edtweetlab_core::textprep::{CleanTweet, Removal};
use serde::{Deserialize, Serialize};

use crate::error::{open, AppError, Result};

/// `id<TAB>normalized text`, one tweet per line, no header.
pub fn write_clean<W: Write>(tweets: &[CleanTweet], mut w: W) -> std::io::Result<()> {
    for t in tweets {
        writeln!(w, "{}\t{}", t.id, t.normalized_text)?;
    }
    Ok(())
}

pub fn read_clean(path: &Path) -> Result<Vec<CleanTweet>> {
    let mut out = Vec::new();
    for (n, line) in std::io::BufReader::new(open(path)?).lines().enumerate() {
        let line = line.map_err(|e| AppError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let (id, text) = line
            .split_once('\t')
            .ok_or_else(|| AppError::format(path, format!("line {}: expected id<TAB>text", n + 1)))?;
        if id.is_empty() {
            return Err(AppError::format(path, format!("line {}: empty id", n + 1)));
        }
        let tokens = text.split(' ').filter(|t| !t.is_empty()).map(str::to_owned).collect();
        out.push(CleanTweet::from_tokens(id, tokens));
    }
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize)]
struct LabelRow {
    id: String,
    cat1: u8,
    cat2: u8,
    cat3: u8,
    cat4: u8,
}

/// Reads `id,cat1,cat2,cat3,cat4` with a header row and 0/1 cells.
pub fn read_labels(path: &Path) -> Result<Vec<(String, [bool; 4])>> {
    let mut rdr = csv::Reader::from_reader(open(path)?);
    let headers = rdr.headers().map_err(|e| AppError::format(path, e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["id", "cat1", "cat2", "cat3", "cat4"] {
        return Err(AppError::format(path, "header must be id,cat1,cat2,cat3,cat4"));
    }
    let mut out = Vec::new();
    for (n, row) in rdr.deserialize::<LabelRow>().enumerate() {
        let r = row.map_err(|e| AppError::format(path, format!("row {}: {e}", n + 1)))?;
        let cells = [r.cat1, r.cat2, r.cat3, r.cat4];
        if cells.iter().any(|&c| c > 1) {
            return Err(AppError::format(path, format!("row {}: label cells must be 0 or 1", n + 1)));
        }
        out.push((r.id, cells.map(|c| c == 1)));
    }
    Ok(out)
}

pub fn write_labels<W: Write>(labels: &[(String, [bool; 4])], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for (id, l) in labels {
        let [cat1, cat2, cat3, cat4] = l.map(u8::from);
        wtr.serialize(LabelRow { id: id.clone(), cat1, cat2, cat3, cat4 }).map_err(|e| AppError::Training(e.to_string()))?;
    }
    wtr.flush().map_err(|e| AppError::io(Path::new("labels"), e))?;
    Ok(())
}

/// Attaches labels to cleaned tweets by id, in tweet order. Returns the
/// labeled tweets and the number of label rows with no matching tweet.
pub fn join_labels(tweets: &[CleanTweet], labels: &[(String, [bool; 4])]) -> (Vec<LabeledTweet>, usize) {
    let by_id: HashMap<&str, [bool; 4]> = labels.iter().map(|(id, l)| (id.as_str(), *l)).collect();
    let joined: Vec<LabeledTweet> = tweets
        .iter()
        .filter_map(|t| by_id.get(t.id.as_str()).map(|l| LabeledTweet { clean: t.clone(), labels: *l }))
        .collect();
    let unmatched = labels.len() - joined.len().min(labels.len());
    (joined, unmatched)
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct RemovalRow {
    removed_id: String,
    kept_id: String,
    score: f64,
}

pub fn write_removed<W: Write>(removed: &[Removal], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["removed_id", "kept_id", "score"]).map_err(|e| AppError::Training(e.to_string()))?;
    for r in removed {
        wtr.write_record([r.removed_id.as_str(), r.kept_id.as_str(), &format!("{:.6}", r.score)])
            .map_err(|e| AppError::Training(e.to_string()))?;
    }
    wtr.flush().map_err(|e| AppError::io(Path::new("removed log"), e))?;
    Ok(())
}

pub fn read_removed(path: &Path) -> Result<Vec<(String, String, f64)>> {
    let mut rdr = csv::Reader::from_reader(open(path)?);
    rdr.deserialize::<RemovalRow>()
        .map(|r| r.map(|r| (r.removed_id, r.kept_id, r.score)).map_err(|e| AppError::format(path, e.to_string())))
        .collect()
}

/// Top terms as a two-column table, Markdown or CSV.
pub fn term_table(terms: &[(String, usize)], markdown: bool) -> String {
    let mut s = String::new();
    if markdown {
        s.push_str("| Rank | Term | Count |\n|---:|---|---:|\n");
        for (i, (t, c)) in terms.iter().enumerate() {
            s.push_str(&format!("| {} | {t} | {c} |\n", i + 1));
        }
    } else {
        s.push_str("rank,term,count\n");
        for (i, (t, c)) in terms.iter().enumerate() {
            s.push_str(&format!("{},{t},{c}\n", i + 1));
        }
    }
    s
}

pub fn label_table(dist: &[LabelCount; 4], markdown: bool) -> String {
    let mut s = String::new();
    if markdown {
        s.push_str("| Category | Description | Positive | Negative | Positive % |\n|---|---|---:|---:|---:|\n");
    } else {
        s.push_str("category,positives,negatives,positive_pct\n");
    }
    for (c, d) in Category::ALL.iter().zip(dist) {
        if markdown {
            s.push_str(&format!("| {} | {} | {} | {} | {:.1} |\n", c.number(), c.description(), d.positives, d.negatives, d.percent()));
        } else {
            s.push_str(&format!("{},{},{},{:.1}\n", c.number(), d.positives, d.negatives, d.percent()));
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_round_trip() {
        let tweets = vec![CleanTweet::from_text("a", "eat well today"), CleanTweet::from_text("b", "")];
        let mut buf = Vec::new();
        write_clean(&tweets, &mut buf).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("clean.tsv");
        std::fs::write(&p, buf).unwrap();
        assert_eq!(read_clean(&p).unwrap(), tweets);
    }

    #[test]
    fn labels_round_trip_and_validation() {
        let labels = vec![("1".to_string(), [true, false, false, true]), ("x".to_string(), [false; 4])];
        let mut buf = Vec::new();
        write_labels(&labels, &mut buf).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("id,cat1,cat2,cat3,cat4\n"));
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("labels.csv");
        std::fs::write(&p, &buf).unwrap();
        assert_eq!(read_labels(&p).unwrap(), labels);
        std::fs::write(&p, "id,cat1,cat2,cat3,cat4\n1,0,2,0,0\n").unwrap();
        assert!(read_labels(&p).is_err());
        std::fs::write(&p, "id,a,b,c,d\n1,0,0,0,0\n").unwrap();
        assert!(read_labels(&p).is_err());
    }

    #[test]
    fn join_keeps_tweet_order() {
        let tweets = vec![CleanTweet::from_text("b", "x"), CleanTweet::from_text("a", "y"), CleanTweet::from_text("c", "z")];
        let labels = vec![("a".into(), [true; 4]), ("b".into(), [false; 4]), ("zz".into(), [false; 4])];
        let (j, unmatched) = join_labels(&tweets, &labels);
        assert_eq!(j.iter().map(|t| t.clean.id.as_str()).collect::<Vec<_>>(), ["b", "a"]);
        assert_eq!(unmatched, 1);
    }

    #[test]
    fn removed_log_columns() {
        let removed = vec![Removal { removed_id: "2".into(), kept_id: "1".into(), score: 0.9 }];
        let mut buf = Vec::new();
        write_removed(&removed, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "removed_id,kept_id,score\n2,1,0.900000\n");
    }
}
