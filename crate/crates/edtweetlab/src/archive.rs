//! Tweet archive TSV: `id, timestamp (RFC 3339), author, text,
//! retweet_flag (0|1), lang (hint or "-")`, no header. The ingest output
//! uses the same columns plus the source set number.

use std::io::{BufRead, Write};
use std::path::Path;

use chrono::{DateTime, SecondsFormat, Utc};
use edtweetlab_core::corpus::{sanitize_field, Corpus, SourceSet, Timestamp, TweetRecord};

use crate::error::{open, AppError, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ArchiveParse {
    pub records: Vec<TweetRecord>,
    pub malformed: usize,
}

fn parse_timestamp(s: &str) -> Option<Timestamp> {
    let t = DateTime::parse_from_rfc3339(s).ok()?;
    t.timestamp_nanos_opt().map(Timestamp)
}

pub fn format_timestamp(t: Timestamp) -> String {
    DateTime::<Utc>::from_timestamp_nanos(t.0).to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

fn parse_flag(s: &str) -> Option<Option<bool>> {
    match s {
        "0" => Some(Some(false)),
        "1" => Some(Some(true)),
        "" | "-" => Some(None),
        _ => None,
    }
}

fn parse_fields(cols: &[&str], source_set: SourceSet) -> Option<TweetRecord> {
    let id = sanitize_field(cols[0]);
    let text = sanitize_field(cols[3]);
    if id.is_empty() || text.is_empty() {
        return None;
    }
    let lang = sanitize_field(cols[5]);
    Some(TweetRecord {
        id,
        timestamp: parse_timestamp(cols[1].trim())?,
        author: sanitize_field(cols[2]),
        text,
        retweet_flag: parse_flag(cols[4].trim())?,
        lang: if lang.is_empty() || lang == "-" { None } else { Some(lang) },
        source_set,
    })
}

fn parse_lines<R: BufRead>(reader: R, name: &Path, columns: usize, mut row: impl FnMut(&[&str]) -> Option<TweetRecord>) -> Result<ArchiveParse> {
    let mut out = ArchiveParse::default();
    let mut seen = 0usize;
    for line in reader.lines() {
        let line = line.map_err(|e| AppError::io(name, e))?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            continue;
        }
        seen += 1;
        let cols: Vec<&str> = line.split('\t').collect();
        match (cols.len() == columns).then(|| row(&cols)).flatten() {
            Some(r) => out.records.push(r),
            None => out.malformed += 1,
        }
    }
    if out.malformed * 2 > seen {
        return Err(AppError::format(name, format!("{} of {seen} lines are malformed; expected {columns} tab-separated columns", out.malformed)));
    }
    Ok(out)
}

/// Parses an archive stream. Malformed lines are skipped and counted; more
/// than half malformed means the file is not an archive at all.
pub fn parse_archive<R: BufRead>(reader: R, source_set: SourceSet, name: &Path) -> Result<ArchiveParse> {
    parse_lines(reader, name, 6, |c| parse_fields(c, source_set))
}

/// Builds one corpus from a file. Records repeating an id already seen in
/// the same file are counted as malformed.
pub fn load_archive(path: &Path, source_set: SourceSet) -> Result<(Corpus, usize)> {
    let parsed = parse_archive(std::io::BufReader::new(open(path)?), source_set, path)?;
    let mut corpus = Corpus::with_provenance(path.display().to_string());
    let mut rejected = parsed.malformed;
    for r in parsed.records {
        if !corpus.insert(r) {
            rejected += 1;
        }
    }
    Ok((corpus, rejected))
}

fn record_line(c: &Corpus, t: &edtweetlab_core::corpus::RawTweet) -> String {
    format!(
        "{}\t{}\t{}\t{}\t{}\t{}\t{}",
        t.id,
        format_timestamp(t.timestamp),
        c.author(t),
        t.text,
        u8::from(t.is_retweet),
        t.lang.as_deref().unwrap_or("-"),
        t.source_set.number()
    )
}

pub fn write_corpus<W: Write>(corpus: &Corpus, mut w: W) -> std::io::Result<()> {
    for t in corpus.tweets() {
        writeln!(w, "{}", record_line(corpus, t))?;
    }
    Ok(())
}

/// Reads the seven-column ingest output back into a corpus.
pub fn read_corpus(path: &Path) -> Result<Corpus> {
    let parsed = parse_lines(std::io::BufReader::new(open(path)?), path, 7, |c| {
        let set = c[6].trim().parse::<u8>().ok().and_then(|n| SourceSet::from_number(n).ok())?;
        parse_fields(&c[..6], set)
    })?;
    if parsed.malformed > 0 {
        return Err(AppError::format(path, format!("{} malformed corpus lines", parsed.malformed)));
    }
    let mut corpus = Corpus::with_provenance(path.display().to_string());
    for r in parsed.records {
        if !corpus.insert(r) {
            return Err(AppError::format(path, "duplicate id in corpus file"));
        }
    }
    Ok(corpus)
}
