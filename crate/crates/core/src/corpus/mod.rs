//! Corpus ingestion and labeled-record preparation.
//!
//! Raw posts arrive as CSV or JSONL with `tweet_id`, `text`, `author_id`,
//! `created_at` fields. The expert-labeled file carries corrupted text and
//! truncated IDs, so records are re-linked to the corpus by fuzzy text
//! matching before label validation.

mod restore;
mod similarity;

pub use restore::{
    apply_review_manifest, read_review_manifest, restore_ids, write_review_manifest,
    DiscardedRecord, MatchCandidate, MatchedRecord, RestoreOptions, RestoreOutcome,
    ReviewDecision, ReviewEntry, ReviewItem,
};
pub use similarity::{normalize_for_match, similarity};

use crate::category::Category;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;
use thiserror::Error;

/// Posting-date window covered by the corpus (inclusive).
pub const CORPUS_WINDOW_START: (i32, u8) = (2008, 1);
pub const CORPUS_WINDOW_END: (i32, u8) = (2023, 2);

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Unreadable {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed input in {path}: {detail}")]
    Malformed { path: String, detail: String },
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("language filtering requested for '{keep}' but no detector is configured; \
             supply a detector or run in pass-through mode")]
    DetectorUnavailable { keep: String },
    #[error("'{keep}' is not a valid ISO language code")]
    InvalidLanguageCode { keep: String },
    #[error("similarity threshold {threshold} outside (0, 1]")]
    BadThreshold { threshold: f64 },
}

/// Calendar date at year resolution, with month/day kept when available.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PostDate {
    pub year: i32,
    pub month: Option<u8>,
    pub day: Option<u8>,
}

impl PostDate {
    pub fn new(year: i32, month: Option<u8>, day: Option<u8>) -> Self {
        PostDate { year, month, day }
    }

    /// Parses `YYYY`, `YYYY-MM`, `YYYY-MM-DD`, with `/` accepted as the
    /// separator and anything after a `T` or space (a time component)
    /// ignored.
    pub fn parse(s: &str) -> Option<PostDate> {
        let date_part = s
            .split(['T', ' '])
            .next()
            .unwrap_or("")
            .trim();
        if date_part.is_empty() {
            return None;
        }
        let mut parts = date_part.split(['-', '/']);
        let year: i32 = parts.next()?.parse().ok()?;
        if !(1000..=9999).contains(&year) {
            return None;
        }
        let month = match parts.next() {
            Some(m) => {
                let m: u8 = m.parse().ok()?;
                if !(1..=12).contains(&m) {
                    return None;
                }
                Some(m)
            }
            None => None,
        };
        let day = match parts.next() {
            Some(d) => {
                let d: u8 = d.parse().ok()?;
                if !(1..=31).contains(&d) {
                    return None;
                }
                Some(d)
            }
            None => None,
        };
        if parts.next().is_some() {
            return None;
        }
        Some(PostDate { year, month, day })
    }

    /// Whether the date falls inside the corpus posting window. Dates with
    /// unknown month are checked at year resolution.
    pub fn in_corpus_window(&self) -> bool {
        let ym = (self.year, self.month.unwrap_or(6));
        let lo = match self.month {
            Some(_) => CORPUS_WINDOW_START,
            None => (CORPUS_WINDOW_START.0, 1),
        };
        ym >= lo && ym <= CORPUS_WINDOW_END
    }
}

impl std::fmt::Display for PostDate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match (self.month, self.day) {
            (Some(m), Some(d)) => write!(f, "{:04}-{:02}-{:02}", self.year, m, d),
            (Some(m), None) => write!(f, "{:04}-{:02}", self.year, m),
            _ => write!(f, "{:04}", self.year),
        }
    }
}

/// One post: opaque identifier, text, author, posting date.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tweet {
    pub tweet_id: String,
    pub text: String,
    pub author_id: String,
    pub posted_at: PostDate,
}

/// A collection of tweets with unique IDs.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    tweets: Vec<Tweet>,
    by_id: HashMap<String, usize>,
}

impl Corpus {
    pub fn new() -> Self {
        Corpus::default()
    }

    /// Adds a tweet; returns false (and keeps the original) when the ID is
    /// already present.
    pub fn insert(&mut self, tweet: Tweet) -> bool {
        if self.by_id.contains_key(&tweet.tweet_id) {
            return false;
        }
        self.by_id.insert(tweet.tweet_id.clone(), self.tweets.len());
        self.tweets.push(tweet);
        true
    }

    pub fn get(&self, tweet_id: &str) -> Option<&Tweet> {
        self.by_id.get(tweet_id).map(|&i| &self.tweets[i])
    }

    pub fn contains(&self, tweet_id: &str) -> bool {
        self.by_id.contains_key(tweet_id)
    }

    pub fn len(&self) -> usize {
        self.tweets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tweets.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Tweet> {
        self.tweets.iter()
    }
}

impl FromIterator<Tweet> for Corpus {
    fn from_iter<I: IntoIterator<Item = Tweet>>(iter: I) -> Self {
        let mut corpus = Corpus::new();
        for t in iter {
            corpus.insert(t);
        }
        corpus
    }
}

/// One row of the expert-labeled file, labels still unvalidated and text
/// possibly corrupted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawLabeledRecord {
    pub text: String,
    pub label_ar: i64,
    pub label_mb: i64,
    pub source_year: i32,
}

/// A validated labeled example: restored tweet plus both coders' labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub tweet: Tweet,
    pub label_ar: Category,
    pub label_mb: Category,
    pub match_score: f64,
}

impl LabeledExample {
    pub fn label(&self, source: crate::partition::LabelSource) -> Category {
        match source {
            crate::partition::LabelSource::Ar | crate::partition::LabelSource::AgreeOnly => {
                self.label_ar
            }
            crate::partition::LabelSource::Mb => self.label_mb,
        }
    }
}

/// The clean labeled set (LABEL), indexed by tweet ID.
#[derive(Debug, Clone, Default)]
pub struct LabeledSet {
    examples: Vec<LabeledExample>,
    by_id: HashMap<String, usize>,
}

impl LabeledSet {
    pub fn new(examples: Vec<LabeledExample>) -> Self {
        let by_id = examples
            .iter()
            .enumerate()
            .map(|(i, e)| (e.tweet.tweet_id.clone(), i))
            .collect();
        LabeledSet { examples, by_id }
    }

    pub fn get(&self, tweet_id: &str) -> Option<&LabeledExample> {
        self.by_id.get(tweet_id).map(|&i| &self.examples[i])
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &LabeledExample> {
        self.examples.iter()
    }

    pub fn subset(&self, ids: &[String]) -> LabeledSet {
        LabeledSet::new(
            ids.iter()
                .filter_map(|id| self.get(id).cloned())
                .collect(),
        )
    }
}

/// Per-row ingestion problem; the row is skipped, ingestion continues.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowIssue {
    /// 1-based line number in the source file (header counted for CSV).
    pub line: usize,
    pub reason: String,
}

/// Result of corpus ingestion: retained tweets plus skipped-row diagnostics.
#[derive(Debug)]
pub struct IngestOutcome {
    pub corpus: Corpus,
    pub issues: Vec<RowIssue>,
    pub rows_read: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Csv,
    Jsonl,
}

impl CorpusFormat {
    /// Guess from the file extension; defaults to CSV.
    pub fn from_path(path: &Path) -> CorpusFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("ndjson") | Some("json") => CorpusFormat::Jsonl,
            _ => CorpusFormat::Csv,
        }
    }
}

#[derive(Debug, Deserialize)]
struct CorpusRow {
    tweet_id: String,
    text: String,
    author_id: String,
    created_at: String,
}

fn validate_row(row: CorpusRow, line: usize) -> Result<Tweet, RowIssue> {
    if row.tweet_id.trim().is_empty() {
        return Err(RowIssue { line, reason: "missing tweet_id".into() });
    }
    if row.text.trim().is_empty() {
        return Err(RowIssue { line, reason: "empty text".into() });
    }
    let posted_at = PostDate::parse(&row.created_at).ok_or_else(|| RowIssue {
        line,
        reason: format!("unparseable created_at '{}'", row.created_at),
    })?;
    if !posted_at.in_corpus_window() {
        return Err(RowIssue {
            line,
            reason: format!("created_at {posted_at} outside corpus window"),
        });
    }
    Ok(Tweet {
        tweet_id: row.tweet_id.trim().to_string(),
        text: row.text,
        author_id: row.author_id.trim().to_string(),
        posted_at,
    })
}

/// Ingest the raw tweet corpus from CSV or JSONL.
///
/// All parseable rows are returned; rows with missing fields, bad dates, or
/// duplicated tweet IDs are reported per row with their line number. An
/// unreadable file is fatal.
pub fn ingest_corpus(path: &Path, format: CorpusFormat) -> Result<IngestOutcome, CorpusError> {
    let file = std::fs::File::open(path).map_err(|source| CorpusError::Unreadable {
        path: path.display().to_string(),
        source,
    })?;
    let reader = std::io::BufReader::new(file);

    let mut corpus = Corpus::new();
    let mut issues = Vec::new();
    let mut rows_read = 0usize;

    let mut add = |tweet: Tweet, line: usize, issues: &mut Vec<RowIssue>| {
        let id = tweet.tweet_id.clone();
        if !corpus.insert(tweet) {
            issues.push(RowIssue { line, reason: format!("duplicate tweet_id '{id}'") });
        }
    };

    match format {
        CorpusFormat::Csv => {
            let mut csv_reader = csv::ReaderBuilder::new().flexible(false).from_reader(reader);
            let headers = csv_reader
                .headers()
                .map_err(|e| CorpusError::Malformed {
                    path: path.display().to_string(),
                    detail: e.to_string(),
                })?
                .clone();
            for required in ["tweet_id", "text", "author_id", "created_at"] {
                if !headers.iter().any(|h| h == required) {
                    return Err(CorpusError::Malformed {
                        path: path.display().to_string(),
                        detail: format!("missing required column '{required}'"),
                    });
                }
            }
            for (i, record) in csv_reader.deserialize::<CorpusRow>().enumerate() {
                let line = i + 2; // header is line 1
                rows_read += 1;
                match record {
                    Ok(row) => match validate_row(row, line) {
                        Ok(tweet) => add(tweet, line, &mut issues),
                        Err(issue) => issues.push(issue),
                    },
                    Err(e) => issues.push(RowIssue { line, reason: e.to_string() }),
                }
            }
        }
        CorpusFormat::Jsonl => {
            for (i, line_result) in reader.lines().enumerate() {
                let line = i + 1;
                let text = line_result.map_err(|source| CorpusError::Unreadable {
                    path: path.display().to_string(),
                    source,
                })?;
                if text.trim().is_empty() {
                    continue;
                }
                rows_read += 1;
                match serde_json::from_str::<CorpusRow>(&text) {
                    Ok(row) => match validate_row(row, line) {
                        Ok(tweet) => add(tweet, line, &mut issues),
                        Err(issue) => issues.push(issue),
                    },
                    Err(e) => issues.push(RowIssue { line, reason: e.to_string() }),
                }
            }
        }
    }

    Ok(IngestOutcome { corpus, issues, rows_read })
}

#[derive(Debug, Deserialize)]
struct LabeledRow {
    text: String,
    label_ar: i64,
    label_mb: i64,
    year: i32,
}

/// Ingest the expert-labeled CSV (`text, label_ar, label_mb, year`).
pub fn ingest_labeled(
    path: &Path,
) -> Result<(Vec<RawLabeledRecord>, Vec<RowIssue>), CorpusError> {
    let file = std::fs::File::open(path).map_err(|source| CorpusError::Unreadable {
        path: path.display().to_string(),
        source,
    })?;
    let mut reader = csv::Reader::from_reader(std::io::BufReader::new(file));
    let mut records = Vec::new();
    let mut issues = Vec::new();
    for (i, row) in reader.deserialize::<LabeledRow>().enumerate() {
        let line = i + 2;
        match row {
            Ok(r) => {
                if r.text.trim().is_empty() {
                    issues.push(RowIssue { line, reason: "empty text".into() });
                } else {
                    records.push(RawLabeledRecord {
                        text: r.text,
                        label_ar: r.label_ar,
                        label_mb: r.label_mb,
                        source_year: r.year,
                    });
                }
            }
            Err(e) => issues.push(RowIssue { line, reason: e.to_string() }),
        }
    }
    Ok((records, issues))
}

/// Pluggable language detection for [`filter_language`].
pub trait LanguageDetector: Sync {
    /// ISO language code for the text, or None when undetermined.
    fn detect(&self, text: &str) -> Option<String>;
}

/// Keep only tweets in the requested language.
///
/// `keep = None` is pass-through: the distributed corpus is already
/// filtered, so no detector is required. Requesting a language without a
/// detector is fatal.
pub fn filter_language(
    corpus: Corpus,
    keep: Option<&str>,
    detector: Option<&dyn LanguageDetector>,
) -> Result<Corpus, CorpusError> {
    let Some(keep) = keep else {
        return Ok(corpus);
    };
    if keep.len() < 2 || keep.len() > 3 || !keep.chars().all(|c| c.is_ascii_lowercase()) {
        return Err(CorpusError::InvalidLanguageCode { keep: keep.to_string() });
    }
    let Some(detector) = detector else {
        return Err(CorpusError::DetectorUnavailable { keep: keep.to_string() });
    };
    Ok(corpus
        .iter()
        .filter(|t| detector.detect(&t.text).as_deref() == Some(keep))
        .cloned()
        .collect())
}

/// Persist a clean labeled set as CSV
/// (`tweet_id, text, author_id, created_at, label_ar, label_mb, match_score`).
pub fn write_labeled_csv(path: &Path, set: &LabeledSet) -> std::io::Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record([
        "tweet_id",
        "text",
        "author_id",
        "created_at",
        "label_ar",
        "label_mb",
        "match_score",
    ])?;
    for ex in set.iter() {
        writer.write_record([
            ex.tweet.tweet_id.as_str(),
            ex.tweet.text.as_str(),
            ex.tweet.author_id.as_str(),
            &ex.tweet.posted_at.to_string(),
            &ex.label_ar.code().to_string(),
            &ex.label_mb.code().to_string(),
            &ex.match_score.to_string(),
        ])?;
    }
    writer.flush()
}

/// Read a labeled set written by [`write_labeled_csv`].
pub fn read_labeled_csv(path: &Path) -> Result<LabeledSet, CorpusError> {
    #[derive(Deserialize)]
    struct Row {
        tweet_id: String,
        text: String,
        author_id: String,
        created_at: String,
        label_ar: i64,
        label_mb: i64,
        match_score: f64,
    }

    let file = std::fs::File::open(path).map_err(|source| CorpusError::Unreadable {
        path: path.display().to_string(),
        source,
    })?;
    let mut reader = csv::Reader::from_reader(std::io::BufReader::new(file));
    let mut examples = Vec::new();
    for (i, row) in reader.deserialize::<Row>().enumerate() {
        let row = row.map_err(|e| CorpusError::Malformed {
            path: path.display().to_string(),
            detail: format!("line {}: {e}", i + 2),
        })?;
        let posted_at = PostDate::parse(&row.created_at).ok_or_else(|| CorpusError::Malformed {
            path: path.display().to_string(),
            detail: format!("line {}: bad date '{}'", i + 2, row.created_at),
        })?;
        let (label_ar, label_mb) =
            match (Category::from_code(row.label_ar), Category::from_code(row.label_mb)) {
                (Some(a), Some(b)) => (a, b),
                _ => {
                    return Err(CorpusError::Malformed {
                        path: path.display().to_string(),
                        detail: format!("line {}: label outside 1-3", i + 2),
                    })
                }
            };
        examples.push(LabeledExample {
            tweet: Tweet {
                tweet_id: row.tweet_id,
                text: row.text,
                author_id: row.author_id,
                posted_at,
            },
            label_ar,
            label_mb,
            match_score: row.match_score,
        });
    }
    Ok(LabeledSet::new(examples))
}

/// Record removed by [`validate_labels`], with the reason logged.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RemovedRecord {
    pub tweet_id: String,
    pub reason: String,
}

/// Drop matched records with any label outside {1,2,3}.
///
/// Removal is logged, never fatal; the survivors become the LABEL set.
pub fn validate_labels(matched: Vec<MatchedRecord>) -> (LabeledSet, Vec<RemovedRecord>) {
    let mut kept = Vec::with_capacity(matched.len());
    let mut removed = Vec::new();
    for m in matched {
        match (Category::from_code(m.label_ar), Category::from_code(m.label_mb)) {
            (Some(label_ar), Some(label_mb)) => kept.push(LabeledExample {
                tweet: m.tweet,
                label_ar,
                label_mb,
                match_score: m.match_score,
            }),
            _ => {
                let bad = if Category::from_code(m.label_ar).is_none() {
                    m.label_ar
                } else {
                    m.label_mb
                };
                removed.push(RemovedRecord {
                    tweet_id: m.tweet.tweet_id,
                    reason: format!("invalid code {bad}"),
                });
            }
        }
    }
    (LabeledSet::new(kept), removed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_temp(content: &str, ext: &str) -> tempfile::TempPath {
        let mut f = tempfile::Builder::new().suffix(ext).tempfile().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f.into_temp_path()
    }

    #[test]
    fn parse_dates() {
        assert_eq!(
            PostDate::parse("2019-01-03"),
            Some(PostDate::new(2019, Some(1), Some(3)))
        );
        assert_eq!(
            PostDate::parse("2019-01-03T12:00:00Z"),
            Some(PostDate::new(2019, Some(1), Some(3)))
        );
        assert_eq!(PostDate::parse("2019"), Some(PostDate::new(2019, None, None)));
        assert_eq!(PostDate::parse("2019-13-01"), None);
        assert_eq!(PostDate::parse("nonsense"), None);
    }

    #[test]
    fn corpus_window_bounds() {
        assert!(PostDate::new(2008, Some(1), None).in_corpus_window());
        assert!(PostDate::new(2023, Some(2), None).in_corpus_window());
        assert!(!PostDate::new(2023, Some(3), None).in_corpus_window());
        assert!(!PostDate::new(2007, Some(12), None).in_corpus_window());
    }

    #[test]
    fn ingest_three_rows() {
        let path = write_temp(
            "tweet_id,text,author_id,created_at\n\
             1,hello world,42,2019-01-03\n\
             2,second post,42,2020-05-01\n\
             3,third post,43,2012-11-06\n",
            ".csv",
        );
        let out = ingest_corpus(&path, CorpusFormat::Csv).unwrap();
        assert_eq!(out.corpus.len(), 3);
        assert_eq!(out.rows_read, 3);
        assert!(out.issues.is_empty());
    }

    #[test]
    fn ingest_reports_duplicates_and_keeps_others() {
        let path = write_temp(
            "tweet_id,text,author_id,created_at\n\
             1,hello,42,2019-01-03\n\
             1,hello again,42,2019-01-04\n\
             2,fine,42,2019-01-05\n",
            ".csv",
        );
        let out = ingest_corpus(&path, CorpusFormat::Csv).unwrap();
        assert_eq!(out.corpus.len(), 2);
        assert_eq!(out.issues.len(), 1);
        assert!(out.issues[0].reason.contains("'1'"));
        assert_eq!(out.issues[0].line, 3);
    }

    #[test]
    fn ingest_flags_bad_rows_with_line_numbers() {
        let path = write_temp(
            "tweet_id,text,author_id,created_at\n\
             1,hello,42,2019-01-03\n\
             2,,42,2019-01-04\n\
             3,ok,42,not-a-date\n",
            ".csv",
        );
        let out = ingest_corpus(&path, CorpusFormat::Csv).unwrap();
        assert_eq!(out.corpus.len(), 1);
        assert_eq!(out.issues.len(), 2);
        assert_eq!(out.issues[0].line, 3);
        assert_eq!(out.issues[1].line, 4);
    }

    #[test]
    fn ingest_missing_column_is_fatal() {
        let path = write_temp("tweet_id,text,author_id\n1,hello,42\n", ".csv");
        assert!(matches!(
            ingest_corpus(&path, CorpusFormat::Csv),
            Err(CorpusError::Malformed { .. })
        ));
    }

    #[test]
    fn ingest_jsonl() {
        let path = write_temp(
            r#"{"tweet_id":"1","text":"hi","author_id":"9","created_at":"2015-06-01"}
{"tweet_id":"2","text":"yo","author_id":"9","created_at":"2016-06-01"}
"#,
            ".jsonl",
        );
        let out = ingest_corpus(&path, CorpusFormat::Jsonl).unwrap();
        assert_eq!(out.corpus.len(), 2);
    }

    #[test]
    fn unreadable_file_is_fatal() {
        assert!(matches!(
            ingest_corpus(Path::new("/nonexistent/x.csv"), CorpusFormat::Csv),
            Err(CorpusError::Unreadable { .. })
        ));
    }

    struct OracleDetector;
    impl LanguageDetector for OracleDetector {
        fn detect(&self, text: &str) -> Option<String> {
            if text.contains("Bonjour") {
                Some("fr".into())
            } else {
                Some("en".into())
            }
        }
    }

    fn tweet(id: &str, text: &str) -> Tweet {
        Tweet {
            tweet_id: id.into(),
            text: text.into(),
            author_id: "1".into(),
            posted_at: PostDate::new(2019, Some(1), Some(1)),
        }
    }

    #[test]
    fn filter_language_pass_through() {
        let corpus: Corpus = vec![tweet("1", "Hello world"), tweet("2", "Bonjour le monde")]
            .into_iter()
            .collect();
        let filtered = filter_language(corpus.clone(), None, None).unwrap();
        assert_eq!(filtered.len(), 2);
    }

    #[test]
    fn filter_language_with_oracle() {
        let corpus: Corpus = vec![tweet("1", "Hello world"), tweet("2", "Bonjour le monde")]
            .into_iter()
            .collect();
        let filtered = filter_language(corpus, Some("en"), Some(&OracleDetector)).unwrap();
        assert_eq!(filtered.len(), 1);
        assert_eq!(filtered.iter().next().unwrap().text, "Hello world");
    }

    #[test]
    fn filter_language_empty_corpus() {
        let filtered =
            filter_language(Corpus::new(), Some("en"), Some(&OracleDetector)).unwrap();
        assert!(filtered.is_empty());
    }

    #[test]
    fn filter_language_without_detector_is_fatal() {
        assert!(matches!(
            filter_language(Corpus::new(), Some("en"), None),
            Err(CorpusError::DetectorUnavailable { .. })
        ));
    }

    #[test]
    fn validate_labels_removes_out_of_range_codes() {
        let mk = |id: &str, ar: i64, mb: i64| MatchedRecord {
            tweet: tweet(id, "text"),
            label_ar: ar,
            label_mb: mb,
            match_score: 1.0,
        };
        let (set, removed) =
            validate_labels(vec![mk("1", 1, 1), mk("2", 4, 1), mk("3", 2, 3), mk("4", 0, 2)]);
        assert_eq!(set.len(), 2);
        assert_eq!(removed.len(), 2);
        assert_eq!(removed[0].reason, "invalid code 4");
        assert_eq!(removed[1].reason, "invalid code 0");
    }

    #[test]
    fn validate_labels_identity_when_clean() {
        let mk = |id: &str| MatchedRecord {
            tweet: tweet(id, "text"),
            label_ar: 1,
            label_mb: 2,
            match_score: 0.9,
        };
        let (set, removed) = validate_labels(vec![mk("1"), mk("2")]);
        assert_eq!(set.len(), 2);
        assert!(removed.is_empty());
    }

    #[test]
    fn labeled_csv_round_trip() {
        let set = LabeledSet::new(vec![LabeledExample {
            tweet: Tweet {
                tweet_id: "42".into(),
                text: "a tweet, with commas \"and quotes\"".into(),
                author_id: "9".into(),
                posted_at: PostDate::new(2019, Some(1), Some(3)),
            },
            label_ar: Category::Problem,
            label_mb: Category::Other,
            match_score: 0.93,
        }]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("label_set.csv");
        write_labeled_csv(&path, &set).unwrap();
        let back = read_labeled_csv(&path).unwrap();
        assert_eq!(back.len(), 1);
        let ex = back.get("42").unwrap();
        assert_eq!(ex.tweet.text, "a tweet, with commas \"and quotes\"");
        assert_eq!(ex.label_mb, Category::Other);
        assert_eq!(ex.tweet.posted_at, PostDate::new(2019, Some(1), Some(3)));
    }
}
