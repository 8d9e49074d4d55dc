//! Fuzzy restoration of truncated tweet IDs in the labeled file.
//!
//! Each raw record is matched to the corpus tweet maximizing the normalized
//! text similarity. Exact matches (score 1.0) are accepted automatically;
//! scores in `[threshold, 1.0)` go to a human review queue persisted as an
//! accept/reject manifest; lower scores are discarded. The corrupted record
//! text is replaced by the matched corpus text.

use super::similarity::{normalize_for_match, similarity_at_least};
use super::{Corpus, CorpusError, RawLabeledRecord, Tweet};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;

/// A record successfully linked to a corpus tweet; labels still raw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedRecord {
    pub tweet: Tweet,
    pub label_ar: i64,
    pub label_mb: i64,
    pub match_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchCandidate {
    pub tweet_id: String,
    pub score: f64,
}

/// A record whose best match needs human verification. Ties at the best
/// score list every tied candidate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReviewItem {
    pub record_index: usize,
    pub record: RawLabeledRecord,
    pub candidates: Vec<MatchCandidate>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiscardedRecord {
    pub record_index: usize,
    /// Known only when the record went through review and was rejected;
    /// records discarded by the scan never reached the threshold and their
    /// sub-threshold score is not computed.
    pub best_score: Option<f64>,
}

#[derive(Debug)]
pub struct RestoreOutcome {
    pub matched: Vec<MatchedRecord>,
    pub review_queue: Vec<ReviewItem>,
    pub discarded: Vec<DiscardedRecord>,
}

#[derive(Debug, Clone)]
pub struct RestoreOptions {
    /// Minimum similarity for a candidate to avoid being discarded.
    pub threshold: f64,
    /// Restrict the fuzzy scan to corpus tweets from the record's source
    /// year, bounding the scan cost. Exact matching always uses the whole
    /// corpus.
    pub restrict_to_source_year: bool,
}

impl Default for RestoreOptions {
    fn default() -> Self {
        RestoreOptions { threshold: 0.80, restrict_to_source_year: false }
    }
}

enum RecordFate {
    Exact(MatchedRecord),
    Review(ReviewItem),
    Discard(DiscardedRecord),
}

/// Link raw labeled records back to corpus tweets by text similarity.
///
/// Deterministic for a fixed corpus and record list: candidate order is by
/// corpus insertion order and parallelism only distributes independent
/// records. The three outputs partition the input records.
pub fn restore_ids(
    raw: &[RawLabeledRecord],
    corpus: &Corpus,
    opts: &RestoreOptions,
) -> Result<RestoreOutcome, CorpusError> {
    if corpus.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    if !(opts.threshold > 0.0 && opts.threshold <= 1.0) {
        return Err(CorpusError::BadThreshold { threshold: opts.threshold });
    }

    // Exact matches resolve by hash lookup on normalized text; only the
    // leftovers pay for a fuzzy scan over pre-normalized char sequences.
    let mut exact_index: HashMap<String, Vec<&Tweet>> = HashMap::new();
    let normalized: Vec<Vec<char>> = corpus
        .iter()
        .map(|t| {
            let norm = normalize_for_match(&t.text);
            exact_index.entry(norm.clone()).or_default().push(t);
            norm.chars().collect()
        })
        .collect();
    let tweets_by_index: Vec<&Tweet> = corpus.iter().collect();
    let mut by_year: HashMap<i32, Vec<usize>> = HashMap::new();
    for (i, t) in corpus.iter().enumerate() {
        by_year.entry(t.posted_at.year).or_default().push(i);
    }
    let all_indices: Vec<usize> = (0..corpus.len()).collect();

    let fates: Vec<RecordFate> = raw
        .par_iter()
        .enumerate()
        .map(|(record_index, record)| {
            let record_norm = normalize_for_match(&record.text);
            if let Some(hits) = exact_index.get(&record_norm) {
                if hits.len() == 1 {
                    return RecordFate::Exact(MatchedRecord {
                        tweet: hits[0].clone(),
                        label_ar: record.label_ar,
                        label_mb: record.label_mb,
                        match_score: 1.0,
                    });
                }
                // Several tweets share the text: a tie at score 1.0.
                return RecordFate::Review(ReviewItem {
                    record_index,
                    record: record.clone(),
                    candidates: hits
                        .iter()
                        .map(|t| MatchCandidate { tweet_id: t.tweet_id.clone(), score: 1.0 })
                        .collect(),
                });
            }

            let scan: &[usize] = if opts.restrict_to_source_year {
                by_year.get(&record.source_year).map(|v| v.as_slice()).unwrap_or(&[])
            } else {
                &all_indices
            };
            let record_chars: Vec<char> = record_norm.chars().collect();
            let best = best_candidates(
                &record_chars,
                scan,
                &normalized,
                &tweets_by_index,
                opts.threshold,
            );

            match best {
                Some((score, candidates)) if score >= opts.threshold => {
                    if score >= 1.0 && candidates.len() == 1 {
                        let tweet = corpus.get(&candidates[0]).unwrap().clone();
                        RecordFate::Exact(MatchedRecord {
                            tweet,
                            label_ar: record.label_ar,
                            label_mb: record.label_mb,
                            match_score: score,
                        })
                    } else {
                        RecordFate::Review(ReviewItem {
                            record_index,
                            record: record.clone(),
                            candidates: candidates
                                .into_iter()
                                .map(|tweet_id| MatchCandidate { tweet_id, score })
                                .collect(),
                        })
                    }
                }
                Some((score, _)) => RecordFate::Discard(DiscardedRecord {
                    record_index,
                    best_score: Some(score),
                }),
                None => RecordFate::Discard(DiscardedRecord { record_index, best_score: None }),
            }
        })
        .collect();

    let mut outcome = RestoreOutcome {
        matched: Vec::new(),
        review_queue: Vec::new(),
        discarded: Vec::new(),
    };
    for fate in fates {
        match fate {
            RecordFate::Exact(m) => outcome.matched.push(m),
            RecordFate::Review(r) => outcome.review_queue.push(r),
            RecordFate::Discard(d) => outcome.discarded.push(d),
        }
    }
    Ok(outcome)
}

/// Best similarity score over the scan set and every tweet achieving it.
///
/// Candidates that cannot reach the threshold or beat the best score so far
/// (within the tie tolerance) are abandoned early, so the scan cost stays
/// proportional to the plausible matches rather than the corpus size.
fn best_candidates(
    record_chars: &[char],
    scan: &[usize],
    normalized: &[Vec<char>],
    tweets_by_index: &[&Tweet],
    threshold: f64,
) -> Option<(f64, Vec<String>)> {
    let mut best_score = f64::NEG_INFINITY;
    let mut best_ids: Vec<String> = Vec::new();
    for &idx in scan {
        // Never prune away a potential tie: stay 1e-9 below both bounds.
        let floor = threshold.min(1.0).max(best_score - 1e-9).max(0.0);
        let Some(score) = similarity_at_least(record_chars, &normalized[idx], floor) else {
            continue;
        };
        if score > best_score + 1e-12 {
            best_score = score;
            best_ids.clear();
            best_ids.push(tweets_by_index[idx].tweet_id.clone());
        } else if (score - best_score).abs() <= 1e-12 {
            best_ids.push(tweets_by_index[idx].tweet_id.clone());
        }
    }
    if best_ids.is_empty() {
        None
    } else {
        Some((best_score, best_ids))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReviewDecision {
    Accept,
    Reject,
}

/// One line of the review manifest JSONL.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReviewEntry {
    pub record_index: usize,
    pub candidate_tweet_id: String,
    pub score: f64,
    pub decision: ReviewDecision,
}

pub fn write_review_manifest(path: &Path, entries: &[ReviewEntry]) -> std::io::Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    for entry in entries {
        serde_json::to_writer(&mut file, entry)?;
        file.write_all(b"\n")?;
    }
    file.flush()
}

pub fn read_review_manifest(path: &Path) -> std::io::Result<Vec<ReviewEntry>> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut entries = Vec::new();
    for line in file.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        entries.push(serde_json::from_str(&line).map_err(std::io::Error::other)?);
    }
    Ok(entries)
}

/// Replay human accept/reject decisions over the review queue.
///
/// Accepted items move to `matched` with the reviewed candidate's tweet;
/// rejected (or unreviewed) items move to `discarded`. The replay makes the
/// manual verification step reproducible.
pub fn apply_review_manifest(
    outcome: RestoreOutcome,
    corpus: &Corpus,
    entries: &[ReviewEntry],
) -> RestoreOutcome {
    let accepted: HashMap<usize, &ReviewEntry> = entries
        .iter()
        .filter(|e| e.decision == ReviewDecision::Accept)
        .map(|e| (e.record_index, e))
        .collect();

    let mut matched = outcome.matched;
    let mut discarded = outcome.discarded;
    let mut review_queue = Vec::new();

    for item in outcome.review_queue {
        match accepted.get(&item.record_index) {
            Some(entry) => match corpus.get(&entry.candidate_tweet_id) {
                Some(tweet) => matched.push(MatchedRecord {
                    tweet: tweet.clone(),
                    label_ar: item.record.label_ar,
                    label_mb: item.record.label_mb,
                    match_score: entry.score,
                }),
                None => review_queue.push(item),
            },
            None if entries.iter().any(|e| e.record_index == item.record_index) => {
                discarded.push(DiscardedRecord {
                    record_index: item.record_index,
                    best_score: item.candidates.first().map(|c| c.score),
                });
            }
            None => review_queue.push(item),
        }
    }

    RestoreOutcome { matched, review_queue, discarded }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::PostDate;

    fn tweet(id: &str, text: &str, year: i32) -> Tweet {
        Tweet {
            tweet_id: id.into(),
            text: text.into(),
            author_id: "a".into(),
            posted_at: PostDate::new(year, Some(1), Some(1)),
        }
    }

    fn record(text: &str, year: i32) -> RawLabeledRecord {
        RawLabeledRecord { text: text.into(), label_ar: 1, label_mb: 1, source_year: year }
    }

    fn small_corpus() -> Corpus {
        vec![
            tweet("10", "The quick brown fox jumps over the lazy dog", 2019),
            tweet("11", "Healthcare costs keep rising for families", 2019),
            tweet("12", "We passed the infrastructure bill today", 2020),
        ]
        .into_iter()
        .collect()
    }

    #[test]
    fn exact_text_matches_automatically() {
        let corpus = small_corpus();
        let raw = vec![record("The quick brown fox jumps over the lazy dog", 2019)];
        let out = restore_ids(&raw, &corpus, &RestoreOptions::default()).unwrap();
        assert_eq!(out.matched.len(), 1);
        assert_eq!(out.matched[0].match_score, 1.0);
        assert_eq!(out.matched[0].tweet.tweet_id, "10");
        assert!(out.review_queue.is_empty());
        assert!(out.discarded.is_empty());
    }

    #[test]
    fn near_match_goes_to_review() {
        let corpus = small_corpus();
        let raw = vec![record("The qick brown fox jumps over the lazy dog", 2019)];
        let out = restore_ids(&raw, &corpus, &RestoreOptions::default()).unwrap();
        assert!(out.matched.is_empty());
        assert_eq!(out.review_queue.len(), 1);
        let item = &out.review_queue[0];
        assert_eq!(item.candidates.len(), 1);
        assert_eq!(item.candidates[0].tweet_id, "10");
        assert!(item.candidates[0].score >= 0.8 && item.candidates[0].score < 1.0);
    }

    #[test]
    fn garbage_is_discarded() {
        let corpus = small_corpus();
        let raw = vec![record("zzzzzz qqqqq wwwww", 2019)];
        let out = restore_ids(&raw, &corpus, &RestoreOptions::default()).unwrap();
        assert_eq!(out.discarded.len(), 1);
        assert!(out.discarded[0].best_score.is_none());
    }

    #[test]
    fn outputs_partition_the_records() {
        let corpus = small_corpus();
        let raw = vec![
            record("The quick brown fox jumps over the lazy dog", 2019),
            record("Healthcare costs keep rising for familes", 2019),
            record("completely unrelated gibberish xyzzy", 2020),
        ];
        let out = restore_ids(&raw, &corpus, &RestoreOptions::default()).unwrap();
        assert_eq!(
            out.matched.len() + out.review_queue.len() + out.discarded.len(),
            raw.len()
        );
        for m in &out.matched {
            assert!(corpus.contains(&m.tweet.tweet_id));
        }
    }

    #[test]
    fn empty_corpus_is_fatal() {
        let raw = vec![record("anything", 2019)];
        assert!(matches!(
            restore_ids(&raw, &Corpus::new(), &RestoreOptions::default()),
            Err(CorpusError::EmptyCorpus)
        ));
    }

    #[test]
    fn ties_list_all_candidates() {
        let corpus: Corpus = vec![
            tweet("1", "same words here", 2019),
            tweet("2", "same words here", 2019),
        ]
        .into_iter()
        .collect();
        let raw = vec![record("same words here", 2019)];
        let out = restore_ids(&raw, &corpus, &RestoreOptions::default()).unwrap();
        assert_eq!(out.review_queue.len(), 1);
        assert_eq!(out.review_queue[0].candidates.len(), 2);
    }

    #[test]
    fn deterministic_across_runs() {
        let corpus = small_corpus();
        let raw = vec![
            record("The qick brown fox jumps over the lazy dog", 2019),
            record("We passed the infrastructure bill today", 2020),
        ];
        let a = restore_ids(&raw, &corpus, &RestoreOptions::default()).unwrap();
        let b = restore_ids(&raw, &corpus, &RestoreOptions::default()).unwrap();
        assert_eq!(a.matched, b.matched);
        assert_eq!(a.review_queue.len(), b.review_queue.len());
    }

    #[test]
    fn year_restriction_bounds_the_scan() {
        let corpus = small_corpus();
        let opts = RestoreOptions { threshold: 0.8, restrict_to_source_year: true };
        // Near-match text from the wrong year finds no candidate.
        let raw = vec![record("We passed the infrastructure bill todayy", 2019)];
        let out = restore_ids(&raw, &corpus, &opts).unwrap();
        assert_eq!(out.discarded.len(), 1);
    }

    #[test]
    fn review_manifest_round_trip_and_replay() {
        let corpus = small_corpus();
        let raw = vec![record("The qick brown fox jumps over the lazy dog", 2019)];
        let out = restore_ids(&raw, &corpus, &RestoreOptions::default()).unwrap();
        let item = &out.review_queue[0];
        let entries = vec![ReviewEntry {
            record_index: item.record_index,
            candidate_tweet_id: item.candidates[0].tweet_id.clone(),
            score: item.candidates[0].score,
            decision: ReviewDecision::Accept,
        }];

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("review.jsonl");
        write_review_manifest(&path, &entries).unwrap();
        let back = read_review_manifest(&path).unwrap();
        assert_eq!(back.len(), 1);

        let replayed = apply_review_manifest(out, &corpus, &back);
        assert_eq!(replayed.matched.len(), 1);
        // Corrupted text replaced by the corpus text.
        assert_eq!(
            replayed.matched[0].tweet.text,
            "The quick brown fox jumps over the lazy dog"
        );
        assert!(replayed.review_queue.is_empty());
    }

    #[test]
    fn rejected_review_moves_to_discarded() {
        let corpus = small_corpus();
        let raw = vec![record("The qick brown fox jumps over the lazy dog", 2019)];
        let out = restore_ids(&raw, &corpus, &RestoreOptions::default()).unwrap();
        let item = &out.review_queue[0];
        let entries = vec![ReviewEntry {
            record_index: item.record_index,
            candidate_tweet_id: item.candidates[0].tweet_id.clone(),
            score: item.candidates[0].score,
            decision: ReviewDecision::Reject,
        }];
        let replayed = apply_review_manifest(out, &corpus, &entries);
        assert!(replayed.matched.is_empty());
        assert_eq!(replayed.discarded.len(), 1);
    }
}
