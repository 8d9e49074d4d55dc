//! End-to-end pipeline over real files: ingest a synthetic corpus and
//! labeled CSV, restore IDs, validate labels, build splits, train the
//! transformer and baselines, run self-training with the production
//! scorer, and aggregate downstream statistics.

use framing_core::analytics::{aggregate_monthly, emit_figures, load_metadata, GroupBy};
use framing_core::category::Category;
use framing_core::corpus::{
    ingest_corpus, ingest_labeled, read_labeled_csv, restore_ids, validate_labels,
    write_labeled_csv, CorpusFormat, RestoreOptions,
};
use framing_core::models::{
    examples_for, run_experiment, train_baseline, train_model, AuthorIndex, BaselineHyper,
    BaselineKind, Encoder, EncoderConfig, ExperimentMode, ModelConfig, TrainSettings,
};
use framing_core::partition::{build_standard_splits, LabelSource};
use framing_core::selftrain::{
    run_self_training, SelfTrainConfig, ThresholdSchedule, TransformerScorer,
};
use std::io::Write;
use std::path::Path;

fn text_for(i: usize) -> (String, Category) {
    match i % 3 {
        0 => (format!("crisis broken failing issue {i} worsening shortage"), Category::Problem),
        1 => (format!("bill passed fix reform {i} legislation enacted"), Category::Solution),
        _ => (format!("happy birthday greetings {i} visiting friends today"), Category::Other),
    }
}

fn write_corpus(dir: &Path, n: usize) -> std::path::PathBuf {
    let path = dir.join("corpus.csv");
    let mut file = std::io::BufWriter::new(std::fs::File::create(&path).unwrap());
    writeln!(file, "tweet_id,text,author_id,created_at").unwrap();
    for i in 0..n {
        let (text, _) = text_for(i);
        let year = 2012 + (i / 40) % 10;
        writeln!(file, "{i},{text},a{},{}-0{}-15", i % 6, year, 1 + i % 9).unwrap();
    }
    file.flush().unwrap();
    path
}

fn write_labeled(dir: &Path, n: usize) -> std::path::PathBuf {
    let path = dir.join("labeled.csv");
    let mut file = std::io::BufWriter::new(std::fs::File::create(&path).unwrap());
    writeln!(file, "text,label_ar,label_mb,year").unwrap();
    for i in 0..n {
        let (text, label) = text_for(i);
        let year = 2012 + (i / 40) % 10;
        // One corrupted text (single-character edit) and one invalid code.
        if i == 13 {
            writeln!(file, "{text}x,{},{},{year}", label.code(), label.code()).unwrap();
        } else if i == 7 {
            writeln!(file, "{text},4,{},{year}", label.code()).unwrap();
        } else {
            writeln!(file, "{text},{},{},{year}", label.code(), label.code()).unwrap();
        }
    }
    file.flush().unwrap();
    path
}

#[test]
fn full_pipeline_on_synthetic_files() {
    let dir = tempfile::tempdir().unwrap();
    let corpus_path = write_corpus(dir.path(), 400);
    let labeled_path = write_labeled(dir.path(), 120);

    // Ingest.
    let corpus = ingest_corpus(&corpus_path, CorpusFormat::Csv).unwrap().corpus;
    assert_eq!(corpus.len(), 400);
    let (records, issues) = ingest_labeled(&labeled_path).unwrap();
    assert_eq!(records.len(), 120);
    assert!(issues.is_empty());

    // Restore: 119 exact, 1 near-match in review.
    let outcome = restore_ids(&records, &corpus, &RestoreOptions::default()).unwrap();
    assert_eq!(outcome.matched.len(), 119);
    assert_eq!(outcome.review_queue.len(), 1);
    assert!(outcome.discarded.is_empty());

    // Validate: the code-4 record is removed and logged.
    let (label_set, removed) = validate_labels(outcome.matched);
    assert_eq!(label_set.len(), 118);
    assert_eq!(removed.len(), 1);
    assert!(removed[0].reason.contains("invalid code 4"));

    // Round-trip the label set through its CSV artifact.
    let label_csv = dir.path().join("label_set.csv");
    write_labeled_csv(&label_csv, &label_set).unwrap();
    let label_set = read_labeled_csv(&label_csv).unwrap();
    assert_eq!(label_set.len(), 118);

    // Splits. The labeled rows come from years 2012-2014.
    let bundle =
        build_standard_splits(&label_set, 5, 2012..=2014, 3, LabelSource::Ar, 2025).unwrap();
    let test = bundle.get("TEST").unwrap();
    let train = bundle.get("TRAIN").unwrap();
    assert_eq!(test.len(), 15);
    assert_eq!(test.len() + train.len(), label_set.len());

    // Transformer experiment on the holdout splits.
    let encoder = Encoder::init_random(EncoderConfig::tiny(2000, 16), 7);
    let cfg = ModelConfig {
        trials: 1,
        max_epochs: 4,
        batch_size: 16,
        learning_rate: 5e-3,
        ..ModelConfig::default()
    };
    let report = run_experiment(
        ExperimentMode::Holdout,
        &cfg,
        &bundle,
        &label_set,
        &encoder,
        &TrainSettings::default(),
    )
    .unwrap();
    assert_eq!(report.runs.len(), 1);
    assert!(
        report.aggregate_ar.accuracy.mean > 0.9,
        "separable synthetic data should classify well, got {}",
        report.aggregate_ar.accuracy.mean
    );

    // Baselines on year+author features (authors correlate with nothing
    // here, so only the floor behavior matters: they run and report).
    let index = AuthorIndex::fit(label_set.iter().map(|e| e.tweet.author_id.as_str()));
    let featurized: Vec<(Vec<f64>, Category)> = label_set
        .iter()
        .map(|e| (framing_core::models::featurize_baseline(&e.tweet, &index), e.label_ar))
        .collect();
    for kind in [BaselineKind::LogReg, BaselineKind::GbTree] {
        let model =
            train_baseline(kind, &featurized, &featurized, &BaselineHyper::default(), 1).unwrap();
        let p = model.predict(&featurized[0].0);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    // Self-training with the production transformer scorer on a small
    // unlabeled pool.
    let labeled_examples = examples_for(&label_set, train, LabelSource::Ar).unwrap();
    let test_examples = examples_for(&label_set, test, LabelSource::Ar).unwrap();
    let pool: Vec<(String, String)> = corpus
        .iter()
        .filter(|t| label_set.get(&t.tweet_id).is_none())
        .take(40)
        .map(|t| (t.tweet_id.clone(), t.text.clone()))
        .collect();
    let mut scorer = TransformerScorer::new(encoder.clone(), cfg.clone(), false);
    let st = run_self_training(
        &labeled_examples,
        &pool,
        &test_examples,
        None,
        &mut scorer,
        ThresholdSchedule::default(),
        &SelfTrainConfig { max_iterations: 4, ..SelfTrainConfig::default() },
    )
    .unwrap();
    assert!(!st.history.is_empty());
    let total = labeled_examples.len() + pool.len();
    for record in &st.history {
        assert_eq!(record.labeled_pool_size + record.unlabeled_pool_size, total);
    }

    // Train a final model and label the whole remaining corpus, then run
    // downstream statistics over the labels.
    let fit = examples_for(&label_set, bundle.get("FIT").unwrap(), LabelSource::Ar).unwrap();
    let validate =
        examples_for(&label_set, bundle.get("VALIDATE").unwrap(), LabelSource::Ar).unwrap();
    let (model, _, _) =
        train_model(&fit, &validate, &cfg, 0, &encoder, &TrainSettings::default()).unwrap();
    let unlabeled: Vec<(String, String)> = corpus
        .iter()
        .filter(|t| label_set.get(&t.tweet_id).is_none())
        .map(|t| (t.tweet_id.clone(), t.text.clone()))
        .collect();
    let predictions = framing_core::models::predict_batch(&model, &unlabeled);
    assert_eq!(predictions.len(), corpus.len() - label_set.len());

    // Incremental mode warm-starts each iteration from the previous
    // encoder instead of the checkpoint; the loop must still run clean.
    let mut warm_scorer = TransformerScorer::new(encoder.clone(), cfg.clone(), true);
    let warm = run_self_training(
        &labeled_examples,
        &pool,
        &test_examples,
        None,
        &mut warm_scorer,
        ThresholdSchedule::default(),
        &SelfTrainConfig { max_iterations: 2, ..SelfTrainConfig::default() },
    )
    .unwrap();
    assert_eq!(warm.history.len(), 2);

    let metadata_path = dir.path().join("metadata.csv");
    std::fs::write(
        &metadata_path,
        "author_id,party,gender,race,state\n\
         a0,D,F,white,NV\na1,R,M,white,TX\na2,D,M,black,NJ\n\
         a3,R,F,white,ME\na4,I,M,white,VT\na5,D,F,asian,HI\n",
    )
    .unwrap();
    let metadata = load_metadata(&metadata_path).unwrap();
    let labels: Vec<(&framing_core::corpus::Tweet, Category)> = label_set
        .iter()
        .map(|e| (&e.tweet, e.label_ar))
        .chain(predictions.iter().map(|p| (corpus.get(&p.tweet_id).unwrap(), p.label)))
        .collect();
    let aggregated = aggregate_monthly(labels.into_iter(), &metadata, GroupBy::Party);
    assert!(aggregated.unknown_authors.is_empty());
    let total_tweets: usize = aggregated.aggregates.iter().map(|a| a.total).sum();
    assert_eq!(total_tweets, corpus.len());

    let figures = emit_figures(&aggregated.aggregates, dir.path(), "fig_party").unwrap();
    assert!(figures.files.iter().any(|f| f.ends_with("fig_party_counts.csv")));
}
