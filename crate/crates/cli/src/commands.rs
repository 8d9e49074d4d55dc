//! One function per subcommand. Every command writes its outputs plus a
//! run manifest into its output directory and logs progress as JSONL-ish
//! lines on stderr.

use crate::manifest::ManifestBuilder;
use anyhow::{bail, Context, Result};
use framing_core::analytics::{aggregate_monthly, emit_figures, load_metadata, GroupBy};
use framing_core::category::Category;
use framing_core::config::load_config;
use framing_core::corpus::{
    apply_review_manifest, ingest_corpus, ingest_labeled, read_labeled_csv, read_review_manifest,
    restore_ids, validate_labels, write_labeled_csv, write_review_manifest, Corpus, CorpusFormat,
    LabeledSet, RestoreOptions, ReviewDecision, ReviewEntry,
};
use framing_core::llm::{
    classify_remote, grid_search_k_default, predictions_from_responses, scored_pairs,
    write_unclassified_report, EndpointConfig, HttpBackend, LlmResponse, PromptMode, PromptSpec,
    ResponseCache,
};
use framing_core::metrics::{agreement_report, classification_report, KappaWeights};
use framing_core::models::{
    examples_for, init_checkpoint, load_checkpoint, predict_batch, resolve_model_dir,
    run_experiment_with_sink, train_model, EncoderConfig, ExperimentMode, ExperimentSink,
    ModelConfig, TrainSettings,
};
use framing_core::partition::{build_standard_splits, SplitBundle};
use framing_core::rng;
use framing_core::selftrain::{
    export_pool_csv, run_self_training, write_history, SelfTrainConfig, ThresholdSchedule,
    TransformerScorer,
};
use serde_json::json;
use std::path::Path;

fn progress(event: &str, detail: serde_json::Value) {
    eprintln!("{}", json!({ "event": event, "detail": detail }));
}

fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).with_context(|| format!("create {}", path.display()))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?)
        .with_context(|| format!("write {}", path.display()))
}

fn load_corpus(path: &Path, format: Option<CorpusFormat>) -> Result<Corpus> {
    let format = format.unwrap_or_else(|| CorpusFormat::from_path(path));
    let outcome = ingest_corpus(path, format)?;
    if !outcome.issues.is_empty() {
        progress(
            "corpus_issues",
            json!({ "count": outcome.issues.len(),
                    "first": outcome.issues.first().map(|i| format!("line {}: {}", i.line, i.reason)) }),
        );
    }
    Ok(outcome.corpus)
}

fn config_with_overrides(config: Option<&Path>, overrides: &[String]) -> Result<ModelConfig> {
    Ok(load_config(config, overrides)?)
}

fn config_digest(cfg: &ModelConfig) -> String {
    serde_json::to_string(cfg).expect("config serializes")
}

/// Device selection comes from FRAMING_DEVICE; only the CPU backend exists.
fn check_device() -> Result<()> {
    match std::env::var("FRAMING_DEVICE") {
        Ok(d) if d != "cpu" => bail!("FRAMING_DEVICE={d} is not supported; only 'cpu' is available"),
        _ => Ok(()),
    }
}

pub fn cmd_ingest(
    corpus_path: &Path,
    format: Option<CorpusFormat>,
    labeled: Option<&Path>,
    keep_lang: Option<&str>,
    out_dir: &Path,
) -> Result<()> {
    ensure_dir(out_dir)?;
    let mut manifest = ManifestBuilder::new("ingest", 0).input(corpus_path)?;

    let format = format.unwrap_or_else(|| CorpusFormat::from_path(corpus_path));
    let mut outcome = ingest_corpus(corpus_path, format)?;
    // No detector ships with the pipeline (the distributed corpus is
    // already filtered); requesting one is fatal with an instruction.
    outcome.corpus = framing_core::corpus::filter_language(outcome.corpus, keep_lang, None)?;
    let mut report = json!({
        "rows_read": outcome.rows_read,
        "retained": outcome.corpus.len(),
        "issues": outcome.issues,
    });

    if let Some(labeled_path) = labeled {
        manifest = manifest.input(labeled_path)?;
        let (records, issues) = ingest_labeled(labeled_path)?;
        report["labeled_rows"] = json!(records.len());
        report["labeled_issues"] = json!(issues);
        report["total"] = json!(outcome.corpus.len() + records.len());
    }

    let report_path = out_dir.join("ingest_report.json");
    write_json(&report_path, &report)?;
    manifest.output(&report_path);
    manifest.write(out_dir)?;

    println!(
        "ingested {} tweets ({} rows read, {} issues)",
        outcome.corpus.len(),
        outcome.rows_read,
        outcome.issues.len()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_restore_ids(
    corpus_path: &Path,
    labeled_path: &Path,
    threshold: f64,
    restrict_year: bool,
    apply_review: Option<&Path>,
    out_dir: &Path,
) -> Result<()> {
    ensure_dir(out_dir)?;
    let mut manifest = ManifestBuilder::new("restore-ids", 0)
        .input(corpus_path)?
        .input(labeled_path)?;

    let corpus = load_corpus(corpus_path, None)?;
    let (records, issues) = ingest_labeled(labeled_path)?;
    progress("labeled_loaded", json!({ "records": records.len(), "issues": issues.len() }));

    let opts = RestoreOptions { threshold, restrict_to_source_year: restrict_year };
    let mut outcome = restore_ids(&records, &corpus, &opts)?;
    progress(
        "restored",
        json!({
            "exact": outcome.matched.len(),
            "review": outcome.review_queue.len(),
            "discarded": outcome.discarded.len(),
        }),
    );

    if let Some(review_path) = apply_review {
        manifest = manifest.input(review_path)?;
        let entries = read_review_manifest(review_path)?;
        outcome = apply_review_manifest(outcome, &corpus, &entries);
        progress(
            "review_applied",
            json!({ "matched": outcome.matched.len(), "pending": outcome.review_queue.len() }),
        );
    }

    // Persist the pending queue as a manifest template (all rejects) for a
    // human to edit and replay.
    let queue_path = out_dir.join("review_queue.jsonl");
    let template: Vec<ReviewEntry> = outcome
        .review_queue
        .iter()
        .flat_map(|item| {
            item.candidates.iter().map(|c| ReviewEntry {
                record_index: item.record_index,
                candidate_tweet_id: c.tweet_id.clone(),
                score: c.score,
                decision: ReviewDecision::Reject,
            })
        })
        .collect();
    write_review_manifest(&queue_path, &template)?;

    let (label_set, removed) = validate_labels(outcome.matched);
    let label_path = out_dir.join("label_set.csv");
    write_labeled_csv(&label_path, &label_set)?;

    let report = json!({
        "raw_records": records.len(),
        "matched": label_set.len() + removed.len(),
        "in_review": outcome.review_queue.len(),
        "discarded": outcome.discarded.len(),
        "invalid_labels_removed": removed,
        "label_set_size": label_set.len(),
    });
    let report_path = out_dir.join("restore_report.json");
    write_json(&report_path, &report)?;

    manifest.output(&label_path);
    manifest.output(&queue_path);
    manifest.output(&report_path);
    manifest.write(out_dir)?;

    println!(
        "label set: {} examples ({} pending review, {} discarded, {} invalid-label removals)",
        label_set.len(),
        outcome.review_queue.len(),
        outcome.discarded.len(),
        removed.len()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_split(
    label_set_path: &Path,
    config: Option<&Path>,
    overrides: &[String],
    per_year: usize,
    year_start: i32,
    year_end: i32,
    out_dir: &Path,
) -> Result<()> {
    ensure_dir(out_dir)?;
    let cfg = config_with_overrides(config, overrides)?;
    let manifest = ManifestBuilder::new("split", cfg.global_seed)
        .config_text(&config_digest(&cfg))
        .input(label_set_path)?;

    let label_set = read_labeled_csv(label_set_path)?;
    let bundle = build_standard_splits(
        &label_set,
        per_year,
        year_start..=year_end,
        cfg.cross_val_folds,
        cfg.label_source,
        cfg.global_seed,
    )?;

    let splits_path = out_dir.join("splits.json");
    std::fs::write(&splits_path, serde_json::to_string_pretty(&bundle)?)?;

    // Inter-coder agreement over the whole labeled set, as reported next to
    // the split sizes.
    let ar: Vec<Category> = label_set.iter().map(|e| e.label_ar).collect();
    let mb: Vec<Category> = label_set.iter().map(|e| e.label_mb).collect();
    let agreement = agreement_report(&ar, &mb, KappaWeights::Linear)?;

    let sizes: serde_json::Map<String, serde_json::Value> = bundle
        .splits
        .iter()
        .map(|s| (s.name.clone(), json!(s.len())))
        .collect();
    let report = json!({
        "sizes": sizes,
        "folds": bundle.folds.folds.iter().map(|f| f.cross_test.len()).collect::<Vec<_>>(),
        "agreement": agreement,
    });
    let report_path = out_dir.join("split_report.json");
    write_json(&report_path, &report)?;

    let mut manifest = manifest;
    manifest.output(&splits_path);
    manifest.output(&report_path);
    manifest.write(out_dir)?;

    let test = bundle.get("TEST").map(|s| s.len()).unwrap_or(0);
    let train = bundle.get("TRAIN").map(|s| s.len()).unwrap_or(0);
    println!(
        "splits written: TEST={test} TRAIN={train} (agreement {:.2}%, kappa {:.3})",
        agreement.percent_agreement, agreement.kappa
    );
    Ok(())
}

fn load_bundle(path: &Path) -> Result<SplitBundle> {
    let text = std::fs::read_to_string(path).with_context(|| format!("read {}", path.display()))?;
    Ok(serde_json::from_str(&text)?)
}

fn load_encoder_for(cfg: &ModelConfig) -> Result<framing_core::models::Encoder> {
    let dir = resolve_model_dir(&cfg.model_name, Path::new(&cfg.models_dir));
    Ok(load_checkpoint(&dir)?)
}

fn train_settings(cfg: &ModelConfig, label_set: &LabeledSet, fit_ids: &[String]) -> Result<TrainSettings> {
    if !cfg.class_weighting {
        return Ok(TrainSettings::default());
    }
    let labels: Vec<Category> = fit_ids
        .iter()
        .filter_map(|id| label_set.get(id))
        .map(|e| e.label(cfg.label_source))
        .collect();
    let weights = framing_core::selftrain::compute_class_weights(&labels)?;
    Ok(TrainSettings { class_weights: Some(weights) })
}

pub fn cmd_train(
    label_set_path: &Path,
    splits_path: &Path,
    config: Option<&Path>,
    overrides: &[String],
    mode: ExperimentMode,
    save_models: bool,
    out_dir: &Path,
) -> Result<()> {
    ensure_dir(out_dir)?;
    check_device()?;
    let cfg = config_with_overrides(config, overrides)?;
    let manifest = ManifestBuilder::new(
        match mode {
            ExperimentMode::Holdout => "train",
            ExperimentMode::CrossValidation => "cross-validate",
        },
        cfg.global_seed,
    )
    .config_text(&config_digest(&cfg))
    .input(label_set_path)?
    .input(splits_path)?;

    let label_set = read_labeled_csv(label_set_path)?;
    let bundle = load_bundle(splits_path)?;
    let encoder = load_encoder_for(&cfg)?;

    let settings = match bundle.get("FIT") {
        Some(fit) => train_settings(&cfg, &label_set, &fit.member_ids)?,
        None => TrainSettings::default(),
    };

    progress("training_start", json!({ "mode": format!("{mode:?}"), "trials": cfg.trials }));
    let sink = ExperimentSink { dir: out_dir.to_path_buf(), persist_models: save_models };
    let report = run_experiment_with_sink(
        mode,
        &cfg,
        &bundle,
        &label_set,
        &encoder,
        &settings,
        Some(&sink),
    )?;

    let report_path = out_dir.join("experiment_report.json");
    std::fs::write(&report_path, serde_json::to_string_pretty(&report)?)?;

    let mut manifest = manifest;
    manifest.output(&report_path);
    manifest.write(out_dir)?;

    println!(
        "{} runs: AR weighted F1 {:.4} (σ {:.4}), accuracy {:.4}",
        report.runs.len(),
        report.aggregate_ar.weighted_f1.mean,
        report.aggregate_ar.weighted_f1.std,
        report.aggregate_ar.accuracy.mean
    );
    Ok(())
}

struct UnlabeledPool {
    tweets: Vec<(String, String)>,
}

fn unlabeled_pool(corpus: &Corpus, label_set: &LabeledSet, bundle: &SplitBundle) -> UnlabeledPool {
    let mut excluded: std::collections::HashSet<&str> =
        label_set.iter().map(|e| e.tweet.tweet_id.as_str()).collect();
    if let Some(test) = bundle.get("TEST") {
        excluded.extend(test.member_ids.iter().map(|s| s.as_str()));
    }
    let tweets = corpus
        .iter()
        .filter(|t| !excluded.contains(t.tweet_id.as_str()))
        .map(|t| (t.tweet_id.clone(), t.text.clone()))
        .collect();
    UnlabeledPool { tweets }
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_self_train(
    label_set_path: &Path,
    splits_path: &Path,
    corpus_path: &Path,
    config: Option<&Path>,
    overrides: &[String],
    sample_cap: Option<usize>,
    floor: f64,
    incremental: bool,
    out_dir: &Path,
) -> Result<()> {
    ensure_dir(out_dir)?;
    check_device()?;
    let cfg = config_with_overrides(config, overrides)?;
    let manifest = ManifestBuilder::new("self-train", cfg.global_seed)
        .config_text(&config_digest(&cfg))
        .input(label_set_path)?
        .input(splits_path)?
        .input(corpus_path)?;

    let label_set = read_labeled_csv(label_set_path)?;
    let bundle = load_bundle(splits_path)?;
    let corpus = load_corpus(corpus_path, None)?;
    let encoder = load_encoder_for(&cfg)?;

    let train_manifest = bundle
        .get("TRAIN")
        .context("splits.json is missing the TRAIN manifest")?;
    let test_manifest = bundle
        .get("TEST")
        .context("splits.json is missing the TEST manifest")?;
    let labeled = examples_for(&label_set, train_manifest, cfg.label_source)?;
    let test = examples_for(&label_set, test_manifest, cfg.label_source)?;

    let mut pool = unlabeled_pool(&corpus, &label_set, &bundle).tweets;
    if let Some(cap) = sample_cap {
        // Deterministic subsample of the unlabeled pool.
        pool.sort_by(|a, b| a.0.cmp(&b.0));
        let mut pool_rng =
            rng::seeded_rng(rng::derive_seed(cfg.global_seed, "selftrain:sample"));
        rng::shuffle(&mut pool_rng, &mut pool);
        pool.truncate(cap);
    }
    progress(
        "selftrain_start",
        json!({ "labeled": labeled.len(), "unlabeled": pool.len(), "test": test.len() }),
    );

    let schedule = ThresholdSchedule { floor, ..ThresholdSchedule::default() };
    let st_cfg = SelfTrainConfig::default();
    let mut scorer = TransformerScorer::new(encoder, cfg.clone(), incremental);
    let outcome =
        run_self_training(&labeled, &pool, &test, None, &mut scorer, schedule, &st_cfg)?;

    let history_path = out_dir.join("selftrain_history.jsonl");
    write_history(&history_path, &outcome.history)?;
    let pool_path = out_dir.join("labeled_pool.csv");
    export_pool_csv(&pool_path, &outcome.final_pool)?;
    let report_path = out_dir.join("selftrain_report.json");
    write_json(
        &report_path,
        &json!({
            "best_iteration": outcome.best_iteration,
            "iterations": outcome.history.len(),
            "admissions": outcome.admissions.len(),
            "final_pool_size": outcome.final_pool.len(),
        }),
    )?;

    let mut manifest = manifest;
    manifest.output(&history_path);
    manifest.output(&pool_path);
    manifest.output(&report_path);
    manifest.write(out_dir)?;

    let best = outcome
        .history
        .iter()
        .find(|r| r.iteration == outcome.best_iteration);
    println!(
        "self-training: best iteration {} (test macro F1 {:.4}), {} pseudo-labels admitted",
        outcome.best_iteration,
        best.map(|r| r.test_macro_f1).unwrap_or(f64::NAN),
        outcome.admissions.len()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_llm_classify(
    label_set_path: &Path,
    splits_path: Option<&Path>,
    split_name: &str,
    mode: PromptMode,
    with_explanation: bool,
    k: f64,
    endpoint: EndpointConfig,
    cache_path: &Path,
    out_dir: &Path,
) -> Result<()> {
    ensure_dir(out_dir)?;
    let manifest =
        ManifestBuilder::new("llm-classify", 0).input(label_set_path)?;

    let label_set = read_labeled_csv(label_set_path)?;
    let tweets: Vec<(String, String)> = match splits_path {
        Some(sp) => {
            let bundle = load_bundle(sp)?;
            let manifest = bundle
                .get(split_name)
                .with_context(|| format!("splits.json has no '{split_name}'"))?;
            manifest
                .member_ids
                .iter()
                .filter_map(|id| label_set.get(id))
                .map(|e| (e.tweet.tweet_id.clone(), e.tweet.text.clone()))
                .collect()
        }
        None => label_set
            .iter()
            .map(|e| (e.tweet.tweet_id.clone(), e.tweet.text.clone()))
            .collect(),
    };

    let spec = PromptSpec { mode, with_explanation };
    let mut cache = ResponseCache::open(cache_path)?;
    let backend = HttpBackend::new(endpoint.clone())?;
    progress(
        "llm_start",
        json!({ "tweets": tweets.len(), "prompt": spec.name(), "cached": cache.len() }),
    );
    let (responses, stats) = classify_remote(&tweets, &spec, &backend, &mut cache, &endpoint)?;
    progress(
        "llm_done",
        json!({ "network_calls": stats.network_calls, "cache_hits": stats.cache_hits,
                "unclassified": stats.unclassified }),
    );

    write_llm_outputs(&responses, &label_set, k, spec, out_dir, manifest)
}

fn write_llm_outputs(
    responses: &[LlmResponse],
    label_set: &LabeledSet,
    k: f64,
    spec: PromptSpec,
    out_dir: &Path,
    mut manifest: ManifestBuilder,
) -> Result<()> {
    let responses_path = out_dir.join("responses.jsonl");
    {
        use std::io::Write;
        let mut file = std::io::BufWriter::new(std::fs::File::create(&responses_path)?);
        for r in responses {
            serde_json::to_writer(&mut file, r)?;
            file.write_all(b"\n")?;
        }
    }
    let unclassified_path = out_dir.join("unclassified.csv");
    write_unclassified_report(&unclassified_path, responses)?;

    let predictions = predictions_from_responses(responses, k);
    let mut report = json!({
        "prompt": spec.name(),
        "responses": responses.len(),
        "classified": predictions.len(),
        "k": k,
    });

    // Score against both coders where gold labels exist.
    let mut pred = Vec::new();
    let mut gold_ar = Vec::new();
    let mut gold_mb = Vec::new();
    for p in &predictions {
        if let Some(ex) = label_set.get(&p.tweet_id) {
            pred.push(p.label);
            gold_ar.push(ex.label_ar);
            gold_mb.push(ex.label_mb);
        }
    }
    if !pred.is_empty() {
        let ar = classification_report(&pred, &gold_ar)?;
        let mb = classification_report(&pred, &gold_mb)?;
        println!(
            "llm ({}): accuracy {:.4} macro F1 {:.4} on {} tweets (vs AR)",
            spec.name(),
            ar.accuracy,
            ar.macro_f1,
            ar.n
        );
        report["metrics_ar"] = serde_json::to_value(&ar)?;
        report["metrics_mb"] = serde_json::to_value(&mb)?;
    }

    let report_path = out_dir.join("llm_report.json");
    write_json(&report_path, &report)?;

    manifest.output(&responses_path);
    manifest.output(&unclassified_path);
    manifest.output(&report_path);
    manifest.write(out_dir)?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_llm_grid(
    label_set_path: &Path,
    splits_path: &Path,
    split_name: &str,
    with_explanation: bool,
    endpoint: EndpointConfig,
    cache_path: &Path,
    out_dir: &Path,
) -> Result<()> {
    ensure_dir(out_dir)?;
    let manifest = ManifestBuilder::new("llm-grid", 0)
        .input(label_set_path)?
        .input(splits_path)?;

    let label_set = read_labeled_csv(label_set_path)?;
    let bundle = load_bundle(splits_path)?;
    let split = bundle
        .get(split_name)
        .with_context(|| format!("splits.json has no '{split_name}'"))?;
    let tweets: Vec<(String, String)> = split
        .member_ids
        .iter()
        .filter_map(|id| label_set.get(id))
        .map(|e| (e.tweet.tweet_id.clone(), e.tweet.text.clone()))
        .collect();

    let spec = PromptSpec { mode: PromptMode::Confidence, with_explanation };
    let mut cache = ResponseCache::open(cache_path)?;
    let backend = HttpBackend::new(endpoint.clone())?;
    let (responses, stats) = classify_remote(&tweets, &spec, &backend, &mut cache, &endpoint)?;
    progress(
        "llm_done",
        json!({ "network_calls": stats.network_calls, "unclassified": stats.unclassified }),
    );

    // Thresholds are tuned against AR labels, mirroring the training default.
    let scored = scored_pairs(&responses, |id| label_set.get(id).map(|e| e.label_ar));
    let result = grid_search_k_default(&scored)?;

    let grid_path = out_dir.join("grid_search.json");
    std::fs::write(&grid_path, serde_json::to_string_pretty(&result)?)?;
    let curve_path = out_dir.join("grid_curve.csv");
    {
        use std::io::Write;
        let mut file = std::io::BufWriter::new(std::fs::File::create(&curve_path)?);
        writeln!(file, "k,accuracy,macro_f1")?;
        for p in &result.curve {
            writeln!(file, "{},{},{}", p.k, p.accuracy, p.macro_f1)?;
        }
    }

    let mut manifest = manifest;
    manifest.output(&grid_path);
    manifest.output(&curve_path);
    manifest.write(out_dir)?;

    println!(
        "grid search over {} scored tweets: accuracy-optimal k={} ({:.4}), macro-F1-optimal k={} ({:.4})",
        scored.len(),
        result.best_accuracy_k,
        result.best_accuracy,
        result.best_macro_f1_k,
        result.best_macro_f1
    );
    Ok(())
}

pub fn cmd_evaluate(pred_path: &Path, gold_path: &Path, out_dir: Option<&Path>) -> Result<()> {
    let pred = read_label_csv(pred_path)?;
    let gold = read_label_csv(gold_path)?;

    let mut pred_labels = Vec::new();
    let mut gold_labels = Vec::new();
    for (id, g) in &gold {
        match pred.iter().find(|(pid, _)| pid == id) {
            Some((_, p)) => {
                pred_labels.push(*p);
                gold_labels.push(*g);
            }
            None => bail!("prediction file has no entry for tweet_id '{id}'"),
        }
    }
    let report = classification_report(&pred_labels, &gold_labels)?;
    let agreement = agreement_report(&pred_labels, &gold_labels, KappaWeights::Linear)?;

    let value = json!({ "classification": report, "agreement": agreement });
    println!("{}", serde_json::to_string_pretty(&value)?);

    if let Some(dir) = out_dir {
        ensure_dir(dir)?;
        let mut manifest = ManifestBuilder::new("evaluate", 0)
            .input(pred_path)?
            .input(gold_path)?;
        let report_path = dir.join("evaluation.json");
        write_json(&report_path, &value)?;
        let confusion_path = dir.join("confusion.csv");
        std::fs::write(&confusion_path, report.confusion.to_csv())?;
        manifest.output(&report_path);
        manifest.output(&confusion_path);
        manifest.write(dir)?;
    }
    Ok(())
}

/// CSV with `tweet_id,label` columns (extra columns ignored).
fn read_label_csv(path: &Path) -> Result<Vec<(String, Category)>> {
    let mut reader = csv::Reader::from_path(path)
        .with_context(|| format!("read {}", path.display()))?;
    let headers = reader.headers()?.clone();
    let id_col = headers
        .iter()
        .position(|h| h == "tweet_id")
        .with_context(|| format!("{} lacks a tweet_id column", path.display()))?;
    let label_col = headers
        .iter()
        .position(|h| h == "label")
        .with_context(|| format!("{} lacks a label column", path.display()))?;
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let id = record.get(id_col).unwrap_or("").to_string();
        let code: i64 = record
            .get(label_col)
            .unwrap_or("")
            .trim()
            .parse()
            .with_context(|| format!("{} line {}: bad label", path.display(), i + 2))?;
        let label = Category::from_code(code)
            .with_context(|| format!("{} line {}: label {code} outside 1-3", path.display(), i + 2))?;
        out.push((id, label));
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_label_all(
    label_set_path: &Path,
    splits_path: &Path,
    corpus_path: &Path,
    config: Option<&Path>,
    overrides: &[String],
    out_dir: &Path,
) -> Result<()> {
    ensure_dir(out_dir)?;
    check_device()?;
    let cfg = config_with_overrides(config, overrides)?;
    let manifest = ManifestBuilder::new("label-all", cfg.global_seed)
        .config_text(&config_digest(&cfg))
        .input(label_set_path)?
        .input(splits_path)?
        .input(corpus_path)?;

    let label_set = read_labeled_csv(label_set_path)?;
    let bundle = load_bundle(splits_path)?;
    let corpus = load_corpus(corpus_path, None)?;
    let encoder = load_encoder_for(&cfg)?;

    let fit_manifest = bundle.get("FIT").context("splits.json is missing FIT")?;
    let val_manifest = bundle.get("VALIDATE").context("splits.json is missing VALIDATE")?;
    let fit = examples_for(&label_set, fit_manifest, cfg.label_source)?;
    let validate = examples_for(&label_set, val_manifest, cfg.label_source)?;
    let settings = train_settings(&cfg, &label_set, &fit_manifest.member_ids)?;

    progress("label_all_training", json!({ "fit": fit.len(), "validate": validate.len() }));
    let (model, history, best_epoch) =
        train_model(&fit, &validate, &cfg, 0, &encoder, &settings)?;
    progress("label_all_trained", json!({ "best_epoch": best_epoch, "epochs": history.len() }));

    // Label everything outside the expert set.
    let unlabeled: Vec<(String, String)> = corpus
        .iter()
        .filter(|t| label_set.get(&t.tweet_id).is_none())
        .map(|t| (t.tweet_id.clone(), t.text.clone()))
        .collect();
    progress("label_all_predicting", json!({ "unlabeled": unlabeled.len() }));
    let predictions = predict_batch(&model, &unlabeled);

    let out_path = out_dir.join("labeled_corpus.csv");
    {
        use std::io::Write;
        let mut file = std::io::BufWriter::new(std::fs::File::create(&out_path)?);
        writeln!(file, "tweet_id,label,confidence,source")?;
        for ex in label_set.iter() {
            writeln!(
                file,
                "{},{},1.0,expert",
                ex.tweet.tweet_id,
                ex.label(cfg.label_source).code()
            )?;
        }
        for p in &predictions {
            writeln!(
                file,
                "{},{},{},model",
                p.tweet_id,
                p.label.code(),
                p.confidence[p.label.index()]
            )?;
        }
    }

    let mut manifest = manifest;
    manifest.output(&out_path);
    manifest.write(out_dir)?;

    println!(
        "labeled corpus written: {} expert + {} model-labeled tweets",
        label_set.len(),
        predictions.len()
    );
    Ok(())
}

pub fn cmd_stats(
    labeled_corpus_path: &Path,
    corpus_path: &Path,
    metadata_path: &Path,
    group_by: GroupBy,
    out_dir: &Path,
) -> Result<()> {
    ensure_dir(out_dir)?;
    let manifest = ManifestBuilder::new("stats", 0)
        .input(labeled_corpus_path)?
        .input(corpus_path)?
        .input(metadata_path)?;

    let corpus = load_corpus(corpus_path, None)?;
    let metadata = load_metadata(metadata_path)?;
    let labels = read_label_csv(labeled_corpus_path)?;
    progress(
        "stats_start",
        json!({ "labels": labels.len(), "corpus": corpus.len(), "authors": metadata.len() }),
    );

    let items = labels
        .iter()
        .filter_map(|(id, label)| corpus.get(id).map(|t| (t, *label)));
    let outcome = aggregate_monthly(items, &metadata, group_by);
    if !outcome.unknown_authors.is_empty() {
        progress("unknown_authors", json!(outcome.unknown_authors));
    }
    if !outcome.excluded.is_empty() {
        progress("excluded_tweets", json!({ "count": outcome.excluded.len() }));
    }

    let stem = match group_by {
        GroupBy::Party => "fig_party",
        GroupBy::Gender => "fig_gender",
        GroupBy::Race => "fig_race",
        GroupBy::None => "fig_all",
    };
    let emitted = emit_figures(&outcome.aggregates, out_dir, stem)?;
    for w in &emitted.warnings {
        progress("figure_warning", json!(w));
    }

    let mut manifest = manifest;
    for f in &emitted.files {
        manifest.output(f);
    }
    manifest.write(out_dir)?;

    println!("wrote {} files under {}", emitted.files.len(), out_dir.display());
    Ok(())
}

pub fn cmd_init_checkpoint(
    preset: &str,
    vocab_size: usize,
    max_len: usize,
    seed: u64,
    model_name: &str,
    models_dir: &Path,
) -> Result<()> {
    let cfg = match preset {
        "base" => EncoderConfig::base(),
        "large" => EncoderConfig::large(),
        "tiny" => EncoderConfig::tiny(vocab_size, max_len),
        other => bail!("unknown preset '{other}' (expected tiny, base, or large)"),
    };
    let dir = resolve_model_dir(model_name, models_dir);
    let encoder = init_checkpoint(cfg, seed, &dir)?;
    println!(
        "checkpoint written to {} ({} parameters)",
        dir.display(),
        encoder.params.param_count()
    );
    Ok(())
}
