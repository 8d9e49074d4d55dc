//! Classifiers and the training engine.
//!
//! The transformer path runs text through a trainable encoder, pools the
//! start-token embedding, and classifies through dropout plus one linear
//! layer; baselines classify from year/author features. Experiments execute
//! seeded trials with early stopping and aggregate metrics across trials
//! and folds.

pub mod baseline;
pub mod checkpoint;
pub mod encoder;
pub mod math;
pub mod tokenizer;
pub mod trainer;

pub use baseline::{
    featurize_baseline, train_baseline, AuthorIndex, BaselineError, BaselineHyper, BaselineKind,
    BaselineModel,
};
pub use checkpoint::{
    init_checkpoint, load_checkpoint, load_model, resolve_model_dir, save_model, CheckpointError,
};
pub use encoder::{Encoder, EncoderConfig, EncoderVariant};
pub use math::{adamw_step, cross_entropy, softmax, softmax3, AdamState, MathError, OptimizerHyper};
pub use trainer::{
    predict_batch, run_trial, run_trial_with_model, train_model, write_history_jsonl,
    ClassifierHead, TrainError, TrainSettings, TrainedModel, TrialResult,
};

use crate::category::Category;
use crate::corpus::LabeledSet;
use crate::metrics::classification_report;
use crate::partition::{LabelSource, SplitBundle, SplitManifest};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One classified tweet: label plus the three-way confidence vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub tweet_id: String,
    pub label: Category,
    pub confidence: [f64; 3],
}

/// One text/label pair fed to a trainer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingExample {
    pub id: String,
    pub text: String,
    pub label: Category,
}

/// Training configuration. Field names and defaults mirror the declarative
/// config file exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub model_name: String,
    pub dropout_p: f64,
    pub trials: usize,
    pub cross_val_folds: usize,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub accumulate_grad_batches: usize,
    pub stopping_patience: usize,
    pub batch_size: usize,
    pub global_seed: u64,
    // Artifact knobs beyond the core training table.
    pub weight_decay: f64,
    pub label_source: LabelSource,
    pub class_weighting: bool,
    pub strip_urls: bool,
    pub models_dir: String,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            model_name: "vinai/bertweet-base".into(),
            dropout_p: 0.1,
            trials: 20,
            cross_val_folds: 7,
            learning_rate: 3e-5,
            max_epochs: 25,
            accumulate_grad_batches: 1,
            stopping_patience: 3,
            batch_size: 64,
            global_seed: 2025,
            weight_decay: 0.01,
            label_source: LabelSource::Ar,
            class_weighting: false,
            strip_urls: false,
            models_dir: "models".into(),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), String> {
        macro_rules! positive {
            ($field:ident) => {
                if self.$field == 0 {
                    return Err(format!("{} must be positive", stringify!($field)));
                }
            };
        }
        positive!(trials);
        positive!(cross_val_folds);
        positive!(max_epochs);
        positive!(accumulate_grad_batches);
        positive!(stopping_patience);
        positive!(batch_size);
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err("learning_rate must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err("dropout_p must be in [0, 1)".into());
        }
        if self.weight_decay < 0.0 {
            return Err("weight_decay must be nonnegative".into());
        }
        if self.model_name.is_empty() {
            return Err("model_name must be set".into());
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("missing split '{0}'")]
    MissingSplit(String),
    #[error("split '{split}' references id '{id}' missing from the labeled set")]
    UnknownId { split: String, id: String },
    #[error(transparent)]
    Train(#[from] TrainError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentMode {
    Holdout,
    CrossValidation,
}

/// Materialize training examples for a manifest under a label source.
pub fn examples_for(
    set: &LabeledSet,
    manifest: &SplitManifest,
    source: LabelSource,
) -> Result<Vec<TrainingExample>, ExperimentError> {
    manifest
        .member_ids
        .iter()
        .map(|id| {
            let ex = set.get(id).ok_or_else(|| ExperimentError::UnknownId {
                split: manifest.name.clone(),
                id: id.clone(),
            })?;
            Ok(TrainingExample {
                id: id.clone(),
                text: ex.tweet.text.clone(),
                label: ex.label(source),
            })
        })
        .collect()
}

/// Mean and sample standard deviation (0 when n < 2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

pub fn mean_std(values: &[f64]) -> MeanStd {
    let n = values.len() as f64;
    if values.is_empty() {
        return MeanStd { mean: f64::NAN, std: 0.0 };
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return MeanStd { mean, std: 0.0 };
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    MeanStd { mean, std: var.sqrt() }
}

/// Aggregate statistics against one coder's labels.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AggregateStats {
    pub accuracy: MeanStd,
    pub macro_f1: MeanStd,
    pub weighted_f1: MeanStd,
    pub runs: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialRunSummary {
    pub trial_index: usize,
    pub fold: Option<usize>,
    pub seed: u64,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub accuracy_ar: f64,
    pub macro_f1_ar: f64,
    pub weighted_f1_ar: f64,
    pub accuracy_mb: f64,
    pub macro_f1_mb: f64,
    pub weighted_f1_mb: f64,
}

/// Full experiment output: per-run summaries plus mean/std aggregates
/// against each coder's labels.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub mode: ExperimentMode,
    pub runs: Vec<TrialRunSummary>,
    pub aggregate_ar: AggregateStats,
    pub aggregate_mb: AggregateStats,
}

fn summarize(
    result: &TrialResult,
    label_set: &LabeledSet,
    trial_index: usize,
    fold: Option<usize>,
) -> Result<TrialRunSummary, ExperimentError> {
    let mut pred = Vec::with_capacity(result.test_predictions.len());
    let mut gold_ar = Vec::with_capacity(result.test_predictions.len());
    let mut gold_mb = Vec::with_capacity(result.test_predictions.len());
    for p in &result.test_predictions {
        let ex = label_set.get(&p.tweet_id).ok_or_else(|| ExperimentError::UnknownId {
            split: "test".into(),
            id: p.tweet_id.clone(),
        })?;
        pred.push(p.label);
        gold_ar.push(ex.label_ar);
        gold_mb.push(ex.label_mb);
    }
    let report_ar = classification_report(&pred, &gold_ar).map_err(TrainError::Metrics)?;
    let report_mb = classification_report(&pred, &gold_mb).map_err(TrainError::Metrics)?;
    Ok(TrialRunSummary {
        trial_index,
        fold,
        seed: result.seed,
        best_epoch: result.best_epoch,
        epochs_run: result.validation_history.len(),
        accuracy_ar: report_ar.accuracy,
        macro_f1_ar: report_ar.macro_f1,
        weighted_f1_ar: report_ar.weighted_f1,
        accuracy_mb: report_mb.accuracy,
        macro_f1_mb: report_mb.macro_f1,
        weighted_f1_mb: report_mb.weighted_f1,
    })
}

fn aggregate(runs: &[TrialRunSummary]) -> (AggregateStats, AggregateStats) {
    let pick = |f: fn(&TrialRunSummary) -> f64| -> Vec<f64> { runs.iter().map(f).collect() };
    (
        AggregateStats {
            accuracy: mean_std(&pick(|r| r.accuracy_ar)),
            macro_f1: mean_std(&pick(|r| r.macro_f1_ar)),
            weighted_f1: mean_std(&pick(|r| r.weighted_f1_ar)),
            runs: runs.len(),
        },
        AggregateStats {
            accuracy: mean_std(&pick(|r| r.accuracy_mb)),
            macro_f1: mean_std(&pick(|r| r.macro_f1_mb)),
            weighted_f1: mean_std(&pick(|r| r.weighted_f1_mb)),
            runs: runs.len(),
        },
    )
}

/// Where and how to persist per-trial artifacts: a `trial_<t>[_fold_<f>]`
/// directory per run with the epoch metrics history as JSON lines and,
/// optionally, the restored best-epoch model weights.
#[derive(Debug, Clone)]
pub struct ExperimentSink {
    pub dir: std::path::PathBuf,
    pub persist_models: bool,
}

impl ExperimentSink {
    fn trial_dir(&self, trial_index: usize, fold: Option<usize>) -> std::path::PathBuf {
        match fold {
            Some(f) => self.dir.join(format!("trial_{trial_index}_fold_{f}")),
            None => self.dir.join(format!("trial_{trial_index}")),
        }
    }

    fn persist(
        &self,
        result: &TrialResult,
        model: &TrainedModel,
        trial_index: usize,
        fold: Option<usize>,
    ) -> std::io::Result<()> {
        let dir = self.trial_dir(trial_index, fold);
        std::fs::create_dir_all(&dir)?;
        write_history_jsonl(&dir.join("history.jsonl"), &result.validation_history)?;
        if self.persist_models {
            save_model(model, &dir.join("best_model")).map_err(std::io::Error::other)?;
        }
        Ok(())
    }
}

/// Run the configured number of trials (times folds in cross-validation
/// mode) and aggregate accuracy and F1 statistics against both coders.
///
/// Trials run in parallel; results are ordered by trial index, never by
/// completion order.
pub fn run_experiment(
    mode: ExperimentMode,
    cfg: &ModelConfig,
    bundle: &SplitBundle,
    label_set: &LabeledSet,
    base_encoder: &Encoder,
    settings: &TrainSettings,
) -> Result<ExperimentReport, ExperimentError> {
    run_experiment_with_sink(mode, cfg, bundle, label_set, base_encoder, settings, None)
}

/// [`run_experiment`] with optional per-trial persistence.
pub fn run_experiment_with_sink(
    mode: ExperimentMode,
    cfg: &ModelConfig,
    bundle: &SplitBundle,
    label_set: &LabeledSet,
    base_encoder: &Encoder,
    settings: &TrainSettings,
    sink: Option<&ExperimentSink>,
) -> Result<ExperimentReport, ExperimentError> {
    type Job = (usize, Option<usize>, Vec<TrainingExample>, Vec<TrainingExample>, Vec<TrainingExample>);
    let jobs: Vec<Job> = match mode {
        ExperimentMode::Holdout => {
            let fit = required(bundle, "FIT")?;
            let validate = required(bundle, "VALIDATE")?;
            let test = required(bundle, "TEST")?;
            let fit = examples_for(label_set, fit, cfg.label_source)?;
            let validate = examples_for(label_set, validate, cfg.label_source)?;
            let test = examples_for(label_set, test, cfg.label_source)?;
            (0..cfg.trials)
                .map(|t| (t, None, fit.clone(), validate.clone(), test.clone()))
                .collect()
        }
        ExperimentMode::CrossValidation => {
            let mut jobs = Vec::with_capacity(cfg.trials * bundle.folds.folds.len());
            for trial in 0..cfg.trials {
                for (fi, fold) in bundle.folds.folds.iter().enumerate() {
                    jobs.push((
                        trial,
                        Some(fi),
                        examples_for(label_set, &fold.cross_fit, cfg.label_source)?,
                        examples_for(label_set, &fold.cross_validate, cfg.label_source)?,
                        examples_for(label_set, &fold.cross_test, cfg.label_source)?,
                    ));
                }
            }
            jobs
        }
    };

    let mut runs: Vec<TrialRunSummary> = jobs
        .into_par_iter()
        .map(|(trial_index, fold, fit, validate, test)| {
            let (result, model) = run_trial_with_model(
                &fit,
                &validate,
                &test,
                cfg,
                trial_index,
                base_encoder,
                settings,
            )?;
            if let Some(sink) = sink {
                sink.persist(&result, &model, trial_index, fold)
                    .map_err(|e| TrainError::Checkpoint(CheckpointError::Io {
                        path: sink.dir.display().to_string(),
                        source: e,
                    }))?;
            }
            summarize(&result, label_set, trial_index, fold)
        })
        .collect::<Result<Vec<_>, _>>()?;
    runs.sort_by_key(|r| (r.trial_index, r.fold));

    let (aggregate_ar, aggregate_mb) = aggregate(&runs);
    Ok(ExperimentReport { mode, runs, aggregate_ar, aggregate_mb })
}

fn required<'a>(bundle: &'a SplitBundle, name: &str) -> Result<&'a SplitManifest, ExperimentError> {
    bundle.get(name).ok_or_else(|| ExperimentError::MissingSplit(name.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{LabeledExample, PostDate, Tweet};
    use crate::partition::build_standard_splits;

    fn tiny_encoder() -> Encoder {
        Encoder::init_random(EncoderConfig::tiny(200, 12), 1234)
    }

    fn tiny_config() -> ModelConfig {
        ModelConfig {
            max_epochs: 4,
            batch_size: 8,
            learning_rate: 5e-3,
            trials: 2,
            cross_val_folds: 2,
            ..ModelConfig::default()
        }
    }

    fn make_examples(n: usize) -> Vec<TrainingExample> {
        // Three clearly separable token patterns.
        (0..n)
            .map(|i| {
                let label = Category::from_index(i % 3).unwrap();
                let text = match label {
                    Category::Problem => format!("crisis failure broken {i}"),
                    Category::Solution => format!("bill passed fix {i}"),
                    Category::Other => format!("happy birthday friend {i}"),
                };
                TrainingExample { id: format!("t{i}"), text, label }
            })
            .collect()
    }

    #[test]
    fn trial_runs_and_reports() {
        let examples = make_examples(24);
        let result = run_trial(
            &examples,
            &examples,
            &examples,
            &tiny_config(),
            0,
            &tiny_encoder(),
            &TrainSettings::default(),
        )
        .unwrap();
        assert!(!result.validation_history.is_empty());
        assert!(result.best_epoch >= 1);
        assert_eq!(result.test_predictions.len(), 24);
        for p in &result.test_predictions {
            assert!((p.confidence.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn trial_is_seed_reproducible() {
        let examples = make_examples(18);
        let cfg = tiny_config();
        let enc = tiny_encoder();
        let a = run_trial(&examples, &examples, &examples, &cfg, 3, &enc, &TrainSettings::default())
            .unwrap();
        let b = run_trial(&examples, &examples, &examples, &cfg, 3, &enc, &TrainSettings::default())
            .unwrap();
        assert_eq!(a.seed, b.seed);
        assert_eq!(a.best_epoch, b.best_epoch);
        let ha: Vec<f64> = a.validation_history.iter().map(|r| r.macro_f1).collect();
        let hb: Vec<f64> = b.validation_history.iter().map(|r| r.macro_f1).collect();
        assert_eq!(ha, hb);
        assert_eq!(a.test_predictions, b.test_predictions);
    }

    #[test]
    fn different_trials_differ() {
        let examples = make_examples(18);
        let cfg = tiny_config();
        let enc = tiny_encoder();
        let a = run_trial(&examples, &examples, &examples, &cfg, 0, &enc, &TrainSettings::default())
            .unwrap();
        let b = run_trial(&examples, &examples, &examples, &cfg, 1, &enc, &TrainSettings::default())
            .unwrap();
        assert_ne!(a.seed, b.seed);
    }

    #[test]
    fn frozen_encoder_is_fatal() {
        let mut enc = tiny_encoder();
        enc.cfg.trainable = false;
        let examples = make_examples(9);
        let err = run_trial(
            &examples,
            &examples,
            &examples,
            &tiny_config(),
            0,
            &enc,
            &TrainSettings::default(),
        )
        .unwrap_err();
        assert!(matches!(err, TrainError::EncoderFrozen));
    }

    #[test]
    fn early_stopping_halts_within_patience_of_best() {
        let examples = make_examples(12);
        let cfg = ModelConfig { max_epochs: 25, ..tiny_config() };
        let result = run_trial(
            &examples,
            &examples,
            &examples,
            &cfg,
            0,
            &tiny_encoder(),
            &TrainSettings::default(),
        )
        .unwrap();
        let epochs_run = result.validation_history.len();
        assert!(epochs_run <= result.best_epoch + cfg.stopping_patience);
        // Best epoch maximizes validation macro F1 over the history.
        let best_f1 = result.validation_history[result.best_epoch - 1].macro_f1;
        for r in &result.validation_history {
            assert!(best_f1 >= r.macro_f1 - 1e-15);
        }
    }

    #[test]
    fn predict_batch_deterministic_and_normalized() {
        let examples = make_examples(12);
        let cfg = tiny_config();
        let (model, _, _) = train_model(
            &examples,
            &examples,
            &cfg,
            0,
            &tiny_encoder(),
            &TrainSettings::default(),
        )
        .unwrap();
        let tweets: Vec<(String, String)> = vec![
            ("a".into(), "crisis broken failure".into()),
            ("a".into(), "crisis broken failure".into()),
        ];
        let preds = predict_batch(&model, &tweets);
        assert_eq!(preds[0].label, preds[1].label);
        assert_eq!(preds[0].confidence, preds[1].confidence);
        assert!(predict_batch(&model, &[]).is_empty());
    }

    fn labeled_set(n: usize) -> LabeledSet {
        let examples = make_examples(n);
        LabeledSet::new(
            examples
                .iter()
                .enumerate()
                .map(|(i, e)| LabeledExample {
                    tweet: Tweet {
                        tweet_id: e.id.clone(),
                        text: e.text.clone(),
                        author_id: format!("a{}", i % 5),
                        posted_at: PostDate::new(2012 + (i % 10) as i32, Some(1), Some(1)),
                    },
                    label_ar: e.label,
                    label_mb: e.label,
                    match_score: 1.0,
                })
                .collect(),
        )
    }

    #[test]
    fn holdout_experiment_counts_trials() {
        let set = labeled_set(120);
        let bundle =
            build_standard_splits(&set, 2, 2012..=2021, 3, LabelSource::Ar, 99).unwrap();
        let cfg = ModelConfig { trials: 1, ..tiny_config() };
        let report = run_experiment(
            ExperimentMode::Holdout,
            &cfg,
            &bundle,
            &set,
            &tiny_encoder(),
            &TrainSettings::default(),
        )
        .unwrap();
        assert_eq!(report.runs.len(), 1);
        // With one run the mean is that run and the deviation is zero.
        assert_eq!(report.aggregate_ar.accuracy.mean, report.runs[0].accuracy_ar);
        assert_eq!(report.aggregate_ar.accuracy.std, 0.0);
    }

    #[test]
    fn cross_validation_runs_trials_times_folds() {
        let set = labeled_set(60);
        let bundle =
            build_standard_splits(&set, 1, 2012..=2021, 3, LabelSource::Ar, 7).unwrap();
        let cfg = ModelConfig { trials: 2, max_epochs: 2, ..tiny_config() };
        let report = run_experiment(
            ExperimentMode::CrossValidation,
            &cfg,
            &bundle,
            &set,
            &tiny_encoder(),
            &TrainSettings::default(),
        )
        .unwrap();
        assert_eq!(report.runs.len(), 2 * 3);
        // Ordered by trial then fold, regardless of completion order.
        let order: Vec<(usize, Option<usize>)> =
            report.runs.iter().map(|r| (r.trial_index, r.fold)).collect();
        let mut sorted = order.clone();
        sorted.sort();
        assert_eq!(order, sorted);
    }

    #[test]
    fn grad_accumulation_matches_larger_batch() {
        // Same-length texts pad identically, so accumulating two half
        // batches must reproduce the full-batch run exactly.
        let examples: Vec<TrainingExample> = (0..16)
            .map(|i| {
                let label = Category::from_index(i % 3).unwrap();
                let word = match label {
                    Category::Problem => "crisis",
                    Category::Solution => "reform",
                    Category::Other => "greeting",
                };
                TrainingExample {
                    id: format!("t{i}"),
                    text: format!("{word} {word} w{i}"),
                    label,
                }
            })
            .collect();
        let enc = tiny_encoder();
        let base = ModelConfig { max_epochs: 3, learning_rate: 5e-3, ..ModelConfig::default() };
        let full = ModelConfig { batch_size: 16, accumulate_grad_batches: 1, ..base.clone() };
        let halves = ModelConfig { batch_size: 8, accumulate_grad_batches: 2, ..base };
        let a = run_trial(&examples, &examples, &examples, &full, 0, &enc, &TrainSettings::default())
            .unwrap();
        let b =
            run_trial(&examples, &examples, &examples, &halves, 0, &enc, &TrainSettings::default())
                .unwrap();
        let ha: Vec<f64> = a.validation_history.iter().map(|r| r.macro_f1).collect();
        let hb: Vec<f64> = b.validation_history.iter().map(|r| r.macro_f1).collect();
        assert_eq!(ha, hb);
        assert_eq!(a.test_predictions, b.test_predictions);
    }

    #[test]
    fn config_defaults_and_validation() {
        let cfg = ModelConfig::default();
        assert_eq!(cfg.model_name, "vinai/bertweet-base");
        assert_eq!(cfg.batch_size, 64);
        assert_eq!(cfg.trials, 20);
        assert_eq!(cfg.cross_val_folds, 7);
        assert_eq!(cfg.global_seed, 2025);
        assert!((cfg.learning_rate - 3e-5).abs() < 1e-20);
        assert!(cfg.validate().is_ok());
        let bad = ModelConfig { batch_size: 0, ..ModelConfig::default() };
        assert_eq!(bad.validate().unwrap_err(), "batch_size must be positive");
    }

    #[test]
    fn mean_std_basics() {
        let s = mean_std(&[1.0, 2.0, 3.0]);
        assert!((s.mean - 2.0).abs() < 1e-15);
        assert!((s.std - 1.0).abs() < 1e-12);
        assert_eq!(mean_std(&[5.0]).std, 0.0);
    }
}
