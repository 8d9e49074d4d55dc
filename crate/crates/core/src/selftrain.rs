//! Iterative pseudo-labeling controller.
//!
//! Each iteration trains on the current labeled pool (with inverse-frequency
//! class weights), scores the unlabeled pool, admits predictions whose
//! confidence clears the current threshold (subject to per-class overrides
//! and optional quotas), moves them into the labeled pool as pseudo-labels,
//! evaluates on the held-out test set, and decays the threshold. The loop
//! ends when the threshold floor is reached with nothing admitted or the
//! unlabeled pool is exhausted.

use crate::category::Category;
use crate::metrics::{classification_report, MetricsError, MetricsReport};
use crate::models::{Prediction, TrainSettings, TrainingExample};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SelfTrainError {
    #[error("class {0} missing from the labeled pool; class weights undefined")]
    MissingClass(Category),
    #[error("test ids overlap the training pools")]
    TestLeakage,
    #[error("scorer failed at iteration {iteration}: {detail}")]
    Scorer { iteration: usize, detail: String },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Decaying confidence threshold with a floor and optional per-class
/// overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSchedule {
    pub current: f64,
    pub step: f64,
    pub floor: f64,
    /// Per-class thresholds that take precedence over `current`.
    pub per_class_overrides: [Option<f64>; 3],
}

impl Default for ThresholdSchedule {
    fn default() -> Self {
        ThresholdSchedule { current: 1.0, step: 0.05, floor: 0.7, per_class_overrides: [None; 3] }
    }
}

impl ThresholdSchedule {
    pub fn new(start: f64, step: f64, floor: f64) -> Self {
        assert!(step > 0.0, "step must be positive");
        assert!(floor <= start, "floor above start");
        ThresholdSchedule { current: start, step, floor, per_class_overrides: [None; 3] }
    }

    /// Threshold in force for a class: its override if set, else the
    /// current global value.
    pub fn threshold_for(&self, class: Category) -> f64 {
        self.per_class_overrides[class.index()].unwrap_or(self.current)
    }

    pub fn at_floor(&self) -> bool {
        self.current <= self.floor + 1e-9
    }

    /// Advance the schedule: one step down per iteration, a second step
    /// immediately when nothing was admitted, clamped at the floor. Values
    /// within rounding noise of the floor snap to it exactly.
    pub fn advanced(&self, any_admitted: bool) -> ThresholdSchedule {
        let decrement = if any_admitted { self.step } else { 2.0 * self.step };
        let next = self.current - decrement;
        let next = if next <= self.floor + 1e-9 { self.floor } else { next };
        ThresholdSchedule { current: next, ..self.clone() }
    }
}

/// Inverse-frequency class weights, mean-normalized:
/// `weight_c = n / (3 * support_c)`.
pub fn compute_class_weights(labels: &[Category]) -> Result<[f64; 3], SelfTrainError> {
    let mut support = [0usize; 3];
    for &label in labels {
        support[label.index()] += 1;
    }
    for c in Category::ALL {
        if support[c.index()] == 0 {
            return Err(SelfTrainError::MissingClass(c));
        }
    }
    let n = labels.len() as f64;
    Ok(std::array::from_fn(|i| n / (3.0 * support[i] as f64)))
}

/// One admitted pseudo-label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoEntry {
    pub tweet_id: String,
    pub label: Category,
    pub confidence: f64,
}

/// The pseudo-labels admitted in one iteration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PseudoLabelBatch {
    pub entries: Vec<PseudoEntry>,
    pub iteration: usize,
    /// Fraction of the batch per class (zeros when the batch is empty).
    pub class_distribution: [f64; 3],
}

/// Optional cap on admissions per class.
pub type ClassQuotas = [Option<usize>; 3];

/// Admit predictions clearing their class threshold, highest confidence
/// first within each class, up to any quota; previously admitted ids are
/// never re-admitted.
pub fn select_pseudo_labels(
    preds: &[Prediction],
    sched: &ThresholdSchedule,
    quotas: &ClassQuotas,
    already_admitted: &HashSet<String>,
    iteration: usize,
) -> PseudoLabelBatch {
    let mut per_class: [Vec<&Prediction>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for p in preds {
        if already_admitted.contains(&p.tweet_id) {
            continue;
        }
        let confidence = p.confidence[p.label.index()];
        if confidence >= sched.threshold_for(p.label) {
            per_class[p.label.index()].push(p);
        }
    }

    let mut entries = Vec::new();
    for (ci, candidates) in per_class.iter_mut().enumerate() {
        candidates.sort_by(|a, b| {
            let ca = a.confidence[ci];
            let cb = b.confidence[ci];
            cb.partial_cmp(&ca).unwrap().then_with(|| a.tweet_id.cmp(&b.tweet_id))
        });
        let cap = quotas[ci].unwrap_or(usize::MAX);
        for p in candidates.iter().take(cap) {
            entries.push(PseudoEntry {
                tweet_id: p.tweet_id.clone(),
                label: p.label,
                confidence: p.confidence[ci],
            });
        }
    }

    let total = entries.len() as f64;
    let mut class_distribution = [0.0; 3];
    if total > 0.0 {
        for e in &entries {
            class_distribution[e.label.index()] += 1.0 / total;
        }
    }
    PseudoLabelBatch { entries, iteration, class_distribution }
}

/// Anything that can be fitted on labeled examples and score unlabeled
/// texts. The production implementation wraps the transformer trainer; the
/// state machine is tested against deterministic mocks.
pub trait ConfidenceScorer {
    fn fit(&mut self, labeled: &[TrainingExample], class_weights: [f64; 3]) -> Result<(), String>;
    fn score(&mut self, tweets: &[(String, String)]) -> Result<Vec<Prediction>, String>;
}

/// One row of the per-iteration history.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub threshold: f64,
    pub admitted_per_class: [usize; 3],
    pub mean_confidence_per_class: [f64; 3],
    pub labeled_pool_size: usize,
    pub unlabeled_pool_size: usize,
    pub test_accuracy: f64,
    pub test_macro_f1: f64,
    pub test_weighted_f1: f64,
}

#[derive(Debug, Clone)]
pub struct SelfTrainConfig {
    pub quotas: ClassQuotas,
    /// Cap on how many unlabeled tweets are scored per iteration (front of
    /// the pool); None scores the full pool.
    pub scored_sample_cap: Option<usize>,
    /// Safety bound on iterations regardless of the schedule.
    pub max_iterations: usize,
    /// Select the best iteration on validation macro F1 when a validation
    /// set is supplied, instead of the default test macro F1.
    pub select_on_validate: bool,
}

impl Default for SelfTrainConfig {
    fn default() -> Self {
        SelfTrainConfig {
            quotas: [None; 3],
            scored_sample_cap: None,
            max_iterations: 50,
            select_on_validate: false,
        }
    }
}

/// Provenance of a label in the final exported corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelProvenance {
    Expert,
    Pseudo,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PoolEntry {
    pub tweet_id: String,
    pub label: Category,
    pub confidence: f64,
    pub source: LabelProvenance,
}

#[derive(Debug)]
pub struct SelfTrainOutcome {
    /// 1-based iteration with the best selection metric.
    pub best_iteration: usize,
    pub history: Vec<IterationRecord>,
    /// Expert plus admitted pseudo-labels at the end of the loop.
    pub final_pool: Vec<PoolEntry>,
    /// Record of every admission with its iteration.
    pub admissions: Vec<(usize, PseudoEntry)>,
}

/// Run the self-training loop.
///
/// `label_set` are the expert examples (never overwritten), `unlabel_pool`
/// the (id, text) pairs to pseudo-label, `test_set` the held-out evaluation
/// examples whose ids must never enter training, and `validate_set` an
/// optional set used for best-iteration selection when
/// `select_on_validate` is set.
pub fn run_self_training<S: ConfidenceScorer>(
    label_set: &[TrainingExample],
    unlabel_pool: &[(String, String)],
    test_set: &[TrainingExample],
    validate_set: Option<&[TrainingExample]>,
    scorer: &mut S,
    schedule: ThresholdSchedule,
    cfg: &SelfTrainConfig,
) -> Result<SelfTrainOutcome, SelfTrainError> {
    let test_ids: HashSet<&str> = test_set.iter().map(|e| e.id.as_str()).collect();
    if label_set.iter().any(|e| test_ids.contains(e.id.as_str()))
        || unlabel_pool.iter().any(|(id, _)| test_ids.contains(id.as_str()))
    {
        return Err(SelfTrainError::TestLeakage);
    }

    let total_ids = label_set.len() + unlabel_pool.len();
    let mut labeled: Vec<TrainingExample> = label_set.to_vec();
    let mut labeled_sources: Vec<PoolEntry> = label_set
        .iter()
        .map(|e| PoolEntry {
            tweet_id: e.id.clone(),
            label: e.label,
            confidence: 1.0,
            source: LabelProvenance::Expert,
        })
        .collect();
    let mut unlabeled: Vec<(String, String)> = unlabel_pool.to_vec();
    let mut admitted_ids: HashSet<String> = HashSet::new();
    let mut sched = schedule;

    let mut history: Vec<IterationRecord> = Vec::new();
    let mut admissions: Vec<(usize, PseudoEntry)> = Vec::new();
    let mut best_iteration = 0usize;
    let mut best_metric = f64::NEG_INFINITY;

    for iteration in 1..=cfg.max_iterations {
        let threshold_in_force = sched.current;

        let class_weights =
            compute_class_weights(&labeled.iter().map(|e| e.label).collect::<Vec<_>>())?;
        scorer
            .fit(&labeled, class_weights)
            .map_err(|detail| SelfTrainError::Scorer { iteration, detail })?;

        // Score (a capped prefix of) the unlabeled pool.
        let scored_slice: &[(String, String)] = match cfg.scored_sample_cap {
            Some(cap) => &unlabeled[..cap.min(unlabeled.len())],
            None => &unlabeled,
        };
        let preds = scorer
            .score(scored_slice)
            .map_err(|detail| SelfTrainError::Scorer { iteration, detail })?;

        let batch = select_pseudo_labels(&preds, &sched, &cfg.quotas, &admitted_ids, iteration);

        // Move admitted entries from the unlabeled to the labeled pool.
        let mut admitted_per_class = [0usize; 3];
        let mut confidence_sums = [0.0; 3];
        if !batch.entries.is_empty() {
            let batch_ids: HashSet<&str> =
                batch.entries.iter().map(|e| e.tweet_id.as_str()).collect();
            let mut moved: Vec<(String, String)> = Vec::with_capacity(batch.entries.len());
            unlabeled.retain(|(id, text)| {
                if batch_ids.contains(id.as_str()) {
                    moved.push((id.clone(), text.clone()));
                    false
                } else {
                    true
                }
            });
            let text_of: std::collections::HashMap<String, String> = moved.into_iter().collect();
            for entry in &batch.entries {
                admitted_per_class[entry.label.index()] += 1;
                confidence_sums[entry.label.index()] += entry.confidence;
                labeled.push(TrainingExample {
                    id: entry.tweet_id.clone(),
                    text: text_of[&entry.tweet_id].clone(),
                    label: entry.label,
                });
                labeled_sources.push(PoolEntry {
                    tweet_id: entry.tweet_id.clone(),
                    label: entry.label,
                    confidence: entry.confidence,
                    source: LabelProvenance::Pseudo,
                });
                admitted_ids.insert(entry.tweet_id.clone());
                admissions.push((iteration, entry.clone()));
            }
        }
        let mean_confidence_per_class = std::array::from_fn(|c| {
            if admitted_per_class[c] == 0 {
                0.0
            } else {
                confidence_sums[c] / admitted_per_class[c] as f64
            }
        });

        debug_assert_eq!(labeled.len() + unlabeled.len(), total_ids);
        debug_assert!(labeled.iter().all(|e| !test_ids.contains(e.id.as_str())));

        let test_report = evaluate_with(scorer, test_set, iteration)?;
        let selection_metric = if cfg.select_on_validate {
            match validate_set {
                Some(v) => evaluate_with(scorer, v, iteration)?.macro_f1,
                None => test_report.macro_f1,
            }
        } else {
            test_report.macro_f1
        };

        history.push(IterationRecord {
            iteration,
            threshold: threshold_in_force,
            admitted_per_class,
            mean_confidence_per_class,
            labeled_pool_size: labeled.len(),
            unlabeled_pool_size: unlabeled.len(),
            test_accuracy: test_report.accuracy,
            test_macro_f1: test_report.macro_f1,
            test_weighted_f1: test_report.weighted_f1,
        });

        if selection_metric > best_metric {
            best_metric = selection_metric;
            best_iteration = iteration;
        }

        let any_admitted = !batch.entries.is_empty();
        if (sched.at_floor() && !any_admitted) || unlabeled.is_empty() {
            break;
        }
        sched = sched.advanced(any_admitted);
    }

    Ok(SelfTrainOutcome { best_iteration, history, final_pool: labeled_sources, admissions })
}

/// Production scorer: retrains the transformer classifier on each call.
///
/// By default every iteration retrains from the pretrained checkpoint on
/// the expanded pool, which prevents compounding drift; incremental mode
/// (behind a flag) warm-starts from the previous iteration's encoder
/// instead. For early stopping, the labeled pool is split 80/20 into
/// fit/validate, reshuffled per iteration from the global seed.
pub struct TransformerScorer {
    base: crate::models::Encoder,
    cfg: crate::models::ModelConfig,
    incremental: bool,
    model: Option<crate::models::TrainedModel>,
    fit_count: usize,
}

impl TransformerScorer {
    pub fn new(base: crate::models::Encoder, cfg: crate::models::ModelConfig, incremental: bool) -> Self {
        TransformerScorer { base, cfg, incremental, model: None, fit_count: 0 }
    }

    pub fn model(&self) -> Option<&crate::models::TrainedModel> {
        self.model.as_ref()
    }
}

impl ConfidenceScorer for TransformerScorer {
    fn fit(&mut self, labeled: &[TrainingExample], class_weights: [f64; 3]) -> Result<(), String> {
        let mut order: Vec<usize> = (0..labeled.len()).collect();
        let seed =
            crate::rng::derive_seed(self.cfg.global_seed, &format!("selftrain:fit:{}", self.fit_count));
        crate::rng::shuffle(&mut crate::rng::seeded_rng(seed), &mut order);
        let cut = ((labeled.len() as f64) * 0.8).round() as usize;
        let cut = cut.clamp(1, labeled.len());
        let fit: Vec<TrainingExample> = order[..cut].iter().map(|&i| labeled[i].clone()).collect();
        let validate: Vec<TrainingExample> = if cut == labeled.len() {
            fit.clone()
        } else {
            order[cut..].iter().map(|&i| labeled[i].clone()).collect()
        };

        let warm_start;
        let base = if self.incremental {
            match self.model.take() {
                Some(m) => {
                    warm_start = m.encoder;
                    &warm_start
                }
                None => &self.base,
            }
        } else {
            &self.base
        };

        let settings = TrainSettings { class_weights: Some(class_weights) };
        let (model, _, _) =
            crate::models::train_model(&fit, &validate, &self.cfg, self.fit_count, base, &settings)
                .map_err(|e| e.to_string())?;
        self.model = Some(model);
        self.fit_count += 1;
        Ok(())
    }

    fn score(&mut self, tweets: &[(String, String)]) -> Result<Vec<Prediction>, String> {
        let model = self.model.as_ref().ok_or("scorer not fitted")?;
        Ok(crate::models::predict_batch(model, tweets))
    }
}

fn evaluate_with<S: ConfidenceScorer>(
    scorer: &mut S,
    examples: &[TrainingExample],
    iteration: usize,
) -> Result<MetricsReport, SelfTrainError> {
    let tweets: Vec<(String, String)> =
        examples.iter().map(|e| (e.id.clone(), e.text.clone())).collect();
    let preds = scorer
        .score(&tweets)
        .map_err(|detail| SelfTrainError::Scorer { iteration, detail })?;
    let pred_labels: Vec<Category> = preds.iter().map(|p| p.label).collect();
    let gold: Vec<Category> = examples.iter().map(|e| e.label).collect();
    Ok(classification_report(&pred_labels, &gold)?)
}

/// Write the per-iteration history as JSONL.
pub fn write_history(path: &std::path::Path, history: &[IterationRecord]) -> std::io::Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    for record in history {
        serde_json::to_writer(&mut file, record)?;
        file.write_all(b"\n")?;
    }
    file.flush()
}

/// Export the final labeled pool as CSV: tweet_id, label, confidence,
/// source.
pub fn export_pool_csv(path: &std::path::Path, pool: &[PoolEntry]) -> std::io::Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(file, "tweet_id,label,confidence,source")?;
    for entry in pool {
        writeln!(
            file,
            "{},{},{},{}",
            entry.tweet_id,
            entry.label.code(),
            entry.confidence,
            match entry.source {
                LabelProvenance::Expert => "expert",
                LabelProvenance::Pseudo => "pseudo",
            }
        )?;
    }
    file.flush()
}
