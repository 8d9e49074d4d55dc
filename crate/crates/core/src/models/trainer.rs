//! The trial training loop: seeded shuffling, mini-batch fitting with
//! gradient accumulation, per-epoch validation, early stopping on macro F1,
//! and best-epoch restoration.

use super::checkpoint::CheckpointError;
use super::encoder::{BatchEncoding, Encoder, EncoderParams};
use super::math::{adamw_step, softmax3, AdamState, MathError, OptimizerHyper, LOG_CLAMP};
use super::tokenizer::PAD_ID;
use super::{ModelConfig, Prediction, TrainingExample};
use crate::category::Category;
use crate::metrics::{classification_report, MetricsError, MetricsReport};
use crate::rng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("encoder is frozen (no gradient flow); a trainable encoder is required")]
    EncoderFrozen,
    #[error("empty {which} set")]
    EmptySet { which: &'static str },
    #[error("single-class fit set")]
    SingleClassFit,
    #[error(transparent)]
    Math(#[from] MathError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Dropout followed by one linear map from the start-token embedding to the
/// three class scores.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierHead {
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub dim: usize,
}

impl ClassifierHead {
    pub fn random(dim: usize, rng: &mut ChaCha20Rng) -> Self {
        let w = (0..3 * dim).map(|_| 0.02 * rng::normal(rng)).collect();
        ClassifierHead { w, b: vec![0.0; 3], dim }
    }

    pub fn scores(&self, bos: &[f64]) -> [f64; 3] {
        let mut out = [self.b[0], self.b[1], self.b[2]];
        for (o, slot) in out.iter_mut().enumerate() {
            let wr = &self.w[o * self.dim..(o + 1) * self.dim];
            for (c, &x) in bos.iter().enumerate() {
                *slot += x * wr[c];
            }
        }
        out
    }
}

/// A fine-tuned encoder plus classification head, ready for inference.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub encoder: Encoder,
    pub head: ClassifierHead,
    pub batch_size: usize,
}

impl TrainedModel {
    /// Confidence vectors for a batch of texts. Evaluation mode: dropout is
    /// disabled and the output is deterministic for a fixed model.
    pub fn predict_texts(&self, texts: &[&str]) -> Vec<[f64; 3]> {
        let tokenizer = self.encoder.tokenizer();
        let d = self.encoder.cfg.dim;
        let mut out = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(self.batch_size.max(1)) {
            let enc = BatchEncoding::from_texts(&tokenizer, chunk);
            let (bos, _) = self.encoder.forward(&enc);
            for b in 0..chunk.len() {
                let scores = self.head.scores(&bos[b * d..(b + 1) * d]);
                out.push(softmax3(scores));
            }
        }
        out
    }
}

/// Label a batch of (id, text) pairs: argmax of the confidence vector, ties
/// resolved toward the lower class index.
pub fn predict_batch(model: &TrainedModel, tweets: &[(String, String)]) -> Vec<Prediction> {
    let texts: Vec<&str> = tweets.iter().map(|(_, t)| t.as_str()).collect();
    let confidences = model.predict_texts(&texts);
    tweets
        .iter()
        .zip(confidences)
        .map(|((id, _), confidence)| Prediction {
            tweet_id: id.clone(),
            label: argmax3(&confidence),
            confidence,
        })
        .collect()
}

pub(crate) fn argmax3(p: &[f64; 3]) -> Category {
    let mut best = 0;
    for i in 1..3 {
        if p[i] > p[best] {
            best = i;
        }
    }
    Category::from_index(best).unwrap()
}

/// Result of one trial: per-epoch validation reports, the best epoch, and
/// the held-out evaluation of the restored best model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialResult {
    pub best_epoch: usize,
    pub validation_history: Vec<MetricsReport>,
    pub test_report: MetricsReport,
    pub seed: u64,
    pub test_predictions: Vec<Prediction>,
}

#[derive(Debug, Clone, Default)]
pub struct TrainSettings {
    /// Multiplicative per-class loss weights (inverse-frequency when class
    /// weighting is enabled).
    pub class_weights: Option<[f64; 3]>,
}

struct PreparedSet {
    ids: Vec<String>,
    tokens: Vec<Vec<u32>>,
    labels: Vec<Category>,
}

fn prepare(examples: &[TrainingExample], encoder: &Encoder, strip_urls: bool) -> PreparedSet {
    let tokenizer = encoder.tokenizer();
    let mut ids = Vec::with_capacity(examples.len());
    let mut tokens = Vec::with_capacity(examples.len());
    let mut labels = Vec::with_capacity(examples.len());
    for ex in examples {
        ids.push(ex.id.clone());
        let text = if strip_urls { strip_url_tokens(&ex.text) } else { ex.text.clone() };
        tokens.push(tokenizer.encode(&text));
        labels.push(ex.label);
    }
    PreparedSet { ids, tokens, labels }
}

fn strip_url_tokens(text: &str) -> String {
    text.split_whitespace()
        .filter(|w| {
            !(w.starts_with("http://") || w.starts_with("https://") || w.starts_with("www."))
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn batch_from_tokens(rows: &[&Vec<u32>]) -> BatchEncoding {
    let seq_len = rows.iter().map(|r| r.len()).max().unwrap_or(1);
    let batch = rows.len();
    let mut ids = vec![PAD_ID; batch * seq_len];
    let mut mask = vec![0.0; batch * seq_len];
    for (b, row) in rows.iter().enumerate() {
        for (t, &id) in row.iter().enumerate() {
            ids[b * seq_len + t] = id;
            mask[b * seq_len + t] = 1.0;
        }
    }
    BatchEncoding { ids, mask, batch, seq_len }
}

fn predict_prepared(
    encoder: &Encoder,
    head: &ClassifierHead,
    set: &PreparedSet,
    batch_size: usize,
) -> Vec<Prediction> {
    let d = encoder.cfg.dim;
    let mut out = Vec::with_capacity(set.ids.len());
    let mut start = 0;
    while start < set.tokens.len() {
        let end = (start + batch_size.max(1)).min(set.tokens.len());
        let rows: Vec<&Vec<u32>> = set.tokens[start..end].iter().collect();
        let enc = batch_from_tokens(&rows);
        let (bos, _) = encoder.forward(&enc);
        for (b, idx) in (start..end).enumerate() {
            let confidence = softmax3(head.scores(&bos[b * d..(b + 1) * d]));
            out.push(Prediction {
                tweet_id: set.ids[idx].clone(),
                label: argmax3(&confidence),
                confidence,
            });
        }
        start = end;
    }
    out
}

fn evaluate(
    encoder: &Encoder,
    head: &ClassifierHead,
    set: &PreparedSet,
    batch_size: usize,
) -> Result<MetricsReport, MetricsError> {
    let preds = predict_prepared(encoder, head, set, batch_size);
    let labels: Vec<Category> = preds.iter().map(|p| p.label).collect();
    classification_report(&labels, &set.labels)
}

struct FitOutcome {
    encoder: Encoder,
    head: ClassifierHead,
    history: Vec<MetricsReport>,
    best_epoch: usize,
}

/// The core fitting loop shared by [`run_trial`] and [`train_model`].
fn fit_loop(
    fit: &[TrainingExample],
    validate: &[TrainingExample],
    cfg: &ModelConfig,
    trial_index: usize,
    base_encoder: &Encoder,
    settings: &TrainSettings,
) -> Result<FitOutcome, TrainError> {
    if fit.is_empty() {
        return Err(TrainError::EmptySet { which: "fit" });
    }
    if validate.is_empty() {
        return Err(TrainError::EmptySet { which: "validate" });
    }
    if !base_encoder.cfg.trainable {
        // An inference-only embedding backend cannot receive weight
        // updates, which cripples the classifier; refuse to train.
        return Err(TrainError::EncoderFrozen);
    }

    let seed = cfg.global_seed + trial_index as u64;
    let mut trial_rng = rng::seeded_rng(seed);

    let mut encoder = base_encoder.clone();
    let d = encoder.cfg.dim;
    let mut head = ClassifierHead::random(d, &mut trial_rng);

    let fit_set = prepare(fit, &encoder, cfg.strip_urls);
    let val_set = prepare(validate, &encoder, cfg.strip_urls);

    let hyper = OptimizerHyper {
        alpha: cfg.learning_rate,
        lambda: cfg.weight_decay,
        ..OptimizerHyper::default()
    };
    hyper.validate()?;

    let mut grads = EncoderParams::zeros(&encoder.cfg);
    let mut head_grad_w = vec![0.0; 3 * d];
    let mut head_grad_b = vec![0.0; 3];
    let mut states: Vec<AdamState> = encoder
        .params
        .tensors()
        .iter()
        .map(|(_, t)| AdamState::new(t.len()))
        .collect();
    let mut head_state_w = AdamState::new(3 * d);
    let mut head_state_b = AdamState::new(3);

    let class_weights = settings.class_weights.unwrap_or([1.0, 1.0, 1.0]);
    let accumulate = cfg.accumulate_grad_batches.max(1);

    let mut history: Vec<MetricsReport> = Vec::new();
    let mut best_epoch = 0usize;
    let mut best_f1 = f64::NEG_INFINITY;
    let mut best_snapshot: Option<(EncoderParams, ClassifierHead)> = None;
    let mut first_step_done = false;

    let mut order: Vec<usize> = (0..fit_set.tokens.len()).collect();

    for epoch in 1..=cfg.max_epochs {
        rng::shuffle(&mut trial_rng, &mut order);

        let mut pending = 0usize;
        for chunk in order.chunks(cfg.batch_size.max(1)) {
            let rows: Vec<&Vec<u32>> = chunk.iter().map(|&i| &fit_set.tokens[i]).collect();
            let enc = batch_from_tokens(&rows);
            let (bos, cache) = encoder.forward(&enc);
            let b = chunk.len();

            // Inverted dropout on the pooled embedding.
            let keep = 1.0 - cfg.dropout_p;
            let mut dropped = bos.clone();
            let mut mask = vec![1.0; b * d];
            if cfg.dropout_p > 0.0 {
                for i in 0..b * d {
                    if rng::uniform(&mut trial_rng) < cfg.dropout_p {
                        mask[i] = 0.0;
                        dropped[i] = 0.0;
                    } else {
                        dropped[i] = bos[i] / keep;
                    }
                }
            }

            // Weighted-mean cross-entropy over the batch; gradients scaled
            // by the accumulation factor so grouped batches average.
            let weight_total: f64 =
                chunk.iter().map(|&i| class_weights[fit_set.labels[i].index()]).sum();
            let mut d_bos_dropped = vec![0.0; b * d];
            for (bi, &i) in chunk.iter().enumerate() {
                let target = fit_set.labels[i];
                let scores = head.scores(&dropped[bi * d..(bi + 1) * d]);
                let p = softmax3(scores);
                let w = class_weights[target.index()] / weight_total / accumulate as f64;
                for o in 0..3 {
                    let q = f64::from(o == target.index());
                    let g = w * (p[o].max(LOG_CLAMP) - q);
                    if g == 0.0 {
                        continue;
                    }
                    head_grad_b[o] += g;
                    let wr = &head.w[o * d..(o + 1) * d];
                    let x = &dropped[bi * d..(bi + 1) * d];
                    let gw = &mut head_grad_w[o * d..(o + 1) * d];
                    let gx = &mut d_bos_dropped[bi * d..(bi + 1) * d];
                    for c in 0..d {
                        gw[c] += g * x[c];
                        gx[c] += g * wr[c];
                    }
                }
            }

            // Dropout backward, then the encoder.
            let mut d_bos = d_bos_dropped;
            if cfg.dropout_p > 0.0 {
                for i in 0..b * d {
                    d_bos[i] = d_bos[i] * mask[i] / keep;
                }
            }
            encoder.backward(&cache, &d_bos, &mut grads);

            pending += 1;
            if pending == accumulate {
                if !first_step_done {
                    let encoder_grad_norm: f64 = grads
                        .tensors()
                        .iter()
                        .map(|(_, t)| t.iter().map(|g| g * g).sum::<f64>())
                        .sum();
                    if encoder_grad_norm == 0.0 {
                        return Err(TrainError::EncoderFrozen);
                    }
                    first_step_done = true;
                }
                apply_step(
                    &mut encoder,
                    &mut grads,
                    &mut states,
                    &mut head,
                    &mut head_grad_w,
                    &mut head_grad_b,
                    &mut head_state_w,
                    &mut head_state_b,
                    &hyper,
                )?;
                pending = 0;
            }
        }
        if pending > 0 {
            apply_step(
                &mut encoder,
                &mut grads,
                &mut states,
                &mut head,
                &mut head_grad_w,
                &mut head_grad_b,
                &mut head_state_w,
                &mut head_state_b,
                &hyper,
            )?;
        }

        let report = evaluate(&encoder, &head, &val_set, cfg.batch_size)?;
        let f1 = report.macro_f1;
        history.push(report);

        if f1 > best_f1 {
            best_f1 = f1;
            best_epoch = epoch;
            best_snapshot = Some((encoder.params.clone(), head.clone()));
        } else if epoch - best_epoch >= cfg.stopping_patience {
            break;
        }
    }

    if let Some((params, best_head)) = best_snapshot {
        encoder.params = params;
        head = best_head;
    }

    Ok(FitOutcome { encoder, head, history, best_epoch })
}

#[allow(clippy::too_many_arguments)]
fn apply_step(
    encoder: &mut Encoder,
    grads: &mut EncoderParams,
    states: &mut [AdamState],
    head: &mut ClassifierHead,
    head_grad_w: &mut [f64],
    head_grad_b: &mut [f64],
    head_state_w: &mut AdamState,
    head_state_b: &mut AdamState,
    hyper: &OptimizerHyper,
) -> Result<(), MathError> {
    let mut grad_tensors = grads.tensors_mut();
    for ((_, theta), (state, (_, grad))) in encoder
        .params
        .tensors_mut()
        .into_iter()
        .zip(states.iter_mut().zip(grad_tensors.iter_mut()))
    {
        adamw_step(theta, grad, state, hyper)?;
        grad.fill(0.0);
    }
    adamw_step(&mut head.w, head_grad_w, head_state_w, hyper)?;
    adamw_step(&mut head.b, head_grad_b, head_state_b, hyper)?;
    head_grad_w.fill(0.0);
    head_grad_b.fill(0.0);
    Ok(())
}

/// Execute one trial.
///
/// The per-trial seed is `global_seed + trial_index`; it drives the head
/// initialization, per-epoch shuffles, and dropout masks, making each trial
/// different but the whole experiment reproducible. Training halts when the
/// validation macro F1 has not improved for `stopping_patience` epochs (or
/// at `max_epochs`); the best-epoch parameters are restored before the test
/// evaluation.
pub fn run_trial(
    fit: &[TrainingExample],
    validate: &[TrainingExample],
    test: &[TrainingExample],
    cfg: &ModelConfig,
    trial_index: usize,
    base_encoder: &Encoder,
    settings: &TrainSettings,
) -> Result<TrialResult, TrainError> {
    run_trial_with_model(fit, validate, test, cfg, trial_index, base_encoder, settings)
        .map(|(result, _)| result)
}

/// [`run_trial`] that also hands back the restored best-epoch model, for
/// callers that persist per-trial weights.
pub fn run_trial_with_model(
    fit: &[TrainingExample],
    validate: &[TrainingExample],
    test: &[TrainingExample],
    cfg: &ModelConfig,
    trial_index: usize,
    base_encoder: &Encoder,
    settings: &TrainSettings,
) -> Result<(TrialResult, TrainedModel), TrainError> {
    if test.is_empty() {
        return Err(TrainError::EmptySet { which: "test" });
    }
    let out = fit_loop(fit, validate, cfg, trial_index, base_encoder, settings)?;
    let test_set = prepare(test, &out.encoder, cfg.strip_urls);
    let test_predictions = predict_prepared(&out.encoder, &out.head, &test_set, cfg.batch_size);
    let pred_labels: Vec<Category> = test_predictions.iter().map(|p| p.label).collect();
    let test_report = classification_report(&pred_labels, &test_set.labels)?;
    let result = TrialResult {
        best_epoch: out.best_epoch,
        validation_history: out.history,
        test_report,
        seed: cfg.global_seed + trial_index as u64,
        test_predictions,
    };
    let model =
        TrainedModel { encoder: out.encoder, head: out.head, batch_size: cfg.batch_size };
    Ok((result, model))
}

/// Train and keep the best-epoch model, for callers that predict beyond the
/// trial's own splits (self-training, full-corpus labeling).
pub fn train_model(
    fit: &[TrainingExample],
    validate: &[TrainingExample],
    cfg: &ModelConfig,
    trial_index: usize,
    base_encoder: &Encoder,
    settings: &TrainSettings,
) -> Result<(TrainedModel, Vec<MetricsReport>, usize), TrainError> {
    let out = fit_loop(fit, validate, cfg, trial_index, base_encoder, settings)?;
    Ok((
        TrainedModel { encoder: out.encoder, head: out.head, batch_size: cfg.batch_size },
        out.history,
        out.best_epoch,
    ))
}

/// Append one JSON record per epoch to a metrics-history file.
pub fn write_history_jsonl(
    path: &std::path::Path,
    history: &[MetricsReport],
) -> std::io::Result<()> {
    use std::io::Write;
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    for (epoch, report) in history.iter().enumerate() {
        let record = serde_json::json!({
            "epoch": epoch + 1,
            "accuracy": report.accuracy,
            "macro_f1": report.macro_f1,
            "weighted_f1": report.weighted_f1,
            "n": report.n,
        });
        writeln!(file, "{record}")?;
    }
    file.flush()
}
