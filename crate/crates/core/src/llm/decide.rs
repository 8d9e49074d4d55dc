//! Threshold decision rule for confidence-mode responses and the grid
//! search over its parameter.
//!
//! With implicit Class 3 confidence `conf3 = 100 - conf1 - conf2`: when
//! conf3 exceeds k the tweet is Other; otherwise the larger of conf1/conf2
//! decides, ties going to Problem.

use crate::category::Category;
use crate::metrics::classification_report;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DecideError {
    #[error("empty scored set")]
    EmptyScored,
    #[error("bad k range: start {start}, end {end}, step {step}")]
    BadRange { start: f64, end: f64, step: f64 },
}

/// Apply the k-threshold rule to one confidence triple.
pub fn decide_k_threshold(confs: (f64, f64, f64), k: f64) -> Category {
    let (conf1, conf2, conf3) = confs;
    if conf3 > k {
        Category::Other
    } else if conf1 >= conf2 {
        Category::Problem
    } else {
        Category::Solution
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub k: f64,
    pub accuracy: f64,
    pub macro_f1: f64,
}

/// Grid-search outcome: the best k per metric (lowest k on ties) plus the
/// full curve for threshold-effect reporting.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub best_accuracy_k: f64,
    pub best_accuracy: f64,
    pub best_macro_f1_k: f64,
    pub best_macro_f1: f64,
    pub curve: Vec<GridPoint>,
}

/// Evaluate every k in `[start, end]` at the given step against the gold
/// labels and return the per-metric optima.
pub fn grid_search_k(
    scored: &[((f64, f64, f64), Category)],
    start: f64,
    end: f64,
    step: f64,
) -> Result<GridSearchResult, DecideError> {
    if scored.is_empty() {
        return Err(DecideError::EmptyScored);
    }
    if step.is_nan() || step <= 0.0 || end < start {
        return Err(DecideError::BadRange { start, end, step });
    }

    let gold: Vec<Category> = scored.iter().map(|(_, g)| *g).collect();
    let mut curve = Vec::new();
    let mut best_acc: Option<GridPoint> = None;
    let mut best_f1: Option<GridPoint> = None;

    let steps = ((end - start) / step).round() as usize;
    for i in 0..=steps {
        let k = start + i as f64 * step;
        if k > end + 1e-9 {
            break;
        }
        let pred: Vec<Category> =
            scored.iter().map(|(confs, _)| decide_k_threshold(*confs, k)).collect();
        let report = classification_report(&pred, &gold).expect("same lengths, nonempty");
        let point = GridPoint { k, accuracy: report.accuracy, macro_f1: report.macro_f1 };
        curve.push(point);
        // Strictly-greater keeps the lowest k on ties.
        if best_acc.map(|b| point.accuracy > b.accuracy).unwrap_or(true) {
            best_acc = Some(point);
        }
        if best_f1.map(|b| point.macro_f1 > b.macro_f1).unwrap_or(true) {
            best_f1 = Some(point);
        }
    }

    let best_acc = best_acc.expect("at least one grid point");
    let best_f1 = best_f1.expect("at least one grid point");
    Ok(GridSearchResult {
        best_accuracy_k: best_acc.k,
        best_accuracy: best_acc.accuracy,
        best_macro_f1_k: best_f1.k,
        best_macro_f1: best_f1.macro_f1,
        curve,
    })
}

/// Default grid: k from 1.0 to 100.0 in increments of 1.0.
pub fn grid_search_k_default(
    scored: &[((f64, f64, f64), Category)],
) -> Result<GridSearchResult, DecideError> {
    grid_search_k(scored, 1.0, 100.0, 1.0)
}
