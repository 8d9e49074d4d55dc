//! Evaluation math: confusion matrices, accuracy, macro/weighted F1,
//! Cohen's kappa, weighted kappa, and percent agreement.
//!
//! All functions are pure and operate on three-class label slices. The
//! zero-division convention is precision/recall/F1 = 0 for empty
//! denominators, with the affected classes flagged in the report.

use crate::category::Category;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("label slices have different lengths ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("cannot compute metrics on empty label slices")]
    Empty,
}

/// 3x3 count grid; rows are true labels, columns are predicted labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: [[usize; 3]; 3],
}

impl ConfusionMatrix {
    /// Count (gold, pred) pairs into the grid.
    pub fn from_labels(pred: &[Category], gold: &[Category]) -> Result<Self, MetricsError> {
        check_pair(pred, gold)?;
        let mut counts = [[0usize; 3]; 3];
        for (&p, &g) in pred.iter().zip(gold.iter()) {
            counts[g.index()][p.index()] += 1;
        }
        Ok(ConfusionMatrix { counts })
    }

    /// Count in cell (true = `gold`, predicted = `pred`).
    pub fn cell(&self, gold: Category, pred: Category) -> usize {
        self.counts[gold.index()][pred.index()]
    }

    pub fn n(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> usize {
        (0..3).map(|i| self.counts[i][i]).sum()
    }

    /// Per-true-class totals (row sums): the class supports.
    pub fn supports(&self) -> [usize; 3] {
        let mut out = [0usize; 3];
        for (i, row) in self.counts.iter().enumerate() {
            out[i] = row.iter().sum();
        }
        out
    }

    /// Per-predicted-class totals (column sums).
    pub fn predicted_counts(&self) -> [usize; 3] {
        let mut out = [0usize; 3];
        for row in &self.counts {
            for (j, &c) in row.iter().enumerate() {
                out[j] += c;
            }
        }
        out
    }

    /// CSV rendering with a header row, for inspection alongside the JSON
    /// report.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("true\\pred,problem,solution,other\n");
        for g in Category::ALL {
            out.push_str(g.name());
            for p in Category::ALL {
                out.push(',');
                out.push_str(&self.cell(g, p).to_string());
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

/// Full classification report for one (pred, gold) pairing.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub weighted_f1: f64,
    pub per_class: [ClassMetrics; 3],
    pub confusion: ConfusionMatrix,
    pub n: usize,
    /// Classes where a zero denominator forced the 0-convention.
    pub degenerate_classes: Vec<Category>,
}

fn check_pair<T>(a: &[T], b: &[T]) -> Result<(), MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::LengthMismatch { left: a.len(), right: b.len() });
    }
    if a.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(())
}

/// Accuracy, per-class precision/recall/F1, macro and support-weighted F1.
pub fn classification_report(
    pred: &[Category],
    gold: &[Category],
) -> Result<MetricsReport, MetricsError> {
    let confusion = ConfusionMatrix::from_labels(pred, gold)?;
    let n = confusion.n();
    let supports = confusion.supports();
    let predicted = confusion.predicted_counts();

    let mut per_class = [ClassMetrics { precision: 0.0, recall: 0.0, f1: 0.0, support: 0 }; 3];
    let mut degenerate_classes = Vec::new();
    for c in Category::ALL {
        let i = c.index();
        let tp = confusion.counts[i][i] as f64;
        let mut degenerate = false;
        let precision = if predicted[i] == 0 {
            degenerate = true;
            0.0
        } else {
            tp / predicted[i] as f64
        };
        let recall = if supports[i] == 0 {
            degenerate = true;
            0.0
        } else {
            tp / supports[i] as f64
        };
        let f1 = if precision + recall == 0.0 {
            degenerate = true;
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        if degenerate {
            degenerate_classes.push(c);
        }
        per_class[i] = ClassMetrics { precision, recall, f1, support: supports[i] };
    }

    let accuracy = confusion.trace() as f64 / n as f64;
    let macro_f1 = per_class.iter().map(|m| m.f1).sum::<f64>() / 3.0;
    let weighted_f1 =
        per_class.iter().map(|m| m.f1 * m.support as f64).sum::<f64>() / n as f64;

    Ok(MetricsReport {
        accuracy,
        macro_f1,
        weighted_f1,
        per_class,
        confusion,
        n,
        degenerate_classes,
    })
}

/// Kappa value plus a flag for the degenerate constant-rater case.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaEstimate {
    pub value: f64,
    /// True when expected agreement was 1 and the 1.0/0.0 convention applied.
    pub degenerate: bool,
}

/// Cohen's kappa: (p_o - p_e) / (1 - p_e) with p_e from the raters'
/// marginal distributions.
pub fn cohen_kappa(a: &[Category], b: &[Category]) -> Result<KappaEstimate, MetricsError> {
    check_pair(a, b)?;
    let n = a.len() as f64;
    let observed = a.iter().zip(b.iter()).filter(|(x, y)| x == y).count() as f64 / n;

    let mut marg_a = [0f64; 3];
    let mut marg_b = [0f64; 3];
    for (&x, &y) in a.iter().zip(b.iter()) {
        marg_a[x.index()] += 1.0;
        marg_b[y.index()] += 1.0;
    }
    let expected: f64 = (0..3).map(|i| (marg_a[i] / n) * (marg_b[i] / n)).sum();

    if (1.0 - expected).abs() < 1e-15 {
        // Both raters constant and identical.
        let value = if (observed - 1.0).abs() < 1e-15 { 1.0 } else { 0.0 };
        return Ok(KappaEstimate { value, degenerate: true });
    }
    Ok(KappaEstimate { value: (observed - expected) / (1.0 - expected), degenerate: false })
}

/// Disagreement weighting for [`weighted_kappa`], over category indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KappaWeights {
    Linear,
    Quadratic,
}

impl KappaWeights {
    fn weight(self, i: usize, j: usize) -> f64 {
        let d = (i as f64 - j as f64).abs();
        match self {
            KappaWeights::Linear => d,
            KappaWeights::Quadratic => d * d,
        }
    }
}

/// Weighted kappa: 1 - sum(w*O) / sum(w*E), with disagreement weights taken
/// from the category indices.
pub fn weighted_kappa(
    a: &[Category],
    b: &[Category],
    weights: KappaWeights,
) -> Result<KappaEstimate, MetricsError> {
    check_pair(a, b)?;
    let n = a.len() as f64;

    let mut joint = [[0f64; 3]; 3];
    let mut marg_a = [0f64; 3];
    let mut marg_b = [0f64; 3];
    for (&x, &y) in a.iter().zip(b.iter()) {
        joint[x.index()][y.index()] += 1.0;
        marg_a[x.index()] += 1.0;
        marg_b[y.index()] += 1.0;
    }

    let mut weighted_observed = 0.0;
    let mut weighted_expected = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            let w = weights.weight(i, j);
            weighted_observed += w * joint[i][j];
            weighted_expected += w * marg_a[i] * marg_b[j] / n;
        }
    }

    if weighted_expected.abs() < 1e-15 {
        // No off-diagonal mass is even possible given the marginals.
        let value = if weighted_observed.abs() < 1e-15 { 1.0 } else { 0.0 };
        return Ok(KappaEstimate { value, degenerate: true });
    }
    Ok(KappaEstimate { value: 1.0 - weighted_observed / weighted_expected, degenerate: false })
}

/// Percent agreement plus both kappa statistics for a pair of labelings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgreementReport {
    pub percent_agreement: f64,
    pub kappa: f64,
    pub weighted_kappa: f64,
    pub n: usize,
    pub degenerate: bool,
}

pub fn agreement_report(
    a: &[Category],
    b: &[Category],
    weights: KappaWeights,
) -> Result<AgreementReport, MetricsError> {
    check_pair(a, b)?;
    let agree = a.iter().zip(b.iter()).filter(|(x, y)| x == y).count();
    let kappa = cohen_kappa(a, b)?;
    let wk = weighted_kappa(a, b, weights)?;
    Ok(AgreementReport {
        percent_agreement: 100.0 * agree as f64 / a.len() as f64,
        kappa: kappa.value,
        weighted_kappa: wk.value,
        n: a.len(),
        degenerate: kappa.degenerate || wk.degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use Category::{Other as O, Problem as P, Solution as S};

    #[test]
    fn diagonal_for_identical_labels() {
        let labels = vec![P, S, O];
        let m = ConfusionMatrix::from_labels(&labels, &labels).unwrap();
        for g in Category::ALL {
            for p in Category::ALL {
                assert_eq!(m.cell(g, p), usize::from(g == p));
            }
        }
    }

    #[test]
    fn worked_confusion_example() {
        // gold=[1,1,2,3], pred=[1,2,2,3]
        let gold = vec![P, P, S, O];
        let pred = vec![P, S, S, O];
        let m = ConfusionMatrix::from_labels(&pred, &gold).unwrap();
        assert_eq!(m.cell(P, P), 1);
        assert_eq!(m.cell(P, S), 1);
        assert_eq!(m.cell(S, S), 1);
        assert_eq!(m.cell(O, O), 1);
        assert_eq!(m.n(), 4);
    }

    #[test]
    fn length_mismatch_is_fatal() {
        assert!(matches!(
            ConfusionMatrix::from_labels(&[P, S], &[P]),
            Err(MetricsError::LengthMismatch { .. })
        ));
        assert!(matches!(
            classification_report(&[], &[]),
            Err(MetricsError::Empty)
        ));
    }

    #[test]
    fn perfect_prediction_scores_one() {
        let labels = vec![P, P, S, O, S, O];
        let r = classification_report(&labels, &labels).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.macro_f1, 1.0);
        assert_eq!(r.weighted_f1, 1.0);
        assert!(r.degenerate_classes.is_empty());
    }

    #[test]
    fn worked_report_example() {
        // class1 P=1, R=.5, F1=2/3; class2 P=.5, R=1, F1=2/3; class3 F1=1.
        let gold = vec![P, P, S, O];
        let pred = vec![P, S, S, O];
        let r = classification_report(&pred, &gold).unwrap();
        assert!((r.per_class[0].f1 - 2.0 / 3.0).abs() < 1e-12);
        assert!((r.per_class[1].f1 - 2.0 / 3.0).abs() < 1e-12);
        assert!((r.per_class[2].f1 - 1.0).abs() < 1e-12);
        assert!((r.macro_f1 - 7.0 / 9.0).abs() < 1e-12);
        assert!((r.accuracy - 0.75).abs() < 1e-12);
    }

    #[test]
    fn absent_class_flagged_with_zero_f1() {
        let gold = vec![P, P, S, S];
        let pred = vec![P, P, S, S];
        let r = classification_report(&pred, &gold).unwrap();
        assert_eq!(r.per_class[O.index()].f1, 0.0);
        assert_eq!(r.degenerate_classes, vec![O]);
    }

    #[test]
    fn kappa_is_one_for_identical_nondegenerate() {
        let a = vec![P, S, O, P, S];
        let k = cohen_kappa(&a, &a).unwrap();
        assert!((k.value - 1.0).abs() < 1e-12);
        assert!(!k.degenerate);
    }

    #[test]
    fn kappa_worked_example() {
        // p_o = 0.75, p_e = 5/16, kappa = 0.4375/0.6875.
        let a = vec![P, P, S, O];
        let b = vec![P, S, S, O];
        let k = cohen_kappa(&a, &b).unwrap();
        assert!((k.value - 0.4375 / 0.6875).abs() < 1e-12);
    }

    #[test]
    fn kappa_degenerate_constant_raters() {
        let a = vec![P, P, P];
        let k = cohen_kappa(&a, &a).unwrap();
        assert_eq!(k.value, 1.0);
        assert!(k.degenerate);

        let b = vec![P, P, S];
        let k2 = cohen_kappa(&a, &b).unwrap();
        assert!(!k2.degenerate);
    }

    #[test]
    fn weighted_kappa_perfect_agreement() {
        let a = vec![P, S, O, S];
        let k = weighted_kappa(&a, &a, KappaWeights::Linear).unwrap();
        assert!((k.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn weighted_kappa_symmetry() {
        let a = vec![P, P, S, O, O, S, P];
        let b = vec![P, S, S, O, P, S, O];
        for w in [KappaWeights::Linear, KappaWeights::Quadratic] {
            let k1 = weighted_kappa(&a, &b, w).unwrap().value;
            let k2 = weighted_kappa(&b, &a, w).unwrap().value;
            assert!((k1 - k2).abs() < 1e-12);
        }
    }

    #[test]
    fn agreement_report_percent() {
        let a = vec![P, P, S, O];
        let b = vec![P, S, S, O];
        let r = agreement_report(&a, &b, KappaWeights::Linear).unwrap();
        assert!((r.percent_agreement - 75.0).abs() < 1e-12);
        assert_eq!(r.n, 4);
    }

    #[test]
    fn accuracy_equals_trace_over_n() {
        let gold = vec![P, S, O, O, S, P, P];
        let pred = vec![S, S, O, P, S, P, O];
        let r = classification_report(&pred, &gold).unwrap();
        assert!((r.accuracy - r.confusion.trace() as f64 / r.n as f64).abs() < 1e-15);
    }

    #[test]
    fn confusion_csv_shape() {
        let labels = vec![P, S, O];
        let m = ConfusionMatrix::from_labels(&labels, &labels).unwrap();
        let csv = m.to_csv();
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.starts_with("true\\pred"));
    }
}
