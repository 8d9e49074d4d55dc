//! Classification math: softmax, cross-entropy, and the decoupled
//! weight-decay adaptive optimizer update.
//!
//! The optimizer keeps exponential averages of the gradient and its square,
//! bias-corrects both, and applies weight decay directly to the parameters
//! rather than folding it into the gradient:
//!
//! ```text
//! m <- b1*m + (1-b1)*g          m' = m / (1 - b1^t)
//! v <- b2*v + (1-b2)*g^2        v' = v / (1 - b2^t)
//! theta <- theta - eta * (alpha * m' / (sqrt(v') + eps) + lambda * theta)
//! ```

use crate::category::Category;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MathError {
    #[error("shape mismatch: parameters {params}, gradient {grad}")]
    ShapeMismatch { params: usize, grad: usize },
    #[error("invalid optimizer hyperparameter: {0}")]
    BadHyper(String),
}

/// Probabilities are clamped to this floor before taking logs.
pub const LOG_CLAMP: f64 = 1e-12;

/// Numerically stabilized softmax: subtracts the max score before
/// exponentiating, so huge scores cannot overflow.
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|&y| (y - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Three-way softmax over a score vector.
pub fn softmax3(scores: [f64; 3]) -> [f64; 3] {
    let v = softmax(&scores);
    [v[0], v[1], v[2]]
}

/// Cross-entropy of a confidence vector against the true category:
/// `-log(p_t)`, with the probability clamped away from zero.
pub fn cross_entropy(p: &[f64; 3], target: Category) -> f64 {
    -p[target.index()].max(LOG_CLAMP).ln()
}

/// Optimizer hyperparameters. Defaults: learning rate 3e-5, betas
/// 0.9/0.999, epsilon 1e-8, weight decay 0.01, schedule multiplier 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerHyper {
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub lambda: f64,
    pub eta: f64,
}

impl Default for OptimizerHyper {
    fn default() -> Self {
        OptimizerHyper {
            alpha: 3e-5,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            lambda: 0.01,
            eta: 1.0,
        }
    }
}

impl OptimizerHyper {
    pub fn validate(&self) -> Result<(), MathError> {
        if self.alpha.is_nan() || self.alpha <= 0.0 {
            return Err(MathError::BadHyper(format!("alpha {} must be > 0", self.alpha)));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(MathError::BadHyper(format!("{name} {b} must be in [0, 1)")));
            }
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(MathError::BadHyper(format!("epsilon {} must be > 0", self.epsilon)));
        }
        if self.lambda < 0.0 {
            return Err(MathError::BadHyper(format!("lambda {} must be >= 0", self.lambda)));
        }
        Ok(())
    }
}

/// Per-parameter-tensor optimizer state: first/second moment accumulators
/// and the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        AdamState { m: vec![0.0; len], v: vec![0.0; len], step: 0 }
    }

    /// Bias-corrected views of the current moments under the given betas.
    pub fn corrected(&self, h: &OptimizerHyper) -> (Vec<f64>, Vec<f64>) {
        let c1 = 1.0 - h.beta1.powi(self.step as i32);
        let c2 = 1.0 - h.beta2.powi(self.step as i32);
        (
            self.m.iter().map(|&m| m / c1).collect(),
            self.v.iter().map(|&v| v / c2).collect(),
        )
    }
}

/// One optimizer update over a parameter tensor, in place.
pub fn adamw_step(
    theta: &mut [f64],
    grad: &[f64],
    state: &mut AdamState,
    h: &OptimizerHyper,
) -> Result<(), MathError> {
    if theta.len() != grad.len() || state.m.len() != theta.len() || state.v.len() != theta.len() {
        return Err(MathError::ShapeMismatch { params: theta.len(), grad: grad.len() });
    }
    state.step += 1;
    let t = state.step as i32;
    let corr1 = 1.0 - h.beta1.powi(t);
    let corr2 = 1.0 - h.beta2.powi(t);
    for i in 0..theta.len() {
        let g = grad[i];
        state.m[i] = h.beta1 * state.m[i] + (1.0 - h.beta1) * g;
        state.v[i] = h.beta2 * state.v[i] + (1.0 - h.beta2) * g * g;
        let m_hat = state.m[i] / corr1;
        let v_hat = state.v[i] / corr2;
        theta[i] -= h.eta * (h.alpha * m_hat / (v_hat.sqrt() + h.epsilon) + h.lambda * theta[i]);
    }
    Ok(())
}
