//! Baseline classifiers over simple metadata features.
//!
//! Both baselines use only the posting year and the author identifier:
//! a min-max-normalized year plus a one-hot author encoding with an unknown
//! bucket. They exist as comparison floors for the text models.

use super::math::{adamw_step, softmax, AdamState, OptimizerHyper};
use crate::category::Category;
use crate::corpus::Tweet;
use crate::rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("empty fit set")]
    EmptyFit,
    #[error("single-class fit set")]
    SingleClassFit,
}

/// Year normalization bounds: the corpus posting window.
const YEAR_MIN: f64 = 2008.0;
const YEAR_MAX: f64 = 2023.0;

/// Maps author IDs to one-hot positions; index 0 is the unknown bucket.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuthorIndex {
    positions: HashMap<String, usize>,
}

impl AuthorIndex {
    /// Builds the index from the authors seen in training data, in sorted
    /// order for determinism.
    pub fn fit<'a>(authors: impl Iterator<Item = &'a str>) -> Self {
        let mut unique: Vec<&str> = authors.collect();
        unique.sort_unstable();
        unique.dedup();
        let positions = unique
            .into_iter()
            .enumerate()
            .map(|(i, a)| (a.to_string(), i + 1))
            .collect();
        AuthorIndex { positions }
    }

    pub fn dim(&self) -> usize {
        self.positions.len() + 1
    }

    pub fn position(&self, author_id: &str) -> usize {
        self.positions.get(author_id).copied().unwrap_or(0)
    }
}

/// `[normalized year] ++ one-hot(author)`; unseen authors land in the
/// unknown bucket.
pub fn featurize_baseline(tweet: &Tweet, index: &AuthorIndex) -> Vec<f64> {
    let mut features = vec![0.0; 1 + index.dim()];
    features[0] = (tweet.posted_at.year as f64 - YEAR_MIN) / (YEAR_MAX - YEAR_MIN);
    features[1 + index.position(&tweet.author_id)] = 1.0;
    features
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineKind {
    LogReg,
    GbTree,
}

impl std::str::FromStr for BaselineKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "logreg" => Ok(BaselineKind::LogReg),
            "gbtree" => Ok(BaselineKind::GbTree),
            other => Err(format!("unknown baseline kind '{other}'")),
        }
    }
}

/// A trained baseline exposing three-way confidence vectors.
#[derive(Debug, Clone)]
pub enum BaselineModel {
    LogReg(LogRegModel),
    GbTree(GbTreeModel),
}

impl BaselineModel {
    pub fn predict(&self, features: &[f64]) -> [f64; 3] {
        match self {
            BaselineModel::LogReg(m) => m.predict(features),
            BaselineModel::GbTree(m) => m.predict(features),
        }
    }

    pub fn predict_label(&self, features: &[f64]) -> Category {
        super::trainer::argmax3(&self.predict(features))
    }
}

/// Linear map plus softmax, trained by cross-entropy.
#[derive(Debug, Clone)]
pub struct LogRegModel {
    w: Vec<f64>, // [3, dim] row-major
    b: [f64; 3],
    dim: usize,
}

impl LogRegModel {
    pub fn predict(&self, features: &[f64]) -> [f64; 3] {
        let mut scores = self.b;
        for (o, score) in scores.iter_mut().enumerate() {
            let wr = &self.w[o * self.dim..(o + 1) * self.dim];
            for (c, &x) in features.iter().enumerate() {
                if x != 0.0 {
                    *score += x * wr[c];
                }
            }
        }
        let p = softmax(&scores);
        [p[0], p[1], p[2]]
    }
}

/// One regression tree over dense features.
#[derive(Debug, Clone)]
struct Tree {
    nodes: Vec<TreeNode>,
}

#[derive(Debug, Clone)]
enum TreeNode {
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf { value: f64 },
}

impl Tree {
    fn predict(&self, features: &[f64]) -> f64 {
        let mut node = 0usize;
        loop {
            match &self.nodes[node] {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split { feature, threshold, left, right } => {
                    node = if features[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }
}

/// Gradient-boosted trees with a softmax objective: per round, one tree per
/// class fits the negative gradient, leaves take a Newton step.
#[derive(Debug, Clone)]
pub struct GbTreeModel {
    trees: Vec<[Tree; 3]>,
    base_score: [f64; 3],
    shrinkage: f64,
}

impl GbTreeModel {
    pub fn predict(&self, features: &[f64]) -> [f64; 3] {
        let mut scores = self.base_score;
        for round in &self.trees {
            for (c, tree) in round.iter().enumerate() {
                scores[c] += self.shrinkage * tree.predict(features);
            }
        }
        let p = softmax(&scores);
        [p[0], p[1], p[2]]
    }
}

#[derive(Debug, Clone)]
pub struct BaselineHyper {
    /// Logistic regression epochs and learning rate.
    pub logreg_epochs: usize,
    pub logreg_lr: f64,
    /// Boosting rounds, depth, shrinkage, and leaf regularization.
    pub rounds: usize,
    pub max_depth: usize,
    pub shrinkage: f64,
    pub leaf_lambda: f64,
    pub min_samples: usize,
}

impl Default for BaselineHyper {
    fn default() -> Self {
        BaselineHyper {
            logreg_epochs: 300,
            logreg_lr: 0.05,
            rounds: 40,
            max_depth: 3,
            shrinkage: 0.3,
            leaf_lambda: 1.0,
            min_samples: 2,
        }
    }
}

fn check_fit(fit: &[(Vec<f64>, Category)]) -> Result<(), BaselineError> {
    if fit.is_empty() {
        return Err(BaselineError::EmptyFit);
    }
    let first = fit[0].1;
    if fit.iter().all(|(_, c)| *c == first) {
        return Err(BaselineError::SingleClassFit);
    }
    Ok(())
}

/// Train a baseline of the requested kind on featurized examples. The
/// validation set picks the best epoch (logreg) or round count (trees).
pub fn train_baseline(
    kind: BaselineKind,
    fit: &[(Vec<f64>, Category)],
    validate: &[(Vec<f64>, Category)],
    hyper: &BaselineHyper,
    seed: u64,
) -> Result<BaselineModel, BaselineError> {
    check_fit(fit)?;
    match kind {
        BaselineKind::LogReg => Ok(BaselineModel::LogReg(train_logreg(fit, validate, hyper, seed))),
        BaselineKind::GbTree => Ok(BaselineModel::GbTree(train_gbtree(fit, validate, hyper))),
    }
}

fn validation_accuracy(predict: impl Fn(&[f64]) -> [f64; 3], validate: &[(Vec<f64>, Category)]) -> f64 {
    if validate.is_empty() {
        return 0.0;
    }
    let correct = validate
        .iter()
        .filter(|(x, y)| super::trainer::argmax3(&predict(x)) == *y)
        .count();
    correct as f64 / validate.len() as f64
}

fn train_logreg(
    fit: &[(Vec<f64>, Category)],
    validate: &[(Vec<f64>, Category)],
    hyper: &BaselineHyper,
    seed: u64,
) -> LogRegModel {
    let dim = fit[0].0.len();
    let mut rng = rng::seeded_rng(seed);
    let mut model = LogRegModel {
        w: (0..3 * dim).map(|_| 0.01 * rng::normal(&mut rng)).collect(),
        b: [0.0; 3],
        dim,
    };
    let opt = OptimizerHyper { alpha: hyper.logreg_lr, lambda: 1e-4, ..OptimizerHyper::default() };
    let mut state_w = AdamState::new(3 * dim);
    let mut state_b = AdamState::new(3);

    let mut best = model.clone();
    let mut best_acc = f64::NEG_INFINITY;
    let n = fit.len() as f64;

    for _ in 0..hyper.logreg_epochs {
        let mut grad_w = vec![0.0; 3 * dim];
        let mut grad_b = vec![0.0; 3];
        for (x, y) in fit {
            let p = model.predict(x);
            for o in 0..3 {
                let g = (p[o] - f64::from(o == y.index())) / n;
                grad_b[o] += g;
                let gw = &mut grad_w[o * dim..(o + 1) * dim];
                for (c, &xv) in x.iter().enumerate() {
                    if xv != 0.0 {
                        gw[c] += g * xv;
                    }
                }
            }
        }
        adamw_step(&mut model.w, &grad_w, &mut state_w, &opt).expect("shapes fixed");
        let mut b_vec = model.b.to_vec();
        adamw_step(&mut b_vec, &grad_b, &mut state_b, &opt).expect("shapes fixed");
        model.b = [b_vec[0], b_vec[1], b_vec[2]];

        let acc = validation_accuracy(|x| model.predict(x), validate);
        if acc > best_acc {
            best_acc = acc;
            best = model.clone();
        }
    }
    if validate.is_empty() {
        model
    } else {
        best
    }
}

fn train_gbtree(
    fit: &[(Vec<f64>, Category)],
    validate: &[(Vec<f64>, Category)],
    hyper: &BaselineHyper,
) -> GbTreeModel {
    let n = fit.len();
    let dim = fit[0].0.len();

    // Base score: log class priors.
    let mut counts = [0usize; 3];
    for (_, y) in fit {
        counts[y.index()] += 1;
    }
    let base_score =
        std::array::from_fn(|c| ((counts[c] as f64 + 1.0) / (n as f64 + 3.0)).ln());

    let mut model = GbTreeModel { trees: Vec::new(), base_score, shrinkage: hyper.shrinkage };
    let mut scores: Vec<[f64; 3]> = vec![base_score; n];

    let mut best_rounds = 0usize;
    let mut best_acc = f64::NEG_INFINITY;

    for _ in 0..hyper.rounds {
        let probs: Vec<[f64; 3]> = scores
            .iter()
            .map(|s| {
                let p = softmax(s);
                [p[0], p[1], p[2]]
            })
            .collect();

        let round: [Tree; 3] = std::array::from_fn(|c| {
            let grads: Vec<f64> = fit
                .iter()
                .zip(&probs)
                .map(|((_, y), p)| f64::from(y.index() == c) - p[c])
                .collect();
            let hess: Vec<f64> = probs.iter().map(|p| (p[c] * (1.0 - p[c])).max(1e-12)).collect();
            let indices: Vec<usize> = (0..n).collect();
            let mut tree = Tree { nodes: Vec::new() };
            build_node(&mut tree, fit, &grads, &hess, indices, dim, hyper.max_depth, hyper);
            tree
        });

        for (i, (x, _)) in fit.iter().enumerate() {
            for (c, tree) in round.iter().enumerate() {
                scores[i][c] += hyper.shrinkage * tree.predict(x);
            }
        }
        model.trees.push(round);

        let acc = validation_accuracy(|x| model.predict(x), validate);
        if acc > best_acc {
            best_acc = acc;
            best_rounds = model.trees.len();
        }
    }

    if !validate.is_empty() {
        model.trees.truncate(best_rounds);
    }
    model
}

/// Recursively grow one tree node; returns the node index.
#[allow(clippy::too_many_arguments)]
fn build_node(
    tree: &mut Tree,
    fit: &[(Vec<f64>, Category)],
    grads: &[f64],
    hess: &[f64],
    indices: Vec<usize>,
    dim: usize,
    depth_left: usize,
    hyper: &BaselineHyper,
) -> usize {
    let g_sum: f64 = indices.iter().map(|&i| grads[i]).sum();
    let h_sum: f64 = indices.iter().map(|&i| hess[i]).sum();

    let leaf_value = g_sum / (h_sum + hyper.leaf_lambda);
    if depth_left == 0 || indices.len() < 2 * hyper.min_samples {
        let idx = tree.nodes.len();
        tree.nodes.push(TreeNode::Leaf { value: leaf_value });
        return idx;
    }

    let parent_gain = g_sum * g_sum / (h_sum + hyper.leaf_lambda);
    let mut best: Option<(f64, usize, f64)> = None; // (gain, feature, threshold)

    for feature in 0..dim {
        let mut sorted: Vec<usize> = indices.clone();
        sorted.sort_by(|&a, &b| {
            fit[a].0[feature].partial_cmp(&fit[b].0[feature]).unwrap().then(a.cmp(&b))
        });
        let mut gl = 0.0;
        let mut hl = 0.0;
        for w in 0..sorted.len() - 1 {
            let i = sorted[w];
            gl += grads[i];
            hl += hess[i];
            let x_here = fit[i].0[feature];
            let x_next = fit[sorted[w + 1]].0[feature];
            if x_here == x_next {
                continue;
            }
            let left_n = w + 1;
            let right_n = sorted.len() - left_n;
            if left_n < hyper.min_samples || right_n < hyper.min_samples {
                continue;
            }
            let gr = g_sum - gl;
            let hr = h_sum - hl;
            let gain = gl * gl / (hl + hyper.leaf_lambda) + gr * gr / (hr + hyper.leaf_lambda)
                - parent_gain;
            let threshold = 0.5 * (x_here + x_next);
            if best.map(|(g, _, _)| gain > g + 1e-12).unwrap_or(gain > 1e-9) {
                best = Some((gain, feature, threshold));
            }
        }
    }

    match best {
        Some((_, feature, threshold)) => {
            let (left_idx, right_idx): (Vec<usize>, Vec<usize>) =
                indices.into_iter().partition(|&i| fit[i].0[feature] <= threshold);
            let idx = tree.nodes.len();
            tree.nodes.push(TreeNode::Leaf { value: 0.0 }); // placeholder
            let left = build_node(tree, fit, grads, hess, left_idx, dim, depth_left - 1, hyper);
            let right = build_node(tree, fit, grads, hess, right_idx, dim, depth_left - 1, hyper);
            tree.nodes[idx] = TreeNode::Split { feature, threshold, left, right };
            idx
        }
        None => {
            let idx = tree.nodes.len();
            tree.nodes.push(TreeNode::Leaf { value: leaf_value });
            idx
        }
    }
}
