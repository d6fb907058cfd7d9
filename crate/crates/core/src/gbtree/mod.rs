//! Gradient-boosted regression trees with second-order split gain.
//!
//! Each round computes per-row gradients and hessians of the loss at the
//! current prediction, grows one tree depth-first on a row subsample, and
//! adds `learning_rate` times its output. Split gain and leaf weights use the
//! L2 (`reg_lambda`) and L1 (`reg_alpha`) penalties; `gamma` is the minimum
//! gain required to split. Missing feature values are routed by a default
//! direction chosen per split during training.

mod split;
mod text;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use split::{
    best_split, enumerate_splits, leaf_score, leaf_weight, soft_threshold, split_gain,
    SplitCandidate,
};

#[derive(Debug, thiserror::Error)]
pub enum GbtError {
    #[error("need at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("feature matrix has no columns")]
    NoFeatures,
    #[error("X has {rows} rows but y has {targets} values")]
    LengthMismatch { rows: usize, targets: usize },
    #[error("row {row} has {got} features, expected {expected}")]
    FeatureCount { row: usize, got: usize, expected: usize },
    #[error("non-finite value in training data")]
    NonFinite,
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("model text: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbtParams {
    pub n_estimators: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub subsample: f64,
    pub reg_lambda: f64,
    pub reg_alpha: f64,
    pub gamma: f64,
    pub min_child_weight: f64,
    pub seed: u64,
}

impl Default for GbtParams {
    fn default() -> Self {
        Self {
            n_estimators: 100,
            learning_rate: 0.1,
            max_depth: 6,
            subsample: 1.0,
            reg_lambda: 1.0,
            reg_alpha: 0.0,
            gamma: 0.0,
            min_child_weight: 1.0,
            seed: 0,
        }
    }
}

impl GbtParams {
    pub fn validate(&self) -> Result<(), GbtError> {
        let bad = |m: &str| Err(GbtError::InvalidParams(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad("learning_rate must be in (0, 1]");
        }
        if self.max_depth < 1 {
            return bad("max_depth must be >= 1");
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return bad("subsample must be in (0, 1]");
        }
        if !(self.reg_lambda >= 0.0) || !(self.reg_alpha >= 0.0) || !(self.gamma >= 0.0) {
            return bad("reg_lambda, reg_alpha and gamma must be >= 0");
        }
        if !(self.min_child_weight >= 0.0) {
            return bad("min_child_weight must be >= 0");
        }
        Ok(())
    }
}

/// Differentiable loss for boosting: per-row gradient and hessian with
/// respect to the prediction, plus the constant starting prediction.
pub trait Objective: Sync {
    fn base_score(&self, y: &[f64]) -> f64;
    fn grad_hess(&self, prediction: f64, target: f64) -> (f64, f64);
}

/// `½ (y - ŷ)²`: gradient `ŷ - y`, hessian 1, base score `mean(y)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct SquaredError;

impl Objective for SquaredError {
    fn base_score(&self, y: &[f64]) -> f64 {
        y.iter().sum::<f64>() / y.len() as f64
    }

    fn grad_hess(&self, prediction: f64, target: f64) -> (f64, f64) {
        (prediction - target, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        default_left: bool,
        left: usize,
        right: usize,
    },
    Leaf {
        weight: f64,
    },
}

/// Nodes are stored in preorder; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<TreeNode>,
}

impl RegressionTree {
    pub fn predict(&self, row: &[Option<f64>]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Leaf { weight } => return *weight,
                TreeNode::Split {
                    feature,
                    threshold,
                    default_left,
                    left,
                    right,
                } => {
                    let go_left = match row[*feature] {
                        Some(v) => v < *threshold,
                        None => *default_left,
                    };
                    i = if go_left { *left } else { *right };
                }
            }
        }
    }

    pub fn leaf_weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            TreeNode::Leaf { weight } => Some(*weight),
            _ => None,
        })
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], i: usize) -> usize {
            match &nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn used_features(&self) -> Vec<usize> {
        let mut f: Vec<usize> = self
            .nodes
            .iter()
            .filter_map(|n| match n {
                TreeNode::Split { feature, .. } => Some(*feature),
                _ => None,
            })
            .collect();
        f.sort_unstable();
        f.dedup();
        f
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    pub base_score: f64,
    pub n_features: usize,
    pub trees: Vec<RegressionTree>,
    pub params: GbtParams,
}

impl GbtModel {
    pub fn predict(&self, row: &[Option<f64>]) -> Result<f64, GbtError> {
        if row.len() != self.n_features {
            return Err(GbtError::FeatureCount {
                row: 0,
                got: row.len(),
                expected: self.n_features,
            });
        }
        Ok(self.predict_unchecked(row))
    }

    fn predict_unchecked(&self, row: &[Option<f64>]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict(row)).sum();
        self.base_score + self.params.learning_rate * sum
    }

    pub fn predict_rows(&self, x: &[Vec<Option<f64>>]) -> Result<Vec<f64>, GbtError> {
        x.iter().map(|r| self.predict(r)).collect()
    }

    /// Regularisation of every leaf, applied to its shrunk contribution
    /// `learning_rate * w`: `γ + ½λ(ηw)² + α|ηw|`.
    pub fn regularization(&self) -> f64 {
        let p = &self.params;
        self.trees
            .iter()
            .flat_map(|t| t.leaf_weights())
            .map(|w| {
                let w = p.learning_rate * w;
                p.gamma + 0.5 * p.reg_lambda * w * w + p.reg_alpha * w.abs()
            })
            .sum()
    }

    /// A copy keeping only the first `n` trees.
    pub fn truncated(&self, n: usize) -> GbtModel {
        GbtModel {
            trees: self.trees[..n.min(self.trees.len())].to_vec(),
            ..self.clone()
        }
    }
}

/// Regularised training objective: `Σ (y - ŷ)²` plus [`GbtModel::regularization`].
pub fn objective(model: &GbtModel, x: &[Vec<Option<f64>>], y: &[f64]) -> Result<f64, GbtError> {
    let preds = model.predict_rows(x)?;
    let loss: f64 = preds.iter().zip(y).map(|(p, t)| (t - p).powi(2)).sum();
    Ok(loss + model.regularization())
}

fn round_seed(seed: u64, round: usize) -> u64 {
    let mut z = seed ^ (round as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Rows drawn (without replacement, ascending) for boosting round `round`.
pub fn subsample_rows(n: usize, params: &GbtParams, round: usize) -> Vec<usize> {
    if params.subsample >= 1.0 {
        return (0..n).collect();
    }
    let k = ((params.subsample * n as f64).round() as usize).clamp(1, n);
    let mut rng = ChaCha8Rng::seed_from_u64(round_seed(params.seed, round));
    let mut rows = sample(&mut rng, n, k).into_vec();
    rows.sort_unstable();
    rows
}

struct Grower<'a> {
    x: &'a [Vec<Option<f64>>],
    grad: &'a [f64],
    hess: &'a [f64],
    params: &'a GbtParams,
    nodes: Vec<TreeNode>,
}

impl Grower<'_> {
    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        let g: f64 = rows.iter().map(|&r| self.grad[r]).sum();
        let h: f64 = rows.iter().map(|&r| self.hess[r]).sum();
        let p = self.params;
        self.nodes.push(TreeNode::Leaf {
            weight: leaf_weight(g, h, p.reg_lambda, p.reg_alpha),
        });
        if depth >= p.max_depth || rows.len() < 2 {
            return id;
        }
        let Some(split) = best_split(self.x, self.grad, self.hess, &rows, p) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = rows
            .into_iter()
            .partition(|&row| split.goes_left(self.x[row][split.feature]));
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id] = TreeNode::Split {
            feature: split.feature,
            threshold: split.threshold,
            default_left: split.default_left,
            left,
            right,
        };
        id
    }
}

fn validate_data(x: &[Vec<Option<f64>>], y: &[f64]) -> Result<usize, GbtError> {
    if x.len() != y.len() {
        return Err(GbtError::LengthMismatch {
            rows: x.len(),
            targets: y.len(),
        });
    }
    if y.len() < 2 {
        return Err(GbtError::TooFewRows(y.len()));
    }
    let p = x[0].len();
    if p == 0 {
        return Err(GbtError::NoFeatures);
    }
    for (i, r) in x.iter().enumerate() {
        if r.len() != p {
            return Err(GbtError::FeatureCount {
                row: i,
                got: r.len(),
                expected: p,
            });
        }
        if r.iter().flatten().any(|v| !v.is_finite()) {
            return Err(GbtError::NonFinite);
        }
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(GbtError::NonFinite);
    }
    Ok(p)
}

/// Grows one tree on `rows` against the given gradients and hessians.
pub fn grow_tree(
    x: &[Vec<Option<f64>>],
    grad: &[f64],
    hess: &[f64],
    rows: Vec<usize>,
    params: &GbtParams,
) -> RegressionTree {
    let mut g = Grower {
        x,
        grad,
        hess,
        params,
        nodes: Vec::new(),
    };
    g.grow(rows, 0);
    RegressionTree { nodes: g.nodes }
}

pub fn fit(x: &[Vec<Option<f64>>], y: &[f64], params: &GbtParams) -> Result<GbtModel, GbtError> {
    fit_with_objective(x, y, params, &SquaredError)
}

pub fn fit_with_objective(
    x: &[Vec<Option<f64>>],
    y: &[f64],
    params: &GbtParams,
    obj: &dyn Objective,
) -> Result<GbtModel, GbtError> {
    params.validate()?;
    let p = validate_data(x, y)?;
    let n = y.len();
    let base_score = obj.base_score(y);
    let mut preds = vec![base_score; n];
    let mut trees = Vec::with_capacity(params.n_estimators);
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    for round in 0..params.n_estimators {
        for i in 0..n {
            (grad[i], hess[i]) = obj.grad_hess(preds[i], y[i]);
        }
        let rows = subsample_rows(n, params, round);
        let tree = grow_tree(x, &grad, &hess, rows, params);
        for (i, row) in x.iter().enumerate() {
            preds[i] += params.learning_rate * tree.predict(row);
        }
        trees.push(tree);
    }
    Ok(GbtModel {
        base_score,
        n_features: p,
        trees,
        params: params.clone(),
    })
}
