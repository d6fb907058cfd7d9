use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ImputeError, RfConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Axis-aligned regression tree with mean-valued leaves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut idx = 0;
        loop {
            match self.nodes[idx] {
                Node::Leaf(v) => return v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => idx = if row[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf(_))).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForestModel {
    pub trees: Vec<RegressionTree>,
    pub tree_seeds: Vec<u64>,
    pub feature_names: Vec<String>,
}

impl RandomForestModel {
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(row)).sum::<f64>() / self.trees.len() as f64
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Self {
        self.feature_names = names;
        self
    }
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    m_try: usize,
    min_leaf: usize,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn mean(&self, idx: &[usize]) -> f64 {
        idx.iter().map(|&i| self.y[i]).sum::<f64>() / idx.len() as f64
    }

    fn grow(&mut self, idx: &mut [usize], rng: &mut ChaCha8Rng) -> usize {
        let id = self.nodes.len();
        let mean = self.mean(idx);
        self.nodes.push(Node::Leaf(mean));
        if idx.len() < 2 * self.min_leaf {
            return id;
        }
        let first = self.y[idx[0]];
        if idx.iter().all(|&i| self.y[i] == first) {
            return id;
        }
        let Some((feature, threshold)) = self.best_split(idx, rng) else {
            return id;
        };
        let mut lo = 0;
        for k in 0..idx.len() {
            if self.x[idx[k]][feature] <= threshold {
                idx.swap(lo, k);
                lo += 1;
            }
        }
        let (l, r) = idx.split_at_mut(lo);
        let left = self.grow(l, rng);
        let right = self.grow(r, rng);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }

    /// Best variance-reduction split among `m_try` sampled features. Ties go
    /// to the lowest feature index, then the lowest threshold.
    fn best_split(&self, idx: &[usize], rng: &mut ChaCha8Rng) -> Option<(usize, f64)> {
        let p = self.x[0].len();
        let mut features = sample(rng, p, self.m_try).into_vec();
        features.sort_unstable();

        let n = idx.len() as f64;
        let total: f64 = idx.iter().map(|&i| self.y[i]).sum();
        let parent_score = total * total / n;
        let sst: f64 = idx.iter().map(|&i| (self.y[i] - total / n).powi(2)).sum();
        let min_gain = 1e-12 * sst.max(f64::MIN_POSITIVE);

        let mut best: Option<(f64, usize, f64)> = None;
        let mut order: Vec<usize> = idx.to_vec();
        for &f in &features {
            order.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]));
            let mut left_sum = 0.0;
            for k in 0..order.len() - 1 {
                left_sum += self.y[order[k]];
                let nl = k + 1;
                let nr = order.len() - nl;
                let (a, b) = (self.x[order[k]][f], self.x[order[k + 1]][f]);
                if a == b || nl < self.min_leaf || nr < self.min_leaf {
                    continue;
                }
                let right_sum = total - left_sum;
                let score = left_sum * left_sum / nl as f64 + right_sum * right_sum / nr as f64;
                let gain = score - parent_score;
                if gain <= min_gain {
                    continue;
                }
                let mut thr = a + (b - a) / 2.0;
                if thr >= b {
                    thr = a;
                }
                let better = match best {
                    None => true,
                    Some((g, bf, bt)) => {
                        gain > g || (gain == g && (f < bf || (f == bf && thr < bt)))
                    }
                };
                if better {
                    best = Some((gain, f, thr));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}

fn fit_tree(x: &[Vec<f64>], y: &[f64], cfg: &RfConfig, m_try: usize, seed: u64) -> RegressionTree {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = y.len();
    let mut idx: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
    let mut b = Builder {
        x,
        y,
        m_try,
        min_leaf: cfg.min_leaf,
        nodes: Vec::new(),
    };
    b.grow(&mut idx, &mut rng);
    RegressionTree { nodes: b.nodes }
}

/// Bagged regression trees. Tree `i` draws its bootstrap sample and feature
/// subsets from a stream seeded with `cfg.seed ^ i`.
pub fn fit_random_forest(
    x: &[Vec<f64>],
    y: &[f64],
    cfg: &RfConfig,
) -> Result<RandomForestModel, ImputeError> {
    if y.len() < 2 || x.len() != y.len() {
        return Err(ImputeError::TooFewRows(y.len().min(x.len())));
    }
    let p = x[0].len();
    if p == 0 {
        return Err(ImputeError::NoFeatures);
    }
    if x.iter().any(|r| r.len() != p) {
        return Err(ImputeError::Ragged);
    }
    if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(ImputeError::NonFinite);
    }
    cfg.validate()?;
    let m_try = cfg.m_try_for(p)?;
    let seeds: Vec<u64> = (0..cfg.n_trees as u64).map(|i| cfg.seed ^ i).collect();
    let trees = seeds
        .par_iter()
        .map(|&s| fit_tree(x, y, cfg, m_try, s))
        .collect();
    Ok(RandomForestModel {
        trees,
        tree_seeds: seeds,
        feature_names: (0..p).map(|j| format!("x{j}")).collect(),
    })
}
