//! Exact greedy split search with learned default directions for missing
//! values.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::GbtParams;

/// L1 soft-threshold of a gradient sum.
pub fn soft_threshold(g: f64, alpha: f64) -> f64 {
    if g > alpha {
        g - alpha
    } else if g < -alpha {
        g + alpha
    } else {
        0.0
    }
}

/// Optimal leaf weight `-T_α(G) / (H + λ)`; zero when the denominator
/// vanishes.
pub fn leaf_weight(g: f64, h: f64, lambda: f64, alpha: f64) -> f64 {
    let denom = h + lambda;
    if denom <= 0.0 {
        return 0.0;
    }
    -soft_threshold(g, alpha) / denom
}

/// Structure score `T_α(G)² / (H + λ)`, twice the objective reduction of a
/// leaf at its optimal weight.
pub fn leaf_score(g: f64, h: f64, lambda: f64, alpha: f64) -> f64 {
    let denom = h + lambda;
    if denom <= 0.0 {
        return 0.0;
    }
    let t = soft_threshold(g, alpha);
    t * t / denom
}

/// Gain of splitting a node with sums `(G, H)` into `(G_L, H_L)` and the
/// complement, after subtracting `γ`.
pub fn split_gain(g_left: f64, h_left: f64, g_total: f64, h_total: f64, p: &GbtParams) -> f64 {
    let (l, a) = (p.reg_lambda, p.reg_alpha);
    0.5 * (leaf_score(g_left, h_left, l, a) + leaf_score(g_total - g_left, h_total - h_left, l, a)
        - leaf_score(g_total, h_total, l, a))
        - p.gamma
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitCandidate {
    pub feature: usize,
    /// Rows with `value < threshold` go left.
    pub threshold: f64,
    pub default_left: bool,
    pub gain: f64,
    pub g_left: f64,
    pub h_left: f64,
    pub g_right: f64,
    pub h_right: f64,
}

impl SplitCandidate {
    pub fn goes_left(&self, value: Option<f64>) -> bool {
        match value {
            Some(v) => v < self.threshold,
            None => self.default_left,
        }
    }

    /// Whether `self` beats `other` under the deterministic ordering:
    /// higher gain, then lower feature, lower threshold, default-left.
    fn beats(&self, other: &SplitCandidate) -> bool {
        if self.gain != other.gain {
            return self.gain > other.gain;
        }
        (self.feature, self.threshold, !self.default_left)
            .partial_cmp(&(other.feature, other.threshold, !other.default_left))
            == Some(std::cmp::Ordering::Less)
    }
}

fn feature_candidates(
    x: &[Vec<Option<f64>>],
    grad: &[f64],
    hess: &[f64],
    rows: &[usize],
    feature: usize,
    params: &GbtParams,
) -> Vec<SplitCandidate> {
    let (mut g_tot, mut h_tot, mut g_miss, mut h_miss) = (0.0, 0.0, 0.0, 0.0);
    let mut present: Vec<(f64, usize)> = Vec::with_capacity(rows.len());
    for &r in rows {
        g_tot += grad[r];
        h_tot += hess[r];
        match x[r][feature] {
            Some(v) => present.push((v, r)),
            None => {
                g_miss += grad[r];
                h_miss += hess[r];
            }
        }
    }
    present.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut out = Vec::new();
    let (mut g_pre, mut h_pre) = (0.0, 0.0);
    for k in 0..present.len().saturating_sub(1) {
        let (v, r) = present[k];
        g_pre += grad[r];
        h_pre += hess[r];
        let next = present[k + 1].0;
        if v == next {
            continue;
        }
        let mut threshold = v + (next - v) / 2.0;
        if threshold <= v {
            threshold = next;
        }
        for default_left in [true, false] {
            let (g_left, h_left) = if default_left {
                (g_pre + g_miss, h_pre + h_miss)
            } else {
                (g_pre, h_pre)
            };
            let (g_right, h_right) = (g_tot - g_left, h_tot - h_left);
            if h_left < params.min_child_weight || h_right < params.min_child_weight {
                continue;
            }
            out.push(SplitCandidate {
                feature,
                threshold,
                default_left,
                gain: split_gain(g_left, h_left, g_tot, h_tot, params),
                g_left,
                h_left,
                g_right,
                h_right,
            });
        }
    }
    out
}

/// Every admissible (feature, threshold, default direction) candidate for
/// the node holding `rows`, in feature / threshold / left-first order.
pub fn enumerate_splits(
    x: &[Vec<Option<f64>>],
    grad: &[f64],
    hess: &[f64],
    rows: &[usize],
    params: &GbtParams,
) -> Vec<SplitCandidate> {
    let p = x.first().map_or(0, Vec::len);
    (0..p)
        .flat_map(|f| feature_candidates(x, grad, hess, rows, f, params))
        .collect()
}

/// Highest-gain candidate with strictly positive gain, evaluating features
/// in parallel.
pub fn best_split(
    x: &[Vec<Option<f64>>],
    grad: &[f64],
    hess: &[f64],
    rows: &[usize],
    params: &GbtParams,
) -> Option<SplitCandidate> {
    let p = x.first().map_or(0, Vec::len);
    let per_feature: Vec<Option<SplitCandidate>> = (0..p)
        .into_par_iter()
        .map(|f| {
            feature_candidates(x, grad, hess, rows, f, params)
                .into_iter()
                .filter(|c| c.gain > 0.0)
                .fold(None, |best: Option<SplitCandidate>, c| match best {
                    Some(b) if !c.beats(&b) => Some(b),
                    _ => Some(c),
                })
        })
        .collect();
    per_feature.into_iter().flatten().fold(None, |best, c| match best {
        Some(b) if !c.beats(&b) => Some(b),
        _ => Some(c),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn soft_threshold_cases() {
        assert_eq!(soft_threshold(3.0, 1.0), 2.0);
        assert_eq!(soft_threshold(-3.0, 1.0), -2.0);
        assert_eq!(soft_threshold(0.5, 1.0), 0.0);
        assert_eq!(soft_threshold(-1.0, 1.0), 0.0);
    }

    #[test]
    fn leaf_weight_matches_closed_form() {
        assert_eq!(leaf_weight(10.0, 2.0, 0.0, 0.0), -5.0);
        assert_eq!(leaf_weight(-10.0, 2.0, 0.0, 0.0), 5.0);
        assert_eq!(leaf_weight(4.0, 3.0, 1.0, 0.0), -1.0);
        assert_eq!(leaf_weight(0.7, 3.0, 1.0, 1.0), 0.0);
        let mut last = f64::INFINITY;
        for k in 0..20 {
            let w = leaf_weight(-6.0, 2.0, 1.0, k as f64 * 0.5).abs();
            assert!(w <= last);
            last = w;
        }
    }

    #[test]
    fn missing_rows_try_both_sides() {
        let params = GbtParams {
            reg_lambda: 0.0,
            min_child_weight: 0.0,
            ..GbtParams::default()
        };
        let x = vec![vec![Some(1.0)], vec![Some(2.0)], vec![None]];
        let g = [1.0, -1.0, -3.0];
        let h = [1.0; 3];
        let c = enumerate_splits(&x, &g, &h, &[0, 1, 2], &params);
        assert_eq!(c.len(), 2);
        assert!(c[0].default_left && !c[1].default_left);
        assert_eq!(c[0].threshold, 1.5);
        let best = best_split(&x, &g, &h, &[0, 1, 2], &params).unwrap();
        // missing row has gradient like row 1, so it should join the right side
        assert!(!best.default_left);
    }
}
