//! Feature ranking by Edit Distance on Real sequences (EDR).
//!
//! Every candidate indicator and the target are z-scored, then compared with
//! EDR: two values match at zero cost when they differ by at most `epsilon`,
//! every other edit costs one. Candidates closest to the target rank first.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ingest::{IndicatorKey, PanelDataset};

pub const DEFAULT_EPSILON: f64 = 0.25;
pub const DEFAULT_TOP_K: usize = 8;

#[derive(Debug, thiserror::Error)]
pub enum SelectError {
    #[error("target has missing values in the ranking window")]
    TargetIncomplete,
    #[error("dataset has no target")]
    NoTarget,
    #[error("indicator {0} has missing values; impute before ranking")]
    CandidateIncomplete(String),
    #[error("no candidate indicators")]
    NoCandidates,
    #[error("k must be at least 1")]
    InvalidK,
    #[error("epsilon must be finite and nonnegative, got {0}")]
    InvalidEpsilon(f64),
    #[error("cannot write {path}: {message}")]
    Write { path: String, message: String },
}

/// A z-scored series together with the moments it was scaled by.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedSeries {
    pub values: Vec<f64>,
    pub mu: f64,
    pub sigma: f64,
}

/// Z-scores with the population standard deviation. A constant series maps
/// to all zeros with `sigma == 0`.
pub fn zscore(series: &[f64]) -> NormalizedSeries {
    if series.is_empty() {
        return NormalizedSeries {
            values: vec![],
            mu: 0.0,
            sigma: 0.0,
        };
    }
    let n = series.len() as f64;
    let mu = series.iter().sum::<f64>() / n;
    let var = series.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / n;
    let sigma = var.sqrt();
    let values = if sigma > 0.0 {
        series.iter().map(|x| (x - mu) / sigma).collect()
    } else {
        vec![0.0; series.len()]
    };
    NormalizedSeries { values, mu, sigma }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdrParams {
    pub epsilon: f64,
}

impl Default for EdrParams {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
        }
    }
}

impl EdrParams {
    pub fn new(epsilon: f64) -> Result<Self, SelectError> {
        if !(epsilon.is_finite() && epsilon >= 0.0) {
            return Err(SelectError::InvalidEpsilon(epsilon));
        }
        Ok(Self { epsilon })
    }
}

/// EDR distance with unit gap and mismatch costs. Uses two rolling rows, so
/// memory is O(len(b)).
pub fn edr_distance(a: &[f64], b: &[f64], params: EdrParams) -> f64 {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, &ai) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, &bj) in b.iter().enumerate() {
            let subcost = usize::from((ai - bj).abs() > params.epsilon);
            cur[j + 1] = (prev[j] + subcost).min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()] as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFeature {
    pub key: IndicatorKey,
    pub distance: f64,
}

/// Candidates in ascending EDR distance (ties by indicator code) and the
/// first `k` of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRanking {
    pub ranked: Vec<RankedFeature>,
    pub selected: Vec<IndicatorKey>,
}

impl FeatureRanking {
    pub fn selected_codes(&self) -> Vec<String> {
        self.selected.iter().map(|k| k.code.clone()).collect()
    }

    /// A copy whose selection is the first `k` ranked keys.
    pub fn reselect(&self, k: usize) -> FeatureRanking {
        FeatureRanking {
            ranked: self.ranked.clone(),
            selected: self.ranked.iter().take(k).map(|r| r.key.clone()).collect(),
        }
    }

    /// Writes `rank,indicator_code,indicator_name,edr_distance,selected`.
    pub fn write_csv(&self, path: &Path) -> Result<(), SelectError> {
        let err = |e: csv::Error| SelectError::Write {
            path: path.display().to_string(),
            message: e.to_string(),
        };
        let mut w = csv::Writer::from_path(path).map_err(err)?;
        w.write_record(["rank", "indicator_code", "indicator_name", "edr_distance", "selected"])
            .map_err(err)?;
        for (i, r) in self.ranked.iter().enumerate() {
            let selected = self.selected.contains(&r.key);
            w.write_record([
                (i + 1).to_string(),
                r.key.code.clone(),
                r.key.name.clone(),
                r.distance.to_string(),
                selected.to_string(),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| SelectError::Write {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }
}

/// Ranks every indicator of a complete dataset against its target.
pub fn rank_features(
    ds: &PanelDataset,
    params: EdrParams,
    k: usize,
) -> Result<FeatureRanking, SelectError> {
    if k < 1 {
        return Err(SelectError::InvalidK);
    }
    if ds.columns().is_empty() {
        return Err(SelectError::NoCandidates);
    }
    let target = ds.target().ok_or(SelectError::NoTarget)?;
    let target: Vec<f64> = target
        .iter()
        .map(|v| v.ok_or(SelectError::TargetIncomplete))
        .collect::<Result<_, _>>()?;
    let target = zscore(&target).values;

    let mut ranked = ds
        .columns()
        .par_iter()
        .map(|col| {
            let values: Vec<f64> = col
                .values
                .iter()
                .map(|v| v.ok_or_else(|| SelectError::CandidateIncomplete(col.key.code.clone())))
                .collect::<Result<_, _>>()?;
            let z = zscore(&values);
            Ok(RankedFeature {
                key: col.key.clone(),
                distance: edr_distance(&z.values, &target, params),
            })
        })
        .collect::<Result<Vec<_>, SelectError>>()?;
    ranked.sort_by(|a, b| {
        a.distance
            .total_cmp(&b.distance)
            .then_with(|| a.key.code.cmp(&b.key.code))
    });
    let selected = ranked.iter().take(k).map(|r| r.key.clone()).collect();
    Ok(FeatureRanking { ranked, selected })
}
