//! Iterative random-forest imputation (missForest scheme).
//!
//! Missing cells start at their column means. Columns are then swept in
//! ascending order of missingness; each sweep fits a forest per incomplete
//! column on its observed rows, using every other column (with the current
//! imputations) as features, and overwrites that column's missing cells.
//! Sweeping stops once the change between sweeps drops below `tol`, the
//! change grows (the previous imputation is kept), or `max_iter` is hit.

mod forest;

use serde::{Deserialize, Serialize};

use crate::ingest::{Column, PanelDataset};

pub use forest::{fit_random_forest, RandomForestModel, RegressionTree};

#[derive(Debug, thiserror::Error)]
pub enum ImputeError {
    #[error("need at least 2 rows to fit a forest, got {0}")]
    TooFewRows(usize),
    #[error("need at least 3 years to impute, got {0}")]
    TooFewYears(usize),
    #[error("feature matrix has no columns")]
    NoFeatures,
    #[error("feature rows have unequal lengths")]
    Ragged,
    #[error("non-finite value in training data")]
    NonFinite,
    #[error("indicator {0} has no observed values")]
    EmptyColumn(String),
    #[error("invalid forest config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RfConfig {
    pub n_trees: usize,
    /// Features tried per split; `None` means ⌈√p⌉.
    pub m_try: Option<usize>,
    pub min_leaf: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for RfConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            m_try: None,
            min_leaf: 2,
            max_iter: 10,
            tol: 1e-3,
            seed: 0,
        }
    }
}

impl RfConfig {
    pub fn validate(&self) -> Result<(), ImputeError> {
        if self.n_trees == 0 {
            return Err(ImputeError::InvalidConfig("n_trees must be >= 1".into()));
        }
        if self.min_leaf == 0 {
            return Err(ImputeError::InvalidConfig("min_leaf must be >= 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(ImputeError::InvalidConfig("tol must be > 0".into()));
        }
        Ok(())
    }

    pub fn m_try_for(&self, p: usize) -> Result<usize, ImputeError> {
        match self.m_try {
            None => Ok(((p as f64).sqrt().ceil() as usize).clamp(1, p)),
            Some(m) if (1..=p).contains(&m) => Ok(m),
            Some(m) => Err(ImputeError::InvalidConfig(format!(
                "m_try {m} outside 1..={p}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    NothingMissing,
    Converged,
    ChangeIncreased,
    MaxIter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputationReport {
    pub iterations_run: usize,
    /// Scaled RMS change of the imputed cells after each sweep.
    pub change_norms: Vec<f64>,
    pub imputed_counts: Vec<(String, usize)>,
    pub stop_reason: StopReason,
}

fn mix_seed(seed: u64, iter: usize, col: usize) -> u64 {
    // splitmix64 finaliser over the packed (iteration, column) pair
    let mut z = seed ^ ((iter as u64) << 32 | col as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn population_std(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    (values.map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Fills every missing indicator cell. Observed cells are copied through
/// untouched and the target is ignored.
pub fn impute(ds: &PanelDataset, cfg: &RfConfig) -> Result<(PanelDataset, ImputationReport), ImputeError> {
    cfg.validate()?;
    let n = ds.n_years();
    if n < 3 {
        return Err(ImputeError::TooFewYears(n));
    }
    let cols = ds.columns();
    for c in cols {
        if c.observed_count() == 0 {
            return Err(ImputeError::EmptyColumn(c.key.code.clone()));
        }
    }
    let imputed_counts: Vec<(String, usize)> = cols
        .iter()
        .map(|c| (c.key.code.clone(), c.missing_count()))
        .collect();
    if ds.missing_cells() == 0 {
        return Ok((
            ds.clone(),
            ImputationReport {
                iterations_run: 0,
                change_norms: vec![],
                imputed_counts,
                stop_reason: StopReason::NothingMissing,
            },
        ));
    }
    let p = cols.len();
    if p > 1 {
        cfg.m_try_for(p - 1)?;
    }

    // cur[row][col]
    let mut cur = vec![vec![0.0; p]; n];
    let mut scales = vec![1.0; p];
    for (j, c) in cols.iter().enumerate() {
        let observed = c.values.iter().flatten().copied();
        let mean = observed.clone().sum::<f64>() / c.observed_count() as f64;
        let sd = population_std(observed);
        if sd > 0.0 {
            scales[j] = sd;
        }
        for (i, v) in c.values.iter().enumerate() {
            cur[i][j] = v.unwrap_or(mean);
        }
    }

    let mut order: Vec<usize> = (0..p).filter(|&j| cols[j].missing_count() > 0).collect();
    order.sort_by_key(|&j| (cols[j].missing_count(), j));
    let n_imputed: usize = order.iter().map(|&j| cols[j].missing_count()).sum();

    let mut change_norms = Vec::new();
    let mut stop_reason = StopReason::MaxIter;
    let mut iterations_run = 0;
    for iter in 1..=cfg.max_iter {
        let prev = cur.clone();
        if p > 1 {
            for &j in &order {
                let features = |row: &Vec<f64>| -> Vec<f64> {
                    row.iter()
                        .enumerate()
                        .filter(|&(k, _)| k != j)
                        .map(|(_, &v)| v)
                        .collect()
                };
                let observed: Vec<usize> = (0..n).filter(|&i| cols[j].values[i].is_some()).collect();
                let missing: Vec<usize> = (0..n).filter(|&i| cols[j].values[i].is_none()).collect();
                let x: Vec<Vec<f64>> = observed.iter().map(|&i| features(&cur[i])).collect();
                let y: Vec<f64> = observed.iter().map(|&i| cur[i][j]).collect();
                if y.len() < 2 {
                    continue;
                }
                let col_cfg = RfConfig {
                    seed: mix_seed(cfg.seed, iter, j),
                    ..cfg.clone()
                };
                let forest = fit_random_forest(&x, &y, &col_cfg)?;
                for &i in &missing {
                    cur[i][j] = forest.predict(&features(&cur[i]));
                }
            }
        }
        iterations_run = iter;
        let sq: f64 = order
            .iter()
            .flat_map(|&j| {
                let (cur, prev, scale) = (&cur, &prev, scales[j]);
                (0..n)
                    .filter(move |&i| cols[j].values[i].is_none())
                    .map(move |i| ((cur[i][j] - prev[i][j]) / scale).powi(2))
            })
            .sum();
        let change = (sq / n_imputed as f64).sqrt();
        let increased = change_norms.last().is_some_and(|&last| change > last);
        change_norms.push(change);
        if increased {
            cur = prev;
            stop_reason = StopReason::ChangeIncreased;
            break;
        }
        if change < cfg.tol {
            stop_reason = StopReason::Converged;
            break;
        }
    }

    let columns = cols
        .iter()
        .enumerate()
        .map(|(j, c)| {
            let values = c
                .values
                .iter()
                .enumerate()
                .map(|(i, v)| Some(v.unwrap_or(cur[i][j])))
                .collect();
            Column::new(c.key.clone(), values)
        })
        .collect();
    let out = ds.clone().with_columns(columns).expect("shape preserved");
    Ok((
        out,
        ImputationReport {
            iterations_run,
            change_norms,
            imputed_counts,
            stop_reason,
        },
    ))
}
