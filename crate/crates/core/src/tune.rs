//! MAPE, chronological train/test splits and grid-search tuning with
//! expanding-window cross-validation.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::gbtree::{self, GbtError, GbtModel, GbtParams};

#[derive(Debug, thiserror::Error)]
pub enum TuneError {
    #[error("actual value at position {0} is zero; MAPE is undefined")]
    ZeroActual(usize),
    #[error("actual has {actual} values but forecast has {forecast}")]
    LengthMismatch { actual: usize, forecast: usize },
    #[error("MAPE of an empty series")]
    Empty,
    #[error("need more than {n_test} rows to hold out {n_test}, got {rows}")]
    TooFewRowsForSplit { rows: usize, n_test: usize },
    #[error("need at least {needed} training rows for {folds}-fold CV, got {rows}")]
    TooFewRowsForCv { rows: usize, folds: usize, needed: usize },
    #[error("parameter grid is empty")]
    EmptyGrid,
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error(transparent)]
    Model(#[from] GbtError),
    #[error("cannot write {path}: {message}")]
    Write { path: String, message: String },
}

/// Mean absolute percentage error, in percent:
/// `100/n · Σ |A_i - F_i| / |A_i|`.
pub fn mape(actual: &[f64], forecast: &[f64]) -> Result<f64, TuneError> {
    if actual.len() != forecast.len() {
        return Err(TuneError::LengthMismatch {
            actual: actual.len(),
            forecast: forecast.len(),
        });
    }
    if actual.is_empty() {
        return Err(TuneError::Empty);
    }
    let mut sum = 0.0;
    for (i, (a, f)) in actual.iter().zip(forecast).enumerate() {
        if *a == 0.0 {
            return Err(TuneError::ZeroActual(i));
        }
        sum += ((a - f) / a).abs();
    }
    Ok(sum / actual.len() as f64 * 100.0)
}

/// Time-ordered design matrix: one row per year.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Design {
    pub years: Vec<i32>,
    pub feature_names: Vec<String>,
    pub x: Vec<Vec<Option<f64>>>,
    pub y: Vec<f64>,
}

impl Design {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn slice(&self, range: std::ops::Range<usize>) -> Design {
        Design {
            years: self.years[range.clone()].to_vec(),
            feature_names: self.feature_names.clone(),
            x: self.x[range.clone()].to_vec(),
            y: self.y[range].to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub n_test: usize,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { n_test: 2 }
    }
}

/// The last `n_test` rows become the test set; nothing is shuffled.
pub fn split_train_test(rows: &Design, spec: SplitSpec) -> Result<(Design, Design), TuneError> {
    let n = rows.len();
    if spec.n_test < 1 || n <= spec.n_test {
        return Err(TuneError::TooFewRowsForSplit {
            rows: n,
            n_test: spec.n_test,
        });
    }
    let cut = n - spec.n_test;
    Ok((rows.slice(0..cut), rows.slice(cut..n)))
}

/// Candidate values per tuned hyperparameter. The defaults are the value
/// sets the reference study tuned over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Grid {
    pub learning_rate: Vec<f64>,
    pub max_depth: Vec<usize>,
    pub n_estimators: Vec<usize>,
    pub subsample: Vec<f64>,
}

impl Default for Grid {
    fn default() -> Self {
        Self {
            learning_rate: vec![0.01, 0.1, 0.2],
            max_depth: vec![3, 6],
            n_estimators: vec![100, 200],
            subsample: vec![0.8, 0.9, 1.0],
        }
    }
}

impl Grid {
    pub fn size(&self) -> usize {
        self.learning_rate.len() * self.max_depth.len() * self.n_estimators.len() * self.subsample.len()
    }

    /// Cartesian product in `learning_rate`, `max_depth`, `n_estimators`,
    /// `subsample` nesting order; untuned fields come from `base`.
    pub fn combinations(&self, base: &GbtParams) -> Result<Vec<GbtParams>, TuneError> {
        if self.size() == 0 {
            return Err(TuneError::EmptyGrid);
        }
        let mut out = Vec::with_capacity(self.size());
        for &learning_rate in &self.learning_rate {
            for &max_depth in &self.max_depth {
                for &n_estimators in &self.n_estimators {
                    for &subsample in &self.subsample {
                        let p = GbtParams {
                            learning_rate,
                            max_depth,
                            n_estimators,
                            subsample,
                            ..base.clone()
                        };
                        p.validate()
                            .map_err(|e| TuneError::InvalidGrid(e.to_string()))?;
                        out.push(p);
                    }
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub params: GbtParams,
    pub cv_mape: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub best: GbtParams,
    pub best_score: f64,
    pub table: Vec<GridRow>,
}

pub fn write_grid_csv(table: &[GridRow], path: &Path) -> Result<(), TuneError> {
    let mut rows = vec![vec![
        "learning_rate".to_string(),
        "max_depth".into(),
        "n_estimators".into(),
        "subsample".into(),
        "cv_mape".into(),
    ]];
    for r in table {
        rows.push(vec![
            r.params.learning_rate.to_string(),
            r.params.max_depth.to_string(),
            r.params.n_estimators.to_string(),
            r.params.subsample.to_string(),
            r.cv_mape.to_string(),
        ]);
    }
    write_rows(path, rows)
}

pub(crate) fn write_rows(path: &Path, rows: Vec<Vec<String>>) -> Result<(), TuneError> {
    let err = |m: String| TuneError::Write {
        path: path.display().to_string(),
        message: m,
    };
    let mut w = csv::Writer::from_path(path).map_err(|e| err(e.to_string()))?;
    for r in rows {
        w.write_record(&r).map_err(|e| err(e.to_string()))?;
    }
    w.flush().map_err(|e| err(e.to_string()))
}

/// Validation block length and fold boundaries for `n` rows: fold `j`
/// trains on `0..start_j` and validates on `start_j..start_j + block`.
pub fn cv_folds(n: usize, folds: usize) -> Result<Vec<(usize, usize)>, TuneError> {
    let needed = folds + 2;
    if folds == 0 || n < needed {
        return Err(TuneError::TooFewRowsForCv {
            rows: n,
            folds,
            needed,
        });
    }
    let block = 2.min((n - 2) / folds);
    Ok((0..folds)
        .map(|j| {
            let start = n - (folds - j) * block;
            (start, start + block)
        })
        .collect())
}

/// Mean validation MAPE over the expanding-window folds.
pub fn cv_score(train: &Design, params: &GbtParams, folds: usize) -> Result<f64, TuneError> {
    let bounds = cv_folds(train.len(), folds)?;
    let mut total = 0.0;
    for &(start, end) in &bounds {
        let fit_part = train.slice(0..start);
        let val = train.slice(start..end);
        let model = gbtree::fit(&fit_part.x, &fit_part.y, params)?;
        let pred = model.predict_rows(&val.x)?;
        total += mape(&val.y, &pred)?;
    }
    Ok(total / bounds.len() as f64)
}

fn combo_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (index as u64).wrapping_mul(0xD1B5_4A32_D192_ED03)
}

/// Scores every grid combination and returns the lowest CV MAPE. Ties go to
/// fewer trees, then shallower trees, then the smaller learning rate, then
/// the larger subsample. Combination `i` is trained with a seed derived from
/// `seed` and `i`.
pub fn grid_search(
    train: &Design,
    grid: &Grid,
    base: &GbtParams,
    folds: usize,
    seed: u64,
) -> Result<GridSearchResult, TuneError> {
    cv_folds(train.len(), folds)?;
    let combos: Vec<GbtParams> = grid
        .combinations(base)?
        .into_iter()
        .enumerate()
        .map(|(i, p)| GbtParams {
            seed: combo_seed(seed, i),
            ..p
        })
        .collect();
    let table = combos
        .into_par_iter()
        .map(|params| {
            let cv_mape = cv_score(train, &params, folds)?;
            Ok(GridRow { params, cv_mape })
        })
        .collect::<Result<Vec<_>, TuneError>>()?;

    let better = |a: &GridRow, b: &GridRow| -> bool {
        if a.cv_mape != b.cv_mape {
            return a.cv_mape < b.cv_mape;
        }
        let (pa, pb) = (&a.params, &b.params);
        (pa.n_estimators, pa.max_depth)
            .cmp(&(pb.n_estimators, pb.max_depth))
            .then(pa.learning_rate.total_cmp(&pb.learning_rate))
            .then(pb.subsample.total_cmp(&pa.subsample))
            .is_lt()
    };
    let mut best = &table[0];
    for row in &table[1..] {
        if better(row, best) {
            best = row;
        }
    }
    Ok(GridSearchResult {
        best: best.params.clone(),
        best_score: best.cv_mape,
        table: table.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitRole {
    Train,
    Test,
}

impl SplitRole {
    pub fn as_str(&self) -> &'static str {
        match self {
            SplitRole::Train => "train",
            SplitRole::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearPrediction {
    pub year: i32,
    pub actual: f64,
    pub predicted: f64,
    pub split: SplitRole,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub train_mape: f64,
    pub test_mape: f64,
    pub pairs: Vec<YearPrediction>,
    pub best_params: GbtParams,
    pub grid_table: Vec<GridRow>,
}

impl EvalReport {
    /// Writes `year,actual,predicted,split`.
    pub fn write_pairs_csv(&self, path: &Path) -> Result<(), TuneError> {
        let mut rows = vec![vec![
            "year".to_string(),
            "actual".into(),
            "predicted".into(),
            "split".into(),
        ]];
        for p in &self.pairs {
            rows.push(vec![
                p.year.to_string(),
                p.actual.to_string(),
                p.predicted.to_string(),
                p.split.as_str().into(),
            ]);
        }
        write_rows(path, rows)
    }

    /// Writes `train_mape,test_mape`.
    pub fn write_mape_csv(&self, path: &Path) -> Result<(), TuneError> {
        write_rows(
            path,
            vec![
                vec!["train_mape".into(), "test_mape".into()],
                vec![self.train_mape.to_string(), self.test_mape.to_string()],
            ],
        )
    }
}

/// Fits on `train` and reports MAPE on both parts, returning the model too.
pub fn evaluate_with_model(
    train: &Design,
    test: &Design,
    params: &GbtParams,
) -> Result<(EvalReport, GbtModel), TuneError> {
    if train.is_empty() || test.is_empty() {
        return Err(TuneError::Empty);
    }
    let model = gbtree::fit(&train.x, &train.y, params)?;
    let train_pred = model.predict_rows(&train.x)?;
    let test_pred = model.predict_rows(&test.x)?;
    let train_mape = mape(&train.y, &train_pred)?;
    let test_mape = mape(&test.y, &test_pred)?;
    let pairs = [(train, &train_pred, SplitRole::Train), (test, &test_pred, SplitRole::Test)]
        .into_iter()
        .flat_map(|(d, pred, split)| {
            d.years
                .iter()
                .zip(&d.y)
                .zip(pred.iter())
                .map(move |((&year, &actual), &predicted)| YearPrediction {
                    year,
                    actual,
                    predicted,
                    split,
                })
        })
        .collect();
    Ok((
        EvalReport {
            train_mape,
            test_mape,
            pairs,
            best_params: params.clone(),
            grid_table: vec![],
        },
        model,
    ))
}

pub fn evaluate(train: &Design, test: &Design, params: &GbtParams) -> Result<EvalReport, TuneError> {
    evaluate_with_model(train, test, params).map(|(r, _)| r)
}
