//! ARIMA fitting, order selection and forward simulation of indicators.
//!
//! Models are estimated by conditional sum of squares on the differenced
//! series: Hannan–Rissanen regressions give starting values and a
//! Nelder–Mead simplex refines them. Fits whose AR part is not stationary
//! are rejected rather than projected, and MA parts are kept invertible.
//!
//! Order selection ranks candidate fits by AICc built from the exact
//! Gaussian likelihood at the CSS estimates. The conditional sum of squares
//! flatters MA terms on short series, so ranking by it picks spurious
//! higher orders on white noise.

mod exact;
mod fit;

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ingest::{IndicatorKey, PanelDataset};
use crate::select::FeatureRanking;
use crate::tune::mape;

pub use fit::{is_invertible, is_stationary};
use fit::{css, css_residuals, hannan_rissanen, nelder_mead, Layout};

pub const MAX_ORDER: usize = 2;
pub const DEFAULT_MIN_LEN: usize = 10;
pub const DEFAULT_MIN_ACCURACY: f64 = 80.0;

#[derive(Debug, thiserror::Error)]
pub enum ArimaError {
    #[error("series of length {len} is too short for order {order}")]
    TooShort { len: usize, order: ArimaOrder },
    #[error("order {0} exceeds the search bound of {MAX_ORDER}")]
    OrderTooLarge(ArimaOrder),
    #[error("series contains non-finite values")]
    NonFinite,
    #[error("optimizer produced non-finite parameters for {0}")]
    OptimizerFailed(ArimaOrder),
    #[error("AR estimate for {0} is not stationary")]
    Nonstationary(ArimaOrder),
    #[error("no ARIMA order could be fitted")]
    NoOrderFits,
    #[error("indicator {0} has missing values")]
    Incomplete(String),
    #[error("indicator {0} is not in the dataset")]
    UnknownIndicator(String),
    #[error("ranking selects no indicators")]
    EmptyRanking,
    #[error("horizon year {year} is not after the last observed year {last}")]
    HorizonInPast { year: i32, last: i32 },
    #[error("every selected indicator was excluded ({0})")]
    AllExcluded(String),
    #[error("cannot write {path}: {message}")]
    Write { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ArimaOrder {
    pub p: usize,
    pub d: usize,
    pub q: usize,
}

impl ArimaOrder {
    pub fn new(p: usize, d: usize, q: usize) -> Self {
        Self { p, d, q }
    }

    /// Minimum series length this order can be fitted to.
    pub fn min_len(&self) -> usize {
        self.p + self.q + self.d + 3
    }

    /// Every order with p, d, q in 0..=2, ordered by d, then p, then q.
    pub fn grid() -> Vec<ArimaOrder> {
        let mut v = Vec::new();
        for d in 0..=MAX_ORDER {
            for p in 0..=MAX_ORDER {
                for q in 0..=MAX_ORDER {
                    v.push(ArimaOrder { p, d, q });
                }
            }
        }
        v
    }
}

impl std::fmt::Display for ArimaOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{},{})", self.p, self.d, self.q)
    }
}

/// `d`-th order differences.
pub fn difference(series: &[f64], d: usize) -> Result<Vec<f64>, ArimaError> {
    if series.len() <= d {
        return Err(ArimaError::TooShort {
            len: series.len(),
            order: ArimaOrder::new(0, d, 0),
        });
    }
    let mut cur = series.to_vec();
    for _ in 0..d {
        cur = cur.windows(2).map(|w| w[1] - w[0]).collect();
    }
    Ok(cur)
}

/// Undoes [`difference`]: `preceding` holds (at least) the `d` level values
/// immediately before the first element of `diffs`; its last `d` entries
/// are used.
pub fn integrate(diffs: &[f64], preceding: &[f64], d: usize) -> Result<Vec<f64>, ArimaError> {
    if preceding.len() < d {
        return Err(ArimaError::TooShort {
            len: preceding.len(),
            order: ArimaOrder::new(0, d, 0),
        });
    }
    let tail = &preceding[preceding.len() - d..];
    // anchors[k] = last value of the k-th difference of the tail
    let anchors: Vec<f64> = (0..d)
        .map(|k| *difference(tail, k).expect("tail long enough").last().unwrap())
        .collect();
    let mut cur = diffs.to_vec();
    for k in (0..d).rev() {
        let mut level = anchors[k];
        for v in cur.iter_mut() {
            level += *v;
            *v = level;
        }
    }
    Ok(cur)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Estimate the constant term. With `d > 0` it acts as a drift.
    pub intercept: bool,
    pub max_evals: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            intercept: true,
            max_evals: 4000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArimaModel {
    pub order: ArimaOrder,
    pub intercept: f64,
    pub phi: Vec<f64>,
    pub theta: Vec<f64>,
    pub sigma2: f64,
    pub css: f64,
    pub aic: f64,
    /// Small-sample corrected AIC `-2 log L + 2k + 2k(k+1)/(n-k-1)` from the
    /// exact Gaussian likelihood of the differenced series, with
    /// `k = p + q + 2` (constant and variance included); infinite when
    /// `n <= k + 1`. Order selection ranks by this.
    pub aicc: f64,
    /// One-step-ahead MAPE (percent) of level predictions over the fit window.
    pub in_sample_mape: f64,
    /// Last `d` levels of the original series.
    pub last_values: Vec<f64>,
    /// Last `p` values of the differenced series.
    pub diff_tail: Vec<f64>,
    /// Last `q` in-sample residuals.
    pub resid_tail: Vec<f64>,
}

impl ArimaModel {
    /// Builds a model with given coefficients and conditions it on `series`
    /// (fills residuals, tails and fit diagnostics).
    pub fn conditioned(
        order: ArimaOrder,
        intercept: f64,
        phi: Vec<f64>,
        theta: Vec<f64>,
        series: &[f64],
    ) -> Result<Self, ArimaError> {
        if series.len() <= order.d + order.p {
            return Err(ArimaError::TooShort {
                len: series.len(),
                order,
            });
        }
        let w = difference(series, order.d)?;
        let resid = css_residuals(&w, intercept, &phi, &theta);
        let css: f64 = resid.iter().map(|e| e * e).sum();
        let n = resid.len();
        let sigma2 = css / n as f64;
        let k = (order.p + order.q + 1) as f64;
        let aic = n as f64 * sigma2.ln() + 2.0 * k;
        // coefficients, constant and innovation variance
        let kc = k + 1.0;
        let big_n = w.len() as f64;
        let spare = big_n - kc - 1.0;
        let neg2ll = exact_neg2ll(&w, intercept, &phi, &theta);
        let aicc = if spare > 0.0 && neg2ll.is_some() {
            neg2ll.unwrap() + 2.0 * kc + 2.0 * kc * (kc + 1.0) / spare
        } else {
            f64::INFINITY
        };
        // one-step level prediction error equals the differenced-scale residual
        let offset = order.d + order.p;
        let actual = &series[offset..];
        let predicted: Vec<f64> = actual.iter().zip(&resid).map(|(a, e)| a - e).collect();
        let in_sample_mape = mape(actual, &predicted).unwrap_or(f64::INFINITY);
        let tail = |v: &[f64], k: usize| v[v.len().saturating_sub(k)..].to_vec();
        let mut resid_tail = tail(&resid, order.q);
        while resid_tail.len() < order.q {
            resid_tail.insert(0, 0.0);
        }
        Ok(ArimaModel {
            order,
            intercept,
            diff_tail: tail(&w, order.p),
            resid_tail,
            last_values: tail(series, order.d),
            phi,
            theta,
            sigma2,
            css,
            aic,
            aicc,
            in_sample_mape,
        })
    }

    /// Accuracy used by the feature filter: `100 - in_sample_mape`.
    pub fn accuracy(&self) -> f64 {
        100.0 - self.in_sample_mape
    }

    /// Recursive forecast: future innovations are zero, known residuals feed
    /// the MA terms, and the result is integrated back to levels.
    pub fn forecast(&self, h: usize) -> Vec<f64> {
        let mut w = self.diff_tail.clone();
        let mut e = self.resid_tail.clone();
        let mut out = Vec::with_capacity(h);
        for _ in 0..h {
            let mut next = self.intercept;
            for (i, f) in self.phi.iter().enumerate() {
                next += f * w[w.len() - 1 - i];
            }
            for (j, th) in self.theta.iter().enumerate() {
                next += th * e[e.len() - 1 - j];
            }
            w.push(next);
            e.push(0.0);
            out.push(next);
        }
        integrate(&out, &self.last_values, self.order.d).expect("last_values has d entries")
    }
}

/// Exact Gaussian `-2 log L` (σ² profiled out) of the differenced series
/// around the process mean `c / (1 - Σφ)`.
fn exact_neg2ll(w: &[f64], c: f64, phi: &[f64], theta: &[f64]) -> Option<f64> {
    let mu = c / (1.0 - phi.iter().sum::<f64>());
    let x: Vec<f64> = w.iter().map(|v| v - mu).collect();
    exact::neg2_loglik(&x, phi, theta)
}

/// CSS of the intercept-only model `w_t = mean(w) + e_t` on the
/// `d`-differenced series.
pub fn baseline_css(series: &[f64], d: usize) -> Result<f64, ArimaError> {
    let w = difference(series, d)?;
    let mean = w.iter().sum::<f64>() / w.len() as f64;
    Ok(w.iter().map(|x| (x - mean).powi(2)).sum())
}

pub fn fit_arima(series: &[f64], order: ArimaOrder) -> Result<ArimaModel, ArimaError> {
    fit_arima_with(series, order, FitOptions::default())
}

pub fn fit_arima_with(
    series: &[f64],
    order: ArimaOrder,
    opts: FitOptions,
) -> Result<ArimaModel, ArimaError> {
    if order.p > MAX_ORDER || order.d > MAX_ORDER || order.q > MAX_ORDER {
        return Err(ArimaError::OrderTooLarge(order));
    }
    if series.len() < order.min_len() {
        return Err(ArimaError::TooShort {
            len: series.len(),
            order,
        });
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(ArimaError::NonFinite);
    }
    let w = difference(series, order.d)?;
    let layout = Layout {
        p: order.p,
        q: order.q,
        intercept: opts.intercept,
    };
    let objective = |x: &[f64]| -> f64 {
        let (c, phi, theta) = layout.split(x);
        if !is_stationary(phi) || !is_invertible(theta) {
            return f64::INFINITY;
        }
        let v = css(&w, c, phi, theta);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    let init = hannan_rissanen(&w, layout);
    if init.iter().any(|v| !v.is_finite()) {
        return Err(ArimaError::OptimizerFailed(order));
    }
    let (_, phi0, _) = layout.split(&init);
    // Pure autoregressions are solved exactly by the OLS start.
    if order.q == 0 && !is_stationary(phi0) {
        return Err(ArimaError::Nonstationary(order));
    }
    // The zero-coefficient point is feasible; never return anything worse.
    let zero = {
        let c = if opts.intercept {
            let tail = &w[order.p..];
            tail.iter().sum::<f64>() / tail.len() as f64
        } else {
            0.0
        };
        layout.join(c, &vec![0.0; order.p], &vec![0.0; order.q])
    };
    let zero_f = objective(&zero);
    let init_f = objective(&init);
    let (mut best, mut best_f) = if init_f <= zero_f {
        (init, init_f)
    } else {
        (zero, zero_f)
    };
    if order.q > 0 {
        let scale = {
            let m = w.iter().sum::<f64>() / w.len() as f64;
            (w.iter().map(|x| (x - m).powi(2)).sum::<f64>() / w.len() as f64).sqrt()
        };
        let mut x = best.clone();
        for _round in 0..3 {
            let steps: Vec<f64> = x
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    if opts.intercept && i == 0 {
                        0.1 * v.abs().max(scale).max(1e-8)
                    } else {
                        0.1 * v.abs().max(0.5)
                    }
                })
                .collect();
            let (xn, fx) = nelder_mead(&objective, &x, &steps, opts.max_evals, 1e-12);
            let improved = fx < best_f;
            if improved {
                best = xn.clone();
                best_f = fx;
            }
            x = xn;
            if !improved {
                break;
            }
        }
    }
    if !best_f.is_finite() || best.iter().any(|v| !v.is_finite()) {
        return Err(ArimaError::OptimizerFailed(order));
    }
    let (c, phi, theta) = layout.split(&best);
    if !is_stationary(phi) {
        return Err(ArimaError::Nonstationary(order));
    }
    ArimaModel::conditioned(order, c, phi.to_vec(), theta.to_vec(), series)
}

/// Outcome of fitting every admissible order.
#[derive(Debug, Clone)]
pub struct OrderSearch {
    pub attempted: Vec<(ArimaOrder, Result<f64, String>)>,
    pub best: ArimaModel,
}

/// Fits every order in [`ArimaOrder::grid`] that the series is long enough
/// for and keeps the lowest AICc (first in grid order on ties).
pub fn search_orders(series: &[f64]) -> Result<OrderSearch, ArimaError> {
    const MIN_SEARCH_LEN: usize = 8;
    if series.len() < MIN_SEARCH_LEN {
        return Err(ArimaError::TooShort {
            len: series.len(),
            order: ArimaOrder::new(0, 0, 0),
        });
    }
    let mut attempted = Vec::new();
    let mut best: Option<ArimaModel> = None;
    for order in ArimaOrder::grid() {
        if series.len() < order.min_len() {
            continue;
        }
        match fit_arima(series, order) {
            Ok(m) => {
                attempted.push((order, Ok(m.aicc)));
                if best.as_ref().map_or(true, |b| m.aicc < b.aicc) {
                    best = Some(m);
                }
            }
            Err(e) => attempted.push((order, Err(e.to_string()))),
        }
    }
    let best = best.ok_or(ArimaError::NoOrderFits)?;
    Ok(OrderSearch { attempted, best })
}

pub fn select_order(series: &[f64]) -> Result<ArimaOrder, ArimaError> {
    Ok(search_orders(series)?.best.order)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationConfig {
    pub min_len: usize,
    pub min_accuracy: f64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            min_len: DEFAULT_MIN_LEN,
            min_accuracy: DEFAULT_MIN_ACCURACY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionReason {
    TooShort,
    LowAccuracy,
    FitFailed,
}

impl ExclusionReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExclusionReason::TooShort => "too_short",
            ExclusionReason::LowAccuracy => "low_accuracy",
            ExclusionReason::FitFailed => "fit_failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub key: IndicatorKey,
    pub reason: ExclusionReason,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedFeature {
    pub key: IndicatorKey,
    pub model: ArimaModel,
    pub accuracy: f64,
    /// One value per horizon year.
    pub forecast: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSet {
    pub horizon_years: Vec<i32>,
    pub included: Vec<SimulatedFeature>,
    pub excluded: Vec<Exclusion>,
}

impl SimulationSet {
    pub fn included_codes(&self) -> Vec<String> {
        self.included.iter().map(|f| f.key.code.clone()).collect()
    }

    pub fn forecast_for(&self, code: &str, year: i32) -> Option<f64> {
        let pos = self.horizon_years.iter().position(|&y| y == year)?;
        self.included
            .iter()
            .find(|f| f.key.code == code)
            .map(|f| f.forecast[pos])
    }

    /// Writes `indicator_code,year,forecast_value` rows.
    pub fn write_forecasts_csv(&self, path: &Path) -> Result<(), ArimaError> {
        let mut rows = vec![vec![
            "indicator_code".to_string(),
            "year".into(),
            "forecast_value".into(),
        ]];
        for f in &self.included {
            for (y, v) in self.horizon_years.iter().zip(&f.forecast) {
                rows.push(vec![f.key.code.clone(), y.to_string(), v.to_string()]);
            }
        }
        write_rows(path, rows)
    }

    /// Writes `indicator_code,reason,detail` rows.
    pub fn write_exclusions_csv(&self, path: &Path) -> Result<(), ArimaError> {
        let mut rows = vec![vec!["indicator_code".to_string(), "reason".into(), "detail".into()]];
        for e in &self.excluded {
            rows.push(vec![e.key.code.clone(), e.reason.as_str().into(), e.detail.clone()]);
        }
        write_rows(path, rows)
    }
}

fn write_rows(path: &Path, rows: Vec<Vec<String>>) -> Result<(), ArimaError> {
    let err = |m: String| ArimaError::Write {
        path: path.display().to_string(),
        message: m,
    };
    let mut w = csv::Writer::from_path(path).map_err(|e| err(e.to_string()))?;
    for r in rows {
        w.write_record(&r).map_err(|e| err(e.to_string()))?;
    }
    w.flush().map_err(|e| err(e.to_string()))
}

enum Outcome {
    Included(SimulatedFeature),
    Excluded(Exclusion),
}

/// Fits an ARIMA model to each selected indicator of a complete dataset and
/// simulates it over `horizon_years`.
///
/// `observed_counts` gives the number of genuinely observed (pre-imputation)
/// years per indicator; indicators absent from the map count every year.
pub fn simulate_features(
    ds: &PanelDataset,
    observed_counts: &BTreeMap<String, usize>,
    ranking: &FeatureRanking,
    horizon_years: &[i32],
    cfg: SimulationConfig,
) -> Result<SimulationSet, ArimaError> {
    if ranking.selected.is_empty() {
        return Err(ArimaError::EmptyRanking);
    }
    let last = *ds.years().last().expect("dataset has years");
    for &year in horizon_years {
        if year <= last {
            return Err(ArimaError::HorizonInPast { year, last });
        }
    }
    let steps = horizon_years.iter().map(|&y| (y - last) as usize).max().unwrap_or(0);

    let outcomes = ranking
        .selected
        .par_iter()
        .map(|key| -> Result<Outcome, ArimaError> {
            let col = ds
                .column(&key.code)
                .ok_or_else(|| ArimaError::UnknownIndicator(key.code.clone()))?;
            let series: Vec<f64> = col
                .values
                .iter()
                .map(|v| v.ok_or_else(|| ArimaError::Incomplete(key.code.clone())))
                .collect::<Result<_, _>>()?;
            let observed = observed_counts.get(&key.code).copied().unwrap_or(series.len());
            let exclude = |reason, detail: String| {
                Ok(Outcome::Excluded(Exclusion {
                    key: key.clone(),
                    reason,
                    detail,
                }))
            };
            if observed < cfg.min_len {
                return exclude(
                    ExclusionReason::TooShort,
                    format!("{observed} observed years < {}", cfg.min_len),
                );
            }
            let model = match search_orders(&series) {
                Ok(s) => s.best,
                Err(e) => return exclude(ExclusionReason::FitFailed, e.to_string()),
            };
            let accuracy = model.accuracy();
            if !(accuracy >= cfg.min_accuracy) {
                return exclude(
                    ExclusionReason::LowAccuracy,
                    format!("ARIMA{} accuracy {accuracy:.3}% < {}%", model.order, cfg.min_accuracy),
                );
            }
            let path = model.forecast(steps);
            let forecast: Vec<f64> = horizon_years
                .iter()
                .map(|&y| path[(y - last) as usize - 1])
                .collect();
            if forecast.iter().any(|v| !v.is_finite()) {
                return exclude(ExclusionReason::FitFailed, "non-finite forecast".into());
            }
            Ok(Outcome::Included(SimulatedFeature {
                key: key.clone(),
                model,
                accuracy,
                forecast,
            }))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut set = SimulationSet {
        horizon_years: horizon_years.to_vec(),
        included: vec![],
        excluded: vec![],
    };
    for o in outcomes {
        match o {
            Outcome::Included(f) => set.included.push(f),
            Outcome::Excluded(e) => set.excluded.push(e),
        }
    }
    if set.included.is_empty() {
        let summary = set
            .excluded
            .iter()
            .map(|e| format!("{}: {}", e.key.code, e.reason.as_str()))
            .collect::<Vec<_>>()
            .join(", ");
        return Err(ArimaError::AllExcluded(summary));
    }
    Ok(set)
}
