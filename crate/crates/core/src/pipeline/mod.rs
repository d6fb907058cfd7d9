//! One country's run from raw panel to horizon forecast.
//!
//! Stages run in a fixed order and each consumes only the outputs of the
//! stages before it. [`run_until`] stops after any stage so the CLI can
//! expose them one at a time; [`run_pipeline`] runs them all.

mod config;
mod report;

use std::collections::BTreeMap;
use std::fmt;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::arima::{self, ArimaError, SimulationSet};
use crate::gbtree::{self, GbtError, GbtModel};
use crate::impute::{self, ImputationReport, ImputeError};
use crate::ingest::{self, ApiClient, IndicatorKey, IngestError, MissingnessAudit, PanelDataset};
use crate::select::{self, EdrParams, FeatureRanking, SelectError};
use crate::tune::{self, Design, EvalReport, GridSearchResult, TuneError, YearPrediction};

pub use config::{EdrConfig, InputConfig, RunConfig};
pub use report::{emit_report, read_forecast_csv, write_partial, REPORT_FILES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Config,
    Ingest,
    DropSparse,
    Impute,
    Select,
    Simulate,
    Tune,
    Evaluate,
    Forecast,
    Report,
}

impl Stage {
    pub fn as_str(&self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::Ingest => "ingest",
            Stage::DropSparse => "drop_sparse",
            Stage::Impute => "impute",
            Stage::Select => "select",
            Stage::Simulate => "simulate",
            Stage::Tune => "tune",
            Stage::Evaluate => "evaluate",
            Stage::Forecast => "forecast",
            Stage::Report => "report",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StageError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Data(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Impute(#[from] ImputeError),
    #[error(transparent)]
    Select(#[from] SelectError),
    #[error(transparent)]
    Arima(#[from] ArimaError),
    #[error(transparent)]
    Tune(#[from] TuneError),
    #[error(transparent)]
    Model(#[from] GbtError),
    #[error("cannot write {path}: {message}")]
    Write { path: String, message: String },
}

#[derive(Debug, thiserror::Error)]
#[error("{stage} stage failed: {source}")]
pub struct PipelineError {
    pub stage: Stage,
    #[source]
    pub source: StageError,
}

impl PipelineError {
    pub fn new(stage: Stage, source: impl Into<StageError>) -> Self {
        Self {
            stage,
            source: source.into(),
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(Stage::Config, StageError::Config(message.into()))
    }

    fn data(stage: Stage, message: impl Into<String>) -> Self {
        Self::new(stage, StageError::Data(message.into()))
    }

    /// 2 for bad config, input data or I/O; 3 when a modelling stage cannot
    /// produce a result from valid data.
    pub fn exit_code(&self) -> i32 {
        match self.source {
            StageError::Config(_) | StageError::Data(_) | StageError::Ingest(_) | StageError::Write { .. } => 2,
            _ => 3,
        }
    }
}

type Result<T, E = PipelineError> = std::result::Result<T, E>;

fn at<E: Into<StageError>>(stage: Stage) -> impl FnOnce(E) -> PipelineError {
    move |e| PipelineError::new(stage, e)
}

/// splitmix64 over `(seed, stream)`, so each stage draws from its own
/// stream of the run seed.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonPrediction {
    pub year: i32,
    pub spi_predicted: f64,
}

/// Everything computed up to the stage a run stopped at.
#[derive(Debug, Clone, Default)]
pub struct PartialRun {
    /// Window panel with the target attached, before pruning.
    pub raw: Option<PanelDataset>,
    pub audit: Option<MissingnessAudit>,
    /// Observed (pre-imputation) years per retained indicator.
    pub observed: Option<BTreeMap<String, usize>>,
    pub pruned: Option<PanelDataset>,
    pub imputed: Option<PanelDataset>,
    pub imputation: Option<ImputationReport>,
    pub ranking: Option<FeatureRanking>,
    pub simulation: Option<SimulationSet>,
    /// Indicators the model is trained on, in rank order.
    pub features: Option<Vec<IndicatorKey>>,
    pub train: Option<Design>,
    pub test: Option<Design>,
    pub search: Option<GridSearchResult>,
    pub eval: Option<EvalReport>,
    pub horizon: Option<Vec<HorizonPrediction>>,
    /// Refit on every in-sample year with the tuned parameters.
    pub final_model: Option<GbtModel>,
}

fn ingest_stage(cfg: &RunConfig) -> Result<PanelDataset> {
    let st = Stage::Ingest;
    let panel = match (&cfg.input.panel_csv, &cfg.input.api_base_url) {
        (Some(path), _) => ingest::load_panel_csv(path, &cfg.country, cfg.window).map_err(at(st))?,
        (None, Some(url)) => {
            let client = ApiClient::new(url.clone()).per_page(cfg.input.api_per_page);
            let keys: Vec<IndicatorKey> = cfg
                .input
                .indicators
                .iter()
                .map(|c| IndicatorKey::new(c.clone(), c.clone()))
                .collect();
            ingest::fetch_indicators(&client, &cfg.country, &keys, cfg.window).map_err(at(st))?
        }
        (None, None) => return Err(PipelineError::config("no input source configured")),
    };
    let panel = match &cfg.input.target_csv {
        Some(path) => {
            let target: BTreeMap<i32, f64> = ingest::load_target_csv(path)
                .map_err(at(st))?
                .into_iter()
                .filter(|(y, _)| cfg.window.contains(*y))
                .collect();
            ingest::attach_target(&panel, &target).map_err(at(st))?
        }
        None => panel,
    };
    let target = panel
        .target()
        .ok_or_else(|| PipelineError::data(st, "no target values supplied"))?;
    let missing: Vec<String> = panel
        .years()
        .iter()
        .zip(target)
        .filter(|(_, v)| v.is_none())
        .map(|(y, _)| y.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(PipelineError::data(
            st,
            format!("target missing for years {}", missing.join(", ")),
        ));
    }
    Ok(panel)
}

fn design(ds: &PanelDataset, features: &[IndicatorKey]) -> Result<Design> {
    let target = ds.target().expect("target checked at ingest");
    let cols: Vec<&ingest::Column> = features
        .iter()
        .map(|k| ds.column(&k.code).expect("feature comes from this dataset"))
        .collect();
    let x = (0..ds.n_years())
        .map(|i| cols.iter().map(|c| c.values[i]).collect())
        .collect();
    Ok(Design {
        years: ds.years().to_vec(),
        feature_names: features.iter().map(|k| k.code.clone()).collect(),
        x,
        y: target.iter().map(|v| v.expect("target checked at ingest")).collect(),
    })
}

/// Runs every stage up to and including `last`.
pub fn run_until(cfg: &RunConfig, last: Stage) -> Result<PartialRun> {
    cfg.validate()?;
    let mut run = PartialRun::default();
    if last <= Stage::Config {
        return Ok(run);
    }

    let raw = ingest_stage(cfg)?;
    log::info!("{}: loaded {} indicators over {} years", cfg.country, raw.columns().len(), raw.n_years());
    run.raw = Some(raw.clone());
    if last <= Stage::Ingest {
        return Ok(run);
    }

    let (pruned, audit) = ingest::drop_sparse(&raw, cfg.missingness_threshold).map_err(at(Stage::DropSparse))?;
    log::info!("{}: kept {}, dropped {} sparse indicators", cfg.country, audit.retained.len(), audit.dropped.len());
    if pruned.columns().is_empty() {
        return Err(PipelineError::data(Stage::DropSparse, "every indicator exceeds the missingness threshold"));
    }
    run.observed = Some(pruned.observed_counts());
    run.audit = Some(audit);
    run.pruned = Some(pruned.clone());
    if last <= Stage::DropSparse {
        return Ok(run);
    }

    let rf = impute::RfConfig {
        seed: derive_seed(cfg.seed, 1) ^ cfg.rf.seed,
        ..cfg.rf.clone()
    };
    let (imputed, report) = impute::impute(&pruned, &rf).map_err(at(Stage::Impute))?;
    log::info!("{}: imputation stopped after {} sweeps ({:?})", cfg.country, report.iterations_run, report.stop_reason);
    run.imputed = Some(imputed.clone());
    run.imputation = Some(report);
    if last <= Stage::Impute {
        return Ok(run);
    }

    let n = imputed.n_years();
    let n_test = cfg.split.n_test;
    if n <= n_test {
        return Err(PipelineError::new(
            Stage::Select,
            TuneError::TooFewRowsForSplit { rows: n, n_test },
        ));
    }
    let train_rows: Vec<usize> = (0..n - n_test).collect();
    let train_ds = imputed.take_rows(&train_rows).map_err(at(Stage::Select))?;
    let depth = if cfg.two_stage_selection {
        cfg.edr.prescreen_k
    } else {
        cfg.edr.k
    };
    let params = EdrParams::new(cfg.edr.epsilon).map_err(at(Stage::Select))?;
    let ranking = select::rank_features(&train_ds, params, depth).map_err(at(Stage::Select))?;
    run.ranking = Some(ranking.clone());
    if last <= Stage::Select {
        return Ok(run);
    }

    let observed = run.observed.as_ref().expect("set above");
    let sim = arima::simulate_features(&imputed, observed, &ranking, &cfg.horizon, cfg.arima)
        .map_err(at(Stage::Simulate))?;
    let included = sim.included_codes();
    let mut features: Vec<IndicatorKey> = ranking
        .selected
        .iter()
        .filter(|k| included.contains(&k.code))
        .cloned()
        .collect();
    features.truncate(cfg.edr.k);
    log::info!(
        "{}: {} features simulated, {} excluded, {} used",
        cfg.country,
        sim.included.len(),
        sim.excluded.len(),
        features.len()
    );
    run.simulation = Some(sim);
    run.features = Some(features.clone());
    if last <= Stage::Simulate {
        return Ok(run);
    }

    let all = design(&imputed, &features)?;
    let (train, test) = tune::split_train_test(&all, cfg.split).map_err(at(Stage::Tune))?;
    let search = tune::grid_search(&train, &cfg.grid, &cfg.gbt, cfg.cv_folds, derive_seed(cfg.seed, 2))
        .map_err(at(Stage::Tune))?;
    log::info!("{}: best CV MAPE {:.3}", cfg.country, search.best_score);
    run.train = Some(train.clone());
    run.test = Some(test.clone());
    run.search = Some(search.clone());
    if last <= Stage::Tune {
        return Ok(run);
    }

    let (mut eval, _) = tune::evaluate_with_model(&train, &test, &search.best).map_err(at(Stage::Evaluate))?;
    eval.grid_table = search.table.clone();
    log::info!("{}: train MAPE {:.3}, test MAPE {:.3}", cfg.country, eval.train_mape, eval.test_mape);
    run.eval = Some(eval);
    if last <= Stage::Evaluate {
        return Ok(run);
    }

    let fc = Stage::Forecast;
    let model = gbtree::fit(&all.x, &all.y, &search.best).map_err(at(fc))?;
    let sim = run.simulation.as_ref().expect("set above");
    let mut horizon = Vec::with_capacity(cfg.horizon.len());
    for &year in &cfg.horizon {
        let row: Vec<Option<f64>> = features
            .iter()
            .map(|k| sim.forecast_for(&k.code, year))
            .collect();
        let spi_predicted = model.predict(&row).map_err(at(fc))?;
        horizon.push(HorizonPrediction { year, spi_predicted });
    }
    run.horizon = Some(horizon);
    run.final_model = Some(model);
    Ok(run)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// SHA-256 of the result-relevant config.
    pub config_hash: String,
    pub seed: u64,
    pub timestamp: String,
    pub version: String,
}

/// Output of a complete run.
#[derive(Debug, Clone)]
pub struct ForecastResult {
    pub country: String,
    pub config: RunConfig,
    pub horizon: Vec<HorizonPrediction>,
    pub eval: EvalReport,
    pub ranking: FeatureRanking,
    pub features: Vec<IndicatorKey>,
    pub simulation: SimulationSet,
    pub audit: MissingnessAudit,
    pub imputation: ImputationReport,
    pub data: PanelDataset,
    pub final_model: GbtModel,
    pub provenance: Provenance,
}

impl ForecastResult {
    /// Fitted and held-out pairs for the in-sample years.
    pub fn in_sample(&self) -> &[YearPrediction] {
        &self.eval.pairs
    }
}

/// `cfg.timestamp`, else `SOURCE_DATE_EPOCH`, else the wall clock, as
/// RFC 3339 in UTC.
pub fn resolve_timestamp(cfg: &RunConfig) -> String {
    if let Some(ts) = &cfg.timestamp {
        return ts.clone();
    }
    let now = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<u64>().ok())
        .map(|secs| UNIX_EPOCH + Duration::from_secs(secs))
        .unwrap_or_else(SystemTime::now);
    humantime::format_rfc3339_seconds(now).to_string()
}

const FILLED: &str = "complete run fills every stage";

fn run_inner(cfg: &RunConfig) -> Result<ForecastResult> {
    let run = run_until(cfg, Stage::Forecast)?;
    Ok(ForecastResult {
        country: cfg.country.clone(),
        config: cfg.clone(),
        horizon: run.horizon.expect(FILLED),
        eval: run.eval.expect(FILLED),
        ranking: run.ranking.expect(FILLED),
        features: run.features.expect(FILLED),
        simulation: run.simulation.expect(FILLED),
        audit: run.audit.expect(FILLED),
        imputation: run.imputation.expect(FILLED),
        data: run.raw.expect(FILLED),
        final_model: run.final_model.expect(FILLED),
        provenance: Provenance {
            config_hash: cfg.hash(),
            seed: cfg.seed,
            timestamp: resolve_timestamp(cfg),
            version: env!("CARGO_PKG_VERSION").to_string(),
        },
    })
}

/// Runs every stage. With `cfg.threads > 0` all parallel work happens in a
/// dedicated pool of that size; results do not depend on the thread count.
pub fn run_pipeline(cfg: &RunConfig) -> Result<ForecastResult> {
    with_threads(cfg.threads, || run_inner(cfg))
}

/// Runs `f` inside a pool of `threads` workers, or the ambient pool when 0.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    if threads == 0 {
        return f();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(f),
        Err(e) => {
            log::warn!("cannot build a {threads}-thread pool ({e}); using the global pool");
            f()
        }
    }
}

#[cfg(test)]
mod tests;
