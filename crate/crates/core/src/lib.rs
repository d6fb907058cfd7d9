//! Panel-data forecasting toolkit.
//!
//! The crate covers one country's pipeline end to end: load an indicator
//! panel, prune sparse indicators, impute the rest with iterative random
//! forests, rank indicators against the target with Edit Distance on Real
//! sequences, simulate the surviving indicators forward with ARIMA, tune and
//! evaluate a gradient-boosted tree ensemble, and forecast the target over a
//! horizon of future years.
//!
//! Each stage lives in its own module and can be used on its own; the
//! [`pipeline`] module wires them together in order.

pub mod arima;
pub mod gbtree;
pub mod impute;
pub mod ingest;
pub mod linalg;
pub mod pipeline;
pub mod select;
pub mod synthetic;
pub mod tune;

pub use arima::{ArimaModel, ArimaOrder, SimulationSet};
pub use gbtree::{GbtModel, GbtParams};
pub use impute::{ImputationReport, RandomForestModel, RfConfig};
pub use ingest::{IndicatorKey, MissingnessAudit, PanelDataset, YearRange};
pub use pipeline::{ForecastResult, RunConfig};
pub use select::{EdrParams, FeatureRanking, NormalizedSeries};
pub use tune::{EvalReport, Grid, SplitSpec};
