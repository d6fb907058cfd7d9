use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::arima::SimulationConfig;
use crate::gbtree::GbtParams;
use crate::impute::RfConfig;
use crate::ingest::YearRange;
use crate::select::DEFAULT_EPSILON;
use crate::tune::{Grid, SplitSpec};

use super::PipelineError;

/// Where the indicator panel and the target come from. Exactly one of
/// `panel_csv` and `api_base_url` must be set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    pub panel_csv: Option<PathBuf>,
    pub api_base_url: Option<String>,
    /// Indicator codes to request in API mode.
    pub indicators: Vec<String>,
    pub api_per_page: usize,
    /// `year,value` file with the target index.
    pub target_csv: Option<PathBuf>,
}

impl Default for InputConfig {
    fn default() -> Self {
        Self {
            panel_csv: None,
            api_base_url: None,
            indicators: vec![],
            api_per_page: 1000,
            target_csv: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EdrConfig {
    pub epsilon: f64,
    pub k: usize,
    /// Ranking depth before the ARIMA filter in two-stage mode.
    pub prescreen_k: usize,
}

impl Default for EdrConfig {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            k: 8,
            prescreen_k: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub country: String,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Worker threads for intra-stage parallelism; 0 uses the ambient pool.
    pub threads: usize,
    /// Fixed provenance timestamp (RFC 3339). When absent,
    /// `SOURCE_DATE_EPOCH` and then the wall clock are used.
    pub timestamp: Option<String>,
    pub two_stage_selection: bool,
    pub input: InputConfig,
    pub window: YearRange,
    pub missingness_threshold: f64,
    pub edr: EdrConfig,
    pub arima: SimulationConfig,
    pub grid: Grid,
    pub split: SplitSpec,
    pub cv_folds: usize,
    pub horizon: Vec<i32>,
    pub rf: RfConfig,
    /// Untuned boosting parameters (regularisation, min_child_weight).
    pub gbt: GbtParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            country: String::new(),
            seed: 0,
            output_dir: PathBuf::from("out"),
            threads: 0,
            timestamp: None,
            two_stage_selection: false,
            input: InputConfig::default(),
            window: YearRange { start: 2010, end: 2023 },
            missingness_threshold: 0.70,
            edr: EdrConfig::default(),
            arima: SimulationConfig::default(),
            grid: Grid::default(),
            split: SplitSpec::default(),
            cv_folds: 3,
            horizon: vec![2024, 2025, 2026, 2027],
            rf: RfConfig::default(),
            gbt: GbtParams::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::config(e.to_string()))
    }

    /// Reads a TOML config. Relative input and output paths are resolved
    /// against the config file's directory.
    pub fn from_file(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = self.input.panel_csv.as_mut() {
            fix(p);
        }
        if let Some(p) = self.input.target_csv.as_mut() {
            fix(p);
        }
        fix(&mut self.output_dir);
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::config(m));
        if self.country.trim().is_empty() {
            return bad("country is empty".into());
        }
        match (&self.input.panel_csv, &self.input.api_base_url) {
            (Some(_), Some(_)) => return bad("set only one of input.panel_csv and input.api_base_url".into()),
            (None, None) => return bad("one of input.panel_csv or input.api_base_url is required".into()),
            (None, Some(_)) if self.input.indicators.is_empty() => {
                return bad("input.indicators is required in API mode".into())
            }
            _ => {}
        }
        if self.input.target_csv.is_none() {
            return bad("input.target_csv is required".into());
        }
        if self.window.start > self.window.end {
            return bad(format!("window start {} > end {}", self.window.start, self.window.end));
        }
        if !(self.missingness_threshold > 0.0 && self.missingness_threshold < 1.0) {
            return bad(format!("missingness_threshold {} not in (0, 1)", self.missingness_threshold));
        }
        if !(self.edr.epsilon.is_finite() && self.edr.epsilon >= 0.0) {
            return bad(format!("edr.epsilon {} must be >= 0", self.edr.epsilon));
        }
        if self.edr.k == 0 {
            return bad("edr.k must be >= 1".into());
        }
        if self.two_stage_selection && self.edr.prescreen_k < self.edr.k {
            return bad("edr.prescreen_k must be >= edr.k".into());
        }
        if self.arima.min_len == 0 || !(0.0..=100.0).contains(&self.arima.min_accuracy) {
            return bad("arima.min_len must be >= 1 and arima.min_accuracy in [0, 100]".into());
        }
        if self.cv_folds == 0 {
            return bad("cv_folds must be >= 1".into());
        }
        let mut last = self.window.end;
        for &y in &self.horizon {
            if y <= last {
                return bad(format!("horizon years must be increasing and after {}", self.window.end));
            }
            last = y;
        }
        self.rf
            .validate()
            .map_err(|e| PipelineError::config(format!("rf: {e}")))?;
        self.gbt
            .validate()
            .map_err(|e| PipelineError::config(format!("gbt: {e}")))?;
        Ok(())
    }

    /// Config as JSON without the fields that cannot change results
    /// (`output_dir`, `threads`, `timestamp`).
    pub fn canonical_json(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("config serialises");
        if let Some(obj) = v.as_object_mut() {
            for k in ["output_dir", "threads", "timestamp"] {
                obj.remove(k);
            }
        }
        v
    }

    /// SHA-256 of the canonical JSON.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let text = serde_json::to_string(&self.canonical_json()).expect("json");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}
