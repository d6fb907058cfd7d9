//! Loading, validating and pruning country indicator panels.
//!
//! A [`PanelDataset`] holds one country's year-indexed indicator matrix and
//! an optional target series. Missing cells are `None`; no sentinel values
//! are ever stored.

mod api;
mod csv_io;

use std::collections::{BTreeMap, HashSet};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

pub use api::{fetch_indicators, ApiClient};
pub use csv_io::{load_panel_csv, load_target_csv, write_panel_csv, write_target_csv};

/// Default missingness threshold: indicators missing in more than this
/// fraction of years are dropped.
pub const DEFAULT_SPARSE_THRESHOLD: f64 = 0.70;

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("country {0} not present in input")]
    CountryNotFound(String),
    #[error("non-numeric value {value:?} at line {line}, column {column}")]
    NonNumeric {
        line: u64,
        column: String,
        value: String,
    },
    #[error("duplicate indicator code {0}")]
    DuplicateIndicator(String),
    #[error("empty indicator code")]
    EmptyIndicatorCode,
    #[error("invalid years: {0}")]
    InvalidYears(String),
    #[error("column {code} has {got} values, expected {expected}")]
    LengthMismatch {
        code: String,
        got: usize,
        expected: usize,
    },
    #[error("target year {0} is outside the dataset years")]
    TargetYearOutOfRange(i32),
    #[error("threshold must lie strictly between 0 and 1, got {0}")]
    InvalidThreshold(f64),
    #[error("request to {url} failed: {message}")]
    Transport { url: String, message: String },
    #[error("request to {url} returned status {status}")]
    HttpStatus { url: String, status: u16 },
    #[error("unknown indicator {0}")]
    UnknownIndicator(String),
    #[error("indicator {code}: received {got} of {expected} records")]
    PaginationTruncated {
        code: String,
        expected: usize,
        got: usize,
    },
    #[error("unexpected API response: {0}")]
    BadResponse(String),
}

pub type Result<T, E = IngestError> = std::result::Result<T, E>;

/// Inclusive range of calendar years.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct YearRange {
    pub start: i32,
    pub end: i32,
}

impl YearRange {
    pub fn new(start: i32, end: i32) -> Result<Self> {
        if start > end {
            return Err(IngestError::InvalidYears(format!("{start} > {end}")));
        }
        Ok(Self { start, end })
    }

    pub fn contains(&self, year: i32) -> bool {
        (self.start..=self.end).contains(&year)
    }

    pub fn years(&self) -> Vec<i32> {
        (self.start..=self.end).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IndicatorKey {
    pub code: String,
    pub name: String,
}

impl IndicatorKey {
    pub fn new(code: impl Into<String>, name: impl Into<String>) -> Self {
        Self {
            code: code.into(),
            name: name.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub key: IndicatorKey,
    pub values: Vec<Option<f64>>,
}

impl Column {
    pub fn new(key: IndicatorKey, values: Vec<Option<f64>>) -> Self {
        Self { key, values }
    }

    pub fn missing_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }

    pub fn observed_count(&self) -> usize {
        self.values.len() - self.missing_count()
    }

    pub fn missing_fraction(&self) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        self.missing_count() as f64 / self.values.len() as f64
    }
}

/// One country's indicator panel.
///
/// Invariants enforced at construction: years strictly increasing and
/// nonempty, every column (and the target) has one cell per year, indicator
/// codes are nonempty and unique.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelDataset {
    country: String,
    years: Vec<i32>,
    columns: Vec<Column>,
    target: Option<Vec<Option<f64>>>,
}

impl PanelDataset {
    pub fn new(country: impl Into<String>, years: Vec<i32>, columns: Vec<Column>) -> Result<Self> {
        if years.is_empty() {
            return Err(IngestError::InvalidYears("no years".into()));
        }
        if years.windows(2).any(|w| w[0] >= w[1]) {
            return Err(IngestError::InvalidYears(
                "years must be strictly increasing".into(),
            ));
        }
        let mut seen = HashSet::new();
        for col in &columns {
            if col.key.code.is_empty() {
                return Err(IngestError::EmptyIndicatorCode);
            }
            if !seen.insert(col.key.code.as_str()) {
                return Err(IngestError::DuplicateIndicator(col.key.code.clone()));
            }
            if col.values.len() != years.len() {
                return Err(IngestError::LengthMismatch {
                    code: col.key.code.clone(),
                    got: col.values.len(),
                    expected: years.len(),
                });
            }
        }
        Ok(Self {
            country: country.into(),
            years,
            columns,
            target: None,
        })
    }

    pub fn country(&self) -> &str {
        &self.country
    }

    pub fn years(&self) -> &[i32] {
        &self.years
    }

    pub fn n_years(&self) -> usize {
        self.years.len()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, code: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.key.code == code)
    }

    pub fn keys(&self) -> Vec<IndicatorKey> {
        self.columns.iter().map(|c| c.key.clone()).collect()
    }

    pub fn target(&self) -> Option<&[Option<f64>]> {
        self.target.as_deref()
    }

    pub fn year_index(&self, year: i32) -> Option<usize> {
        self.years.binary_search(&year).ok()
    }

    /// Replaces the target vector; it must have one cell per year.
    pub fn with_target(mut self, target: Option<Vec<Option<f64>>>) -> Result<Self> {
        if let Some(t) = &target {
            if t.len() != self.years.len() {
                return Err(IngestError::LengthMismatch {
                    code: "<target>".into(),
                    got: t.len(),
                    expected: self.years.len(),
                });
            }
        }
        self.target = target;
        Ok(self)
    }

    /// Replaces the indicator columns, keeping years and target.
    pub fn with_columns(self, columns: Vec<Column>) -> Result<Self> {
        let target = self.target.clone();
        PanelDataset::new(self.country, self.years, columns)?.with_target(target)
    }

    /// Keeps only the named indicators, in the given order.
    pub fn select(&self, codes: &[String]) -> Result<Self> {
        let columns = codes
            .iter()
            .map(|code| {
                self.column(code)
                    .cloned()
                    .ok_or_else(|| IngestError::UnknownIndicator(code.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        self.clone().with_columns(columns)
    }

    /// Restricts the dataset to the given positions (must stay increasing).
    pub fn take_rows(&self, rows: &[usize]) -> Result<Self> {
        let years = rows.iter().map(|&i| self.years[i]).collect();
        let columns = self
            .columns
            .iter()
            .map(|c| Column::new(c.key.clone(), rows.iter().map(|&i| c.values[i]).collect()))
            .collect();
        let target = self
            .target
            .as_ref()
            .map(|t| rows.iter().map(|&i| t[i]).collect());
        PanelDataset::new(self.country.clone(), years, columns)?.with_target(target)
    }

    /// Number of missing indicator cells (the target is not counted).
    pub fn missing_cells(&self) -> usize {
        self.columns.iter().map(Column::missing_count).sum()
    }

    pub fn observed_counts(&self) -> BTreeMap<String, usize> {
        self.columns
            .iter()
            .map(|c| (c.key.code.clone(), c.observed_count()))
            .collect()
    }
}

/// Per-indicator missing fractions and the retained/dropped partition
/// produced by [`drop_sparse`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissingnessAudit {
    pub threshold: f64,
    pub fractions: Vec<(IndicatorKey, f64)>,
    pub retained: Vec<IndicatorKey>,
    pub dropped: Vec<(IndicatorKey, f64)>,
}

/// Removes indicators whose missing fraction is strictly greater than
/// `threshold`. The target is never touched.
pub fn drop_sparse(ds: &PanelDataset, threshold: f64) -> Result<(PanelDataset, MissingnessAudit)> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(IngestError::InvalidThreshold(threshold));
    }
    let mut kept = Vec::new();
    let mut audit = MissingnessAudit {
        threshold,
        fractions: Vec::with_capacity(ds.columns.len()),
        retained: Vec::new(),
        dropped: Vec::new(),
    };
    for col in &ds.columns {
        let frac = col.missing_fraction();
        audit.fractions.push((col.key.clone(), frac));
        if frac > threshold {
            audit.dropped.push((col.key.clone(), frac));
        } else {
            audit.retained.push(col.key.clone());
            kept.push(col.clone());
        }
    }
    Ok((ds.clone().with_columns(kept)?, audit))
}

/// Aligns an externally supplied target series to the dataset years. Years
/// without a supplied value become missing.
pub fn attach_target(ds: &PanelDataset, target: &BTreeMap<i32, f64>) -> Result<PanelDataset> {
    let mut aligned = vec![None; ds.years.len()];
    for (&year, &value) in target {
        let idx = ds
            .year_index(year)
            .ok_or(IngestError::TargetYearOutOfRange(year))?;
        aligned[idx] = Some(value);
    }
    ds.clone().with_target(Some(aligned))
}
