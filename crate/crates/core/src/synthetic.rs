//! Seeded synthetic fixtures: a country-like panel whose target depends on
//! a latent factor shared by some indicators, and a linear-model panel with
//! cells removed completely at random for imputation benchmarks.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::ingest::{self, Column, IndicatorKey, IngestError, PanelDataset};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CountrySpec {
    pub first_year: i32,
    pub n_years: usize,
    pub n_informative: usize,
    pub n_noise: usize,
    pub missing_rate: f64,
    /// Relative noise on the target (0.01 = 1%).
    pub target_noise: f64,
}

impl Default for CountrySpec {
    fn default() -> Self {
        Self {
            first_year: 2010,
            n_years: 14,
            n_informative: 10,
            n_noise: 20,
            missing_rate: 0.2,
            target_noise: 0.01,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCountry {
    /// Indicator panel with missing cells, no target attached.
    pub panel: PanelDataset,
    /// The same panel before cells were removed.
    pub complete: PanelDataset,
    pub target: BTreeMap<i32, f64>,
    pub latent: Vec<f64>,
    /// Codes of the indicators driven by the latent factor.
    pub informative: Vec<String>,
}

impl SyntheticCountry {
    /// Writes `panel.csv` and `target.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(std::path::PathBuf, std::path::PathBuf), IngestError> {
        let panel = dir.join("panel.csv");
        let target = dir.join("target.csv");
        ingest::write_panel_csv(&self.panel, &panel)?;
        let with_target = ingest::attach_target(&self.panel, &self.target)?;
        ingest::write_target_csv(&with_target, &target)?;
        Ok((panel, target))
    }
}

pub const SYNTHETIC_COUNTRY: &str = "SYN";

/// Builds the country fixture. Informative indicators are linear, logistic
/// or AR(1)-smoothed transforms of a rising latent factor; noise indicators
/// are i.i.d. or random walks around positive levels. The target is a
/// concave increasing map of the latent factor into roughly 55..75 with
/// multiplicative noise.
pub fn country(seed: u64, spec: CountrySpec) -> SyntheticCountry {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std_normal = Normal::new(0.0, 1.0).expect("valid normal");
    let n = spec.n_years;
    let years: Vec<i32> = (0..n as i32).map(|t| spec.first_year + t).collect();
    let span = (n.max(2) - 1) as f64;
    let latent: Vec<f64> = (0..n)
        .map(|t| (t as f64 + 0.3 * std_normal.sample(&mut rng)) / span)
        .collect();

    let curve = |f: f64| (1.0 - (-1.5 * f).exp()) / (1.0 - (-1.5f64).exp());
    let target: BTreeMap<i32, f64> = years
        .iter()
        .zip(&latent)
        .map(|(&y, &f)| {
            let clean = 55.0 + 20.0 * curve(f);
            (y, clean * (1.0 + spec.target_noise * std_normal.sample(&mut rng)))
        })
        .collect();

    let mut series: Vec<(Vec<f64>, bool)> = Vec::new();
    for i in 0..spec.n_informative {
        let level = rng.gen_range(20.0..80.0);
        let slope = rng.gen_range(5.0..30.0) * if rng.gen_bool(0.3) { -1.0 } else { 1.0 };
        let base: Vec<f64> = match i % 3 {
            0 => latent.iter().map(|f| level + slope * f).collect(),
            1 => {
                let k = rng.gen_range(4.0..8.0);
                let mid = rng.gen_range(0.3..0.7);
                latent
                    .iter()
                    .map(|f| level + slope / (1.0 + (-k * (f - mid)).exp()))
                    .collect()
            }
            _ => {
                let rho = rng.gen_range(0.3..0.7);
                let mut x = level + slope * latent[0];
                latent
                    .iter()
                    .map(|f| {
                        x = rho * x + (1.0 - rho) * (level + slope * f);
                        x
                    })
                    .collect()
            }
        };
        let v = base
            .into_iter()
            .map(|x| x * (1.0 + 0.01 * std_normal.sample(&mut rng)))
            .collect();
        series.push((v, true));
    }
    for i in 0..spec.n_noise {
        let level = rng.gen_range(10.0..100.0);
        let sd = level * rng.gen_range(0.02..0.2);
        let v: Vec<f64> = if i % 2 == 0 {
            (0..n).map(|_| level + sd * std_normal.sample(&mut rng)).collect()
        } else {
            let mut x = level;
            (0..n)
                .map(|_| {
                    x += 0.5 * sd * std_normal.sample(&mut rng);
                    x
                })
                .collect()
        };
        series.push((v, false));
    }
    series.shuffle(&mut rng);

    let mut complete_cols = Vec::new();
    let mut masked_cols = Vec::new();
    let mut informative = Vec::new();
    for (j, (values, is_informative)) in series.into_iter().enumerate() {
        let code = format!("IND.{:02}", j + 1);
        let key = IndicatorKey::new(code.clone(), format!("Synthetic indicator {}", j + 1));
        if is_informative {
            informative.push(code);
        }
        let masked = loop {
            let m: Vec<Option<f64>> = values
                .iter()
                .map(|&v| (!rng.gen_bool(spec.missing_rate)).then_some(v))
                .collect();
            if m.iter().any(Option::is_some) {
                break m;
            }
        };
        complete_cols.push(Column::new(key.clone(), values.into_iter().map(Some).collect()));
        masked_cols.push(Column::new(key, masked));
    }
    let complete = PanelDataset::new(SYNTHETIC_COUNTRY, years.clone(), complete_cols)
        .expect("fixture columns match years");
    let panel = PanelDataset::new(SYNTHETIC_COUNTRY, years, masked_cols).expect("fixture columns match years");
    SyntheticCountry {
        panel,
        complete,
        target,
        latent,
        informative,
    }
}

#[derive(Debug, Clone)]
pub struct LinearMcar {
    pub complete: PanelDataset,
    pub masked: PanelDataset,
}

/// `rows` × `cols` panel where every column is a linear combination of
/// `factors` shared Gaussian factors plus small noise, with each cell
/// removed independently with probability `missing_rate`.
pub fn linear_mcar(seed: u64, rows: usize, cols: usize, factors: usize, missing_rate: f64) -> LinearMcar {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std_normal = Normal::new(0.0, 1.0).expect("valid normal");
    let z: Vec<Vec<f64>> = (0..rows)
        .map(|_| (0..factors).map(|_| std_normal.sample(&mut rng)).collect())
        .collect();
    let years: Vec<i32> = (0..rows as i32).map(|t| 1900 + t).collect();
    let mut complete = Vec::new();
    let mut masked = Vec::new();
    for j in 0..cols {
        let w: Vec<f64> = (0..factors).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let offset = rng.gen_range(5.0..15.0);
        let values: Vec<f64> = z
            .iter()
            .map(|zr| offset + zr.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + 0.1 * std_normal.sample(&mut rng))
            .collect();
        let m = loop {
            let m: Vec<Option<f64>> = values
                .iter()
                .map(|&v| (!rng.gen_bool(missing_rate)).then_some(v))
                .collect();
            if m.iter().any(Option::is_some) {
                break m;
            }
        };
        let key = IndicatorKey::new(format!("X{j}"), format!("column {j}"));
        complete.push(Column::new(key.clone(), values.into_iter().map(Some).collect()));
        masked.push(Column::new(key, m));
    }
    LinearMcar {
        complete: PanelDataset::new("LIN", years.clone(), complete).expect("consistent"),
        masked: PanelDataset::new("LIN", years, masked).expect("consistent"),
    }
}
