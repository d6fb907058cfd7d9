//! Deterministic inputs for the kernel benchmarks.

use panelcast::ingest::PanelDataset;
use panelcast::synthetic::{self, CountrySpec};

/// Two z-score-like sequences of length `len` that partly match.
pub fn edr_pair(len: usize) -> (Vec<f64>, Vec<f64>) {
    let a = (0..len).map(|i| (i as f64 * 0.37).sin()).collect();
    let b = (0..len).map(|i| (i as f64 * 0.37 + 0.4).sin() * 1.1).collect();
    (a, b)
}

/// Boosting inputs: `rows` × `cols` features with about 10% missing cells
/// and a target that depends on the first two columns.
pub fn boosting_design(rows: usize, cols: usize) -> (Vec<Vec<Option<f64>>>, Vec<f64>) {
    let bench = synthetic::linear_mcar(7, rows, cols.max(2), 2, 0.1);
    let full = bench.complete.columns();
    let y = (0..rows)
        .map(|i| {
            let a = full[0].values[i].expect("complete");
            let b = full[1].values[i].expect("complete");
            2.0 * a - b
        })
        .collect();
    let x = (0..rows)
        .map(|i| bench.masked.columns()[..cols].iter().map(|c| c.values[i]).collect())
        .collect();
    (x, y)
}

/// AR(1)-like series from a fixed deterministic driver, around level 50.
pub fn ar_series(n: usize) -> Vec<f64> {
    let mut state = 0.3f64;
    let mut x = 0.0;
    (0..n)
        .map(|_| {
            state = 3.9 * state * (1.0 - state);
            x = 0.6 * x + (state - 0.5);
            50.0 + x
        })
        .collect()
}

/// The synthetic 14-year, 30-indicator country panel with holes.
pub fn country_panel(seed: u64) -> PanelDataset {
    synthetic::country(seed, CountrySpec::default()).panel
}
