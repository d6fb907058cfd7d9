//! Small dense least-squares helper shared by the ARIMA estimators.

use nalgebra::{DMatrix, DVector};

/// Solves `min ||A x - b||²` for a row-major `A`. Returns `None` when the
/// system is empty or the solution is not finite.
pub fn least_squares(rows: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = rows.len();
    let k = rows.first()?.len();
    if n == 0 || k == 0 || b.len() != n {
        return None;
    }
    let a = DMatrix::from_fn(n, k, |i, j| rows[i][j]);
    let rhs = DVector::from_column_slice(b);
    let svd = a.svd(true, true);
    let x = svd.solve(&rhs, 1e-12).ok()?;
    let out: Vec<f64> = x.iter().copied().collect();
    out.iter().all(|v| v.is_finite()).then_some(out)
}
