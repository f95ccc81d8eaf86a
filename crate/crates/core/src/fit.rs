//! Small dense least-squares fits.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub coef: Vec<f64>,
    pub rms_residual: f64,
}

/// Least squares y ~ sum_j coef_j * columns_j, solved by SVD.
pub fn least_squares(columns: &[Vec<f64>], y: &[f64]) -> Option<LinearFit> {
    let n = y.len();
    let m = columns.len();
    if n < m || m == 0 || columns.iter().any(|c| c.len() != n) {
        return None;
    }
    let a = DMatrix::from_fn(n, m, |i, j| columns[j][i]);
    let b = DVector::from_column_slice(y);
    let svd = a.clone().svd(true, true);
    let x = svd.solve(&b, 1e-14).ok()?;
    let r = &a * &x - &b;
    let rms = (r.norm_squared() / n as f64).sqrt();
    Some(LinearFit { coef: x.iter().copied().collect(), rms_residual: rms })
}

/// Minimum-norm solution of an under- or over-determined system.
pub fn min_norm_solve(rows: usize, cols: usize, a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let m = DMatrix::from_row_slice(rows, cols, a);
    let v = DVector::from_column_slice(b);
    let svd = m.svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let x = svd.solve(&v, 1e-12 * smax).ok()?;
    Some(x.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_line() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 - 0.5 * v).collect();
        let f = least_squares(&[vec![1.0; 10], x], &y).unwrap();
        assert!((f.coef[0] - 3.0).abs() < 1e-12);
        assert!((f.coef[1] + 0.5).abs() < 1e-12);
        assert!(f.rms_residual < 1e-12);
    }
}
