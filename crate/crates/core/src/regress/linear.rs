use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::{Error, Matrix, Result};

/// `ŷ = intercept + Σ coefficients[i] · x[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPart {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    /// Set when the centered design was rank deficient and the minimum-norm
    /// pseudo-inverse solution was used.
    pub rank_deficient: bool,
}

impl LinearPart {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept + self.coefficients.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }
}

/// Ordinary least squares with an intercept.
///
/// Columns and target are centered, the slope vector is the SVD
/// least-squares (pseudo-inverse) solution, and the intercept restores the
/// means.
pub(super) fn fit_linear(x: &Matrix, y: &[f64]) -> Result<LinearPart> {
    let (n, p) = (x.n_rows(), x.n_cols());
    let x_mean = x.column_means();
    let y_mean = y.iter().sum::<f64>() / n as f64;
    if p == 0 {
        return Ok(LinearPart { intercept: y_mean, coefficients: Vec::new(), rank_deficient: false });
    }

    let a = DMatrix::from_fn(n, p, |i, j| x.get(i, j) - x_mean[j]);
    let b = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));
    let svd = a.svd(true, true);
    let s_max = svd.singular_values.max();
    let tol = s_max * f64::EPSILON * n.max(p) as f64;
    let rank = svd.singular_values.iter().filter(|s| **s > tol).count();
    let beta = svd
        .solve(&b, tol)
        .map_err(|e| Error::Domain(alloc::format!("least-squares solve failed: {e}")))?;

    let coefficients: Vec<f64> = beta.iter().copied().collect();
    let intercept = y_mean - coefficients.iter().zip(&x_mean).map(|(c, m)| c * m).sum::<f64>();
    Ok(LinearPart { intercept, coefficients, rank_deficient: rank < p })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_plane() {
        // y = 2·x1 + 3·x2 + 1 on four non-collinear points
        let x = Matrix::from_rows(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [2.0, 3.0]]).unwrap();
        let y = [1.0, 3.0, 4.0, 14.0];
        let l = fit_linear(&x, &y).unwrap();
        assert!((l.coefficients[0] - 2.0).abs() <= 1e-9);
        assert!((l.coefficients[1] - 3.0).abs() <= 1e-9);
        assert!((l.intercept - 1.0).abs() <= 1e-9);
        assert!(!l.rank_deficient);
        assert_eq!(LinearPart { intercept: 1.0, coefficients: alloc::vec![2.0, 3.0], rank_deficient: false }.predict(&[0.0, 0.0]), 1.0);
    }

    #[test]
    fn collinear_design_is_flagged() {
        // second column duplicates the first
        let x = Matrix::from_rows(&[[1.0, 1.0], [2.0, 2.0], [3.0, 3.0], [4.0, 4.0]]).unwrap();
        let y = [2.0, 4.0, 6.0, 8.0];
        let l = fit_linear(&x, &y).unwrap();
        assert!(l.rank_deficient);
        // minimum-norm split of the slope 2 across both columns
        assert!((l.coefficients[0] - 1.0).abs() <= 1e-9);
        assert!((l.coefficients[1] - 1.0).abs() <= 1e-9);
        for (r, t) in x.rows().zip(&y) {
            assert!((l.predict(r) - t).abs() <= 1e-9);
        }
    }

    #[test]
    fn more_features_than_rows_still_interpolates() {
        let x = Matrix::from_rows(&[[1.0, 0.0, 2.0], [0.0, 1.0, 1.0]]).unwrap();
        let y = [3.0, 5.0];
        let l = fit_linear(&x, &y).unwrap();
        assert!(l.rank_deficient);
        for (r, t) in x.rows().zip(&y) {
            assert!((l.predict(r) - t).abs() <= 1e-9);
        }
    }
}
