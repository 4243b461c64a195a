use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl LinearModel {
    /// # Panics
    ///
    /// If `z` does not have one entry per weight.
    pub fn predict(&self, z: &[f64]) -> f64 {
        assert_eq!(z.len(), self.weights.len(), "regressor dimension mismatch");
        self.intercept + self.weights.iter().zip(z).map(|(w, v)| w * v).sum::<f64>()
    }
}

/// Least-squares fit of `y ≈ Z·w + b`.
///
/// The intercept is unpenalized: columns and targets are centered and the
/// weights are the minimum-norm solution of the centered system, computed
/// through the SVD pseudo-inverse. When the columns of `Z` are already
/// centered (as PCA projections are) this equals the minimum-norm solution
/// of the augmented system `[Z 1]`.
pub fn linreg_fit(z: &DMatrix<f64>, y: &[f64]) -> Result<LinearModel> {
    let (n, p) = z.shape();
    if n == 0 {
        return Err(Error::InsufficientData("regression needs at least one sample".into()));
    }
    if y.len() != n {
        return Err(Error::ShapeMismatch(format!("{n} regressor rows but {} targets", y.len())));
    }
    if z.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Numerical("regression input contains non-finite values".into()));
    }
    let y_mean = y.iter().sum::<f64>() / n as f64;
    if p == 0 {
        return Ok(LinearModel {
            weights: Vec::new(),
            intercept: y_mean,
        });
    }
    let col_means: Vec<f64> = z.column_iter().map(|c| c.mean()).collect();
    let mut centered = z.clone();
    for mut row in centered.row_iter_mut() {
        for (v, m) in row.iter_mut().zip(&col_means) {
            *v -= m;
        }
    }
    let targets = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));

    let svd = centered.svd(true, true);
    let largest = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let weights: Vec<f64> = if largest == 0.0 {
        vec![0.0; p]
    } else {
        let tol = n.max(p) as f64 * f64::EPSILON * largest;
        svd.solve(&targets, tol)
            .map_err(|e| Error::Numerical(format!("least squares solve failed: {e}")))?
            .iter()
            .copied()
            .collect()
    };
    let intercept = y_mean - weights.iter().zip(&col_means).map(|(w, m)| w * m).sum::<f64>();
    Ok(LinearModel { weights, intercept })
}
