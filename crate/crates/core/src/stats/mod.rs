//! Numerical machinery for the quality model and the evaluation protocol.

mod correlation;
mod dcor;
mod linreg;
mod logistic;
mod pca;
mod ttest;

pub use nalgebra::{DMatrix, DVector};

pub use correlation::{average_ranks, mean, median, plcc, rmse, sample_std, srocc};
pub use dcor::distance_correlation;
pub use linreg::{linreg_fit, LinearModel};
pub use logistic::{fit_logistic, MonotonicMap, MonotonicMapKind};
pub use pca::{pca_fit, pca_transform, PcaModel};
pub use ttest::{welch_t_test, Tail, WelchTest};

/// Builds a row-per-sample matrix from equal-length rows.
///
/// # Panics
///
/// If the rows have different lengths.
pub fn rows_to_matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let d = rows.first().map_or(0, Vec::len);
    assert!(rows.iter().all(|r| r.len() == d), "rows must share one length");
    DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j])
}
