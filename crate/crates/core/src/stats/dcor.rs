use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Double-centered pairwise Euclidean distance matrix of the rows of `x`.
fn centered_distances(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let dist = (x.row(i) - x.row(j)).norm();
            d[(i, j)] = dist;
            d[(j, i)] = dist;
        }
    }
    let row_means: Vec<f64> = (0..n).map(|i| d.row(i).mean()).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    DMatrix::from_fn(n, n, |i, j| d[(i, j)] - row_means[i] - row_means[j] + grand)
}

/// Sample distance correlation of paired samples (one per row).
///
/// Returns 0 when either sample has zero distance variance.
pub fn distance_correlation(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<f64> {
    let n = x.nrows();
    if y.nrows() != n {
        return Err(Error::ShapeMismatch(format!("{n} samples of X, {} of Y", y.nrows())));
    }
    if n < 4 {
        return Err(Error::InsufficientData(format!(
            "distance correlation needs at least 4 samples, got {n}"
        )));
    }
    let a = centered_distances(x);
    let b = centered_distances(y);
    let nn = (n * n) as f64;
    let dcov2 = a.component_mul(&b).sum() / nn;
    let dvar_x = a.norm_squared() / nn;
    let dvar_y = b.norm_squared() / nn;
    if dvar_x <= 0.0 || dvar_y <= 0.0 {
        return Ok(0.0);
    }
    let r2 = dcov2.max(0.0) / (dvar_x * dvar_y).sqrt();
    Ok(r2.sqrt().min(1.0))
}
