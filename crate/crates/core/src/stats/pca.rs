use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Eigenvalues of the Gram matrix below this fraction of the largest one are
/// treated as zero.
const RANK_TOLERANCE: f64 = 1e-12;

/// A fitted principal component basis.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    mean: Vec<f64>,
    /// `d × K′`, column-orthonormal.
    basis: DMatrix<f64>,
    explained_variance: Vec<f64>,
    requested: usize,
}

impl PcaModel {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Effective number of components.
    pub fn k_prime(&self) -> usize {
        self.basis.ncols()
    }

    /// Number of components that was asked for.
    pub fn requested(&self) -> usize {
        self.requested
    }

    pub fn was_clamped(&self) -> bool {
        self.k_prime() < self.requested
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn explained_variance(&self) -> &[f64] {
        &self.explained_variance
    }

    pub(crate) fn from_parts(
        mean: Vec<f64>,
        basis: DMatrix<f64>,
        explained_variance: Vec<f64>,
        requested: usize,
    ) -> Result<Self> {
        if basis.nrows() != mean.len() || explained_variance.len() != basis.ncols() {
            return Err(Error::ShapeMismatch(format!(
                "PCA parts disagree: mean {}, basis {}x{}, variances {}",
                mean.len(),
                basis.nrows(),
                basis.ncols(),
                explained_variance.len()
            )));
        }
        Ok(Self {
            mean,
            basis,
            explained_variance,
            requested,
        })
    }

    /// Projects one sample.
    pub fn transform_row(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::ShapeMismatch(format!(
                "PCA fitted on {} features, sample has {}",
                self.dim(),
                x.len()
            )));
        }
        let centered = DVector::from_iterator(x.len(), x.iter().zip(&self.mean).map(|(v, m)| v - m));
        Ok((self.basis.tr_mul(&centered)).iter().copied().collect())
    }
}

/// Fits PCA on the rows of `x` (one sample per row).
///
/// The top components come from the eigendecomposition of the `n × n` Gram
/// matrix of the centered data, which is cheap when `d ≫ n`. The effective
/// component count is clamped to the numerical rank of the centered data
/// (at most `n − 1`); a warning is logged when that happens.
pub fn pca_fit(x: &DMatrix<f64>, k_prime: usize) -> Result<PcaModel> {
    let (n, d) = x.shape();
    if n < 2 {
        return Err(Error::InsufficientData(format!("PCA needs at least 2 samples, got {n}")));
    }
    if k_prime == 0 {
        return Err(Error::Validation("number of principal components must be positive".into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("PCA input contains non-finite values".into()));
    }

    let mean: Vec<f64> = (0..d).map(|j| x.column(j).mean()).collect();
    // Samples as columns: d × n.
    let mut centered_t = x.transpose();
    for mut col in centered_t.column_iter_mut() {
        for (v, m) in col.iter_mut().zip(&mean) {
            *v -= m;
        }
    }
    let gram = centered_t.tr_mul(&centered_t);
    let eig = SymmetricEigen::new(gram);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let largest = eig.eigenvalues[order[0]].max(0.0);
    let rank = order
        .iter()
        .take_while(|&&i| largest > 0.0 && eig.eigenvalues[i] > largest * RANK_TOLERANCE)
        .count()
        .min(n - 1)
        .min(d);
    let kept = k_prime.min(rank);
    if kept < k_prime {
        log::warn!("requested {k_prime} principal components but the centered data has rank {rank}; using {kept}");
    }

    let mut basis = DMatrix::zeros(d, kept);
    let mut explained_variance = Vec::with_capacity(kept);
    for (slot, &idx) in order.iter().take(kept).enumerate() {
        let lambda = eig.eigenvalues[idx];
        let u = eig.eigenvectors.column(idx);
        let v = &centered_t * u / lambda.sqrt();
        basis.set_column(slot, &v);
        explained_variance.push(lambda / (n - 1) as f64);
    }
    reorthonormalize(&mut basis);
    fix_signs(&mut basis);

    Ok(PcaModel {
        mean,
        basis,
        explained_variance,
        requested: k_prime,
    })
}

/// Two passes of modified Gram–Schmidt; removes the loss of orthogonality
/// the Gram route incurs for small eigenvalues.
fn reorthonormalize(basis: &mut DMatrix<f64>) {
    let d = basis.nrows();
    // Column-major storage: column j is data[j*d..(j+1)*d].
    let data = basis.as_mut_slice();
    for _ in 0..2 {
        for j in 0..data.len() / d.max(1) {
            let (done, rest) = data.split_at_mut(j * d);
            let col = &mut rest[..d];
            for prev in done.chunks_exact(d) {
                let proj: f64 = prev.iter().zip(col.iter()).map(|(a, b)| a * b).sum();
                for (c, p) in col.iter_mut().zip(prev) {
                    *c -= proj * p;
                }
            }
            let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
            for c in col.iter_mut() {
                *c /= norm;
            }
        }
    }
}

/// Flips each column so its largest-magnitude entry is nonnegative.
fn fix_signs(basis: &mut DMatrix<f64>) {
    for mut col in basis.column_iter_mut() {
        let mut best = 0.0f64;
        for &v in col.iter() {
            if v.abs() > best.abs() {
                best = v;
            }
        }
        if best < 0.0 {
            col.neg_mut();
        }
    }
}

/// `(X − mean) · basis`, one projected sample per row.
pub fn pca_transform(model: &PcaModel, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x.ncols() != model.dim() {
        return Err(Error::ShapeMismatch(format!(
            "PCA fitted on {} features, input has {}",
            model.dim(),
            x.ncols()
        )));
    }
    let mut centered = x.clone();
    for mut row in centered.row_iter_mut() {
        for (v, m) in row.iter_mut().zip(&model.mean) {
            *v -= m;
        }
    }
    Ok(centered * &model.basis)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, d, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn axis_aligned_points() {
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, -1.0, 0.0]);
        let pca = pca_fit(&x, 1).unwrap();
        assert_eq!(pca.mean(), &[0.0, 0.0]);
        assert!((pca.basis()[(0, 0)] - 1.0).abs() < 1e-12);
        assert!(pca.basis()[(1, 0)].abs() < 1e-12);
    }

    #[test]
    fn rank_deficient_clamps() {
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 1.0, 2.0, 2.0, -3.0, -3.0, 0.5, 0.5]);
        let pca = pca_fit(&x, 2).unwrap();
        assert_eq!(pca.k_prime(), 1);
        assert!(pca.was_clamped());
    }

    #[test]
    fn full_count_clamps_to_n_minus_one() {
        let x = random(20, 100, 1);
        let pca = pca_fit(&x, 20).unwrap();
        assert_eq!(pca.k_prime(), 19);
    }

    #[test]
    fn errors() {
        assert!(pca_fit(&random(1, 3, 0), 1).is_err());
        assert!(pca_fit(&random(3, 3, 0), 0).is_err());
        let model = pca_fit(&random(5, 3, 0), 2).unwrap();
        assert!(pca_transform(&model, &random(2, 4, 0)).is_err());
    }

    #[test]
    fn basis_is_orthonormal_and_sorted() {
        let x = random(40, 300, 2);
        let pca = pca_fit(&x, 39).unwrap();
        let gram = pca.basis().tr_mul(pca.basis());
        let err = (gram - DMatrix::identity(39, 39)).abs().max();
        assert!(err < 1e-10, "orthonormality error {err}");
        assert!(pca.explained_variance().windows(2).all(|w| w[0] >= w[1]));
        assert!(pca.explained_variance().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn mean_row_projects_to_zero() {
        let x = random(10, 6, 3);
        let pca = pca_fit(&x, 3).unwrap();
        let z = pca.transform_row(pca.mean()).unwrap();
        assert!(z.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn basis_column_projects_to_unit_vector() {
        let x = random(10, 6, 4);
        let pca = pca_fit(&x, 3).unwrap();
        let row: Vec<f64> = pca.mean().iter().zip(pca.basis().column(1).iter()).map(|(m, b)| m + b).collect();
        let z = pca.transform_row(&row).unwrap();
        assert!((z[0]).abs() < 1e-10 && (z[1] - 1.0).abs() < 1e-10 && z[2].abs() < 1e-10);
    }

    #[test]
    fn projections_are_centered_with_matching_variance() {
        let x = random(30, 50, 5);
        let pca = pca_fit(&x, 10).unwrap();
        let z = pca_transform(&pca, &x).unwrap();
        for (j, col) in z.column_iter().enumerate() {
            let m = col.mean();
            assert!(m.abs() < 1e-9);
            let var = col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / 29.0;
            let want = pca.explained_variance()[j];
            assert!(((var - want) / want).abs() < 1e-6);
        }
    }

    #[test]
    fn sign_convention() {
        let pca = pca_fit(&random(12, 8, 6), 5).unwrap();
        for col in pca.basis().column_iter() {
            let max = col.iter().copied().fold(0.0f64, |a, v| if v.abs() > a.abs() { v } else { a });
            assert!(max > 0.0);
        }
    }
}
