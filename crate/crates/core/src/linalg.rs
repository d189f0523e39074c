//! Random matrix helpers.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Largest matrix dimension handed to the dense eigen-solver.
pub const EIGEN_CAP: usize = 4000;

/// `rows × cols` matrix with i.i.d. `N(0, sd²)` entries, filled row by row.
pub fn gaussian_matrix<R: RngCore>(rows: usize, cols: usize, sd: f64, rng: &mut R) -> DMatrix<f64> {
    let values: Vec<f64> = (0..rows * cols)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            sd * z
        })
        .collect();
    DMatrix::from_row_slice(rows, cols, &values)
}

/// Haar-distributed `n × n` orthogonal matrix: QR of a Gaussian matrix with
/// the columns of Q rescaled by the signs of diag(R).
pub fn haar_orthogonal<R: RngCore>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let g = gaussian_matrix(n, n, 1.0, rng);
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Eigenvalues of a symmetric matrix in increasing order.
pub fn symmetric_eigenvalues(m: DMatrix<f64>) -> Result<Vec<f64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::invalid("eigenvalues need a square matrix"));
    }
    if m.nrows() > EIGEN_CAP {
        return Err(Error::SizeCap { size: m.nrows(), cap: EIGEN_CAP });
    }
    let mut values: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    values.sort_by(f64::total_cmp);
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::seeded_rng;

    #[test]
    fn haar_is_orthogonal() {
        let mut rng = seeded_rng(1);
        let q = haar_orthogonal(50, &mut rng);
        let gram = q.transpose() * &q;
        let err = (gram - DMatrix::<f64>::identity(50, 50)).abs().max();
        assert!(err < 1e-12, "{err}");
        for j in 0..50 {
            assert!((q.column(j).norm() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn haar_first_entry_is_unbiased() {
        // Without the sign fix, Q[0][0] would be biased; its mean must be ~0.
        let mut rng = seeded_rng(2);
        let trials = 4000;
        let mean: f64 = (0..trials).map(|_| haar_orthogonal(3, &mut rng)[(0, 0)]).sum::<f64>() / trials as f64;
        // sd of Q[0][0] for n = 3 is 1/√3
        assert!(mean.abs() < 4.0 * (1.0 / 3f64.sqrt()) / (trials as f64).sqrt(), "{mean}");
    }

    #[test]
    fn eigenvalues_sorted() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let ev = symmetric_eigenvalues(m).unwrap();
        assert!((ev[0] - 1.0).abs() < 1e-14 && (ev[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn seeded_matrices_repeat() {
        let a = gaussian_matrix(3, 4, 0.5, &mut seeded_rng(7));
        let b = gaussian_matrix(3, 4, 0.5, &mut seeded_rng(7));
        assert_eq!(a, b);
    }
}
