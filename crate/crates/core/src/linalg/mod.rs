//! Dense symmetric matrices, double centering, eigenpairs, small SVDs and norms.

pub mod eigen;
pub mod matrix;
pub mod svd;

pub use eigen::{fix_signs, spectral_radius, top_eigs, top_eigs_with, EigenOptions, SpectralPair};
pub use matrix::{double_center, norms, spectral_norm, two_to_inf_norm, Norms, SymmetricMatrix};
pub use svd::{svd_small, SmallSvd};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// `P · m` where `P = I − 11ᵀ/n` centers columns.
pub fn center_columns(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    let n = m.nrows() as f64;
    for mut col in out.column_iter_mut() {
        let mean = col.sum() / n;
        col.add_scalar_mut(-mean);
    }
    out
}

/// Inverse of a symmetric positive definite matrix via its eigendecomposition.
pub fn spd_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    spd_power(m, -1.0)
}

/// `m^p` for a symmetric positive definite `m`.
pub fn spd_power(m: &DMatrix<f64>, p: f64) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::dim("expected a square matrix"));
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::new(sym);
    let max = eig.eigenvalues.amax();
    let min = eig.eigenvalues.min();
    if !(min > 1e-12 * max.max(f64::MIN_POSITIVE)) {
        return Err(Error::Singular {
            min_eigenvalue: min,
        });
    }
    let scaled = eig.eigenvalues.map(|v| v.powf(p));
    let q = &eig.eigenvectors;
    let out = q * DMatrix::from_diagonal(&scaled) * q.transpose();
    Ok((&out + out.transpose()) * 0.5)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    nalgebra::SymmetricEigen::new(sym).eigenvalues.min()
}

/// Projects a symmetric matrix onto the PSD cone; returns the projection and its
/// Frobenius distance from the input.
pub fn project_psd(m: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let sym = (m + m.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::new(sym.clone());
    if eig.eigenvalues.min() >= 0.0 {
        return (sym, 0.0);
    }
    let clipped = eig.eigenvalues.map(|v| v.max(0.0));
    let q = &eig.eigenvectors;
    let out = q * DMatrix::from_diagonal(&clipped) * q.transpose();
    let out = (&out + out.transpose()) * 0.5;
    let dist = (&out - m).norm();
    (out, dist)
}

/// Makes a matrix exactly symmetric by averaging with its transpose.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    DMatrix::from_fn(n, n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]))
}
