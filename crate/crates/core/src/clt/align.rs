use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::svd_small;
use crate::serde_rows;

/// Orthogonal `W` minimizing `‖source · W − target‖_F`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    #[serde(with = "serde_rows::matrix")]
    pub rotation: DMatrix<f64>,
    /// The cross-product is rank deficient, so the minimizer is not unique.
    pub degenerate: bool,
}

const RANK_RTOL: f64 = 1e-10;

pub fn align(source: &DMatrix<f64>, target: &DMatrix<f64>) -> Result<Alignment> {
    if source.shape() != target.shape() {
        return Err(Error::dim(format!(
            "source is {}x{}, target is {}x{}",
            source.nrows(),
            source.ncols(),
            target.nrows(),
            target.ncols()
        )));
    }
    polar_factor(&source.tr_mul(target))
}

/// Closest orthogonal matrix to a square `m`, as `W₁W₂ᵀ` from its SVD.
pub fn polar_factor(m: &DMatrix<f64>) -> Result<Alignment> {
    let svd = svd_small(m)?;
    let s = &svd.singular_values;
    let largest = s.first().copied().unwrap_or(0.0);
    let smallest = s.last().copied().unwrap_or(0.0);
    Ok(Alignment {
        rotation: svd.polar(),
        degenerate: !(smallest > RANK_RTOL * largest),
    })
}
