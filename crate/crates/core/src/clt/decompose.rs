use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::align::polar_factor;
use crate::error::{Error, Result};
use crate::linalg::{top_eigs, SymmetricMatrix};

/// The six-term expansion of `X̂ − U_B S_B^{1/2} W*` evaluated numerically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    /// For each term, the Euclidean norm of every row times `√n`.
    pub term_rows: Vec<Vec<f64>>,
    /// Row norms of the sum of terms two through six, times `√n`.
    pub remainder_rows: Vec<f64>,
    /// `‖Σ terms − (X̂ − U_B S_B^{1/2} W*)‖_F`.
    pub identity_residual: f64,
    /// `identity_residual / ‖X̂‖_F`.
    pub relative_residual: f64,
    /// `‖(I − U_B U_Bᵀ) B‖_F / ‖B‖_F`; the expansion is exact only when this is zero.
    pub rank_residual: f64,
    pub degenerate: bool,
}

impl DecompositionReport {
    pub fn summary(&self) -> DecompositionSummary {
        DecompositionSummary {
            median_leading: median(&self.term_rows[0]),
            median_remainder: median(&self.remainder_rows),
            median_terms: self.term_rows.iter().map(|r| median(r)).collect(),
            relative_residual: self.relative_residual,
            degenerate: self.degenerate,
        }
    }
}

/// Medians of the `√n`-scaled row norms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionSummary {
    pub median_leading: f64,
    pub median_remainder: f64,
    pub median_terms: Vec<f64>,
    pub relative_residual: f64,
    pub degenerate: bool,
}

pub(crate) fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn inv_sqrt_diag(values: &[f64]) -> Result<DMatrix<f64>> {
    if let Some((i, &v)) = values.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::DeficientEmbedding { index: i + 1, value: v });
    }
    Ok(DMatrix::from_diagonal(&DVector::from_iterator(
        values.len(),
        values.iter().map(|v| 1.0 / v.sqrt()),
    )))
}

fn sqrt_diag(values: &[f64]) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_iterator(
        values.len(),
        values.iter().map(|v| v.max(0.0).sqrt()),
    ))
}

fn scaled_row_norms(m: &DMatrix<f64>) -> Vec<f64> {
    let s = (m.nrows() as f64).sqrt();
    m.row_iter().map(|r| r.norm() * s).collect()
}

/// Evaluates the six terms for `B` and `B̂`. Both must have positive top-`d` eigenvalues.
pub fn decompose(b: &SymmetricMatrix, b_hat: &SymmetricMatrix, d: usize) -> Result<DecompositionReport> {
    let n = b.n();
    if b_hat.n() != n {
        return Err(Error::dim(format!("matrices of order {n} and {}", b_hat.n())));
    }
    if d == 0 || d >= n {
        return Err(Error::invalid(format!("d must be in 1..{n}, got {d}")));
    }
    let pb = top_eigs(b, d)?;
    let ph = top_eigs(b_hat, d)?;
    let u = &pb.vectors;
    let uh = &ph.vectors;
    let s_inv_half = inv_sqrt_diag(&pb.values)?;
    let sh_inv_half = inv_sqrt_diag(&ph.values)?;
    let s_half = sqrt_diag(&pb.values);
    let sh_half = sqrt_diag(&ph.values);

    let cross = u.tr_mul(uh);
    let alignment = polar_factor(&cross)?;
    let w = &alignment.rotation;

    let e = b_hat.as_matrix() - b.as_matrix();
    let eu = &e * u;
    let proj_eu = u * u.tr_mul(&eu);
    let x_hat = uh * &sh_half;
    let target = &x_hat - u * &s_half * w;

    let t1 = &eu * &s_inv_half * w;
    let t2 = -(&eu * (&s_inv_half * w - w * &sh_inv_half));
    let t3 = -(&proj_eu * w * &sh_inv_half);
    let diff = uh - u * w;
    let e_diff = &e * &diff;
    let t4 = (&e_diff - u * u.tr_mul(&e_diff)) * &sh_inv_half;
    let t5 = u * (&cross - w) * &sh_half;
    let t6 = u * (w * &sh_half - &s_half * w);

    let remainder = &t2 + &t3 + &t4 + &t5 + &t6;
    let total = &t1 + &remainder;
    let identity_residual = (&total - &target).norm();
    let x_norm = x_hat.norm();

    let bm = b.as_matrix();
    let b_norm = bm.norm();
    let rank_residual = if b_norm > 0.0 {
        (bm - u * u.tr_mul(bm)).norm() / b_norm
    } else {
        0.0
    };

    Ok(DecompositionReport {
        term_rows: [&t1, &t2, &t3, &t4, &t5, &t6]
            .iter()
            .map(|t| scaled_row_norms(t))
            .collect(),
        remainder_rows: scaled_row_norms(&remainder),
        identity_residual,
        relative_residual: if x_norm > 0.0 {
            identity_residual / x_norm
        } else {
            identity_residual
        },
        rank_residual,
        degenerate: alignment.degenerate || pb.degenerate || ph.degenerate,
    })
}
