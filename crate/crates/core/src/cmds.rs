//! Classical multidimensional scaling.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{double_center, top_eigs, SpectralPair, SymmetricMatrix};
use crate::serde_rows;

/// Eigenvalues at or below this fraction of the largest magnitude count as zero.
pub const ZERO_EIGEN_RTOL: f64 = 1e-10;

/// Number of eigenvalues kept beyond `d` for scree output.
pub const SCREE_EXTRA: usize = 4;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingFlags {
    /// 1-based indices of top-`d` eigenvalues that were not numerically positive (zero-filled columns).
    pub deficient: Vec<usize>,
    /// The eigenvalues around the cut are numerically tied.
    pub degenerate: bool,
}

/// An `n × d` configuration `X = U S^{1/2}` with its spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    #[serde(with = "serde_rows::matrix")]
    pub config: DMatrix<f64>,
    /// Top `d` eigenvalues of the double-centered matrix, descending.
    pub eigenvalues: Vec<f64>,
    /// Top `d + extra` eigenvalues for scree inspection.
    pub all_top_eigenvalues: Vec<f64>,
    pub flags: EmbeddingFlags,
}

impl Embedding {
    pub fn n(&self) -> usize {
        self.config.nrows()
    }

    pub fn dim(&self) -> usize {
        self.config.ncols()
    }

    /// Columns of `U`: the configuration with each column divided by `√λ`.
    /// Zero-filled columns stay zero.
    pub fn unit_vectors(&self) -> DMatrix<f64> {
        let mut u = self.config.clone();
        for (c, &l) in self.eigenvalues.iter().enumerate() {
            let s = if l > 0.0 { 1.0 / l.sqrt() } else { 0.0 };
            u.column_mut(c).scale_mut(s);
        }
        u
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbedOptions {
    /// Zero-fill non-positive eigenvalues instead of failing.
    pub allow_deficient: bool,
    /// Eigenvalues computed beyond `d` for scree output.
    pub extra_eigenvalues: usize,
}

impl Default for EmbedOptions {
    fn default() -> Self {
        Self {
            allow_deficient: false,
            extra_eigenvalues: SCREE_EXTRA,
        }
    }
}

pub fn embed(delta_sq: &SymmetricMatrix, d: usize) -> Result<Embedding> {
    embed_with(delta_sq, d, &EmbedOptions::default())
}

pub fn embed_with(delta_sq: &SymmetricMatrix, d: usize, opts: &EmbedOptions) -> Result<Embedding> {
    let b = double_center(delta_sq)?;
    embed_gram(&b, d, opts)
}

/// Embeds from an already double-centered matrix.
pub fn embed_gram(b: &SymmetricMatrix, d: usize, opts: &EmbedOptions) -> Result<Embedding> {
    let n = b.n();
    if d == 0 || d + 1 > n {
        return Err(Error::invalid(format!(
            "embedding dimension must be in 1..={}, got {d}",
            n.saturating_sub(1)
        )));
    }
    let k = (d + opts.extra_eigenvalues).min(n);
    let pair = top_eigs(b, k)?;
    from_pair(&pair, d, opts.allow_deficient)
}

/// Builds an embedding from the leading eigenpairs of a double-centered matrix.
pub fn from_pair(pair: &SpectralPair, d: usize, allow_deficient: bool) -> Result<Embedding> {
    if d == 0 || d > pair.k() {
        return Err(Error::invalid(format!(
            "need {d} eigenpairs, have {}",
            pair.k()
        )));
    }
    let eigenvalues = pair.values[..d].to_vec();
    let floor = ZERO_EIGEN_RTOL * pair.values.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    let deficient: Vec<usize> = eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, &l)| l <= floor)
        .map(|(i, _)| i + 1)
        .collect();
    if let Some(&first) = deficient.first() {
        if !allow_deficient {
            return Err(Error::DeficientEmbedding {
                index: first,
                value: eigenvalues[first - 1],
            });
        }
    }
    let mut config = pair.vectors.columns(0, d).into_owned();
    for (c, &l) in eigenvalues.iter().enumerate() {
        let scale = if deficient.contains(&(c + 1)) { 0.0 } else { l.sqrt() };
        config.column_mut(c).scale_mut(scale);
    }
    Ok(Embedding {
        config,
        eigenvalues,
        all_top_eigenvalues: pair.values.clone(),
        flags: EmbeddingFlags {
            deficient,
            degenerate: pair.degenerate,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimSelection {
    pub d_hat: usize,
    pub threshold: f64,
    pub eigenvalues: Vec<f64>,
}

/// `n^{2/3}`.
pub fn dim_threshold(n: usize) -> f64 {
    (n as f64).cbrt().powi(2)
}

/// Number of leading eigenvalues at or above `n^{2/3}`.
pub fn select_dim_from_eigenvalues(eigenvalues: &[f64], n: usize) -> usize {
    let t = dim_threshold(n);
    eigenvalues.iter().take_while(|&&l| l >= t).count()
}

pub fn select_dim(delta_sq: &SymmetricMatrix, max_d: usize) -> Result<DimSelection> {
    let n = delta_sq.n();
    if max_d == 0 || max_d + 1 > n {
        return Err(Error::invalid(format!(
            "max_d must be in 1..={}, got {max_d}",
            n.saturating_sub(1)
        )));
    }
    let b = double_center(delta_sq)?;
    let pair = top_eigs(&b, max_d)?;
    Ok(DimSelection {
        d_hat: select_dim_from_eigenvalues(&pair.values, n),
        threshold: dim_threshold(n),
        eigenvalues: pair.values,
    })
}

/// Keeps the first `d_prime` columns.
pub fn sub_embed(e: &Embedding, d_prime: usize) -> Result<Embedding> {
    if d_prime == 0 || d_prime > e.dim() {
        return Err(Error::invalid(format!(
            "sub-embedding dimension must be in 1..={}, got {d_prime}",
            e.dim()
        )));
    }
    let gap_tol = 1e-10 * e.all_top_eigenvalues.iter().map(|v| v * v).sum::<f64>().sqrt();
    let tie_at_cut = e
        .all_top_eigenvalues
        .get(d_prime)
        .is_some_and(|&next| (e.eigenvalues[d_prime - 1] - next).abs() < gap_tol);
    Ok(Embedding {
        config: e.config.columns(0, d_prime).into_owned(),
        eigenvalues: e.eigenvalues[..d_prime].to_vec(),
        all_top_eigenvalues: e.all_top_eigenvalues.clone(),
        flags: EmbeddingFlags {
            deficient: e.flags.deficient.iter().copied().filter(|&i| i <= d_prime).collect(),
            degenerate: e.flags.degenerate || tie_at_cut,
        },
    })
}

/// `‖XXᵀ − B‖_F`.
pub fn strain(config: &DMatrix<f64>, b: &SymmetricMatrix) -> Result<f64> {
    if config.nrows() != b.n() {
        return Err(Error::dim(format!(
            "configuration has {} rows, matrix has order {}",
            config.nrows(),
            b.n()
        )));
    }
    Ok((config * config.transpose() - b.as_matrix()).norm())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_closed_form() {
        let c = 3.0;
        let sq = SymmetricMatrix::hollow_from_fn(2, |_, _| c * c);
        let e = embed(&sq, 1).unwrap();
        assert!((e.config[(0, 0)].abs() - c / 2.0).abs() < 1e-12);
        assert!((e.config[(0, 0)] + e.config[(1, 0)]).abs() < 1e-12);
    }

    #[test]
    fn deficiency_policy() {
        let zero = SymmetricMatrix::zeros(4);
        assert!(matches!(embed(&zero, 1), Err(Error::DeficientEmbedding { index: 1, .. })));
        let opts = EmbedOptions {
            allow_deficient: true,
            ..EmbedOptions::default()
        };
        let e = embed_with(&zero, 2, &opts).unwrap();
        assert_eq!(e.flags.deficient, vec![1, 2]);
        assert_eq!(e.config.norm(), 0.0);
    }

    #[test]
    fn threshold_rule() {
        assert_eq!(dim_threshold(1000), 100.0);
        assert_eq!(select_dim_from_eigenvalues(&[150.0, 120.0, 80.0, 1.0], 1000), 2);
        assert_eq!(select_dim_from_eigenvalues(&[99.0], 1000), 0);
    }
}
