use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::align::{align, polar_factor};
use super::decompose::median;
use crate::error::{Error, Result};
use crate::linalg::{center_columns, double_center, spectral_norm, spectral_radius, top_eigs, SymmetricMatrix};
use crate::noise::NoiseModel;
use crate::points::{sample, DistributionSpec};
use crate::rng::derive_seed;

/// Each perturbation quantity divided by its claimed rate in `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundRatios {
    /// `‖B̂ − B‖ / √(n log n)`.
    pub perturbation_norm: f64,
    /// `‖U_BᵀU_B̂ − W*‖ / (log n / n)`.
    pub procrustes_residual: f64,
    /// `λ_d(B) / n`.
    pub eigenvalue_growth: f64,
    /// `‖W* S_B̂ − S_B W*‖_F / log n`.
    pub eigen_commutator: f64,
    /// `‖W* S_B̂^{1/2} − S_B^{1/2} W*‖_F / (n^{-1/2} log n)`.
    pub sqrt_eigen_commutator: f64,
    /// Largest row error of the aligned embedding over `√(log n / n)`.
    pub sup_row_error: f64,
    /// Mean row error of the aligned embedding over `√(log n / n)`.
    pub mean_row_error: f64,
}

pub const RATIO_NAMES: [&str; 7] = [
    "perturbation_norm",
    "procrustes_residual",
    "eigenvalue_growth",
    "eigen_commutator",
    "sqrt_eigen_commutator",
    "sup_row_error",
    "mean_row_error",
];

impl BoundRatios {
    pub fn to_array(&self) -> [f64; 7] {
        [
            self.perturbation_norm,
            self.procrustes_residual,
            self.eigenvalue_growth,
            self.eigen_commutator,
            self.sqrt_eigen_commutator,
            self.sup_row_error,
            self.mean_row_error,
        ]
    }

    fn from_array(a: [f64; 7]) -> Self {
        Self {
            perturbation_norm: a[0],
            procrustes_residual: a[1],
            eigenvalue_growth: a[2],
            eigen_commutator: a[3],
            sqrt_eigen_commutator: a[4],
            sup_row_error: a[5],
            mean_row_error: a[6],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub n: usize,
    pub medians: BoundRatios,
    pub failed_replicates: usize,
}

/// Spread of one ratio's medians across the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioSpread {
    pub name: String,
    /// `max / min` of the medians (1 when all are zero).
    pub variation: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundTable {
    pub rows: Vec<BoundRow>,
    pub spreads: Vec<RatioSpread>,
}

impl BoundTable {
    pub fn spread(&self, name: &str) -> Option<&RatioSpread> {
        self.spreads.iter().find(|s| s.name == name)
    }
}

/// A ratio sequence is flagged when its medians vary by this factor or more.
pub const SPREAD_LIMIT: f64 = 2.0;

/// Ratios for one `(n, replicate)` cell.
pub fn bound_ratios(
    spec: &DistributionSpec,
    noise: &dyn NoiseModel,
    n: usize,
    d: usize,
    seed: u64,
) -> Result<BoundRatios> {
    let cloud = sample(spec, n, derive_seed(&[seed, n as u64, 0]))?;
    let dist = cloud.distances();
    let b = double_center(&cloud.squared_distances())?;
    let pert = noise.perturb(&dist, derive_seed(&[seed, n as u64, 1]))?;
    let b_hat = double_center(&pert.delta_sq)?;
    ratios_for(&b, &b_hat, &cloud.centered(), noise.center_scale(), d)
}

fn ratios_for(
    b: &SymmetricMatrix,
    b_hat: &SymmetricMatrix,
    centered_points: &DMatrix<f64>,
    center_scale: f64,
    d: usize,
) -> Result<BoundRatios> {
    let n = b.n();
    let nf = n as f64;
    let ln = nf.ln();
    let pb = top_eigs(b, d)?;
    let ph = top_eigs(b_hat, d)?;
    if let Some((i, &v)) = ph.values.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::DeficientEmbedding { index: i + 1, value: v });
    }
    let diff = b_hat.sub(b)?;
    let pert_norm = spectral_radius(&diff);

    let cross = pb.vectors.tr_mul(&ph.vectors);
    let w = polar_factor(&cross)?.rotation;
    let procrustes = spectral_norm(&(&cross - &w));

    let s = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&pb.values));
    let sh = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&ph.values));
    let commutator = (&w * &sh - &s * &w).norm();
    let s_half = s.map(|v| v.max(0.0).sqrt());
    let sh_half = sh.map(|v| v.max(0.0).sqrt());
    let sqrt_commutator = (&w * &sh_half - &s_half * &w).norm();

    let mut x_hat = ph.vectors.clone();
    for (c, &l) in ph.values.iter().enumerate() {
        x_hat.column_mut(c).scale_mut(l.sqrt());
    }
    let target = center_columns(centered_points) * center_scale;
    let aligned = &x_hat * align(&x_hat, &target)?.rotation;
    let errors: Vec<f64> = (&aligned - &target).row_iter().map(|r| r.norm()).collect();
    let sup = errors.iter().copied().fold(0.0, f64::max);
    let mean = errors.iter().sum::<f64>() / nf;
    let row_rate = (ln / nf).sqrt();

    Ok(BoundRatios {
        perturbation_norm: pert_norm / (nf * ln).sqrt(),
        procrustes_residual: procrustes / (ln / nf),
        eigenvalue_growth: pb.values[d - 1] / nf,
        eigen_commutator: commutator / ln,
        sqrt_eigen_commutator: sqrt_commutator / (ln / nf.sqrt()),
        sup_row_error: sup / row_rate,
        mean_row_error: mean / row_rate,
    })
}

/// Medians of every ratio per `n`, and their spread across the grid.
pub fn bound_checks(
    spec: &DistributionSpec,
    noise: &dyn NoiseModel,
    n_grid: &[usize],
    replicates: usize,
    d: usize,
    seed: u64,
) -> Result<BoundTable> {
    if n_grid.len() < 3 || n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("n_grid must be strictly ascending with at least 3 points"));
    }
    if replicates == 0 {
        return Err(Error::invalid("at least one replicate is required"));
    }
    let cells: Vec<(usize, usize)> = n_grid
        .iter()
        .flat_map(|&n| (0..replicates).map(move |r| (n, r)))
        .collect();
    let results: Vec<Result<BoundRatios>> = cells
        .par_iter()
        .map(|&(n, r)| bound_ratios(spec, noise, n, d, derive_seed(&[seed, r as u64])))
        .collect();

    let mut rows = Vec::with_capacity(n_grid.len());
    for (gi, &n) in n_grid.iter().enumerate() {
        let cell = &results[gi * replicates..(gi + 1) * replicates];
        let ok: Vec<[f64; 7]> = cell
            .iter()
            .filter_map(|r| r.as_ref().ok().map(BoundRatios::to_array))
            .collect();
        if ok.is_empty() {
            let err = cell.iter().find_map(|r| r.as_ref().err()).expect("a failure");
            return Err(Error::invalid(format!("every replicate failed at n = {n}: {err}")));
        }
        let mut med = [0.0; 7];
        for (k, m) in med.iter_mut().enumerate() {
            *m = median(&ok.iter().map(|a| a[k]).collect::<Vec<_>>());
        }
        rows.push(BoundRow {
            n,
            medians: BoundRatios::from_array(med),
            failed_replicates: replicates - ok.len(),
        });
    }
    let spreads = RATIO_NAMES
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let vals: Vec<f64> = rows.iter().map(|r| r.medians.to_array()[k]).collect();
            let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
            let variation = if max == 0.0 && min == 0.0 { 1.0 } else { max / min };
            RatioSpread {
                name: (*name).to_owned(),
                variation,
                flagged: !(variation < SPREAD_LIMIT),
            }
        })
        .collect();
    Ok(BoundTable { rows, spreads })
}

/// Multiple of `log⁴ n` the largest squared row sum should reach.
pub const GROWTH_FACTOR: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthCheck {
    pub max_row_sum_sq: f64,
    pub log4n: f64,
    pub ok: bool,
}

/// Compares `max_i Σ_j D_ij²` with `log⁴ n`. Advisory only.
pub fn growth_check(d: &SymmetricMatrix) -> GrowthCheck {
    let n = d.n();
    let max_row_sum_sq = d
        .as_matrix()
        .row_iter()
        .map(|r| r.iter().map(|v| v * v).sum::<f64>())
        .fold(0.0, f64::max);
    let log4n = (n.max(1) as f64).ln().powi(4);
    GrowthCheck {
        max_row_sum_sq,
        log4n,
        ok: max_row_sum_sq >= GROWTH_FACTOR * log4n && max_row_sum_sq > 0.0,
    }
}
