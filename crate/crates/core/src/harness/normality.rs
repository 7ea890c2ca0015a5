use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::linalg::spd_power;

/// Marginal Kolmogorov-Smirnov statistics after whitening.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalityResult {
    pub m: usize,
    pub marginal_stats: Vec<f64>,
    pub max_stat: f64,
    pub critical_value: f64,
    pub alpha: f64,
    pub pass: bool,
}

pub const MIN_NORMALITY_SAMPLES: usize = 100;
pub const NORMALITY_ALPHA: f64 = 0.01;

/// `P(K ≤ x)` for the Kolmogorov distribution.
pub fn kolmogorov_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let mut sum = 0.0;
    for k in 1..=200 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * x * x).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (1.0 - 2.0 * sum).clamp(0.0, 1.0)
}

/// Upper `alpha` quantile of the Kolmogorov distribution, by bisection.
pub fn kolmogorov_quantile(alpha: f64) -> f64 {
    let target = 1.0 - alpha;
    let (mut lo, mut hi) = (0.2, 5.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if kolmogorov_cdf(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Critical value of the one-sample KS statistic for sample size `m`,
/// with the usual finite-sample correction `√m + 0.12 + 0.11/√m`.
pub fn ks_critical_value(m: usize, alpha: f64) -> f64 {
    let s = (m as f64).sqrt();
    kolmogorov_quantile(alpha) / (s + 0.12 + 0.11 / s)
}

/// KS distance between a sample and the standard normal.
pub fn ks_statistic(values: &mut [f64]) -> f64 {
    let normal = Normal::standard();
    values.sort_by(f64::total_cmp);
    let m = values.len() as f64;
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = normal.cdf(v);
            let above = (i + 1) as f64 / m - f;
            let below = f - i as f64 / m;
            above.max(below)
        })
        .fold(0.0, f64::max)
}

/// Whitens rows by their empirical covariance, then tests each coordinate
/// against the standard normal at level `alpha`.
pub fn normality_check_at(samples: &DMatrix<f64>, alpha: f64) -> Result<NormalityResult> {
    let m = samples.nrows();
    let d = samples.ncols();
    if m < MIN_NORMALITY_SAMPLES {
        return Err(Error::invalid(format!(
            "normality check needs at least {MIN_NORMALITY_SAMPLES} rows, got {m}"
        )));
    }
    if d == 0 {
        return Err(Error::dim("samples have no columns"));
    }
    let mean = samples.row_mean();
    let mut centered = samples.clone();
    for mut row in centered.row_iter_mut() {
        row -= &mean;
    }
    let cov = centered.tr_mul(&centered) / (m as f64 - 1.0);
    let whitening = spd_power(&cov, -0.5)?;
    let white = centered * whitening;
    let marginal_stats: Vec<f64> = white
        .column_iter()
        .map(|c| ks_statistic(&mut c.iter().copied().collect::<Vec<_>>()))
        .collect();
    let max_stat = marginal_stats.iter().copied().fold(0.0, f64::max);
    let critical_value = ks_critical_value(m, alpha);
    Ok(NormalityResult {
        m,
        marginal_stats,
        max_stat,
        critical_value,
        alpha,
        pass: max_stat < critical_value,
    })
}

pub fn normality_check(samples: &DMatrix<f64>) -> Result<NormalityResult> {
    normality_check_at(samples, NORMALITY_ALPHA)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kolmogorov_quantiles() {
        assert!((kolmogorov_quantile(0.05) - 1.3581).abs() < 1e-3);
        assert!((kolmogorov_quantile(0.01) - 1.6276).abs() < 1e-3);
    }

    #[test]
    fn statistic_of_perfect_grid_is_small() {
        let normal = Normal::standard();
        let m = 1000;
        let mut v: Vec<f64> = (0..m)
            .map(|i| normal.inverse_cdf((i as f64 + 0.5) / m as f64))
            .collect();
        assert!((ks_statistic(&mut v) - 0.5 / m as f64).abs() < 1e-9);
    }
}
