use nalgebra::{DMatrix, Vector2};

use crate::error::{Error, Result};
use crate::linalg::spd_power;

pub const ELLIPSE_POINTS: usize = 128;

/// Quantile of the chi-square distribution with two degrees of freedom.
pub fn chi2_2_quantile(level: f64) -> f64 {
    -2.0 * (1.0 - level).ln()
}

/// Level curve `{mean + √q · cov^{1/2} (cos θ, sin θ)}` of a bivariate normal.
pub fn ellipse_points(mean: [f64; 2], cov: &DMatrix<f64>, level: f64) -> Result<Vec<[f64; 2]>> {
    if cov.shape() != (2, 2) {
        return Err(Error::dim("ellipse covariance must be 2x2"));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid(format!("level {level} not in (0, 1)")));
    }
    let root = spd_power(cov, 0.5)
        .map_err(|_| Error::invalid("ellipse covariance is not positive definite"))?;
    let radius = chi2_2_quantile(level).sqrt();
    Ok((0..ELLIPSE_POINTS)
        .map(|k| {
            let t = std::f64::consts::TAU * k as f64 / ELLIPSE_POINTS as f64;
            let p = &root * Vector2::new(t.cos(), t.sin()) * radius;
            [mean[0] + p[0], mean[1] + p[1]]
        })
        .collect())
}
