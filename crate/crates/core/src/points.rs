//! Latent point clouds, their population moments and the distance-weighted
//! second moments that enter the limiting covariances.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{min_eigenvalue, project_psd, SymmetricMatrix};
use crate::noise::{CltKernel, DistanceWeight, NoiseModel};
use crate::rng::CounterRng;
use crate::serde_rows;

/// Generating distribution of the latent points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DistributionSpec {
    /// Finite mixture of point masses; each location is one class.
    PointMassMixture {
        locations: Vec<Vec<f64>>,
        weights: Vec<f64>,
    },
    Gaussian {
        mean: Vec<f64>,
        covariance: Vec<Vec<f64>>,
    },
    UniformBox {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
}

const WEIGHT_SUM_TOL: f64 = 1e-12;

impl DistributionSpec {
    /// Three point masses with pairwise distances 3, 4 and 5 and weights 0.2, 0.3, 0.5,
    /// translated so the mixture mean is the origin.
    pub fn right_triangle_masses() -> Self {
        let raw = [[0.0, 0.0], [3.0, 0.0], [0.0, 4.0]];
        let weights = vec![0.2, 0.3, 0.5];
        let mean = [
            raw.iter().zip(&weights).map(|(p, w)| p[0] * w).sum::<f64>(),
            raw.iter().zip(&weights).map(|(p, w)| p[1] * w).sum::<f64>(),
        ];
        DistributionSpec::PointMassMixture {
            locations: raw
                .iter()
                .map(|p| vec![p[0] - mean[0], p[1] - mean[1]])
                .collect(),
            weights,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            DistributionSpec::PointMassMixture { locations, .. } => {
                locations.first().map_or(0, Vec::len)
            }
            DistributionSpec::Gaussian { mean, .. } => mean.len(),
            DistributionSpec::UniformBox { lo, .. } => lo.len(),
        }
    }

    /// Class locations of a point-mass mixture.
    pub fn locations(&self) -> Option<&[Vec<f64>]> {
        match self {
            DistributionSpec::PointMassMixture { locations, .. } => Some(locations),
            _ => None,
        }
    }

    pub fn num_classes(&self) -> usize {
        self.locations().map_or(1, <[_]>::len)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d == 0 {
            return Err(Error::invalid("distribution has dimension 0"));
        }
        match self {
            DistributionSpec::PointMassMixture { locations, weights } => {
                if locations.len() != weights.len() {
                    return Err(Error::dim(format!(
                        "{} locations but {} weights",
                        locations.len(),
                        weights.len()
                    )));
                }
                if locations.iter().any(|l| l.len() != d) {
                    return Err(Error::dim("mixture locations have different dimensions"));
                }
                if locations.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(Error::invalid("mixture locations must be finite"));
                }
                if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
                    return Err(Error::invalid("mixture weights must be non-negative"));
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > WEIGHT_SUM_TOL {
                    return Err(Error::invalid(format!(
                        "mixture weights sum to {total}, not 1"
                    )));
                }
            }
            DistributionSpec::Gaussian { mean, covariance } => {
                if mean.iter().any(|v| !v.is_finite()) {
                    return Err(Error::invalid("gaussian mean must be finite"));
                }
                self.gaussian_factor(covariance)?;
            }
            DistributionSpec::UniformBox { lo, hi } => {
                if hi.len() != d {
                    return Err(Error::dim("uniform box bounds have different lengths"));
                }
                if lo.iter().zip(hi).any(|(a, b)| !(a.is_finite() && b.is_finite() && a < b)) {
                    return Err(Error::invalid("uniform box needs finite lo < hi"));
                }
            }
        }
        Ok(())
    }

    fn gaussian_factor(&self, covariance: &[Vec<f64>]) -> Result<DMatrix<f64>> {
        let d = self.dim();
        if covariance.len() != d || covariance.iter().any(|r| r.len() != d) {
            return Err(Error::dim(format!("gaussian covariance must be {d}x{d}")));
        }
        let c = DMatrix::from_fn(d, d, |i, j| covariance[i][j]);
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("gaussian covariance must be finite"));
        }
        if (&c - c.transpose()).amax() > 1e-12 * c.amax() {
            return Err(Error::invalid("gaussian covariance is not symmetric"));
        }
        Cholesky::new(c)
            .map(|ch| ch.l())
            .ok_or_else(|| Error::invalid("gaussian covariance is not positive definite"))
    }
}

/// `n` points in `ℝ^d`, optionally labelled by mixture class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    #[serde(with = "serde_rows::matrix")]
    pub points: DMatrix<f64>,
    pub labels: Option<Vec<usize>>,
}

impl PointCloud {
    pub fn new(points: DMatrix<f64>, labels: Option<Vec<usize>>) -> Result<Self> {
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("points must be finite"));
        }
        if let Some(l) = &labels {
            if l.len() != points.nrows() {
                return Err(Error::dim("one label per point is required"));
            }
        }
        Ok(Self { points, labels })
    }

    pub fn n(&self) -> usize {
        self.points.nrows()
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    /// Rows minus their mean.
    pub fn centered(&self) -> DMatrix<f64> {
        crate::linalg::center_columns(&self.points)
    }

    pub fn squared_distances(&self) -> SymmetricMatrix {
        let p = &self.points;
        SymmetricMatrix::hollow_from_fn(self.n(), |i, j| {
            (0..self.dim()).map(|c| (p[(i, c)] - p[(j, c)]).powi(2)).sum()
        })
    }

    pub fn distances(&self) -> SymmetricMatrix {
        self.squared_distances().map(f64::sqrt)
    }
}

/// Mean and covariance of the generating distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationMoments {
    #[serde(with = "serde_rows::vector")]
    pub mu: DVector<f64>,
    #[serde(with = "serde_rows::matrix")]
    pub xi: DMatrix<f64>,
    pub exact: bool,
}

impl PopulationMoments {
    pub fn xi_inverse(&self) -> Result<DMatrix<f64>> {
        crate::linalg::spd_inverse(&self.xi)
    }
}

/// Class sizes `π_k n` rounded by largest remainder so they sum to `n`.
pub fn class_counts(weights: &[f64], n: usize) -> Vec<usize> {
    let exact: Vec<f64> = weights.iter().map(|w| w * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &k in order.iter().take(n.saturating_sub(assigned)) {
        counts[k] += 1;
    }
    counts
}

/// Draws `n` points. Mixtures are emitted grouped by class with labels.
pub fn sample(spec: &DistributionSpec, n: usize, seed: u64) -> Result<PointCloud> {
    spec.validate()?;
    let d = spec.dim();
    if n < d + 2 {
        return Err(Error::invalid(format!(
            "need at least d + 2 = {} points, got {n}",
            d + 2
        )));
    }
    match spec {
        DistributionSpec::PointMassMixture { locations, weights } => {
            let counts = class_counts(weights, n);
            let mut points = DMatrix::zeros(n, d);
            let mut labels = Vec::with_capacity(n);
            for (k, &count) in counts.iter().enumerate() {
                for _ in 0..count {
                    let row = labels.len();
                    for c in 0..d {
                        points[(row, c)] = locations[k][c];
                    }
                    labels.push(k);
                }
            }
            PointCloud::new(points, Some(labels))
        }
        _ => {
            let mut sampler = ContinuousSampler::new(spec, seed)?;
            let mut points = DMatrix::zeros(n, d);
            for i in 0..n {
                let z = sampler.point(i as u64);
                points.row_mut(i).copy_from(&z.transpose());
            }
            PointCloud::new(points, None)
        }
    }
}

/// Draws from the continuous variants, addressed by point index.
struct ContinuousSampler<'a> {
    spec: &'a DistributionSpec,
    factor: Option<DMatrix<f64>>,
    rng: CounterRng,
}

impl<'a> ContinuousSampler<'a> {
    fn new(spec: &'a DistributionSpec, seed: u64) -> Result<Self> {
        let factor = match spec {
            DistributionSpec::Gaussian { covariance, .. } => Some(spec.gaussian_factor(covariance)?),
            _ => None,
        };
        Ok(Self {
            spec,
            factor,
            rng: CounterRng::new(seed),
        })
    }

    fn point(&mut self, index: u64) -> DVector<f64> {
        let d = self.spec.dim();
        self.rng.seek(index, 0);
        match self.spec {
            DistributionSpec::Gaussian { mean, .. } => {
                let g = DVector::from_fn(d, |_, _| self.rng.next_draw().normal());
                let l = self.factor.as_ref().expect("gaussian factor");
                DVector::from_column_slice(mean) + l * g
            }
            DistributionSpec::UniformBox { lo, hi } => DVector::from_fn(d, |c, _| {
                lo[c] + (hi[c] - lo[c]) * self.rng.next_draw().uniform(0)
            }),
            DistributionSpec::PointMassMixture { .. } => unreachable!("mixtures are not sampled here"),
        }
    }
}

/// Closed-form mean and covariance. Errors when the covariance is singular.
pub fn moments(spec: &DistributionSpec) -> Result<PopulationMoments> {
    let m = raw_moments(spec)?;
    let max = m.xi.amax();
    let min = min_eigenvalue(&m.xi);
    if !(min > 1e-12 * max) {
        return Err(Error::Singular {
            min_eigenvalue: min,
        });
    }
    Ok(m)
}

fn raw_moments(spec: &DistributionSpec) -> Result<PopulationMoments> {
    spec.validate()?;
    let d = spec.dim();
    let (mu, xi) = match spec {
        DistributionSpec::PointMassMixture { locations, weights } => {
            let mut mu = DVector::zeros(d);
            for (x, w) in locations.iter().zip(weights) {
                mu += DVector::from_column_slice(x) * *w;
            }
            let mut xi = DMatrix::zeros(d, d);
            for (x, w) in locations.iter().zip(weights) {
                let v = DVector::from_column_slice(x) - &mu;
                xi += &v * v.transpose() * *w;
            }
            (mu, xi)
        }
        DistributionSpec::Gaussian { mean, covariance } => (
            DVector::from_column_slice(mean),
            DMatrix::from_fn(d, d, |i, j| 0.5 * (covariance[i][j] + covariance[j][i])),
        ),
        DistributionSpec::UniformBox { lo, hi } => (
            DVector::from_fn(d, |c, _| 0.5 * (lo[c] + hi[c])),
            DMatrix::from_fn(d, d, |i, j| {
                if i == j {
                    (hi[i] - lo[i]).powi(2) / 12.0
                } else {
                    0.0
                }
            }),
        ),
    };
    Ok(PopulationMoments {
        mu,
        xi,
        exact: true,
    })
}

/// Default number of draws for Monte Carlo expectations over continuous distributions.
pub const DEFAULT_MC_DRAWS: usize = 200_000;

/// `E[w(‖z − Z‖)(Z − μ)(Z − μ)ᵀ]` for the noise model's distance weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaTilde {
    #[serde(with = "serde_rows::matrix")]
    pub matrix: DMatrix<f64>,
    /// Entrywise standard error; absent for exact evaluation.
    pub std_error: Option<Vec<Vec<f64>>>,
    /// Frobenius distance moved when projecting onto the PSD cone.
    pub psd_projection_distance: f64,
    pub exact: bool,
}

pub fn sigma_tilde(
    spec: &DistributionSpec,
    z: &[f64],
    noise: &dyn NoiseModel,
    mc_draws: usize,
    seed: u64,
) -> Result<SigmaTilde> {
    let weight = match noise.clt_kernel() {
        CltKernel::DistanceWeighted(w) => w,
        CltKernel::Homogeneous { .. } => {
            return Err(Error::Unsupported(format!(
                "noise model `{}` has a location-free covariance",
                noise.name()
            )))
        }
        CltKernel::Unavailable => {
            return Err(Error::Unsupported(format!(
                "noise model `{}` has no closed-form covariance",
                noise.name()
            )))
        }
    };
    distance_weighted_moment(spec, z, &weight, mc_draws, seed)
}

pub(crate) fn distance_weighted_moment(
    spec: &DistributionSpec,
    z: &[f64],
    weight: &DistanceWeight,
    mc_draws: usize,
    seed: u64,
) -> Result<SigmaTilde> {
    let mom = moments(spec)?;
    let d = spec.dim();
    if z.len() != d {
        return Err(Error::dim(format!("z has length {}, expected {d}", z.len())));
    }
    let z = DVector::from_column_slice(z);
    if let DistributionSpec::PointMassMixture { locations, weights } = spec {
        let mut acc = DMatrix::zeros(d, d);
        for (x, w) in locations.iter().zip(weights) {
            let x = DVector::from_column_slice(x);
            let r = (&z - &x).norm();
            let v = &x - &mom.mu;
            acc += &v * v.transpose() * (w * weight.eval(r));
        }
        let (matrix, dist) = project_psd(&acc);
        return Ok(SigmaTilde {
            matrix,
            std_error: None,
            psd_projection_distance: dist,
            exact: true,
        });
    }
    if mc_draws < 2 {
        return Err(Error::invalid("Monte Carlo evaluation needs at least 2 draws"));
    }
    let mut sampler = ContinuousSampler::new(spec, seed)?;
    let mut sum = DMatrix::zeros(d, d);
    let mut sum_sq = DMatrix::zeros(d, d);
    for t in 0..mc_draws {
        let x = sampler.point(t as u64);
        let r = (&z - &x).norm();
        let v = &x - &mom.mu;
        let term = &v * v.transpose() * weight.eval(r);
        sum_sq += term.map(|e| e * e);
        sum += term;
    }
    let m = mc_draws as f64;
    let mean = &sum / m;
    let se = DMatrix::from_fn(d, d, |i, j| {
        let var = (sum_sq[(i, j)] / m - mean[(i, j)].powi(2)).max(0.0) * m / (m - 1.0);
        (var / m).sqrt()
    });
    let (matrix, dist) = project_psd(&mean);
    Ok(SigmaTilde {
        matrix,
        std_error: Some(serde_rows::to_rows(&se)),
        psd_projection_distance: dist,
        exact: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn largest_remainder_sums_to_n() {
        assert_eq!(class_counts(&[0.2, 0.3, 0.5], 1000), vec![200, 300, 500]);
        assert_eq!(class_counts(&[1.0 / 3.0; 3], 10), vec![4, 3, 3]);
        assert_eq!(class_counts(&[0.5, 0.5], 7).iter().sum::<usize>(), 7);
    }

    #[test]
    fn canonical_masses_are_centered() {
        let spec = DistributionSpec::right_triangle_masses();
        let m = moments(&spec).unwrap();
        assert!(m.mu.norm() < 1e-15);
        let d = sample(&spec, 10, 0).unwrap().distances();
        assert!((d.get(0, 2) - 3.0).abs() < 1e-12);
        assert!((d.get(0, 9) - 4.0).abs() < 1e-12);
        assert!((d.get(2, 9) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn spec_json_shape() {
        let json = r#"{"uniform_box": {"lo": [0, 0], "hi": [1, 2]}}"#;
        let spec: DistributionSpec = serde_json::from_str(json).unwrap();
        assert_eq!(spec.dim(), 2);
        let back = serde_json::to_string(&spec).unwrap();
        assert_eq!(serde_json::from_str::<DistributionSpec>(&back).unwrap(), spec);
    }
}
