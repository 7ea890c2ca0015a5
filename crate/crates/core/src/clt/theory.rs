use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{spd_inverse, spd_power, symmetrize};
use crate::noise::{CltKernel, NoiseModel};
use crate::points::{distance_weighted_moment, moments, DistributionSpec, DEFAULT_MC_DRAWS};
use crate::serde_rows;

/// Limiting covariance of `√n` times a row's deviation at one latent location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassCov {
    pub z: Vec<f64>,
    #[serde(with = "serde_rows::matrix")]
    pub sigma: DMatrix<f64>,
}

/// Limiting row covariances for a distribution and noise model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryCov {
    pub model: String,
    pub per_class: Vec<ClassCov>,
    /// Shrinkage of the embedding relative to the centered latent points.
    pub center_scale: f64,
    /// The covariance does not depend on the location.
    pub z_free: bool,
}

/// Covariances at every mixture location, or at the mean for other distributions
/// when the covariance is location free.
pub fn theory_cov(spec: &DistributionSpec, noise: &dyn NoiseModel) -> Result<TheoryCov> {
    let zs: Vec<Vec<f64>> = match spec.locations() {
        Some(locs) => locs.to_vec(),
        None => {
            if matches!(noise.clt_kernel(), CltKernel::Homogeneous { .. }) {
                vec![moments(spec)?.mu.as_slice().to_vec()]
            } else {
                return Err(Error::invalid(
                    "location-dependent covariance for a continuous distribution needs explicit locations",
                ));
            }
        }
    };
    theory_cov_at(spec, noise, &zs, DEFAULT_MC_DRAWS, 0)
}

/// Covariances at user-supplied locations.
pub fn theory_cov_at(
    spec: &DistributionSpec,
    noise: &dyn NoiseModel,
    zs: &[Vec<f64>],
    mc_draws: usize,
    seed: u64,
) -> Result<TheoryCov> {
    if zs.is_empty() {
        return Err(Error::invalid("at least one location is required"));
    }
    let mom = moments(spec)?;
    let xi_inv = spd_inverse(&mom.xi)?;
    let kernel = noise.clt_kernel();
    let mut per_class = Vec::with_capacity(zs.len());
    for z in zs {
        let sigma = match kernel {
            CltKernel::Homogeneous { sigma2 } => symmetrize(&(&xi_inv * (sigma2 / 4.0))),
            CltKernel::DistanceWeighted(w) => {
                let st = distance_weighted_moment(spec, z, &w, mc_draws, seed)?;
                symmetrize(&(&xi_inv * st.matrix * &xi_inv))
            }
            CltKernel::Unavailable => {
                return Err(Error::Unsupported(format!(
                    "no closed-form covariance for noise model `{}`",
                    noise.name()
                )))
            }
        };
        per_class.push(ClassCov {
            z: z.clone(),
            sigma,
        });
    }
    Ok(TheoryCov {
        model: noise.name().to_owned(),
        per_class,
        center_scale: noise.center_scale(),
        z_free: matches!(kernel, CltKernel::Homogeneous { .. }),
    })
}

/// `E_Z[Σ(Z)]`: the covariance of a row at a random location, by Monte Carlo over
/// independent pairs of draws.
pub fn integrated_cov(
    spec: &DistributionSpec,
    noise: &dyn NoiseModel,
    draws: usize,
    seed: u64,
) -> Result<DMatrix<f64>> {
    let mom = moments(spec)?;
    let xi_inv = spd_inverse(&mom.xi)?;
    let weight = match noise.clt_kernel() {
        CltKernel::Homogeneous { sigma2 } => return Ok(symmetrize(&(&xi_inv * (sigma2 / 4.0)))),
        CltKernel::DistanceWeighted(w) => w,
        CltKernel::Unavailable => {
            return Err(Error::Unsupported(format!(
                "no closed-form covariance for noise model `{}`",
                noise.name()
            )))
        }
    };
    if let Some(locs) = spec.locations() {
        let DistributionSpec::PointMassMixture { weights, .. } = spec else {
            unreachable!()
        };
        let mut acc = DMatrix::zeros(spec.dim(), spec.dim());
        for (z, p) in locs.iter().zip(weights) {
            let st = distance_weighted_moment(spec, z, &weight, 2, seed)?;
            acc += st.matrix * *p;
        }
        return Ok(symmetrize(&(&xi_inv * acc * &xi_inv)));
    }
    let pairs = paired_draws(spec, draws, seed)?;
    let d = spec.dim();
    let mut acc = DMatrix::zeros(d, d);
    for (z, x) in &pairs {
        let v = x - &mom.mu;
        acc += &v * v.transpose() * weight.eval((z - x).norm());
    }
    acc /= pairs.len() as f64;
    Ok(symmetrize(&(&xi_inv * acc * &xi_inv)))
}

fn paired_draws(
    spec: &DistributionSpec,
    draws: usize,
    seed: u64,
) -> Result<Vec<(DVector<f64>, DVector<f64>)>> {
    if draws < 2 {
        return Err(Error::invalid("Monte Carlo evaluation needs at least 2 draws"));
    }
    let cloud = crate::points::sample(spec, 2 * draws, seed)?;
    Ok((0..draws)
        .map(|t| {
            (
                cloud.points.row(2 * t).transpose(),
                cloud.points.row(2 * t + 1).transpose(),
            )
        })
        .collect())
}

/// Covariances for heteroscedastic squared-distance noise at row `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeteroTheory {
    /// `(1/n) Σ_{j≠i} σ_ij² · Ξ`.
    #[serde(with = "serde_rows::matrix")]
    pub sigma_i: DMatrix<f64>,
    /// `Σ_i^{-1/2}`; absent when `Σ_i` is singular.
    pub whitening: Option<Vec<Vec<f64>>>,
    /// `Ξ⁻¹ Σ_i Ξ⁻¹`.
    #[serde(with = "serde_rows::matrix")]
    pub conjugated: DMatrix<f64>,
    /// `Ξ⁻¹ Σ_i Ξ⁻¹ / 4`, the normalization that reduces to `σ²/4 · Ξ⁻¹` for constant σ.
    #[serde(with = "serde_rows::matrix")]
    pub implied: DMatrix<f64>,
    pub mean_sigma2: f64,
}

pub fn hetero_theory_cov(
    spec: &DistributionSpec,
    sigma_fn: &dyn Fn(usize, usize) -> f64,
    i: usize,
    n: usize,
) -> Result<HeteroTheory> {
    if i >= n {
        return Err(Error::invalid(format!("row {i} out of range for n = {n}")));
    }
    let mom = moments(spec)?;
    let mut total = 0.0;
    for j in (0..n).filter(|&j| j != i) {
        let (a, b) = (sigma_fn(i, j), sigma_fn(j, i));
        if a != b {
            return Err(Error::invalid(format!(
                "sigma rule is not symmetric at ({i}, {j}): {a} vs {b}"
            )));
        }
        total += a * a;
    }
    let mean_sigma2 = total / n as f64;
    let sigma_i = symmetrize(&(&mom.xi * mean_sigma2));
    let whitening = spd_power(&sigma_i, -0.5).ok().map(|w| serde_rows::to_rows(&w));
    let xi_inv = spd_inverse(&mom.xi)?;
    let conjugated = symmetrize(&(&xi_inv * &sigma_i * &xi_inv));
    let implied = &conjugated * 0.25;
    Ok(HeteroTheory {
        sigma_i,
        whitening,
        conjugated,
        implied,
        mean_sigma2,
    })
}

/// Rotation `R = S Qᵀ` into the principal-axes frame of `xi` (largest axis first),
/// with axis signs `S` chosen so `R · theory · Rᵀ` is closest to `reference`.
pub fn principal_frame(
    xi: &DMatrix<f64>,
    theory: &DMatrix<f64>,
    reference: Option<&DMatrix<f64>>,
) -> Result<DMatrix<f64>> {
    let d = xi.nrows();
    if !xi.is_square() || theory.shape() != (d, d) {
        return Err(Error::dim("frame matrices must be square and of equal order"));
    }
    if d > 16 {
        return Err(Error::invalid("principal frame sign search supports d <= 16"));
    }
    let eig = nalgebra::SymmetricEigen::new(symmetrize(xi));
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let mut q = DMatrix::from_fn(d, d, |r, c| eig.eigenvectors[(r, order[c])]);
    crate::linalg::fix_signs(&mut q);
    let base = q.transpose();
    let Some(reference) = reference else {
        return Ok(base);
    };
    let mut best = base.clone();
    let mut best_dist = f64::INFINITY;
    for mask in 0u32..(1 << d) {
        let s = DMatrix::from_fn(d, d, |r, c| {
            if r != c {
                0.0
            } else if mask & (1 << r) != 0 {
                -1.0
            } else {
                1.0
            }
        });
        let r = &s * &base;
        let dist = (&r * theory * r.transpose() - reference).norm();
        if dist < best_dist - 1e-12 {
            best_dist = dist;
            best = r;
        }
    }
    Ok(best)
}
