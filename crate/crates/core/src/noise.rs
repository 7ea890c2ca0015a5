//! Noise models that turn a distance matrix into observed dissimilarities.
//!
//! Entry `(i, j)` with `i < j` always reads draw `(seed, stream i, slot j)`, so
//! regenerating or masking one entry never shifts another.

use std::fmt::Debug;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::linalg::SymmetricMatrix;
use crate::registry::{self, Registry};
use crate::rng::{CounterRng, Draw};

/// Centered scalar law for a single noise entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseLaw {
    /// Uniform on `[-a, a]`.
    Uniform { a: f64 },
    /// Centered normal with standard deviation `sigma`.
    Gaussian { sigma: f64 },
    /// Takes `a` with probability `b / (a + b)` and `-b` otherwise.
    TwoPoint { a: f64, b: f64 },
}

/// Second, third and fourth moments of a centered law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseMoments {
    pub sigma2: f64,
    pub gamma: f64,
    pub xi4: f64,
}

impl NoiseLaw {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            NoiseLaw::Uniform { a } => a.is_finite() && a >= 0.0,
            NoiseLaw::Gaussian { sigma } => sigma.is_finite() && sigma >= 0.0,
            NoiseLaw::TwoPoint { a, b } => a.is_finite() && b.is_finite() && a > 0.0 && b > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid noise law {self:?}")))
        }
    }

    pub fn moments(&self) -> NoiseMoments {
        match *self {
            NoiseLaw::Uniform { a } => NoiseMoments {
                sigma2: a * a / 3.0,
                gamma: 0.0,
                xi4: a.powi(4) / 5.0,
            },
            NoiseLaw::Gaussian { sigma } => NoiseMoments {
                sigma2: sigma * sigma,
                gamma: 0.0,
                xi4: 3.0 * sigma.powi(4),
            },
            NoiseLaw::TwoPoint { a, b } => NoiseMoments {
                sigma2: a * b,
                gamma: a * b * (a - b),
                xi4: a * b * (a * a - a * b + b * b),
            },
        }
    }

    pub fn std_dev(&self) -> f64 {
        match *self {
            NoiseLaw::Uniform { a } => a / 3f64.sqrt(),
            NoiseLaw::Gaussian { sigma } => sigma,
            NoiseLaw::TwoPoint { a, b } => (a * b).sqrt(),
        }
    }

    /// A draw of the law rescaled to unit variance.
    pub fn unit_sample(&self, draw: &Draw) -> f64 {
        match *self {
            NoiseLaw::Uniform { .. } => 3f64.sqrt() * (2.0 * draw.uniform(0) - 1.0),
            NoiseLaw::Gaussian { .. } => draw.normal(),
            NoiseLaw::TwoPoint { a, b } => {
                let s = (a * b).sqrt();
                if draw.uniform(0) < b / (a + b) {
                    a / s
                } else {
                    -b / s
                }
            }
        }
    }

    pub fn sample(&self, draw: &Draw) -> f64 {
        self.std_dev() * self.unit_sample(draw)
    }
}

/// Scalar weight `w(r)` in `E[w(‖z − Z‖)(Z − μ)(Z − μ)ᵀ]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceWeight {
    /// `σ² r² + γ r + ξ/4 − σ⁴/4`.
    Additive(NoiseMoments),
    /// `(1 − q)/4 · r⁴`.
    Masked { q: f64 },
}

impl DistanceWeight {
    pub fn eval(&self, r: f64) -> f64 {
        match *self {
            DistanceWeight::Additive(m) => {
                m.sigma2 * r * r + m.gamma * r + 0.25 * m.xi4 - 0.25 * m.sigma2 * m.sigma2
            }
            DistanceWeight::Masked { q } => 0.25 * (1.0 - q) * r.powi(4),
        }
    }
}

/// How the limiting row covariance of a noise model is formed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CltKernel {
    /// `σ²/4 · Ξ⁻¹`, the same at every location.
    Homogeneous { sigma2: f64 },
    /// `Ξ⁻¹ E[w(‖z − Z‖)(Z − μ)(Z − μ)ᵀ] Ξ⁻¹`.
    DistanceWeighted(DistanceWeight),
    Unavailable,
}

/// Observed dissimilarities and the noise that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    pub delta_sq: SymmetricMatrix,
    /// Absent when the model perturbs squared distances directly.
    pub delta: Option<SymmetricMatrix>,
    pub noise: SymmetricMatrix,
}

pub trait NoiseModel: Debug + Send + Sync {
    fn name(&self) -> &'static str;

    /// The serializable description this model was built from.
    fn spec(&self) -> NoiseSpec;

    fn moments(&self) -> Option<NoiseMoments> {
        None
    }

    /// Factor by which the embedding shrinks relative to the centered latent points.
    fn center_scale(&self) -> f64 {
        1.0
    }

    fn clt_kernel(&self) -> CltKernel {
        CltKernel::Unavailable
    }

    /// Per-pair standard deviation rule, for heteroscedastic models.
    fn sigma_rule(&self) -> Option<SigmaRule> {
        None
    }

    /// Perturbs a hollow, non-negative distance matrix.
    fn perturb(&self, d: &SymmetricMatrix, seed: u64) -> Result<Perturbation>;
}

/// Serializable noise description: `{"model": "<name>", ...params}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub model: String,
    #[serde(flatten)]
    pub params: Map<String, Value>,
}

impl NoiseSpec {
    pub fn new(model: &str, params: Value) -> Self {
        let params = match params {
            Value::Object(m) => m,
            _ => Map::new(),
        };
        Self {
            model: model.to_owned(),
            params,
        }
    }

    pub fn build(&self) -> Result<Box<dyn NoiseModel>> {
        noise_registry().build(&self.model, &Value::Object(self.params.clone()))
    }
}

fn spec_of<T: Serialize>(name: &str, params: &T) -> NoiseSpec {
    NoiseSpec::new(name, serde_json::to_value(params).unwrap_or(Value::Null))
}

/// Registered noise models by name.
pub fn noise_registry() -> &'static Registry<dyn NoiseModel> {
    static REG: OnceLock<Registry<dyn NoiseModel>> = OnceLock::new();
    REG.get_or_init(|| {
        let mut r: Registry<dyn NoiseModel> = Registry::new("noise model");
        for name in [SquaredAdditiveNoise::NAME, "model1_sq_additive"] {
            r.register(name, |p| {
                let m: SquaredAdditiveNoise = registry::params(p)?;
                m.law.validate()?;
                Ok(Box::new(m))
            });
        }
        for name in [AdditiveNoise::NAME, "model2_additive"] {
            r.register(name, |p| {
                let m: AdditiveNoise = registry::params(p)?;
                m.law.validate()?;
                Ok(Box::new(m))
            });
        }
        for name in [MaskedNoise::NAME, "model3_mask"] {
            r.register(name, |p| {
                let m: MaskedNoise = registry::params(p)?;
                MaskedNoise::new(m.q).map(|m| Box::new(m) as Box<dyn NoiseModel>)
            });
        }
        r.register(HeteroSquaredAdditiveNoise::NAME, |p| {
            let m: HeteroSquaredAdditiveNoise = registry::params(p)?;
            m.law.validate()?;
            m.sigma_rule.validate()?;
            Ok(Box::new(m))
        });
        r.register(ScaledUniformNoise::NAME, |p| {
            let m: ScaledUniformNoise = registry::params(p)?;
            Ok(Box::new(m))
        });
        r
    })
}

fn check_distance_matrix(d: &SymmetricMatrix) -> Result<()> {
    d.check_hollow()?;
    if let Some(v) = d.as_matrix().iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::invalid(format!(
            "distance matrix entries must be finite and non-negative, found {v}"
        )));
    }
    Ok(())
}

/// Builds a hollow symmetric matrix whose `(i, j)` entry, `i < j`, is `f(i, j, draw)`.
fn entrywise_noise(
    n: usize,
    seed: u64,
    mut f: impl FnMut(usize, usize, &Draw) -> f64,
) -> SymmetricMatrix {
    let mut rng = CounterRng::new(seed);
    let mut upper = nalgebra::DMatrix::zeros(n, n);
    for i in 0..n {
        if i + 1 < n {
            rng.seek(i as u64, (i + 1) as u64);
        }
        for j in i + 1..n {
            let draw = rng.next_draw();
            upper[(i, j)] = f(i, j, &draw);
        }
    }
    SymmetricMatrix::hollow_from_fn(n, |i, j| upper[(i, j)])
}

/// `Δ² = D² + E` with i.i.d. entries of `E`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SquaredAdditiveNoise {
    pub law: NoiseLaw,
}

impl SquaredAdditiveNoise {
    pub const NAME: &'static str = "model1";
}

impl NoiseModel for SquaredAdditiveNoise {
    fn name(&self) -> &'static str {
        Self::NAME
    }

    fn spec(&self) -> NoiseSpec {
        spec_of(Self::NAME, self)
    }

    fn moments(&self) -> Option<NoiseMoments> {
        Some(self.law.moments())
    }

    fn clt_kernel(&self) -> CltKernel {
        CltKernel::Homogeneous {
            sigma2: self.law.moments().sigma2,
        }
    }

    fn perturb(&self, d: &SymmetricMatrix, seed: u64) -> Result<Perturbation> {
        check_distance_matrix(d)?;
        let law = self.law;
        let noise = entrywise_noise(d.n(), seed, |_, _, draw| law.sample(draw));
        let delta_sq = d.squared().add(&noise)?;
        Ok(Perturbation {
            delta_sq,
            delta: None,
            noise,
        })
    }
}

/// `Δ = D + E` with i.i.d. entries of `E`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdditiveNoise {
    pub law: NoiseLaw,
}

impl AdditiveNoise {
    pub const NAME: &'static str = "model2";
}

impl NoiseModel for AdditiveNoise {
    fn name(&self) -> &'static str {
        Self::NAME
    }

    fn spec(&self) -> NoiseSpec {
        spec_of(Self::NAME, self)
    }

    fn moments(&self) -> Option<NoiseMoments> {
        Some(self.law.moments())
    }

    fn clt_kernel(&self) -> CltKernel {
        CltKernel::DistanceWeighted(DistanceWeight::Additive(self.law.moments()))
    }

    fn perturb(&self, d: &SymmetricMatrix, seed: u64) -> Result<Perturbation> {
        check_distance_matrix(d)?;
        let law = self.law;
        let noise = entrywise_noise(d.n(), seed, |_, _, draw| law.sample(draw));
        let delta = d.add(&noise)?;
        Ok(Perturbation {
            delta_sq: delta.squared(),
            delta: Some(delta),
            noise,
        })
    }
}

/// Each distance is observed with probability `q` and recorded as 0 otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaskedNoise {
    pub q: f64,
}

impl MaskedNoise {
    pub const NAME: &'static str = "model3";

    pub fn new(q: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::invalid(format!("observation probability {q} not in [0, 1]")));
        }
        Ok(Self { q })
    }
}

impl NoiseModel for MaskedNoise {
    fn name(&self) -> &'static str {
        Self::NAME
    }

    fn spec(&self) -> NoiseSpec {
        spec_of(Self::NAME, self)
    }

    fn center_scale(&self) -> f64 {
        self.q.sqrt()
    }

    fn clt_kernel(&self) -> CltKernel {
        CltKernel::DistanceWeighted(DistanceWeight::Masked { q: self.q })
    }

    fn perturb(&self, d: &SymmetricMatrix, seed: u64) -> Result<Perturbation> {
        check_distance_matrix(d)?;
        let q = self.q;
        let delta = entrywise_noise(d.n(), seed, |i, j, draw| {
            if draw.uniform(0) < q {
                d.get(i, j)
            } else {
                0.0
            }
        });
        let noise = delta.sub(d)?;
        Ok(Perturbation {
            delta_sq: delta.squared(),
            delta: Some(delta),
            noise,
        })
    }
}

/// Per-pair standard deviation for heteroscedastic squared-distance noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SigmaRule {
    Constant { sigma: f64 },
    /// `base + slope · |i − j| / n`.
    IndexLag { base: f64, slope: f64 },
    /// `c` when both indices are even, 0 otherwise.
    EvenPairs { c: f64 },
}

impl SigmaRule {
    pub fn sigma(&self, i: usize, j: usize, n: usize) -> f64 {
        match *self {
            SigmaRule::Constant { sigma } => sigma,
            SigmaRule::IndexLag { base, slope } => base + slope * i.abs_diff(j) as f64 / n as f64,
            SigmaRule::EvenPairs { c } => {
                if i.is_multiple_of(2) && j.is_multiple_of(2) {
                    c
                } else {
                    0.0
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            SigmaRule::Constant { sigma } => sigma.is_finite() && sigma >= 0.0,
            SigmaRule::IndexLag { base, slope } => {
                base.is_finite() && slope.is_finite() && base >= 0.0 && base + slope >= 0.0
            }
            SigmaRule::EvenPairs { c } => c.is_finite() && c >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid sigma rule {self:?}")))
        }
    }
}

fn default_unit_law() -> NoiseLaw {
    NoiseLaw::Gaussian { sigma: 1.0 }
}

/// `Δ² = D² + E` with `Var(E_ij)` given by a per-pair rule. Only the shape of `law` is used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeteroSquaredAdditiveNoise {
    pub sigma_rule: SigmaRule,
    #[serde(default = "default_unit_law")]
    pub law: NoiseLaw,
}

impl HeteroSquaredAdditiveNoise {
    pub const NAME: &'static str = "model1_hetero";
}

impl NoiseModel for HeteroSquaredAdditiveNoise {
    fn name(&self) -> &'static str {
        Self::NAME
    }

    fn spec(&self) -> NoiseSpec {
        spec_of(Self::NAME, self)
    }

    fn clt_kernel(&self) -> CltKernel {
        match self.sigma_rule {
            SigmaRule::Constant { sigma } => CltKernel::Homogeneous {
                sigma2: sigma * sigma,
            },
            _ => CltKernel::Unavailable,
        }
    }

    fn sigma_rule(&self) -> Option<SigmaRule> {
        Some(self.sigma_rule)
    }

    fn perturb(&self, d: &SymmetricMatrix, seed: u64) -> Result<Perturbation> {
        let n = d.n();
        let rule = self.sigma_rule;
        let delta_sq = hetero_model1(d, &|i, j| rule.sigma(i, j, n), self.law, seed)?;
        let noise = delta_sq.sub(&d.squared())?;
        Ok(Perturbation {
            delta_sq,
            delta: None,
            noise,
        })
    }
}

/// `Δ = D + Ẽ` with `Ẽ_ij` uniform on `[−D_ij, D_ij]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaledUniformNoise {}

impl ScaledUniformNoise {
    pub const NAME: &'static str = "model2_hetero_uniform_scaled";
}

impl NoiseModel for ScaledUniformNoise {
    fn name(&self) -> &'static str {
        Self::NAME
    }

    fn spec(&self) -> NoiseSpec {
        spec_of(Self::NAME, self)
    }

    fn perturb(&self, d: &SymmetricMatrix, seed: u64) -> Result<Perturbation> {
        let delta = hetero_uniform_scaled(d, seed)?;
        let noise = delta.sub(d)?;
        Ok(Perturbation {
            delta_sq: delta.squared(),
            delta: Some(delta),
            noise,
        })
    }
}

/// Perturbs `d` with the model described by `spec`.
pub fn perturb(d: &SymmetricMatrix, spec: &NoiseSpec, seed: u64) -> Result<Perturbation> {
    spec.build()?.perturb(d, seed)
}

/// `Δ = D + Ẽ` with `Ẽ_ij ~ Uniform(−D_ij, D_ij)` independently on the upper triangle.
pub fn hetero_uniform_scaled(d: &SymmetricMatrix, seed: u64) -> Result<SymmetricMatrix> {
    check_distance_matrix(d)?;
    Ok(entrywise_noise(d.n(), seed, |i, j, draw| {
        let dij = d.get(i, j);
        dij + dij * (2.0 * draw.uniform(0) - 1.0)
    }))
}

/// `Δ² = D² + E` with `E_ij = sigma_fn(i, j) · (unit-variance draw of law)`.
pub fn hetero_model1(
    d: &SymmetricMatrix,
    sigma_fn: &dyn Fn(usize, usize) -> f64,
    law: NoiseLaw,
    seed: u64,
) -> Result<SymmetricMatrix> {
    check_distance_matrix(d)?;
    law.validate()?;
    let n = d.n();
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (sigma_fn(i, j), sigma_fn(j, i));
            if a != b {
                return Err(Error::invalid(format!(
                    "sigma rule is not symmetric: sigma({i}, {j}) = {a} but sigma({j}, {i}) = {b}"
                )));
            }
            if !(a.is_finite() && a >= 0.0) {
                return Err(Error::invalid(format!("sigma({i}, {j}) = {a} is not a valid std-dev")));
            }
        }
    }
    let noise = entrywise_noise(n, seed, |i, j, draw| sigma_fn(i, j) * law.unit_sample(draw));
    d.squared().add(&noise)
}
