use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::estimator::{estimator_registry, Estimator};
use crate::noise::{NoiseModel, NoiseSpec};
use crate::points::{DistributionSpec, DEFAULT_MC_DRAWS};

/// Which diagnostics a run computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Checks {
    /// Theoretical covariances and normality per class.
    pub clt: bool,
    /// First-class covariance in the principal-axes frame of the latent covariance.
    pub table1: bool,
    /// Six-term expansion on the first replicate of each size.
    pub decomposition: bool,
    /// Rate-normalized perturbation bounds across `n_list`.
    pub bounds: bool,
    /// Persistence of class-mean bias across `n_list`.
    pub hetero_bias: bool,
}

impl Default for Checks {
    fn default() -> Self {
        Self {
            clt: true,
            table1: false,
            decomposition: false,
            bounds: false,
            hetero_bias: false,
        }
    }
}

fn default_estimator() -> String {
    "cmds".to_owned()
}

fn default_mc_draws() -> usize {
    DEFAULT_MC_DRAWS
}

/// A Monte Carlo experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub distribution: DistributionSpec,
    pub noise: NoiseSpec,
    pub n_list: Vec<usize>,
    pub d: usize,
    pub replicates: usize,
    pub seed: u64,
    #[serde(default = "default_estimator")]
    pub estimator: String,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub estimator_params: Value,
    #[serde(default)]
    pub checks: Checks,
    /// Draws for Monte Carlo expectations over continuous distributions.
    #[serde(default = "default_mc_draws")]
    pub mc_draws: usize,
    /// Reference covariance that fixes axis signs of the principal-axes frame.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table1_reference: Option<Vec<Vec<f64>>>,
    /// Directory for per-size CSV dumps of aligned rows.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_dump_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn noise_model(&self) -> Result<Box<dyn NoiseModel>> {
        self.noise.build()
    }

    pub fn estimator(&self) -> Result<Box<dyn Estimator>> {
        estimator_registry().build(&self.estimator, &self.estimator_params)
    }

    pub fn validate(&self) -> Result<()> {
        self.distribution.validate()?;
        self.noise_model()?;
        self.estimator()?;
        if self.replicates < 2 {
            return Err(Error::invalid("replicates must be at least 2"));
        }
        if self.n_list.is_empty() || self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("n_list must be non-empty and strictly ascending"));
        }
        if self.d == 0 || self.d != self.distribution.dim() {
            return Err(Error::invalid(format!(
                "embedding dimension {} must equal the latent dimension {}",
                self.d,
                self.distribution.dim()
            )));
        }
        if self.n_list[0] < self.d + 2 {
            return Err(Error::invalid(format!("every n must be at least d + 2 = {}", self.d + 2)));
        }
        if self.checks.bounds && self.n_list.len() < 3 {
            return Err(Error::invalid("the bounds check needs at least 3 sizes in n_list"));
        }
        if self.checks.hetero_bias && self.distribution.locations().is_none() {
            return Err(Error::invalid("the hetero_bias check needs a point-mass mixture"));
        }
        if let Some(r) = &self.table1_reference {
            if r.len() != self.d || r.iter().any(|row| row.len() != self.d) {
                return Err(Error::dim(format!("table1_reference must be {0}x{0}", self.d)));
            }
        }
        if self.mc_draws < 2 {
            return Err(Error::invalid("mc_draws must be at least 2"));
        }
        Ok(())
    }
}
