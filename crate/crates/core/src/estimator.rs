//! Embedding estimators selectable by name.

use std::fmt::Debug;
use std::sync::OnceLock;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cmds::{embed_with, EmbedOptions, SCREE_EXTRA};
use crate::error::{Error, Result};
use crate::noise::Perturbation;
use crate::rawstress::{minimize_stress, StressOptions};
use crate::registry::{self, Registry};

/// Output of one estimator run.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub config: DMatrix<f64>,
    /// Leading eigenvalues of the double-centered matrix, when the estimator computes them.
    pub eigenvalues: Option<Vec<f64>>,
    /// Objective values per iteration, for iterative estimators.
    pub stress_history: Option<Vec<f64>>,
    pub warnings: Vec<String>,
}

pub trait Estimator: Debug + Send + Sync {
    fn name(&self) -> &'static str;

    /// Embeds observed dissimilarities in `d` dimensions.
    /// `scree` asks for a few eigenvalues beyond `d` when the estimator has them.
    fn estimate(&self, input: &Perturbation, d: usize, scree: bool) -> Result<Estimate>;
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CmdsEstimator {
    pub allow_deficient: bool,
}

impl CmdsEstimator {
    pub const NAME: &'static str = "cmds";
}

impl Estimator for CmdsEstimator {
    fn name(&self) -> &'static str {
        Self::NAME
    }

    fn estimate(&self, input: &Perturbation, d: usize, scree: bool) -> Result<Estimate> {
        let opts = EmbedOptions {
            allow_deficient: self.allow_deficient,
            extra_eigenvalues: if scree { SCREE_EXTRA } else { 0 },
        };
        let e = embed_with(&input.delta_sq, d, &opts)?;
        let mut warnings = Vec::new();
        if !e.flags.deficient.is_empty() {
            warnings.push(format!("zero-filled columns {:?}", e.flags.deficient));
        }
        if e.flags.degenerate {
            warnings.push("degenerate eigenvalues at the cut".to_owned());
        }
        Ok(Estimate {
            config: e.config,
            eigenvalues: Some(e.all_top_eigenvalues),
            stress_history: None,
            warnings,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RawStressEstimator {
    pub options: StressOptions,
}

impl RawStressEstimator {
    pub const NAME: &'static str = "rawstress";
}

impl Estimator for RawStressEstimator {
    fn name(&self) -> &'static str {
        Self::NAME
    }

    fn estimate(&self, input: &Perturbation, d: usize, _scree: bool) -> Result<Estimate> {
        let delta = input.delta.as_ref().ok_or_else(|| {
            Error::Unsupported(
                "raw stress needs dissimilarities; this noise model only produces squared ones".into(),
            )
        })?;
        let state = minimize_stress(delta, d, &self.options)?;
        let mut warnings = Vec::new();
        if state.coincident_points {
            warnings.push("coincident points during majorization".to_owned());
        }
        if !state.converged {
            warnings.push(format!("stopped after {} iterations", state.iteration));
        }
        Ok(Estimate {
            config: state.config,
            eigenvalues: None,
            stress_history: Some(state.history),
            warnings,
        })
    }
}

/// Registered estimators by name.
pub fn estimator_registry() -> &'static Registry<dyn Estimator> {
    static REG: OnceLock<Registry<dyn Estimator>> = OnceLock::new();
    REG.get_or_init(|| {
        let mut r: Registry<dyn Estimator> = Registry::new("estimator");
        r.register(CmdsEstimator::NAME, |p| {
            Ok(Box::new(registry::params::<CmdsEstimator>(p)?))
        });
        r.register(RawStressEstimator::NAME, |p| {
            Ok(Box::new(registry::params::<RawStressEstimator>(p)?))
        });
        r
    })
}
