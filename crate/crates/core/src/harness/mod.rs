//! Monte Carlo experiments: sample, perturb, embed, align, aggregate.

mod config;
mod ellipse;
mod normality;
mod run;

pub use config::{Checks, ExperimentConfig};
pub use ellipse::{chi2_2_quantile, ellipse_points, ELLIPSE_POINTS};
pub use normality::{
    kolmogorov_cdf, kolmogorov_quantile, ks_critical_value, ks_statistic, normality_check,
    normality_check_at, NormalityResult, MIN_NORMALITY_SAMPLES, NORMALITY_ALPHA,
};
pub use run::{
    hetero_bias_experiment, replicate_seed, run, BiasRow, ClassReport, FailedReplicate,
    HeteroBiasReport, McReport, Rows, SizeReport, StressSummary, Table1Block, BIAS_SE_THRESHOLD,
};
