//! Limiting row covariances, Procrustes alignment and perturbation diagnostics.

mod align;
mod bounds;
mod decompose;
mod theory;

pub use align::{align, polar_factor, Alignment};
pub use bounds::{
    bound_checks, bound_ratios, growth_check, BoundRatios, BoundRow, BoundTable, GrowthCheck,
    RatioSpread, GROWTH_FACTOR, RATIO_NAMES, SPREAD_LIMIT,
};
pub use decompose::{decompose, DecompositionReport, DecompositionSummary};
pub use theory::{
    hetero_theory_cov, integrated_cov, principal_frame, theory_cov, theory_cov_at, ClassCov,
    HeteroTheory, TheoryCov,
};

