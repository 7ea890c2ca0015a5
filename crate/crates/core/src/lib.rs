//! Classical multidimensional scaling under noisy dissimilarities, limiting
//! covariances of the embedded rows, and a Monte Carlo harness that checks them.
//!
//! The pipeline is: [`points::sample`] latent positions, [`noise`] to perturb their
//! distances, [`cmds::embed`] (or [`rawstress::minimize_stress`]) to recover a
//! configuration, [`clt::align`] to fix the orthogonal ambiguity, and
//! [`harness::run`] to repeat all of it and compare with [`clt::theory_cov`].

// `!(x > t)` is used on purpose so NaN fails positivity checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clt;
pub mod cmds;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod noise;
pub mod points;
pub mod rawstress;
pub mod registry;
pub mod rng;
pub mod serde_rows;

pub use error::{Error, Result};
pub use linalg::{double_center, top_eigs, SpectralPair, SymmetricMatrix};
