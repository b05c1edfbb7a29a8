//! High-dimensional mediation path analysis.
//!
//! This crate estimates how an exposure block `X` influences an outcome `Y`
//! both directly and indirectly through a block of mediators `M`. The
//! pipeline is:
//!
//! 1. [`dataset`] — load a CSV, validate it, and residualize every variable
//!    on the confounders (or just mean-center when there are none).
//! 2. [`pca`] — compress the exposures into `q` uncorrelated principal
//!    component scores `X̃`.
//! 3. [`solver`] — fit the two-equation linear structural model
//!    `M = X̃α + ε`, `Y = X̃γ + Mβ + η` by penalized least squares with a
//!    pathway penalty on the products `α_jk β_k`, solved by an augmented
//!    Lagrangian scheme with closed-form block updates.
//! 4. [`tuning`] — grid-search the penalty weights by BIC.
//! 5. [`effects`] — report direct, indirect, and total effects per
//!    exposure component.
//! 6. [`simulation`] — generate synthetic datasets with planted sparse
//!    path effects and score recovery quality across replicates.
//!
//! All numeric code is pure Rust (via `nalgebra`), so results are
//! bit-reproducible for a given seed and configuration, including when the
//! tuning grid or simulation replicates run on a rayon thread pool.

pub mod dataset;
pub mod effects;
pub mod error;
pub mod pca;
pub mod penalties;
pub mod simulation;
pub mod solver;
pub mod tuning;
pub(crate) mod util;

pub use error::{Error, Result};

// Matrices in the public API are nalgebra types; re-export the crate so
// downstream code can name them without pinning its own copy.
pub use nalgebra;
