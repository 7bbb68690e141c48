//! Outlier-robust volume-minimization matrix factorization.
//!
//! Factors a data matrix `X ≈ B·C` where every column of `C` lies on the unit
//! simplex, fitting with a per-sample `ℓ2/ℓp` loss that automatically
//! downweights outlying columns and regularizing the volume of the simplex
//! spanned by the columns of `B`.
//!
//! Modules:
//! - [`simplex`], [`spectral`], [`metrics`], [`matrix`]: shared primitives.
//! - [`regularizers`]: volume measures and their majorizers.
//! - [`solver`]: the block-coordinate majorization-minimization loop.
//! - [`identifiability`]: a certifier for the sufficiently-scattered condition.
//! - [`synth`]: synthetic instances and seeded Monte-Carlo sweeps.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod identifiability;
pub mod inf_serde;
pub mod matrix;
pub mod metrics;
pub mod regularizers;
pub mod simplex;
pub mod solver;
pub mod spectral;
pub mod synth;

pub use error::{Error, Result};
pub use matrix::{DataMatrix, FactorModel};
pub use metrics::{permutation_matched_mse, snr_db, sor_db, MetricConfig};
pub use regularizers::RegularizerKind;
pub use simplex::project_simplex;
pub use solver::{solve, solve_best_of, BasisConstraint, InitStrategy, SolveReport, SolverConfig};
pub use spectral::spectral_bound;
