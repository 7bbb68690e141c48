use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::regularizers::RegularizerKind;
use crate::spectral::POWER_SAFETY;

/// Feasible set for the basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisConstraint {
    Unconstrained,
    Nonnegative,
}

/// Tunables of the robust volume-minimization solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Fitting exponent in `(0, 2]`; smaller values downweight outliers harder.
    pub p: f64,
    /// Volume regularization weight.
    pub lambda: f64,
    /// Smoothing added to every squared residual.
    pub epsilon: f64,
    pub regularizer: RegularizerKind,
    pub basis_constraint: BasisConstraint,
    /// Evaluate the coefficient gradient at a momentum point.
    pub extrapolate: bool,
    /// Reset the momentum sequence whenever the objective goes up.
    pub restart: bool,
    pub max_iter: usize,
    /// Stop once the absolute objective change drops below this.
    pub tol: f64,
    /// Inflation factor on power-iteration step-size estimates.
    pub safety_delta: f64,
    pub rng_seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            p: 0.5,
            lambda: 0.5,
            epsilon: 1e-12,
            regularizer: RegularizerKind::LogDet { tau: 1e-8 },
            basis_constraint: BasisConstraint::Unconstrained,
            extrapolate: true,
            restart: false,
            max_iter: 1000,
            tol: 1e-5,
            safety_delta: POWER_SAFETY,
            rng_seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p <= 2.0) {
            return Err(invalid(format!("p must lie in (0, 2], got {}", self.p)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(invalid(format!(
                "lambda must be finite and >= 0, got {}",
                self.lambda
            )));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(invalid(format!(
                "epsilon must be finite and >= 0, got {}",
                self.epsilon
            )));
        }
        if self.p < 1.0 && self.epsilon <= 0.0 {
            return Err(invalid("epsilon must be positive when p < 1"));
        }
        if !(self.tol >= 0.0) {
            return Err(invalid("tol must be nonnegative"));
        }
        if !(self.safety_delta >= 0.0 && self.safety_delta.is_finite()) {
            return Err(invalid("safety_delta must be finite and nonnegative"));
        }
        self.regularizer.validate()
    }

    /// `τ` used by the log-det fallback for the determinant regularizer.
    pub(crate) fn fallback_tau(&self) -> f64 {
        match self.regularizer {
            RegularizerKind::LogDet { tau } => tau,
            _ => 1e-8,
        }
    }
}
