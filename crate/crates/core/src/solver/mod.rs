//! Robust volume-minimization solver.
//!
//! Each outer iteration performs, in order:
//!
//! 1. one projected-gradient step per coefficient column (optionally from a
//!    Nesterov-style extrapolated point),
//! 2. one basis update against the weighted quadratic majorizer,
//! 3. a refresh of the per-sample robust weights,
//! 4. a refresh of the volume majorizer matrix.
//!
//! Weights start at one and the majorizer at the identity, so the very first
//! basis update is an ordinary least-squares fit with a ridge term. From the
//! second iteration onward both are tight at the current iterate and, without
//! extrapolation, the recorded objective is non-increasing.

mod config;
mod init;
mod surrogate;
mod updates;

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use config::{BasisConstraint, SolverConfig};
pub use init::{init_strategy, InitKind, InitStrategy};
pub use surrogate::{basis_surrogate, coeff_surrogate};
pub use updates::{
    conjugate_term, next_momentum, objective, squared_residuals, update_b, update_c,
    update_weights, weight_for, BasisStep, ARMIJO_MAX_HALVINGS, ARMIJO_SIGMA,
};

use crate::error::{invalid, Error, Result};
use crate::matrix::{DataMatrix, FactorModel};
use crate::regularizers::{majorizer, MajorizerMatrix};
use crate::spectral::psd_bound_with;
use crate::synth::splitmix64;
use updates::objective_unchecked;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    Tolerance,
    MaxIter,
}

/// Mutable iterate owned by a single solve.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub model: FactorModel,
    pub weights: DVector<f64>,
    /// `None` for the determinant regularizer after the first iteration.
    pub majorizer: Option<MajorizerMatrix>,
    /// Momentum sequence value for the next coefficient step.
    pub q: f64,
    pub coeffs_prev: DMatrix<f64>,
    pub objective_history: Vec<f64>,
    pub iteration: usize,
}

/// Diagnostics of one outer iteration.
#[derive(Debug, Clone)]
pub struct StepInfo {
    pub objective: f64,
    /// Step-size denominator of the coefficient update.
    pub lipschitz: f64,
    pub basis_step: BasisStep,
}

impl SolverState {
    /// Starts from `init` with unit weights and an identity majorizer.
    pub fn new(x: &DataMatrix, init: FactorModel, config: &SolverConfig) -> Result<Self> {
        config.validate()?;
        let k = init.rank();
        if init.basis.nrows() != x.rows() || init.coeffs.ncols() != x.cols() {
            return Err(invalid("initial model does not match the data shape"));
        }
        let mut model = init;
        if config.basis_constraint == BasisConstraint::Nonnegative {
            model.basis.apply(|v| *v = v.max(0.0));
        }
        Ok(Self {
            coeffs_prev: model.coeffs.clone(),
            weights: DVector::from_element(x.cols(), 1.0),
            majorizer: Some(MajorizerMatrix::identity(k)),
            q: 1.0,
            objective_history: Vec::new(),
            iteration: 0,
            model,
        })
    }

    pub fn objective(&self, x: &DataMatrix, config: &SolverConfig) -> f64 {
        objective_unchecked(x.as_matrix(), &self.model.basis, &self.model.coeffs, config)
    }

    /// Runs one outer iteration and records its objective.
    pub fn step(&mut self, x: &DataMatrix, config: &SolverConfig) -> Result<StepInfo> {
        let xm = x.as_matrix();
        let lipschitz = psd_bound_with(
            &self.model.basis.tr_mul(&self.model.basis),
            config.safety_delta,
        );

        let coeffs = if config.extrapolate {
            let q_next = next_momentum(self.q);
            let c = update_c(
                xm,
                &self.model.basis,
                &self.model.coeffs,
                Some((&self.coeffs_prev, self.q, q_next)),
                lipschitz,
            );
            self.q = q_next;
            c
        } else {
            update_c(xm, &self.model.basis, &self.model.coeffs, None, lipschitz)
        };
        self.coeffs_prev = std::mem::replace(&mut self.model.coeffs, coeffs);

        let basis_step = update_b(
            xm,
            &self.model.basis,
            &self.model.coeffs,
            &self.weights,
            self.majorizer.as_ref(),
            config,
        )?;
        self.model.basis = basis_step.basis.clone();

        self.weights = update_weights(
            xm,
            &self.model.basis,
            &self.model.coeffs,
            config.p,
            config.epsilon,
        );
        self.majorizer = majorizer(&self.model.basis, config.regularizer)?;

        let objective = self.objective(x, config);
        if !objective.is_finite() {
            return Err(Error::NonFinite(format!(
                "objective became {objective} at iteration {}",
                self.iteration + 1
            )));
        }
        if config.restart
            && self
                .objective_history
                .last()
                .is_some_and(|&prev| objective > prev)
        {
            self.q = 1.0;
            self.coeffs_prev = self.model.coeffs.clone();
        }
        self.objective_history.push(objective);
        self.iteration += 1;
        Ok(StepInfo {
            objective,
            lipschitz,
            basis_step,
        })
    }

    /// True once the last two recorded objectives differ by less than `tol`.
    pub fn converged(&self, tol: f64) -> bool {
        match self.objective_history.as_slice() {
            [.., a, b] => (a - b).abs() < tol,
            _ => false,
        }
    }
}

/// Result of [`solve`].
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub model: FactorModel,
    pub weights: DVector<f64>,
    /// Objective at the initial factors, before any update.
    pub initial_objective: f64,
    /// Objective after each completed iteration.
    pub objective_history: Vec<f64>,
    pub iterations_used: usize,
    pub termination_reason: TerminationReason,
    /// Seconds.
    pub wall_time: f64,
}

impl SolveReport {
    /// Last recorded objective, or the initial one if no iteration ran.
    pub fn final_objective(&self) -> f64 {
        self.objective_history
            .last()
            .copied()
            .unwrap_or(self.initial_objective)
    }
}

/// Factorizes `x ≈ B·C` with `K` basis columns.
pub fn solve(
    x: &DataMatrix,
    k: usize,
    init: &InitStrategy,
    config: &SolverConfig,
) -> Result<SolveReport> {
    solve_with(x, k, init, config, |_, _| {})
}

/// Runs [`solve`] from `starts` initializations and keeps the run with the
/// lowest final objective.
///
/// Start `0` uses `config.rng_seed`; start `i > 0` uses
/// `splitmix64(rng_seed + i)`. Failed starts are skipped unless all fail, in
/// which case the first error is returned. The reported wall time covers all
/// starts.
pub fn solve_best_of(
    x: &DataMatrix,
    k: usize,
    init: &InitStrategy,
    config: &SolverConfig,
    starts: usize,
) -> Result<SolveReport> {
    if starts == 0 {
        return Err(invalid("at least one start is required"));
    }
    let starts = if matches!(init, InitStrategy::Provided(_)) {
        1
    } else {
        starts
    };
    let started = Instant::now();
    let mut best: Option<SolveReport> = None;
    let mut first_error = None;
    for i in 0..starts {
        let seed = if i == 0 {
            config.rng_seed
        } else {
            splitmix64(config.rng_seed.wrapping_add(i as u64))
        };
        let cfg = SolverConfig {
            rng_seed: seed,
            ..config.clone()
        };
        match solve(x, k, init, &cfg) {
            Ok(report) => {
                if best
                    .as_ref()
                    .is_none_or(|b| report.final_objective() < b.final_objective())
                {
                    best = Some(report);
                }
            }
            Err(e) => {
                log::warn!("start {i} failed: {e}");
                first_error.get_or_insert(e);
            }
        }
    }
    match best {
        Some(mut report) => {
            report.wall_time = started.elapsed().as_secs_f64();
            Ok(report)
        }
        None => Err(first_error.expect("no start succeeded and none failed")),
    }
}

/// [`solve`] with a callback invoked after every iteration.
pub fn solve_with(
    x: &DataMatrix,
    k: usize,
    init: &InitStrategy,
    config: &SolverConfig,
    mut observe: impl FnMut(&SolverState, &StepInfo),
) -> Result<SolveReport> {
    config.validate()?;
    if k == 0 || k > x.rows().min(x.cols()) {
        return Err(invalid(format!(
            "K = {k} must satisfy 1 <= K <= min(M, L) = {}",
            x.rows().min(x.cols())
        )));
    }
    let started = Instant::now();
    let model = init_strategy(x, k, init, config.rng_seed)?;
    let mut state = SolverState::new(x, model, config)?;
    let initial_objective = state.objective(x, config);
    if !initial_objective.is_finite() {
        return Err(Error::NonFinite(format!(
            "initial objective is {initial_objective}"
        )));
    }
    let mut reason = TerminationReason::MaxIter;
    while state.iteration < config.max_iter {
        let info = state.step(x, config)?;
        observe(&state, &info);
        if state.converged(config.tol) {
            reason = TerminationReason::Tolerance;
            break;
        }
    }
    Ok(SolveReport {
        iterations_used: state.iteration,
        model: state.model,
        weights: state.weights,
        initial_objective,
        objective_history: state.objective_history,
        termination_reason: reason,
        wall_time: started.elapsed().as_secs_f64(),
    })
}
