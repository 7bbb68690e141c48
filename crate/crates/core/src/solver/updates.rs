//! Block updates: robust weights, coefficient projected-gradient steps and
//! basis steps, plus the objective they decrease.

use nalgebra::{DMatrix, DVector};

use super::config::{BasisConstraint, SolverConfig};
use crate::error::{invalid, Result};
use crate::matrix::{FactorModel, SIMPLEX_TOL};
use crate::regularizers::{det_gradient, majorizer, vol_value, MajorizerMatrix, RegularizerKind};
use crate::simplex::project_simplex_in_place;
use crate::spectral::psd_bound_with;

/// Armijo sufficient-decrease constant for the determinant regularizer.
pub const ARMIJO_SIGMA: f64 = 1e-4;
/// Maximum number of step halvings per Armijo search.
pub const ARMIJO_MAX_HALVINGS: usize = 60;

/// Squared residual norm of every column of `X − B·C`.
pub fn squared_residuals(
    x: &DMatrix<f64>,
    basis: &DMatrix<f64>,
    coeffs: &DMatrix<f64>,
) -> DVector<f64> {
    let mut r = x.clone();
    r.gemm(-1.0, basis, coeffs, 1.0);
    DVector::from_iterator(r.ncols(), r.column_iter().map(|c| c.norm_squared()))
}

/// Robust fitting cost `Σ ½(‖x_ℓ − B c_ℓ‖² + ε)^{p/2}`.
pub(crate) fn fit_cost(sq_res: &DVector<f64>, p: f64, epsilon: f64) -> f64 {
    sq_res
        .iter()
        .map(|&r2| 0.5 * (r2 + epsilon).powf(p / 2.0))
        .sum()
}

/// Objective value without the feasibility check.
pub(crate) fn objective_unchecked(
    x: &DMatrix<f64>,
    basis: &DMatrix<f64>,
    coeffs: &DMatrix<f64>,
    config: &SolverConfig,
) -> f64 {
    let res = squared_residuals(x, basis, coeffs);
    fit_cost(&res, config.p, config.epsilon)
        + 0.5 * config.lambda * vol_value(basis, config.regularizer)
}

/// Robust volume-regularized objective
/// `Σ_ℓ ½(‖x_ℓ − B c_ℓ‖² + ε)^{p/2} + (λ/2)·vol(B)`.
pub fn objective(x: &DMatrix<f64>, model: &FactorModel, config: &SolverConfig) -> Result<f64> {
    if x.nrows() != model.basis.nrows() || x.ncols() != model.coeffs.ncols() {
        return Err(invalid("data and model shapes disagree"));
    }
    if let Some(l) = model.infeasible_column(SIMPLEX_TOL) {
        return Err(invalid(format!("coefficient column {l} is infeasible")));
    }
    Ok(objective_unchecked(x, &model.basis, &model.coeffs, config))
}

/// Optimal weight `(p/2)(r² + ε)^{(p−2)/2}` for one squared residual.
///
/// The base is floored at the smallest normal float so `ε = 0` with an exact
/// fit stays finite.
pub fn weight_for(sq_residual: f64, p: f64, epsilon: f64) -> f64 {
    let base = (sq_residual + epsilon).max(f64::MIN_POSITIVE);
    0.5 * p * base.powf((p - 2.0) / 2.0)
}

/// Conjugate term `φ_p(w) = ((2−p)/2)(2w/p)^{p/(p−2)} + εw` for `p < 2`; `εw` at `p = 2`.
pub fn conjugate_term(w: f64, p: f64, epsilon: f64) -> f64 {
    if p >= 2.0 {
        return epsilon * w;
    }
    0.5 * (2.0 - p) * (2.0 * w / p).powf(p / (p - 2.0)) + epsilon * w
}

/// Per-column robust weights at the given factors.
pub fn update_weights(
    x: &DMatrix<f64>,
    basis: &DMatrix<f64>,
    coeffs: &DMatrix<f64>,
    p: f64,
    epsilon: f64,
) -> DVector<f64> {
    squared_residuals(x, basis, coeffs).map(|r2| weight_for(r2, p, epsilon))
}

/// Momentum sequence update `q' = (1 + √(1 + 4q²)) / 2`.
pub fn next_momentum(q: f64) -> f64 {
    0.5 * (1.0 + (1.0 + 4.0 * q * q).sqrt())
}

/// One projected-gradient step per coefficient column.
///
/// With `momentum = Some((previous_coeffs, q, q_next))` the gradient is taken
/// at the extrapolated point `c + ((q − 1)/q_next)(c − c_prev)`; otherwise at
/// `c`. `lipschitz` must upper-bound `‖BᵀB‖₂`. Columns are processed
/// independently, so the result does not depend on evaluation order.
pub fn update_c(
    x: &DMatrix<f64>,
    basis: &DMatrix<f64>,
    coeffs: &DMatrix<f64>,
    momentum: Option<(&DMatrix<f64>, f64, f64)>,
    lipschitz: f64,
) -> DMatrix<f64> {
    let anchor = match momentum {
        Some((prev, q, q_next)) => {
            let beta = (q - 1.0) / q_next;
            coeffs + (coeffs - prev) * beta
        }
        None => coeffs.clone(),
    };
    if !(lipschitz > 0.0) {
        // Zero basis: the fitting term is constant in C.
        return coeffs.clone();
    }
    let gram = basis.tr_mul(basis);
    let mut grad = basis.tr_mul(x);
    grad.gemm(1.0, &gram, &anchor, -1.0);
    let mut out = anchor - grad / lipschitz;
    for mut col in out.column_iter_mut() {
        project_simplex_in_place(col.as_mut_slice());
    }
    out
}

/// Weighted normal-equation pieces `(C W Cᵀ, X W Cᵀ)`.
pub(crate) fn weighted_moments(
    x: &DMatrix<f64>,
    coeffs: &DMatrix<f64>,
    weights: &DVector<f64>,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut cw = coeffs.clone();
    for (mut col, &w) in cw.column_iter_mut().zip(weights.iter()) {
        col *= w;
    }
    (&cw * coeffs.transpose(), x * cw.transpose())
}

/// Outcome of a basis update.
#[derive(Debug, Clone)]
pub struct BasisStep {
    pub basis: DMatrix<f64>,
    /// Step-size denominator used (`μ`), or the inverse accepted Armijo step.
    pub curvature: f64,
    /// Armijo backtracks taken (determinant regularizer only).
    pub backtracks: usize,
    /// True when a conditioning fallback was used.
    pub fallback: bool,
}

/// Basis update for fixed coefficients, weights and majorizer.
///
/// Unconstrained log-det / trace problems use the closed form
/// `B = X W Cᵀ (C W Cᵀ + λF)⁻¹`; a nonnegative basis takes one projected
/// gradient step with a certified step size; the determinant regularizer uses
/// a projected gradient step with Armijo backtracking.
pub fn update_b(
    x: &DMatrix<f64>,
    basis: &DMatrix<f64>,
    coeffs: &DMatrix<f64>,
    weights: &DVector<f64>,
    major: Option<&MajorizerMatrix>,
    config: &SolverConfig,
) -> Result<BasisStep> {
    let (h_fit, target) = weighted_moments(x, coeffs, weights);
    match (config.regularizer, major) {
        (RegularizerKind::Det, _) => det_step(basis, &h_fit, &target, config),
        (_, Some(f)) => {
            let h = &h_fit + f.matrix() * config.lambda;
            match config.basis_constraint {
                BasisConstraint::Unconstrained => {
                    let (basis, fallback) = solve_right(&target, &h);
                    Ok(BasisStep {
                        basis,
                        curvature: 0.0,
                        backtracks: 0,
                        fallback,
                    })
                }
                BasisConstraint::Nonnegative => {
                    let mu = psd_bound_with(&h, config.safety_delta);
                    if !(mu > 0.0) {
                        return Ok(BasisStep {
                            basis: basis.clone(),
                            curvature: mu,
                            backtracks: 0,
                            fallback: false,
                        });
                    }
                    let grad = basis * &h - &target;
                    let next = (basis - grad / mu).map(|v| v.max(0.0));
                    Ok(BasisStep {
                        basis: next,
                        curvature: mu,
                        backtracks: 0,
                        fallback: false,
                    })
                }
            }
        }
        (_, None) => Err(invalid(
            "quadratic basis update requires a majorizer matrix",
        )),
    }
}

/// Solves `B·H = P` for symmetric `H`, falling back to a regularized
/// pseudo-inverse when `H` is not numerically positive definite.
fn solve_right(target: &DMatrix<f64>, h: &DMatrix<f64>) -> (DMatrix<f64>, bool) {
    if let Some(chol) = h.clone().cholesky() {
        // (B H)ᵀ = H Bᵀ = Pᵀ.
        let bt = chol.solve(&target.transpose());
        if bt.iter().all(|v| v.is_finite()) {
            return (bt.transpose(), false);
        }
    }
    log::warn!("basis system is ill-conditioned; using a regularized pseudo-inverse");
    let k = h.nrows();
    let ridge = 1e-12 * h.trace().abs().max(1e-300);
    let reg = h + DMatrix::identity(k, k) * ridge;
    let cutoff = 1e-14 * reg.amax();
    let pinv = reg
        .pseudo_inverse(cutoff)
        .unwrap_or_else(|_| DMatrix::zeros(k, k));
    (target * pinv, true)
}

/// `½Tr(BᵀB·H) − Tr(BᵀP) + (λ/2)det(BᵀB)`: the weighted fit plus the
/// determinant volume, up to a constant independent of `B`.
fn det_cost(basis: &DMatrix<f64>, h_fit: &DMatrix<f64>, target: &DMatrix<f64>, lambda: f64) -> f64 {
    let gram = basis.tr_mul(basis);
    0.5 * gram.component_mul(h_fit).sum() - basis.component_mul(target).sum()
        + 0.5 * lambda * gram.determinant()
}

fn project_basis(b: DMatrix<f64>, constraint: BasisConstraint) -> DMatrix<f64> {
    match constraint {
        BasisConstraint::Unconstrained => b,
        BasisConstraint::Nonnegative => b.map(|v| v.max(0.0)),
    }
}

fn det_step(
    basis: &DMatrix<f64>,
    h_fit: &DMatrix<f64>,
    target: &DMatrix<f64>,
    config: &SolverConfig,
) -> Result<BasisStep> {
    let lambda = config.lambda;
    let (vol_grad, fallback) = if lambda == 0.0 {
        (DMatrix::zeros(basis.nrows(), basis.ncols()), false)
    } else {
        match det_gradient(basis) {
            Ok(g) => (g * (0.5 * lambda), false),
            Err(_) => {
                // Singular BᵀB: steer with the log-det majorizer instead.
                let kind = RegularizerKind::LogDet {
                    tau: config.fallback_tau(),
                };
                let f = majorizer(basis, kind)?.expect("log-det always has a majorizer");
                (basis * f.matrix() * lambda, true)
            }
        }
    };
    let grad = basis * h_fit - target + vol_grad;
    let current = det_cost(basis, h_fit, target, lambda);
    let mu = psd_bound_with(h_fit, config.safety_delta).max(f64::MIN_POSITIVE);
    let mut step = 1.0 / mu;
    for backtracks in 0..=ARMIJO_MAX_HALVINGS {
        let candidate = project_basis(basis - &grad * step, config.basis_constraint);
        let decrease = grad.component_mul(&(&candidate - basis)).sum();
        let value = det_cost(&candidate, h_fit, target, lambda);
        if value.is_finite() && value <= current + ARMIJO_SIGMA * decrease {
            return Ok(BasisStep {
                basis: candidate,
                curvature: 1.0 / step,
                backtracks,
                fallback,
            });
        }
        step *= 0.5;
    }
    // No acceptable step: keep the basis so the objective cannot increase.
    Ok(BasisStep {
        basis: basis.clone(),
        curvature: f64::INFINITY,
        backtracks: ARMIJO_MAX_HALVINGS,
        fallback,
    })
}
