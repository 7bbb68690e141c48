//! Majorizing surrogates of the objective, exposed so callers can audit the
//! descent certificates of each block update.

use nalgebra::{DMatrix, DVector};

use super::config::SolverConfig;
use super::updates::{conjugate_term, squared_residuals};
use crate::regularizers::{log_det_spd, vol_value, MajorizerMatrix, RegularizerKind};

/// Quadratic upper model of `½‖x − Bc‖²` around `anchor` with curvature `lipschitz`.
pub fn coeff_surrogate(
    x: &DVector<f64>,
    basis: &DMatrix<f64>,
    anchor: &DVector<f64>,
    lipschitz: f64,
    c: &DVector<f64>,
) -> f64 {
    let r = x - basis * anchor;
    let grad = -basis.tr_mul(&r);
    let d = c - anchor;
    0.5 * r.norm_squared() + grad.dot(&d) + 0.5 * lipschitz * d.norm_squared()
}

/// Upper bound on the objective at `(basis, coeffs)` built from fixed
/// weights and majorizer matrix:
/// `Σ ½[w‖x − Bc‖² + φ_p(w)] + (λ/2)·[Tr(F(BᵀB + τI)) − log det F − K]`.
///
/// For the trace regularizer the volume part is exact; for the determinant
/// regularizer (no majorizer) the exact determinant is used.
pub fn basis_surrogate(
    x: &DMatrix<f64>,
    basis: &DMatrix<f64>,
    coeffs: &DMatrix<f64>,
    weights: &DVector<f64>,
    major: Option<&MajorizerMatrix>,
    config: &SolverConfig,
) -> f64 {
    let res = squared_residuals(x, basis, coeffs);
    let fit: f64 = res
        .iter()
        .zip(weights.iter())
        .map(|(&r2, &w)| 0.5 * (w * r2 + conjugate_term(w, config.p, config.epsilon)))
        .sum();
    let k = basis.ncols();
    let vol = match (config.regularizer, major) {
        (RegularizerKind::LogDet { tau }, Some(f)) => {
            let e = basis.tr_mul(basis) + DMatrix::identity(k, k) * tau;
            let log_det_f = log_det_spd(f.matrix()).unwrap_or(f64::NEG_INFINITY);
            (f.matrix() * e).trace() - log_det_f - k as f64
        }
        (kind, _) => vol_value(basis, kind),
    };
    fit + 0.5 * config.lambda * vol
}
