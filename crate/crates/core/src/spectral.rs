//! Certified upper bounds on the largest eigenvalue of `BᵀB`.
//!
//! These bounds drive the projected-gradient step sizes, so they must never
//! undershoot the true spectral norm.

use nalgebra::{DMatrix, DVector};

/// Relative inflation applied to the power-iteration estimate.
pub const POWER_SAFETY: f64 = 0.05;
/// Number of power iterations.
pub const POWER_ITERS: usize = 50;

/// Upper bound on `‖BᵀB‖₂`, never larger than `‖B‖_F²`.
///
/// Returns 0 for an all-zero basis.
pub fn spectral_bound(basis: &DMatrix<f64>) -> f64 {
    psd_bound(&basis.tr_mul(basis))
}

/// Upper bound on the largest eigenvalue of a symmetric PSD matrix.
///
/// The power-iteration estimate is inflated by [`POWER_SAFETY`] and accepted
/// only when `c·I − H` admits a Cholesky factorization, which certifies
/// `c ≥ λ_max(H)`. Otherwise the trace is returned.
pub fn psd_bound(h: &DMatrix<f64>) -> f64 {
    psd_bound_with(h, POWER_SAFETY)
}

/// [`psd_bound`] with an explicit inflation factor.
pub fn psd_bound_with(h: &DMatrix<f64>, safety: f64) -> f64 {
    let n = h.nrows();
    let trace = h.trace().max(0.0);
    if n == 0 || trace == 0.0 {
        return 0.0;
    }
    let estimate = power_iteration(h, POWER_ITERS);
    let candidate = (1.0 + safety) * estimate;
    if candidate >= trace || !(candidate > 0.0) {
        return trace;
    }
    let shifted = DMatrix::identity(n, n) * candidate - h;
    if shifted.cholesky().is_some() {
        candidate
    } else {
        trace
    }
}

fn power_iteration(h: &DMatrix<f64>, iters: usize) -> f64 {
    let n = h.nrows();
    // Slightly uneven start so symmetric structures do not hide the top mode.
    let mut v = DVector::from_fn(n, |i, _| 1.0 + 0.1 * i as f64 / n as f64);
    v.normalize_mut();
    let mut rayleigh = 0.0;
    for _ in 0..iters {
        let hv = h * &v;
        rayleigh = v.dot(&hv);
        let norm = hv.norm();
        if norm == 0.0 {
            return 0.0;
        }
        v = hv / norm;
    }
    rayleigh.max((h * &v).dot(&v))
}
