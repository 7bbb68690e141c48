//! Volume measures for the basis, their gradients and quadratic majorizers.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Condition number above which a majorizer inversion is reported.
pub const CONDITION_WARN: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegularizerKind {
    /// `log det(BᵀB + τI)`.
    LogDet { tau: f64 },
    /// `det(BᵀB)`.
    Det,
    /// Sum of squared pairwise distances between basis columns.
    TraceDist,
}

impl RegularizerKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            RegularizerKind::LogDet { tau } if !(tau > 0.0 && tau.is_finite()) => {
                Err(invalid(format!("log-det tau must be positive, got {tau}")))
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            RegularizerKind::LogDet { .. } => "logdet",
            RegularizerKind::Det => "det",
            RegularizerKind::TraceDist => "trace",
        }
    }
}

/// Symmetric PSD matrix `F` such that `Tr(F·BᵀB)` majorizes the volume term
/// up to a constant.
#[derive(Debug, Clone, PartialEq)]
pub struct MajorizerMatrix(DMatrix<f64>);

impl MajorizerMatrix {
    pub fn new(f: DMatrix<f64>) -> Result<Self> {
        if !f.is_square() {
            return Err(invalid("majorizer must be square"));
        }
        let asym = (&f - f.transpose()).amax();
        if asym > 1e-10 * (1.0 + f.amax()) {
            return Err(invalid(format!(
                "majorizer not symmetric (asymmetry {asym:e})"
            )));
        }
        Ok(Self(f))
    }

    /// The identity, used before the first majorizer refresh.
    pub fn identity(k: usize) -> Self {
        Self(DMatrix::identity(k, k))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// `G = K·I − 1·1ᵀ`, for which `Tr(G·BᵀB) = Σ_{i<j} ‖b_i − b_j‖²`.
pub fn pairwise_gram(k: usize) -> DMatrix<f64> {
    DMatrix::identity(k, k) * k as f64 - DMatrix::from_element(k, k, 1.0)
}

/// `log det` of a symmetric positive-definite matrix, via Cholesky.
pub(crate) fn log_det_spd(m: &DMatrix<f64>) -> Option<f64> {
    let chol = m.clone().cholesky()?;
    Some(
        2.0 * chol
            .l_dirty()
            .diagonal()
            .iter()
            .map(|d| d.ln())
            .sum::<f64>(),
    )
}

/// Value of the volume measure for `basis`.
pub fn vol_value(basis: &DMatrix<f64>, kind: RegularizerKind) -> f64 {
    let gram = basis.tr_mul(basis);
    let k = gram.nrows();
    match kind {
        RegularizerKind::LogDet { tau } => {
            let shifted = &gram + DMatrix::identity(k, k) * tau;
            log_det_spd(&shifted).unwrap_or_else(|| shifted.determinant().max(0.0).ln())
        }
        RegularizerKind::Det => gram.determinant(),
        RegularizerKind::TraceDist => (pairwise_gram(k) * gram).trace(),
    }
}

/// Quadratic majorizer matrix at `basis`.
///
/// `LogDet` gives `(BᵀB + τI)⁻¹`, `TraceDist` the constant `G`, and `Det` has
/// no global quadratic majorizer so `None` is returned.
pub fn majorizer(basis: &DMatrix<f64>, kind: RegularizerKind) -> Result<Option<MajorizerMatrix>> {
    kind.validate()?;
    let k = basis.ncols();
    match kind {
        RegularizerKind::LogDet { tau } => {
            let shifted = basis.tr_mul(basis) + DMatrix::identity(k, k) * tau;
            let eig = shifted.clone().symmetric_eigen();
            let (lo, hi) = eig
                .eigenvalues
                .iter()
                .fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| {
                    (lo.min(v), hi.max(v))
                });
            if lo <= 0.0 || hi / lo > CONDITION_WARN {
                log::warn!(
                    "log-det majorizer is ill-conditioned (condition estimate {:e})",
                    hi / lo
                );
            }
            let inv = shifted
                .cholesky()
                .map(|c| c.inverse())
                .ok_or_else(|| Error::Singular("BᵀB + τI is not positive definite".into()))?;
            // Symmetrize away rounding.
            let sym = (&inv + inv.transpose()) * 0.5;
            Ok(Some(MajorizerMatrix(sym)))
        }
        RegularizerKind::TraceDist => Ok(Some(MajorizerMatrix(pairwise_gram(k)))),
        RegularizerKind::Det => Ok(None),
    }
}

/// Gradient of `det(BᵀB)` with respect to `B`: `2·det(BᵀB)·B·(BᵀB)⁻¹`.
pub fn det_gradient(basis: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let gram = basis.tr_mul(basis);
    let det = gram.determinant();
    let inv = gram
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .filter(|_| det > 0.0 && det.is_finite())
        .ok_or_else(|| Error::Singular("BᵀB is singular; det gradient undefined".into()))?;
    Ok(basis * inv * (2.0 * det))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, m: usize, k: usize) -> DMatrix<f64> {
        DMatrix::from_fn(m, k, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn logdet_identity_tau_limit() {
        let v = vol_value(
            &DMatrix::identity(3, 3),
            RegularizerKind::LogDet { tau: 1e-14 },
        );
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn det_of_diagonal() {
        let b = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0]));
        assert!((vol_value(&b, RegularizerKind::Det) - 36.0).abs() < 1e-12);
    }

    #[test]
    fn trace_dist_hand_example() {
        let b = DMatrix::identity(2, 2);
        // ‖(1,0) − (0,1)‖² = 2.
        let double_sum = (b.column(0) - b.column(1)).norm_squared();
        assert_eq!(double_sum, 2.0);
        assert!((vol_value(&b, RegularizerKind::TraceDist) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn trace_dist_equals_pairwise_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let k = rng.random_range(1..7);
            let b = random(&mut rng, 8, k);
            let mut direct = 0.0;
            for i in 0..k {
                for j in i + 1..k {
                    direct += (b.column(i) - b.column(j)).norm_squared();
                }
            }
            assert!((vol_value(&b, RegularizerKind::TraceDist) - direct).abs() < 1e-10);
        }
    }

    #[test]
    fn orthonormal_left_multiplication_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let b = random(&mut rng, 5, 3);
        let q = random(&mut rng, 5, 5).qr().q();
        let qb = &q * &b;
        for kind in [
            RegularizerKind::LogDet { tau: 1e-3 },
            RegularizerKind::Det,
            RegularizerKind::TraceDist,
        ] {
            let (a, c) = (vol_value(&b, kind), vol_value(&qb, kind));
            assert!(
                (a - c).abs() < 1e-10 * (1.0 + a.abs()),
                "{kind:?}: {a} vs {c}"
            );
        }
    }

    #[test]
    fn majorizer_examples() {
        let f = majorizer(
            &DMatrix::identity(3, 3),
            RegularizerKind::LogDet { tau: 1e-14 },
        )
        .unwrap()
        .unwrap();
        assert!((f.matrix() - DMatrix::<f64>::identity(3, 3)).amax() < 1e-12);

        let f = majorizer(
            &DMatrix::from_element(1, 1, 2.0),
            RegularizerKind::LogDet { tau: 1.0 },
        )
        .unwrap()
        .unwrap();
        assert!((f.matrix()[(0, 0)] - 0.2).abs() < 1e-15);

        assert!(majorizer(&DMatrix::identity(2, 2), RegularizerKind::Det)
            .unwrap()
            .is_none());
        let g = majorizer(&DMatrix::identity(3, 3), RegularizerKind::TraceDist)
            .unwrap()
            .unwrap();
        assert_eq!(g.matrix(), &pairwise_gram(3));
        assert!(majorizer(
            &DMatrix::identity(2, 2),
            RegularizerKind::LogDet { tau: 0.0 }
        )
        .is_err());
    }

    #[test]
    fn majorizer_multiplies_back_to_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let b = random(&mut rng, 6, 4);
            let tau = 1e-2;
            let f = majorizer(&b, RegularizerKind::LogDet { tau })
                .unwrap()
                .unwrap();
            let e = b.tr_mul(&b) + DMatrix::identity(4, 4) * tau;
            assert!((f.matrix() * e - DMatrix::<f64>::identity(4, 4)).amax() < 1e-8);
            let eig = f.matrix().clone().symmetric_eigen();
            assert!(eig.eigenvalues.iter().all(|&v| v >= -1e-10));
        }
    }

    /// Tangent bound: log det(BᵀB+τI) ≤ Tr(F(BᵀB+τI)) − log det F − K, tight at B₀.
    #[test]
    fn logdet_majorization_is_tight_upper_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let tau = 1e-3;
        let kind = RegularizerKind::LogDet { tau };
        let k = 3;
        let b0 = random(&mut rng, 7, k);
        let f = majorizer(&b0, kind).unwrap().unwrap();
        let log_det_f = log_det_spd(f.matrix()).unwrap();
        let bound = |b: &DMatrix<f64>| {
            let e = b.tr_mul(b) + DMatrix::identity(k, k) * tau;
            (f.matrix() * e).trace() - log_det_f - k as f64
        };
        assert!((bound(&b0) - vol_value(&b0, kind)).abs() < 1e-9);
        for _ in 0..100 {
            let b = random(&mut rng, 7, k) * rng.random_range(0.1..3.0);
            assert!(vol_value(&b, kind) <= bound(&b) + 1e-12);
        }
    }

    #[test]
    fn det_gradient_examples() {
        let g = det_gradient(&DMatrix::identity(3, 3)).unwrap();
        assert!((g - DMatrix::<f64>::identity(3, 3) * 2.0).amax() < 1e-12);

        let b = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0]));
        let g = det_gradient(&b).unwrap();
        let expected = DMatrix::from_diagonal(&DVector::from_vec(vec![36.0, 24.0]));
        assert!((g - expected).amax() < 1e-10);

        let singular = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(det_gradient(&singular), Err(Error::Singular(_))));
    }

    #[test]
    fn det_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let b = random(&mut rng, 6, 3);
        let g = det_gradient(&b).unwrap();
        let h = 1e-6;
        for i in 0..6 {
            for j in 0..3 {
                let mut plus = b.clone();
                let mut minus = b.clone();
                plus[(i, j)] += h;
                minus[(i, j)] -= h;
                let fd = (vol_value(&plus, RegularizerKind::Det)
                    - vol_value(&minus, RegularizerKind::Det))
                    / (2.0 * h);
                let rel = (fd - g[(i, j)]).abs() / g.amax();
                assert!(rel < 1e-4, "({i},{j}): fd {fd} vs {}", g[(i, j)]);
            }
        }
    }
}
