use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::matrix::{DataMatrix, FactorModel};
use crate::spectral::spectral_bound;

use super::updates::{next_momentum, update_c};

/// How the factors are seeded before the first iteration.
#[derive(Debug, Clone, PartialEq)]
pub enum InitStrategy {
    /// Basis entries i.i.d. uniform on `[0, 1)`.
    Random,
    /// Basis = `K` distinct randomly chosen data columns.
    DataColumns,
    /// Caller-supplied factors; coefficient columns are projected onto the simplex.
    Provided(FactorModel),
}

/// Serializable tag for [`InitStrategy`] without payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    Random,
    DataColumns,
    Provided,
}

impl InitStrategy {
    pub fn kind(&self) -> InitKind {
        match self {
            InitStrategy::Random => InitKind::Random,
            InitStrategy::DataColumns => InitKind::DataColumns,
            InitStrategy::Provided(_) => InitKind::Provided,
        }
    }
}

/// ChaCha stream reserved for initialization, so that a seed shared with the
/// data generator (stream 0) does not reproduce its draws.
pub const INIT_STREAM: u64 = 1;

fn init_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(INIT_STREAM);
    rng
}

/// Builds starting factors; coefficients start at `1/K` for generated bases.
pub fn init_strategy(
    x: &DataMatrix,
    k: usize,
    strategy: &InitStrategy,
    seed: u64,
) -> Result<FactorModel> {
    let (m, l) = (x.rows(), x.cols());
    if k == 0 {
        return Err(invalid("K must be at least 1"));
    }
    let uniform = || DMatrix::from_element(k, l, 1.0 / k as f64);
    match strategy {
        InitStrategy::Random => {
            let mut rng = init_rng(seed);
            let basis = DMatrix::from_fn(m, k, |_, _| rng.random::<f64>());
            let coeffs = fit_coefficients(x.as_matrix(), &basis, uniform());
            Ok(FactorModel { basis, coeffs })
        }
        InitStrategy::DataColumns => {
            if k > l {
                return Err(invalid(format!(
                    "cannot pick {k} distinct columns from {l} samples"
                )));
            }
            let mut rng = init_rng(seed);
            let picks = sample(&mut rng, l, k);
            let mut basis = DMatrix::zeros(m, k);
            for (j, idx) in picks.iter().enumerate() {
                basis.set_column(j, &x.as_matrix().column(idx));
            }
            let coeffs = fit_coefficients(x.as_matrix(), &basis, uniform());
            Ok(FactorModel { basis, coeffs })
        }
        InitStrategy::Provided(model) => {
            if model.basis.nrows() != m || model.coeffs.ncols() != l || model.rank() != k {
                return Err(invalid(format!(
                    "provided model is {}x{} / {}x{}, expected {m}x{k} / {k}x{l}",
                    model.basis.nrows(),
                    model.basis.ncols(),
                    model.coeffs.nrows(),
                    model.coeffs.ncols()
                )));
            }
            FactorModel::repaired(model.basis.clone(), model.coeffs.clone())
        }
    }
}

/// Iteration cap of [`fit_coefficients`].
pub const COEFF_FIT_MAX_ITER: usize = 500;
/// Largest entry change at which [`fit_coefficients`] stops early.
pub const COEFF_FIT_TOL: f64 = 1e-10;

/// Simplex-constrained least-squares coefficients for a fixed basis, by
/// accelerated projected gradient started from `start`.
pub fn fit_coefficients(
    x: &DMatrix<f64>,
    basis: &DMatrix<f64>,
    start: DMatrix<f64>,
) -> DMatrix<f64> {
    let lipschitz = spectral_bound(basis);
    let mut coeffs = start;
    let mut prev = coeffs.clone();
    let mut q = 1.0;
    for _ in 0..COEFF_FIT_MAX_ITER {
        let q_next = next_momentum(q);
        let next = update_c(x, basis, &coeffs, Some((&prev, q, q_next)), lipschitz);
        let change = (&next - &coeffs).amax();
        prev = std::mem::replace(&mut coeffs, next);
        q = q_next;
        if change < COEFF_FIT_TOL {
            break;
        }
    }
    coeffs
}
