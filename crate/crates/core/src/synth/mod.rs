//! Synthetic benchmark instances and Monte-Carlo sweeps.
//!
//! The canonical generator is `ChaCha8Rng::seed_from_u64(seed)`. Draws happen
//! in a fixed order: basis entries (column-major), coefficient columns, noise
//! (column-major), outlier positions, outlier entries (column-major). Noise is
//! drawn even when the target SNR is infinite so that the outlier positions for
//! a given seed do not depend on the noise level.

mod seed;
mod sweep;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::matrix::DataMatrix;
use crate::metrics::{snr_db, sor_db};

pub use seed::{splitmix64, trial_seed};
pub use sweep::{run_sweep, Preset, SweepAxis, SweepPoint, SweepResult, TrialRecord};

/// Rejection budget per coefficient column.
pub const DRAWS_PER_COLUMN: usize = 1_000_000;

/// How the ground-truth basis is drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BasisKind {
    /// Entries i.i.d. uniform on `[0, 1)`.
    Uniform,
    /// A uniform draw whose singular values are replaced by the given list
    /// (largest first after sorting).
    IllConditioned { singular_values: Vec<f64> },
}

/// Parameters of one synthetic instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub m: usize,
    pub k: usize,
    pub l: usize,
    /// `+∞` means no noise.
    #[serde(with = "crate::inf_serde")]
    pub snr_db: f64,
    #[serde(with = "crate::inf_serde")]
    pub sor_db: f64,
    pub n_outliers: usize,
    /// Upper bound on the largest entry of every coefficient column.
    pub purity_level: f64,
    pub basis_kind: BasisKind,
    pub rng_seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            m: 50,
            k: 5,
            l: 1000,
            snr_db: 25.0,
            sor_db: -5.0,
            n_outliers: 20,
            purity_level: 0.85,
            basis_kind: BasisKind::Uniform,
            rng_seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.k == 0 || self.l == 0 {
            return Err(invalid("M, K and L must be positive"));
        }
        if self.k > self.m {
            return Err(invalid(format!("K = {} exceeds M = {}", self.k, self.m)));
        }
        if self.n_outliers > self.l {
            return Err(invalid(format!(
                "N_o = {} exceeds L = {}",
                self.n_outliers, self.l
            )));
        }
        if !(self.purity_level > 1.0 / self.k as f64 && self.purity_level <= 1.0) {
            return Err(invalid(format!(
                "purity level {} must lie in (1/K, 1] = ({}, 1]",
                self.purity_level,
                1.0 / self.k as f64
            )));
        }
        for (name, v) in [("SNR", self.snr_db), ("SOR", self.sor_db)] {
            if v.is_nan() || v == f64::NEG_INFINITY {
                return Err(invalid(format!(
                    "{name} must be a real number or +inf, got {v}"
                )));
            }
        }
        if let BasisKind::IllConditioned { singular_values } = &self.basis_kind {
            if singular_values.len() != self.k {
                return Err(invalid(format!(
                    "{} singular values given for K = {}",
                    singular_values.len(),
                    self.k
                )));
            }
            if singular_values.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
                return Err(invalid("singular values must be finite and positive"));
            }
        }
        Ok(())
    }
}

/// A generated data set together with its ground truth.
#[derive(Debug, Clone)]
pub struct SynthInstance {
    pub x: DataMatrix,
    pub a_true: DMatrix<f64>,
    pub s_true: DMatrix<f64>,
    /// Sorted ascending.
    pub outlier_indices: Vec<usize>,
    /// Additive noise, including the columns later overwritten by outliers.
    pub noise: DMatrix<f64>,
    pub realized_snr_db: f64,
    /// `+∞` when there are no outliers.
    pub realized_sor_db: f64,
}

/// Draws an instance of `spec`.
pub fn gen_instance(spec: &SynthSpec) -> Result<SynthInstance> {
    spec.validate()?;
    let (m, k, l) = (spec.m, spec.k, spec.l);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);

    let mut a_true = uniform_matrix(&mut rng, m, k);
    if let BasisKind::IllConditioned { singular_values } = &spec.basis_kind {
        a_true = with_singular_values(a_true, singular_values)?;
    }

    let s_true = draw_coefficients(&mut rng, k, l, spec.purity_level)?;
    let clean = &a_true * &s_true;
    let signal_power = clean.norm_squared() / l as f64;

    let mut noise = DMatrix::from_vec(
        m,
        l,
        (0..m * l)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect(),
    );
    let noise_power = noise.norm_squared() / l as f64;
    let noise_scale = if spec.snr_db == f64::INFINITY || noise_power == 0.0 {
        0.0
    } else {
        (signal_power / noise_power / 10f64.powf(spec.snr_db / 10.0)).sqrt()
    };
    noise *= noise_scale;
    let mut x = &clean + &noise;

    let mut outliers: Vec<usize> = sample(&mut rng, l, spec.n_outliers).into_vec();
    outliers.sort_unstable();
    if !outliers.is_empty() {
        let raw = uniform_matrix(&mut rng, m, outliers.len());
        let raw_power = raw.norm_squared() / outliers.len() as f64;
        let scale = if spec.sor_db == f64::INFINITY || raw_power == 0.0 {
            0.0
        } else {
            (signal_power / raw_power / 10f64.powf(spec.sor_db / 10.0)).sqrt()
        };
        for (j, &idx) in outliers.iter().enumerate() {
            x.set_column(idx, &(raw.column(j) * scale));
        }
    }

    let realized_snr_db = snr_db(&clean, &noise)?;
    let realized_sor_db = if outliers.is_empty() {
        f64::INFINITY
    } else {
        sor_db(&clean, &x, &outliers)?
    };
    Ok(SynthInstance {
        x: DataMatrix::new(x)?,
        a_true,
        s_true,
        outlier_indices: outliers,
        noise,
        realized_snr_db,
        realized_sor_db,
    })
}

fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_vec(
        rows,
        cols,
        (0..rows * cols).map(|_| rng.random::<f64>()).collect(),
    )
}

/// Keeps the singular vectors of `a` and swaps in `values`, matched by rank.
fn with_singular_values(a: DMatrix<f64>, values: &[f64]) -> Result<DMatrix<f64>> {
    let shape = a.shape();
    let svd = a.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::Singular("SVD of the drawn basis failed".into())),
    };
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let mut target = values.to_vec();
    target.sort_by(|a, b| b.total_cmp(a));
    let mut out = DMatrix::zeros(shape.0, shape.1);
    for (rank, &idx) in order.iter().enumerate() {
        out += u.column(idx) * v_t.row(idx) * target[rank];
    }
    Ok(out)
}

/// Columns uniform on the simplex, rejected while their largest entry
/// exceeds `purity`.
fn draw_coefficients(
    rng: &mut ChaCha8Rng,
    k: usize,
    l: usize,
    purity: f64,
) -> Result<DMatrix<f64>> {
    let budget = DRAWS_PER_COLUMN.saturating_mul(l);
    let mut draws = 0usize;
    let mut s = DMatrix::zeros(k, l);
    let mut col = DVector::zeros(k);
    for j in 0..l {
        loop {
            if draws >= budget {
                return Err(Error::Parameter(format!(
                    "purity level {purity} rejected {draws} simplex draws; budget exhausted"
                )));
            }
            draws += 1;
            col.iter_mut().for_each(|v| *v = rng.sample::<f64, _>(Exp1));
            let total = col.sum();
            if total <= 0.0 {
                continue;
            }
            col /= total;
            if col.max() <= purity {
                break;
            }
        }
        s.set_column(j, &col);
    }
    Ok(s)
}
