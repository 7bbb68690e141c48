//! Evaluation metrics: permutation-matched basis MSE and SNR/SOR in decibels.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    /// Lower clamp for decibel MSE values so exact recoveries stay finite.
    pub mse_floor_db: f64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            mse_floor_db: -150.0,
        }
    }
}

/// Permutation-matched MSE between two bases after unit-ℓ2 column scaling.
///
/// Returns `(mse_linear, mse_db)`; the minimum over permutations is found
/// exactly by solving the `K x K` assignment problem.
pub fn permutation_matched_mse(
    truth: &DMatrix<f64>,
    estimate: &DMatrix<f64>,
    config: &MetricConfig,
) -> Result<(f64, f64)> {
    let (linear, _) = matched_cost(truth, estimate)?;
    Ok((linear, to_db(linear, config.mse_floor_db)))
}

/// Same as [`permutation_matched_mse`] but also returns the optimal matching.
pub fn matched_cost(truth: &DMatrix<f64>, estimate: &DMatrix<f64>) -> Result<(f64, Vec<usize>)> {
    if truth.shape() != estimate.shape() {
        return Err(invalid(format!(
            "shape mismatch: {:?} vs {:?}",
            truth.shape(),
            estimate.shape()
        )));
    }
    let k = truth.ncols();
    if k == 0 {
        return Err(invalid("bases must have at least one column"));
    }
    let a = normalize_columns(truth)?;
    let b = normalize_columns(estimate)?;
    let cost = DMatrix::from_fn(k, k, |i, j| (a.column(i) - b.column(j)).norm_squared());
    let assignment = min_cost_assignment(&cost);
    let total: f64 = assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| cost[(i, j)])
        .sum();
    Ok((total / k as f64, assignment))
}

fn normalize_columns(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut out = m.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        let norm = col.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(invalid(format!("column {j} is zero or non-finite")));
        }
        col /= norm;
    }
    Ok(out)
}

pub(crate) fn to_db(linear: f64, floor_db: f64) -> f64 {
    if linear <= 0.0 {
        return floor_db;
    }
    (10.0 * linear.log10()).max(floor_db)
}

/// Hungarian algorithm (shortest augmenting path form) for a square cost matrix.
/// Returns `assign[row] = col` minimizing the total cost.
pub fn min_cost_assignment(cost: &DMatrix<f64>) -> Vec<usize> {
    let n = cost.nrows();
    assert_eq!(n, cost.ncols(), "assignment needs a square cost matrix");
    // 1-based potentials with a virtual column 0.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut col0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let r0 = owner[col0];
            let mut delta = f64::INFINITY;
            let mut col1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(r0 - 1, j - 1)] - u[r0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = col0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    col1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            col0 = col1;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let prev = way[col0];
            owner[col0] = owner[prev];
            col0 = prev;
            if col0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0; n];
    for j in 1..=n {
        assign[owner[j] - 1] = j - 1;
    }
    assign
}

fn mean_column_power(m: &DMatrix<f64>, cols: impl Iterator<Item = usize>) -> (f64, usize) {
    let mut total = 0.0;
    let mut count = 0;
    for l in cols {
        total += m.column(l).norm_squared();
        count += 1;
    }
    (
        if count == 0 {
            0.0
        } else {
            total / count as f64
        },
        count,
    )
}

fn ratio_db(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (num / den).log10()
    }
}

/// `10·log10(mean ‖clean_ℓ‖² / mean ‖noise_ℓ‖²)` over all columns.
///
/// A zero noise power yields `+∞`.
pub fn snr_db(clean: &DMatrix<f64>, noise: &DMatrix<f64>) -> Result<f64> {
    if clean.shape() != noise.shape() {
        return Err(invalid("clean and noise matrices must share a shape"));
    }
    let (signal, _) = mean_column_power(clean, 0..clean.ncols());
    let (noise, _) = mean_column_power(noise, 0..noise.ncols());
    Ok(ratio_db(signal, noise))
}

/// Signal-to-outlier ratio: clean power averaged over all columns, outlier
/// power averaged over the columns of `data` listed in `outliers`.
pub fn sor_db(clean: &DMatrix<f64>, data: &DMatrix<f64>, outliers: &[usize]) -> Result<f64> {
    if clean.nrows() != data.nrows() || clean.ncols() != data.ncols() {
        return Err(invalid("clean and data matrices must share a shape"));
    }
    if outliers.is_empty() {
        return Err(invalid("outlier index set must be nonempty"));
    }
    if let Some(&bad) = outliers.iter().find(|&&l| l >= data.ncols()) {
        return Err(invalid(format!("outlier index {bad} out of range")));
    }
    let (signal, _) = mean_column_power(clean, 0..clean.ncols());
    let (power, _) = mean_column_power(data, outliers.iter().copied());
    Ok(ratio_db(signal, power))
}
