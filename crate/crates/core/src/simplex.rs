//! Euclidean projection onto the unit simplex `{u ≥ 0, 1ᵀu = 1}`.

use crate::error::{invalid, Result};

/// Projects `v` onto the unit simplex with the sort-then-threshold rule.
///
/// Runs in `O(K log K)`. The output is exactly nonnegative and sums to one up
/// to rounding.
pub fn project_simplex(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(invalid("cannot project an empty vector onto the simplex"));
    }
    if let Some(bad) = v.iter().find(|x| !x.is_finite()) {
        return Err(invalid(format!("cannot project non-finite value {bad}")));
    }
    let theta = simplex_threshold(v);
    Ok(v.iter().map(|&x| (x - theta).max(0.0)).collect())
}

/// In-place variant used on hot paths; input must be finite.
pub(crate) fn project_simplex_in_place(v: &mut [f64]) {
    let theta = simplex_threshold(v);
    for x in v.iter_mut() {
        *x = (*x - theta).max(0.0);
    }
}

fn simplex_threshold(v: &[f64]) -> f64 {
    let mut sorted = v.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = sorted[0] - 1.0;
    for (j, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - 1.0) / (j + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        } else {
            break;
        }
    }
    theta
}
