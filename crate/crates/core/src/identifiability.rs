//! Certifier for the sufficiently-scattered condition on coefficient columns.
//!
//! For columns `S` (N×L) on the unit simplex `Δ`, the scattering radius is
//! `γ = sup{ r : {s ∈ Δ : ‖s‖ ≤ r} ⊆ conv(S) }`, and volume minimization
//! identifies the factors when `γ > 1/√(N−1)`.
//!
//! Every simplex point satisfies `‖s‖² = ‖s − c‖² + 1/N` with `c = 1/N`, so
//! `γ = √(d² + 1/N)` where `d` is the distance from `c` to the part of the
//! simplex outside `conv(S)`. The computation works in an orthonormal frame of
//! the hyperplane `1ᵀx = 1` centred at `c`:
//!
//! 1. extreme columns are found by exposing directions and then certified
//!    hull-membership tests (projected gradient with a duality-gap bound);
//! 2. hull facets are enumerated over `(N−1)`-subsets of extreme points;
//! 3. for each facet not lying in a face `{x_i = 0}`, the exact distance from
//!    `c` to `Δ ∩ {outer side of the facet}` is found by enumerating the
//!    active sets of that small polytope.
//!
//! The distance in step 3 equals the distance to the facet's hyperplane when
//! the foot of the perpendicular lies inside the simplex and is larger
//! otherwise.

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::matrix::on_simplex;
use crate::simplex::project_simplex_in_place;
use crate::solver::next_momentum;
use crate::spectral::psd_bound;

pub const DEFAULT_TOL: f64 = 1e-9;
/// Largest supported inner dimension.
pub const MAX_DIM: usize = 5;
/// Largest supported number of extreme points.
pub const MAX_EXTREME_POINTS: usize = 60;
/// Random exposing directions tried before membership tests.
pub const EXPOSING_DIRECTIONS: usize = 512;
/// Iteration cap of a single hull-membership test.
pub const MEMBERSHIP_MAX_ITER: usize = 20_000;

const DIRECTION_SEED: u64 = 0x5CA7_7E2D;

/// Coefficient columns on the unit simplex, with the tolerance used for
/// feasibility, duplicate, extremeness and incidence decisions.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffCloud {
    s: DMatrix<f64>,
    tol: f64,
}

impl CoeffCloud {
    pub fn new(s: DMatrix<f64>) -> Result<Self> {
        Self::with_tolerance(s, DEFAULT_TOL)
    }

    pub fn with_tolerance(s: DMatrix<f64>, tol: f64) -> Result<Self> {
        check_shape(&s, tol)?;
        if let Some(j) = (0..s.ncols()).find(|&j| !on_simplex(s.column(j).iter().copied(), tol)) {
            return Err(invalid(format!(
                "column {j} is not on the unit simplex within {tol}"
            )));
        }
        Ok(Self { s, tol })
    }

    /// Projects every column farther than `repair_tol` from the simplex onto
    /// it and returns the indices that were changed.
    pub fn repaired(mut s: DMatrix<f64>, repair_tol: f64, tol: f64) -> Result<(Self, Vec<usize>)> {
        check_shape(&s, tol)?;
        let mut fixed = Vec::new();
        for (j, mut col) in s.column_iter_mut().enumerate() {
            if !on_simplex(col.iter().copied(), repair_tol) {
                project_simplex_in_place(col.as_mut_slice());
                fixed.push(j);
            }
        }
        let cloud = Self::with_tolerance(s, tol.max(repair_tol))?;
        Ok((cloud, fixed))
    }

    /// Inner dimension `N`.
    pub fn dim(&self) -> usize {
        self.s.nrows()
    }

    pub fn len(&self) -> usize {
        self.s.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.s.ncols() == 0
    }

    pub fn tolerance(&self) -> f64 {
        self.tol
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.s
    }

    /// Coordinates `Hᵀ(s − c)` in the centred hyperplane frame.
    fn frame_coords(&self) -> DMatrix<f64> {
        let n = self.dim();
        let centred = self.s.map(|v| v - 1.0 / n as f64);
        helmert(n).tr_mul(&centred)
    }
}

fn check_shape(s: &DMatrix<f64>, tol: f64) -> Result<()> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(invalid(format!(
            "tolerance must be positive and finite, got {tol}"
        )));
    }
    if s.nrows() < 2 {
        return Err(invalid("coefficient columns need at least two entries"));
    }
    if s.ncols() == 0 {
        return Err(invalid("coefficient matrix has no columns"));
    }
    if let Some(idx) = s.iter().position(|v| !v.is_finite()) {
        return Err(invalid(format!(
            "non-finite entry at ({}, {})",
            idx % s.nrows(),
            idx / s.nrows()
        )));
    }
    Ok(())
}

/// Orthonormal basis (N×(N−1)) of `{v : 1ᵀv = 0}`.
fn helmert(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n - 1, |i, j| {
        let k = (j + 1) as f64;
        let scale = 1.0 / (k * (k + 1.0)).sqrt();
        match i.cmp(&(j + 1)) {
            std::cmp::Ordering::Less => scale,
            std::cmp::Ordering::Equal => -k * scale,
            std::cmp::Ordering::Greater => 0.0,
        }
    })
}

/// Indices of columns that are not convex combinations of the other columns.
///
/// Duplicate columns (equal within the tolerance) count once, at their first
/// index. Returned indices are ascending.
pub fn extreme_points(cloud: &CoeffCloud) -> Vec<usize> {
    let tol = cloud.tol;
    let y = cloud.frame_coords();
    let mut unique: Vec<usize> = Vec::new();
    for j in 0..y.ncols() {
        if !unique
            .iter()
            .any(|&i| (y.column(i) - y.column(j)).amax() <= tol)
        {
            unique.push(j);
        }
    }

    let mut is_vertex = vec![false; y.ncols()];
    let dim = y.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(DIRECTION_SEED);
    let axis_dirs = (0..dim).flat_map(|i| {
        [1.0, -1.0].map(move |sign| DVector::from_fn(dim, |r, _| if r == i { sign } else { 0.0 }))
    });
    let random_dirs: Vec<DVector<f64>> = (0..EXPOSING_DIRECTIONS)
        .map(|_| DVector::from_fn(dim, |_, _| StandardNormal.sample(&mut rng)))
        .collect();
    for u in axis_dirs.chain(random_dirs) {
        let u = u.normalize();
        let values: Vec<f64> = unique.iter().map(|&j| u.dot(&y.column(j))).collect();
        let top = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut near = values.iter().enumerate().filter(|(_, &v)| v >= top - tol);
        if let (Some((pos, _)), None) = (near.next(), near.next()) {
            is_vertex[unique[pos]] = true;
        }
    }

    let gather = |idx: &[usize]| DMatrix::from_fn(dim, idx.len(), |r, c| y[(r, idx[c])]);
    let mut vertices: Vec<usize> = unique.iter().copied().filter(|&j| is_vertex[j]).collect();
    for &j in &unique {
        if is_vertex[j] {
            continue;
        }
        let target = y.column(j).into_owned();
        if !vertices.is_empty() && in_hull(&gather(&vertices), &target, tol) {
            continue;
        }
        let others: Vec<usize> = unique.iter().copied().filter(|&i| i != j).collect();
        if !in_hull(&gather(&others), &target, tol) {
            is_vertex[j] = true;
            vertices.push(j);
        }
    }
    vertices.sort_unstable();
    vertices
}

/// Whether `target` lies within `tol` of the convex hull of the columns of
/// `points`.
///
/// Minimizes `f(θ) = ½‖Pθ − target‖²` over the simplex by accelerated
/// projected gradient with adaptive restart. `f(θ) − gap(θ)` with the
/// Frank–Wolfe gap is a lower bound on the minimum, which settles the
/// "outside" case; a small `f(θ)` settles the "inside" case.
fn in_hull(points: &DMatrix<f64>, target: &DVector<f64>, tol: f64) -> bool {
    let m = points.ncols();
    if m == 0 {
        return false;
    }
    let lipschitz = psd_bound(&(points * points.transpose()));
    let bar = 0.5 * tol * tol;
    let eval = |theta: &DVector<f64>| -> (f64, DVector<f64>) {
        let r = points * theta - target;
        (0.5 * r.norm_squared(), points.tr_mul(&r))
    };
    let start = (0..m)
        .min_by(|&a, &b| {
            (points.column(a) - target)
                .norm_squared()
                .total_cmp(&(points.column(b) - target).norm_squared())
        })
        .unwrap_or(0);
    let mut theta = DVector::from_fn(m, |i, _| if i == start { 1.0 } else { 0.0 });
    if lipschitz == 0.0 {
        return eval(&theta).0 <= bar;
    }
    let step = |from: &DVector<f64>, grad: &DVector<f64>| {
        let mut z = from - grad / lipschitz;
        project_simplex_in_place(z.as_mut_slice());
        z
    };
    let mut prev = theta.clone();
    let mut q = 1.0;
    for _ in 0..MEMBERSHIP_MAX_ITER {
        let (f, grad) = eval(&theta);
        if f <= bar {
            return true;
        }
        let gap = grad.dot(&theta) - grad.min();
        if f - gap > bar {
            return false;
        }
        let q_next = next_momentum(q);
        let anchor = &theta + (&theta - &prev) * ((q - 1.0) / q_next);
        let candidate = step(&anchor, &eval(&anchor).1);
        let next = if eval(&candidate).0 <= f {
            q = q_next;
            candidate
        } else {
            q = 1.0;
            step(&theta, &grad)
        };
        prev = std::mem::replace(&mut theta, next);
    }
    let f = eval(&theta).0;
    log::debug!(
        "hull membership undecided after {MEMBERSHIP_MAX_ITER} iterations (residual {})",
        (2.0 * f).sqrt()
    );
    f <= bar
}

/// A facet of `conv(S)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Facet {
    /// Unit normal orthogonal to `1`, pointing away from the hull.
    pub normal: DVector<f64>,
    /// `normal·x = offset` on the facet and `normal·x ≤ offset` on the hull.
    pub offset: f64,
    /// Columns lying on the facet, ascending.
    pub points: Vec<usize>,
}

/// Facet in the centred frame: `n·y ≤ b` on the hull.
struct FrameFacet {
    normal: DVector<f64>,
    offset: f64,
    points: Vec<usize>,
}

struct Hull {
    extreme: Vec<usize>,
    facets: Vec<FrameFacet>,
}

fn hull(cloud: &CoeffCloud) -> Result<Hull> {
    let n = cloud.dim();
    if n > MAX_DIM {
        return Err(Error::UnsupportedDimension(format!(
            "facet enumeration supports N <= {MAX_DIM}, got N = {n}"
        )));
    }
    let tol = cloud.tol;
    let extreme = extreme_points(cloud);
    if extreme.len() > MAX_EXTREME_POINTS {
        return Err(Error::UnsupportedDimension(format!(
            "{} extreme points exceed the supported {MAX_EXTREME_POINTS}",
            extreme.len()
        )));
    }
    let dim = n - 1;
    let y = cloud.frame_coords();
    let pts: Vec<DVector<f64>> = extreme.iter().map(|&j| y.column(j).into_owned()).collect();
    if affine_rank(&pts, tol) < dim {
        return Err(Error::Degenerate(format!(
            "the {} extreme points do not span the {dim}-dimensional simplex plane",
            pts.len()
        )));
    }

    let mut facets: Vec<FrameFacet> = Vec::new();
    for subset in (0..pts.len()).combinations(dim) {
        let Some(normal) = hyperplane_normal(&subset.iter().map(|&i| &pts[i]).collect::<Vec<_>>())
        else {
            continue;
        };
        let offset = normal.dot(&pts[subset[0]]);
        let sides: Vec<f64> = pts.iter().map(|p| normal.dot(p) - offset).collect();
        let (normal, offset, sides) = if sides.iter().all(|&s| s <= tol) {
            (normal, offset, sides)
        } else if sides.iter().all(|&s| s >= -tol) {
            (-normal, -offset, sides.iter().map(|s| -s).collect())
        } else {
            continue;
        };
        let on: Vec<usize> = (0..pts.len())
            .filter(|&i| sides[i].abs() <= tol)
            .map(|i| extreme[i])
            .collect();
        if facets.iter().any(|f| f.points == on) {
            continue;
        }
        facets.push(FrameFacet {
            normal,
            offset,
            points: on,
        });
    }
    Ok(Hull { extreme, facets })
}

/// Number of affinely independent directions spanned by `pts`.
fn affine_rank(pts: &[DVector<f64>], tol: f64) -> usize {
    let Some(first) = pts.first() else { return 0 };
    if pts.len() == 1 {
        return 0;
    }
    let diffs = DMatrix::from_fn(first.len(), pts.len() - 1, |r, c| pts[c + 1][r] - first[r]);
    diffs.singular_values().iter().filter(|&&s| s > tol).count()
}

/// Unit normal of the hyperplane through `d` points of `R^d`, by cofactor
/// expansion of the difference vectors; `None` if they are affinely dependent.
fn hyperplane_normal(pts: &[&DVector<f64>]) -> Option<DVector<f64>> {
    let d = pts[0].len();
    if d == 1 {
        return Some(DVector::from_element(1, 1.0));
    }
    let rows = DMatrix::from_fn(d - 1, d, |r, c| pts[r + 1][c] - pts[0][c]);
    let normal = DVector::from_fn(d, |i, _| {
        let minor = rows.clone().remove_column(i);
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        sign * minor.determinant()
    });
    let norm = normal.norm();
    let scale = rows.row_iter().map(|r| r.norm()).product::<f64>();
    (norm > 1e-12 * scale.max(f64::MIN_POSITIVE)).then(|| normal / norm)
}

/// Facets of `conv(S)` other than those lying in a simplex face `{x_i = 0}`.
pub fn interior_facets(cloud: &CoeffCloud) -> Result<Vec<Facet>> {
    let hull = hull(cloud)?;
    let h = helmert(cloud.dim());
    Ok(hull
        .facets
        .into_iter()
        .filter(|f| !on_simplex_face(cloud, f))
        .map(|f| Facet {
            normal: &h * f.normal,
            offset: f.offset,
            points: f.points,
        })
        .collect())
}

fn on_simplex_face(cloud: &CoeffCloud, facet: &FrameFacet) -> bool {
    (0..cloud.dim()).any(|i| facet.points.iter().all(|&j| cloud.s[(i, j)] <= cloud.tol))
}

/// Result of [`scattering_radius`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterReport {
    /// `+∞` when `conv(S)` is the whole simplex; `0` when the centroid lies
    /// outside `conv(S)`.
    #[serde(with = "crate::inf_serde")]
    pub gamma: f64,
    /// `1/√(N−1)`.
    pub threshold: f64,
    /// `gamma > threshold`.
    pub sufficiently_scattered: bool,
    /// Distance from the simplex centroid to the simplex outside `conv(S)`.
    #[serde(with = "crate::inf_serde")]
    pub centroid_distance: f64,
    pub centroid_inside: bool,
    pub interior_facet_count: usize,
    pub extreme_point_count: usize,
}

/// Computes `γ` and the sufficiently-scattered verdict `γ > 1/√(N−1)`.
pub fn scattering_radius(cloud: &CoeffCloud) -> Result<ScatterReport> {
    let n = cloud.dim();
    let hull = hull(cloud)?;
    let threshold = 1.0 / ((n - 1) as f64).sqrt();
    let interior: Vec<&FrameFacet> = hull
        .facets
        .iter()
        .filter(|f| !on_simplex_face(cloud, f))
        .collect();
    let report = |gamma: f64, d: f64, inside: bool| ScatterReport {
        gamma,
        threshold,
        sufficiently_scattered: gamma > threshold,
        centroid_distance: d,
        centroid_inside: inside,
        interior_facet_count: interior.len(),
        extreme_point_count: hull.extreme.len(),
    };
    if interior.is_empty() {
        return Ok(report(f64::INFINITY, f64::INFINITY, true));
    }
    if interior.iter().any(|f| f.offset < -cloud.tol) {
        return Ok(report(0.0, 0.0, false));
    }
    let h = helmert(n);
    let mut d = f64::INFINITY;
    for f in &interior {
        match outside_distance(&h, n, f) {
            Some(dist) => d = d.min(dist),
            None => log::warn!(
                "facet through columns {:?} does not cut the simplex",
                f.points
            ),
        }
    }
    if !d.is_finite() {
        return Err(Error::Degenerate(
            "no interior facet cuts the simplex".into(),
        ));
    }
    Ok(report((d * d + 1.0 / n as f64).sqrt(), d, true))
}

/// Distance from the centroid to `Δ ∩ {n·y ≥ b}` in the centred frame.
///
/// The nearest point lies on the facet hyperplane, so the facet constraint is
/// always active; every subset of the simplex constraints `−H_i·y ≤ 1/N` of
/// size below the frame dimension is tried as the remaining active set.
fn outside_distance(h: &DMatrix<f64>, n: usize, facet: &FrameFacet) -> Option<f64> {
    let dim = n - 1;
    let feasibility = 1e-12;
    let mut best: Option<f64> = None;
    for size in 0..dim {
        for active in (0..n).combinations(size) {
            let rows = active.len() + 1;
            let mut a = DMatrix::zeros(rows, dim);
            let mut beta = DVector::zeros(rows);
            a.row_mut(0).copy_from(&(-facet.normal.transpose()));
            beta[0] = -facet.offset;
            for (r, &i) in active.iter().enumerate() {
                a.row_mut(r + 1).copy_from(&(-h.row(i)));
                beta[r + 1] = 1.0 / n as f64;
            }
            let gram = &a * a.transpose();
            let Some(chol) = gram.cholesky() else {
                continue;
            };
            let y = a.tr_mul(&chol.solve(&beta));
            let x = h * &y;
            let feasible = x.iter().all(|&v| v + 1.0 / n as f64 >= -feasibility)
                && facet.normal.dot(&y) >= facet.offset - feasibility;
            if feasible {
                let dist = y.norm();
                best = Some(best.map_or(dist, |b: f64| b.min(dist)));
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn cloud(cols: &[[f64; 3]]) -> CoeffCloud {
        CoeffCloud::new(DMatrix::from_fn(3, cols.len(), |i, j| cols[j][i])).unwrap()
    }

    fn shrunken(s: f64) -> CoeffCloud {
        let base = (1.0 - s) / 3.0;
        cloud(&[
            [base + s, base, base],
            [base, base + s, base],
            [base, base, base + s],
        ])
    }

    #[test]
    fn helmert_is_orthonormal_and_orthogonal_to_ones() {
        for n in 2..7 {
            let h = helmert(n);
            assert!((h.tr_mul(&h) - DMatrix::identity(n - 1, n - 1)).amax() < 1e-15);
            assert!(h.row_sum().amax() < 1e-15);
        }
    }

    #[test]
    fn identity_is_infinitely_scattered() {
        let c = CoeffCloud::new(DMatrix::identity(3, 3)).unwrap();
        assert_eq!(extreme_points(&c), vec![0, 1, 2]);
        assert!(interior_facets(&c).unwrap().is_empty());
        let r = scattering_radius(&c).unwrap();
        assert_eq!(r.gamma, f64::INFINITY);
        assert!(r.sufficiently_scattered);
        assert_eq!(r.interior_facet_count, 0);
    }

    #[test]
    fn midpoint_is_not_extreme() {
        let c = cloud(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.5, 0.5, 0.0]]);
        assert_eq!(extreme_points(&c), vec![0, 1]);
        assert!(matches!(scattering_radius(&c), Err(Error::Degenerate(_))));
    }

    #[test]
    fn medial_triangle() {
        let c = cloud(&[[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]]);
        let facets = interior_facets(&c).unwrap();
        assert_eq!(facets.len(), 3);
        for f in &facets {
            assert!((f.normal.norm() - 1.0).abs() < 1e-12);
            assert!(f.normal.sum().abs() < 1e-12);
            for j in 0..3 {
                assert!(f.normal.dot(&c.matrix().column(j)) <= f.offset + 1e-12);
            }
        }
        let r = scattering_radius(&c).unwrap();
        assert!((r.centroid_distance - 1.0 / (2.0 * 6f64.sqrt())).abs() < 1e-12);
        assert!((r.gamma - (3.0f64 / 8.0).sqrt()).abs() < 1e-12);
        assert!(!r.sufficiently_scattered);
    }

    #[test]
    fn shrunken_simplex_closed_form() {
        for s in [0.05, 0.3, 0.7, 0.9, 0.99] {
            let r = scattering_radius(&shrunken(s)).unwrap();
            let want = (s * s / 6.0 + 1.0 / 3.0).sqrt();
            assert!(
                (r.gamma - want).abs() < 1e-9,
                "s={s}: {} vs {want}",
                r.gamma
            );
            assert_eq!(r.interior_facet_count, 3);
        }
        let r = scattering_radius(&shrunken(0.7)).unwrap();
        assert!((r.gamma - 0.644_17).abs() < 1e-4);
    }

    #[test]
    fn centroid_outside_hull_gives_zero() {
        let c = cloud(&[[0.8, 0.2, 0.0], [0.8, 0.0, 0.2], [0.6, 0.2, 0.2]]);
        let r = scattering_radius(&c).unwrap();
        assert_eq!(r.gamma, 0.0);
        assert!(!r.centroid_inside && !r.sufficiently_scattered);
    }

    #[test]
    fn truncated_corners_use_polytope_distance() {
        // Hexagon {x_i <= 0.85}: the nearest outside point is a cut corner,
        // and the foot of the perpendicular lies inside the simplex.
        let mut cols = Vec::new();
        for (i, j) in [(0, 1), (1, 2), (2, 0)] {
            for t in [0.15, 0.85] {
                let mut c = [0.0; 3];
                c[i] = t;
                c[j] = 1.0 - t;
                cols.push(c);
            }
        }
        let r = scattering_radius(&cloud(&cols)).unwrap();
        // Distance from the centroid to the line x_1 = 0.85 within the plane.
        let d = (0.85 - 1.0 / 3.0) * (1.5f64).sqrt();
        assert!((r.centroid_distance - d).abs() < 1e-12);
        assert!(r.sufficiently_scattered);
    }

    #[test]
    fn oblique_facet_beyond_the_simplex() {
        // The facet through (0.5, 0.5, 0) and (0.98, 0, 0.02) meets the
        // perpendicular from the centroid outside the simplex, so the exact
        // distance exceeds the hyperplane distance.
        let c = cloud(&[
            [0.5, 0.5, 0.0],
            [0.98, 0.0, 0.02],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
        ]);
        let r = scattering_radius(&c).unwrap();
        let facet = interior_facets(&c)
            .unwrap()
            .into_iter()
            .find(|f| f.points == vec![0, 1])
            .unwrap();
        let centroid = DVector::from_element(3, 1.0 / 3.0);
        let plane = facet.offset - facet.normal.dot(&centroid);
        assert!(r.centroid_distance >= plane - 1e-12);
        let oracle = sampled_gamma(&c, 400_000, 1);
        assert!((r.gamma - oracle).abs() < 1e-2, "{} vs {oracle}", r.gamma);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(CoeffCloud::new(DMatrix::from_element(1, 3, 1.0)).is_err());
        assert!(CoeffCloud::new(DMatrix::from_element(3, 2, 0.5)).is_err());
        let (fixed, changed) = CoeffCloud::repaired(
            DMatrix::from_column_slice(3, 2, &[0.5, 0.5, 0.0, 0.6, 0.6, 0.0]),
            1e-6,
            DEFAULT_TOL,
        )
        .unwrap();
        assert_eq!(changed, vec![1]);
        assert!((fixed.matrix()[(0, 1)] - 0.5).abs() < 1e-15);
        let six = CoeffCloud::new(DMatrix::identity(6, 6)).unwrap();
        assert!(matches!(
            scattering_radius(&six),
            Err(Error::UnsupportedDimension(_))
        ));
        assert_eq!(extreme_points(&six).len(), 6);
    }

    #[test]
    fn duplicates_count_once() {
        let c = cloud(&[
            [1.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
        ]);
        assert_eq!(extreme_points(&c), vec![0, 2, 3]);
    }

    #[test]
    fn two_dimensional_segments() {
        let c = CoeffCloud::new(DMatrix::from_column_slice(2, 2, &[0.9, 0.1, 0.2, 0.8])).unwrap();
        let r = scattering_radius(&c).unwrap();
        // Nearest hull endpoint is (0.2, 0.8), at distance 0.3·√2.
        assert!((r.centroid_distance - 0.3 * 2f64.sqrt()).abs() < 1e-12);
        assert!(!r.sufficiently_scattered);
        let full = CoeffCloud::new(DMatrix::identity(2, 2)).unwrap();
        assert!(scattering_radius(&full).unwrap().sufficiently_scattered);
    }

    #[test]
    fn higher_dimensional_shrunken_simplex() {
        // For N = 4 the facets of the shrunken simplex are {x_i = (1−s)/4}; the
        // nearest outside point is the foot of the perpendicular.
        let s = 0.6;
        let base = (1.0 - s) / 4.0;
        let m = DMatrix::from_fn(4, 4, |i, j| base + if i == j { s } else { 0.0 });
        let r = scattering_radius(&CoeffCloud::new(m).unwrap()).unwrap();
        let d = (0.25 - base) * (4.0f64 / 3.0).sqrt();
        assert!(
            (r.centroid_distance - d).abs() < 1e-12,
            "{} vs {d}",
            r.centroid_distance
        );
        assert_eq!(r.interior_facet_count, 4);
    }

    /// Brute-force hull membership for `N = 3`: inside some triangle or on some
    /// segment spanned by the other points.
    fn in_hull_oracle(cols: &[[f64; 3]], j: usize) -> bool {
        let others: Vec<usize> = (0..cols.len()).filter(|&i| i != j).collect();
        let p = cols[j];
        let bary = |a: [f64; 3], b: [f64; 3], c: [f64; 3]| -> Option<[f64; 3]> {
            // Solve p = αa + βb + γc with α+β+γ = 1 using coordinates 0 and 1.
            let m = nalgebra::Matrix3::new(a[0], b[0], c[0], a[1], b[1], c[1], 1.0, 1.0, 1.0);
            m.try_inverse().map(|inv| {
                let v = inv * nalgebra::Vector3::new(p[0], p[1], 1.0);
                [v[0], v[1], v[2]]
            })
        };
        for t in others.iter().combinations(3) {
            if let Some(w) = bary(cols[*t[0]], cols[*t[1]], cols[*t[2]]) {
                if w.iter().all(|&v| v >= -1e-12) {
                    return true;
                }
            }
        }
        for t in others.iter().combinations(2) {
            let (a, b) = (cols[*t[0]], cols[*t[1]]);
            let ab: Vec<f64> = (0..3).map(|i| b[i] - a[i]).collect();
            let len2: f64 = ab.iter().map(|v| v * v).sum();
            let u =
                (0..3).map(|i| (p[i] - a[i]) * ab[i]).sum::<f64>() / len2.max(f64::MIN_POSITIVE);
            let u = u.clamp(0.0, 1.0);
            if (0..3).all(|i| (a[i] + u * ab[i] - p[i]).abs() < 1e-12) {
                return true;
            }
        }
        false
    }

    fn random_cloud(rng: &mut ChaCha8Rng, len: usize) -> Vec<[f64; 3]> {
        (0..len)
            .map(|_| {
                let e: Vec<f64> = (0..3).map(|_| -rng.random::<f64>().ln()).collect();
                let s: f64 = e.iter().sum();
                [e[0] / s, e[1] / s, e[2] / s]
            })
            .collect()
    }

    #[test]
    fn extreme_points_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..10 {
            let cols = random_cloud(&mut rng, 30);
            let got = extreme_points(&cloud(&cols));
            let want: Vec<usize> = (0..cols.len())
                .filter(|&j| !in_hull_oracle(&cols, j))
                .collect();
            assert_eq!(got, want);
        }
    }

    /// Hull of planar points by the monotone chain, counter-clockwise.
    pub(super) fn planar_hull(mut pts: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| {
            (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
        };
        let mut lower: Vec<(f64, f64)> = Vec::new();
        for &p in &pts {
            while lower.len() >= 2
                && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0
            {
                lower.pop();
            }
            lower.push(p);
        }
        let mut upper: Vec<(f64, f64)> = Vec::new();
        for &p in pts.iter().rev() {
            while upper.len() >= 2
                && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0
            {
                upper.pop();
            }
            upper.push(p);
        }
        lower.pop();
        upper.pop();
        lower.extend(upper);
        lower
    }

    /// Smallest norm among uniformly sampled simplex points outside `conv(S)`,
    /// an upper estimate of `γ` converging as the sample grows.
    pub(super) fn sampled_gamma(c: &CoeffCloud, samples: usize, seed: u64) -> f64 {
        let to2d = |x: &[f64]| (x[1] + 0.5 * x[2], x[2] * 3f64.sqrt() / 2.0);
        let cols: Vec<Vec<f64>> = c
            .matrix()
            .column_iter()
            .map(|v| v.iter().copied().collect())
            .collect();
        let hull = planar_hull(cols.iter().map(|v| to2d(v)).collect());
        let inside = |p: (f64, f64)| {
            (0..hull.len()).all(|i| {
                let (a, b) = (hull[i], hull[(i + 1) % hull.len()]);
                (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0) >= 0.0
            })
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut best = f64::INFINITY;
        for _ in 0..samples {
            let e: [f64; 3] = std::array::from_fn(|_| -rng.random::<f64>().ln());
            let s: f64 = e.iter().sum();
            let x = [e[0] / s, e[1] / s, e[2] / s];
            if !inside(to2d(&x)) {
                best = best.min((x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt());
            }
        }
        best
    }

    #[test]
    fn sampling_oracle_agrees_on_closed_forms() {
        let oracle = sampled_gamma(&shrunken(0.7), 200_000, 3);
        assert!((oracle - 0.644_17).abs() < 1e-2);
        let medial = cloud(&[[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]]);
        assert!((sampled_gamma(&medial, 200_000, 4) - (3.0f64 / 8.0).sqrt()).abs() < 1e-2);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn permutation_invariant(seed in 0u64..1000, perm in Just([2usize, 0, 1])) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut cols = random_cloud(&mut rng, 12);
            cols.extend([[0.7, 0.2, 0.1], [0.1, 0.7, 0.2], [0.2, 0.1, 0.7]]);
            let a = scattering_radius(&cloud(&cols)).unwrap();
            let permuted: Vec<[f64; 3]> = cols.iter().map(|c| [c[perm[0]], c[perm[1]], c[perm[2]]]).collect();
            let b = scattering_radius(&cloud(&permuted)).unwrap();
            prop_assert!((a.gamma - b.gamma).abs() < 1e-9);
            prop_assert_eq!(a.interior_facet_count, b.interior_facet_count);
        }

        #[test]
        fn adding_columns_never_decreases_gamma(seed in 0u64..1000, extra in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut cols = random_cloud(&mut rng, 10);
            cols.extend([[0.6, 0.3, 0.1], [0.1, 0.6, 0.3], [0.3, 0.1, 0.6]]);
            let before = scattering_radius(&cloud(&cols)).unwrap();
            cols.extend(random_cloud(&mut rng, extra));
            let after = scattering_radius(&cloud(&cols)).unwrap();
            prop_assert!(after.gamma >= before.gamma - 1e-9, "{} < {}", after.gamma, before.gamma);
        }
    }
}
