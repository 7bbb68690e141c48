//! Dense data and factor containers.
//!
//! Everything is stored column-major through [`nalgebra::DMatrix`], so column
//! `ℓ` of a data matrix is sample `ℓ`.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Result};
use crate::simplex::project_simplex;

/// Tolerance used when checking that coefficient columns lie on the unit simplex.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// An `M x L` data matrix with finite entries; column `ℓ` is sample `ℓ`.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix(DMatrix<f64>);

impl DataMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(invalid(format!(
                "data matrix must be non-empty, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        if let Some((idx, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            let (r, c) = (idx % values.nrows(), idx / values.nrows());
            return Err(invalid(format!("non-finite entry {v} at ({r}, {c})")));
        }
        Ok(Self(values))
    }

    /// Builds a matrix from row-major nested rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != ncols) {
            return Err(invalid(format!(
                "row {bad} has {} entries, expected {ncols}",
                rows[bad].len()
            )));
        }
        Self::new(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
    }

    /// Number of features `M`.
    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    /// Number of samples `L`.
    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn sample(&self, l: usize) -> DVector<f64> {
        self.0.column(l).into_owned()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }
}

impl AsRef<DMatrix<f64>> for DataMatrix {
    fn as_ref(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// A factor pair `X ≈ B·C` with every column of `C` on the unit simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorModel {
    /// `M x K` basis.
    pub basis: DMatrix<f64>,
    /// `K x L` coefficients.
    pub coeffs: DMatrix<f64>,
}

impl FactorModel {
    /// Validates shapes and simplex feasibility of the coefficient columns.
    pub fn new(basis: DMatrix<f64>, coeffs: DMatrix<f64>) -> Result<Self> {
        let model = Self { basis, coeffs };
        model.check_shapes()?;
        if let Some(l) = model.infeasible_column(SIMPLEX_TOL) {
            return Err(invalid(format!(
                "coefficient column {l} is not on the unit simplex"
            )));
        }
        Ok(model)
    }

    /// Builds the model, projecting every coefficient column onto the simplex.
    pub fn repaired(basis: DMatrix<f64>, mut coeffs: DMatrix<f64>) -> Result<Self> {
        project_columns(&mut coeffs)?;
        let model = Self { basis, coeffs };
        model.check_shapes()?;
        Ok(model)
    }

    fn check_shapes(&self) -> Result<()> {
        if self.basis.ncols() != self.coeffs.nrows() {
            return Err(invalid(format!(
                "basis has {} columns but coefficients have {} rows",
                self.basis.ncols(),
                self.coeffs.nrows()
            )));
        }
        if self.rank() == 0 {
            return Err(invalid("model rank K must be at least 1"));
        }
        if self
            .basis
            .iter()
            .chain(self.coeffs.iter())
            .any(|v| !v.is_finite())
        {
            return Err(invalid("factor entries must be finite"));
        }
        Ok(())
    }

    /// Inner dimension `K`.
    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    /// Index of the first coefficient column off the simplex by more than `tol`.
    pub fn infeasible_column(&self, tol: f64) -> Option<usize> {
        (0..self.coeffs.ncols()).find(|&l| !on_simplex(self.coeffs.column(l).iter().copied(), tol))
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.basis * &self.coeffs
    }
}

/// True when the values are nonnegative and sum to one within `tol`.
pub fn on_simplex(values: impl Iterator<Item = f64>, tol: f64) -> bool {
    let mut sum = 0.0;
    for v in values {
        if !(v >= -tol) {
            return false;
        }
        sum += v;
    }
    (sum - 1.0).abs() <= tol
}

/// Projects each column of `m` onto the unit simplex in place.
pub fn project_columns(m: &mut DMatrix<f64>) -> Result<()> {
    for mut col in m.column_iter_mut() {
        let projected = project_simplex(col.as_slice())?;
        col.copy_from_slice(&projected);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite_entries() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, f64::NAN, 0.0, 1.0]);
        let err = DataMatrix::new(m).unwrap_err();
        assert!(err.to_string().contains("(0, 1)"), "{err}");
    }

    #[test]
    fn rejects_empty() {
        assert!(DataMatrix::new(DMatrix::zeros(0, 3)).is_err());
    }

    #[test]
    fn factor_model_feasibility() {
        let b = DMatrix::identity(2, 2);
        let ok = DMatrix::from_row_slice(2, 2, &[0.3, 1.0, 0.7, 0.0]);
        assert!(FactorModel::new(b.clone(), ok).is_ok());
        let bad = DMatrix::from_row_slice(2, 1, &[0.6, 0.6]);
        assert!(FactorModel::new(b.clone(), bad.clone()).is_err());
        let fixed = FactorModel::repaired(b, bad).unwrap();
        assert!((fixed.coeffs[(0, 0)] - 0.5).abs() < 1e-15);
        assert!((fixed.coeffs[(1, 0)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(DataMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0]]).is_err());
    }
}
