//! The observation matrix handed to every fitting routine.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// An n x p matrix of real-valued observations with stable row identifiers.
///
/// Row identifiers survive copies and single-cell edits, so a report produced
/// from a perturbed or filtered matrix can still point back at the original
/// input rows.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: DMatrix<f64>,
    row_ids: Vec<usize>,
}

impl DataMatrix {
    /// Wraps a matrix, assigning row identifiers `0..n`.
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        let ids = (0..values.nrows()).collect();
        Self::with_row_ids(values, ids)
    }

    /// Wraps a matrix with caller-supplied row identifiers.
    pub fn with_row_ids(values: DMatrix<f64>, row_ids: Vec<usize>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::EmptyData);
        }
        if row_ids.len() != values.nrows() {
            return Err(Error::DimensionMismatch {
                expected: values.nrows(),
                found: row_ids.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "values",
                reason: "observations must be finite".into(),
            });
        }
        Ok(Self { values, row_ids })
    }

    /// Builds a matrix from row slices; all rows must share one length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyData);
        }
        let p = rows[0].len();
        for r in rows {
            if r.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    found: r.len(),
                });
            }
        }
        let values = DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]);
        Self::new(values)
    }

    /// Number of observations.
    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    /// Number of variables.
    pub fn n_cols(&self) -> usize {
        self.values.ncols()
    }

    /// The underlying matrix.
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Stable identifiers, one per row.
    pub fn row_ids(&self) -> &[usize] {
        &self.row_ids
    }

    /// The i-th observation as a column vector.
    pub fn row(&self, i: usize) -> DVector<f64> {
        self.values.row(i).transpose()
    }

    /// Copy of this matrix with one cell replaced; identifiers are kept.
    pub fn with_cell(&self, row: usize, col: usize, value: f64) -> Result<Self> {
        if row >= self.n_rows() {
            return Err(Error::IndexOutOfRange {
                index: row,
                len: self.n_rows(),
            });
        }
        if col >= self.n_cols() {
            return Err(Error::IndexOutOfRange {
                index: col,
                len: self.n_cols(),
            });
        }
        let mut out = self.clone();
        out.values[(row, col)] = value;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_rows_builds_matrix() {
        let x = DataMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
        assert_eq!(x.n_rows(), 3);
        assert_eq!(x.n_cols(), 2);
        assert_eq!(x.row_ids(), &[0, 1, 2]);
        assert_eq!(x.row(1), DVector::from_vec(vec![3.0, 4.0]));
    }

    #[test]
    fn empty_and_ragged_inputs_are_rejected() {
        assert!(matches!(
            DataMatrix::from_rows(&[]),
            Err(Error::EmptyData)
        ));
        assert!(DataMatrix::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(DataMatrix::new(DMatrix::<f64>::zeros(0, 2)).is_err());
    }

    #[test]
    fn non_finite_values_are_rejected() {
        assert!(DataMatrix::from_rows(&[vec![1.0, f64::NAN]]).is_err());
    }

    #[test]
    fn with_cell_copies_and_keeps_ids() {
        let x = DataMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let y = x.with_cell(1, 0, 9.0).unwrap();
        assert_eq!(y.values()[(1, 0)], 9.0);
        assert_eq!(x.values()[(1, 0)], 3.0);
        assert_eq!(y.row_ids(), x.row_ids());
        assert!(x.with_cell(2, 0, 0.0).is_err());
        assert!(x.with_cell(0, 2, 0.0).is_err());
    }
}
