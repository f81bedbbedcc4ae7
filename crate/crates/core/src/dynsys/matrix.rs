use nalgebra::DMatrix;
use serde::{Serialize, Serializer};

use crate::error::{invalid, Result};
use crate::linalg;

/// A square `d × d` parameter matrix with finite entries.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightMatrix(DMatrix<f64>);

impl WeightMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(invalid(format!("weight matrix must be square, got {}x{}", m.nrows(), m.ncols())));
        }
        if m.nrows() == 0 {
            return Err(invalid("weight matrix must have d >= 1"));
        }
        if !linalg::all_finite(&m) {
            return Err(invalid("weight matrix has non-finite entries"));
        }
        Ok(Self(m))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(invalid("weight matrix rows must all have length d"));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::new(DMatrix::from_row_slice(d, d, &flat))
    }

    pub fn zeros(d: usize) -> Self {
        Self(DMatrix::zeros(d, d))
    }

    pub fn scaled_identity(d: usize, s: f64) -> Self {
        Self(DMatrix::identity(d, d) * s)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn operator_norm(&self) -> f64 {
        linalg::operator_norm(&self.0)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.0.row_iter().map(|r| r.iter().copied().collect()).collect()
    }

    /// `out = Θ x`. Slices must have length `d`.
    #[inline]
    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim();
        // column-major storage
        let data = self.0.as_slice();
        out.iter_mut().for_each(|o| *o = 0.0);
        for (j, &xj) in x.iter().enumerate().take(d) {
            if xj == 0.0 {
                continue;
            }
            let col = &data[j * d..(j + 1) * d];
            for (o, &c) in out.iter_mut().zip(col) {
                *o += c * xj;
            }
        }
    }
}

impl Serialize for WeightMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}
