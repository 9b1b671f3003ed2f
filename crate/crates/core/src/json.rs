//! JSON wire formats shared by the library and the command-line front end.
//!
//! Matrices travel as `{"rows": m, "cols": n, "data": [row-major numbers]}`
//! and subspaces as `{"ambient_dim": n, "basis": <matrix>}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::subspace::Subspace;
use crate::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl MatrixJson {
    pub fn to_matrix(&self) -> Result<Matrix> {
        if self.data.len() != self.rows * self.cols {
            return Err(Error::Shape(format!(
                "matrix declares {}×{} but carries {} entries",
                self.rows,
                self.cols,
                self.data.len()
            )));
        }
        if let Some(bad) = self.data.iter().find(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("matrix data ({bad})")));
        }
        Ok(Matrix::from_row_slice(self.rows, self.cols, &self.data))
    }
}

impl From<&Matrix> for MatrixJson {
    fn from(m: &Matrix) -> Self {
        let data = (0..m.nrows())
            .flat_map(|i| (0..m.ncols()).map(move |j| (i, j)))
            .map(|ij| m[ij])
            .collect();
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubspaceJson {
    pub ambient_dim: usize,
    pub basis: MatrixJson,
}

impl SubspaceJson {
    /// Re-orthonormalizes the supplied basis.
    pub fn to_subspace(&self) -> Result<Subspace> {
        let basis = self.basis.to_matrix()?;
        if basis.nrows() != self.ambient_dim {
            return Err(Error::Shape(format!(
                "basis has {} rows, ambient dimension is {}",
                basis.nrows(),
                self.ambient_dim
            )));
        }
        Subspace::span(&basis)
    }
}

impl From<&Subspace> for SubspaceJson {
    fn from(s: &Subspace) -> Self {
        Self {
            ambient_dim: s.ambient_dim(),
            basis: s.basis().into(),
        }
    }
}
