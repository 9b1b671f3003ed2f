//! Dense-matrix helpers: sorted singular value decompositions, spectral
//! norms, rank decisions and vectorization of operators.

use crate::error::{Error, Result};
use crate::tolerance::default_rank_tol;
use crate::{Matrix, Vector};

/// Thin SVD `A = U·diag(s)·Vᵀ` with singular values sorted in decreasing order.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    /// `m × k` left singular vectors, `k = min(m, n)`.
    pub u: Matrix,
    pub singular_values: Vec<f64>,
    /// `k × n` transposed right singular vectors.
    pub v_t: Matrix,
}

impl ThinSvd {
    /// Panics if `a` has non-finite entries.
    pub fn new(a: &Matrix) -> Self {
        let (m, n) = a.shape();
        let k = m.min(n);
        if k == 0 {
            return Self {
                u: Matrix::zeros(m, 0),
                singular_values: Vec::new(),
                v_t: Matrix::zeros(0, n),
            };
        }
        let svd = to_faer(a)
            .thin_svd()
            .expect("finite input has a singular value decomposition");
        let s = svd.S().column_vector();
        let u = Matrix::from_fn(m, k, |i, j| svd.U()[(i, j)]);
        let v_t = Matrix::from_fn(k, n, |i, j| svd.V()[(j, i)]);
        let singular_values = (0..k).map(|i| s[i]).collect();
        Self {
            u,
            singular_values,
            v_t,
        }
    }

    pub fn max(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }

    /// Number of singular values exceeding `rel_tol · σ_max`.
    pub fn rank(&self, rel_tol: f64) -> usize {
        let cutoff = rel_tol * self.max();
        self.singular_values.iter().filter(|&&s| s > cutoff).count()
    }
}

/// Singular values in decreasing order; empty for an empty matrix.
pub fn singular_values(a: &Matrix) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    to_faer(a)
        .singular_values()
        .expect("finite input has singular values")
}

fn to_faer(a: &Matrix) -> faer::Mat<f64> {
    faer::Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

/// Operator 2-norm (largest singular value).
pub fn spectral_norm(a: &Matrix) -> f64 {
    singular_values(a).first().copied().unwrap_or(0.0)
}

/// Count of singular values exceeding `rel_tol · σ_max`; zero for the zero matrix.
pub fn rank_of(a: &Matrix, rel_tol: f64) -> usize {
    let s = singular_values(a);
    let cutoff = rel_tol * s.first().copied().unwrap_or(0.0);
    s.iter().filter(|&&x| x > cutoff).count()
}

/// [`rank_of`] with the default tolerance `1e-10·max(rows, cols)`.
pub fn rank(a: &Matrix) -> usize {
    rank_of(a, default_rank_tol(a.nrows(), a.ncols()))
}

/// Smallest singular value of `m`, counting one zero for every column in
/// excess of the row count. For matrices whose columns are two stacked
/// orthonormal bases this measures how far the bases are from sharing a
/// direction. An empty column set is vacuously independent and scores 1.
pub fn column_separation(m: &Matrix) -> f64 {
    if m.ncols() == 0 {
        return 1.0;
    }
    if m.ncols() > m.nrows() {
        return 0.0;
    }
    singular_values(m).last().copied().unwrap_or(0.0)
}

/// Whether `column_separation(m) > tol`.
///
/// For square `m` the bounds `1/‖m⁻¹‖_F ≤ σ_min ≤ √n/‖m⁻¹‖_F` usually settle
/// the question without an SVD; it runs only when `tol` lies within a
/// factor of two of that bracket.
pub fn separation_exceeds(m: &Matrix, tol: f64) -> bool {
    if m.is_square() && m.ncols() > 0 {
        if let Some(inv) = try_inverse(m) {
            let f = inv.norm();
            if 1.0 / f > 2.0 * tol {
                return true;
            }
            if (m.ncols() as f64).sqrt() / f < 0.5 * tol {
                return false;
            }
        }
    }
    column_separation(m) > tol
}

pub fn ensure_finite(a: &Matrix, what: &str) -> Result<()> {
    if a.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

pub fn ensure_shape(a: &Matrix, rows: usize, cols: usize, what: &str) -> Result<()> {
    if a.shape() == (rows, cols) {
        Ok(())
    } else {
        Err(Error::Shape(format!(
            "{what} is {}×{}, expected {rows}×{cols}",
            a.nrows(),
            a.ncols()
        )))
    }
}

/// Horizontal concatenation `[a | b]`.
pub fn hstack(a: &Matrix, b: &Matrix) -> Matrix {
    assert_eq!(a.nrows(), b.nrows(), "hstack row mismatch");
    let mut out = Matrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = Matrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[(i, j)];
            if aij != 0.0 {
                out.view_mut((i * br, j * bc), (br, bc))
                    .copy_from(&(b * aij));
            }
        }
    }
    out
}

/// Column-major vectorization, so that `vec(A·X·B) = (Bᵀ ⊗ A)·vec(X)`.
pub fn vectorize(a: &Matrix) -> Vector {
    Vector::from_column_slice(a.as_slice())
}

pub fn unvectorize(v: &[f64], rows: usize, cols: usize) -> Matrix {
    Matrix::from_column_slice(rows, cols, v)
}

/// Trace inner product `⟨S, T⟩ = trace(SᵀT)`.
pub fn trace_inner(s: &Matrix, t: &Matrix) -> f64 {
    s.iter().zip(t.iter()).map(|(a, b)| a * b).sum()
}

/// Inverse of a square matrix via LU, `None` when numerically singular.
pub(crate) fn try_inverse(a: &Matrix) -> Option<Matrix> {
    let inv = a.clone().full_piv_lu().try_inverse()?;
    inv.iter().all(|x| x.is_finite()).then_some(inv)
}
