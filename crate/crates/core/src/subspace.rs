//! Subspaces of `ℝⁿ` stored as orthonormal column bases, and the algebra
//! built on them: complements, oblique projectors, direct sums,
//! intersections and principal angles.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::linalg::{self, column_separation, hstack, ThinSvd};
use crate::tolerance::{default_rank_tol, DIRECT_SUM_TOL};
use crate::Matrix;

/// A linear subspace of `ℝⁿ` with an orthonormal basis.
///
/// The zero subspace has an `n × 0` basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    ambient_dim: usize,
    basis: Matrix,
}

impl Subspace {
    pub fn zero(ambient_dim: usize) -> Self {
        Self {
            ambient_dim,
            basis: Matrix::zeros(ambient_dim, 0),
        }
    }

    pub fn full(ambient_dim: usize) -> Self {
        Self {
            ambient_dim,
            basis: Matrix::identity(ambient_dim, ambient_dim),
        }
    }

    /// Span of the columns of `vectors`, with dependent columns dropped at
    /// the default relative tolerance.
    pub fn span(vectors: &Matrix) -> Result<Self> {
        Self::span_with(vectors, default_rank_tol(vectors.nrows(), vectors.ncols()))
    }

    /// Span of the columns of `vectors`, orthonormalized.
    ///
    /// Independent columns are orthonormalized in order by Gram–Schmidt
    /// with reorthogonalization, so `span([e₂])` has basis exactly `e₂`. Dependent
    /// column sets fall back to the leading left singular vectors.
    pub fn span_with(vectors: &Matrix, rel_tol: f64) -> Result<Self> {
        linalg::ensure_finite(vectors, "subspace spanning set")?;
        let n = vectors.nrows();
        let k = vectors.ncols();
        if k == 0 {
            return Ok(Self::zero(n));
        }
        if k <= n {
            let (q, r) = gram_schmidt(vectors);
            if clearly_full_rank(&r, vectors.norm(), rel_tol) {
                return Ok(Self {
                    ambient_dim: n,
                    basis: q,
                });
            }
        }
        let svd = ThinSvd::new(vectors);
        let r = svd.rank(rel_tol);
        if r == 0 {
            return Ok(Self::zero(n));
        }
        let basis = if r == k {
            gram_schmidt(vectors).0
        } else {
            svd.u.columns(0, r).into_owned()
        };
        Ok(Self {
            ambient_dim: n,
            basis,
        })
    }

    /// Column space `R(A)`.
    pub fn range_of(a: &Matrix) -> Self {
        Self::range_of_with(a, default_rank_tol(a.nrows(), a.ncols()))
    }

    pub fn range_of_with(a: &Matrix, rel_tol: f64) -> Self {
        let svd = ThinSvd::new(a);
        let r = svd.rank(rel_tol);
        Self {
            ambient_dim: a.nrows(),
            basis: svd.u.columns(0, r).into_owned(),
        }
    }

    /// Null space `N(A)`.
    pub fn null_space_of(a: &Matrix) -> Self {
        Self::null_space_of_with(a, default_rank_tol(a.nrows(), a.ncols()))
    }

    pub fn null_space_of_with(a: &Matrix, rel_tol: f64) -> Self {
        let svd = ThinSvd::new(a);
        let r = svd.rank(rel_tol);
        let row_space = Self {
            ambient_dim: a.ncols(),
            basis: svd.v_t.rows(0, r).transpose(),
        };
        orthogonal_complement(&row_space)
    }

    /// Column space of `a` keeping singular values above the absolute
    /// threshold `abs_tol`.
    pub(crate) fn range_abs(a: &Matrix, abs_tol: f64) -> Self {
        let svd = ThinSvd::new(a);
        let r = svd.singular_values.iter().filter(|&&s| s > abs_tol).count();
        Self {
            ambient_dim: a.nrows(),
            basis: svd.u.columns(0, r).into_owned(),
        }
    }

    /// Null space of `a` where singular values at or below the absolute
    /// threshold `abs_tol` count as zero.
    pub(crate) fn null_space_abs(a: &Matrix, abs_tol: f64) -> Self {
        let svd = ThinSvd::new(a);
        let r = svd.singular_values.iter().filter(|&&s| s > abs_tol).count();
        let row_space = Self {
            ambient_dim: a.ncols(),
            basis: svd.v_t.rows(0, r).transpose(),
        };
        orthogonal_complement(&row_space)
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &Matrix {
        &self.basis
    }

    pub fn is_zero(&self) -> bool {
        self.dim() == 0
    }

    /// Orthogonal projector `Q·Qᵀ` onto the subspace.
    pub fn orthogonal_projector(&self) -> Matrix {
        &self.basis * self.basis.transpose()
    }

    /// Spectral norm of the component of `m`'s columns orthogonal to the subspace.
    pub fn distance_of_columns(&self, m: &Matrix) -> f64 {
        assert_eq!(m.nrows(), self.ambient_dim, "column length mismatch");
        let inside = &self.basis * (self.basis.transpose() * m);
        linalg::spectral_norm(&(m - inside))
    }

    /// Image `{L·x : x ∈ self}` of the subspace under a linear map.
    pub fn image_under(&self, map: &Matrix) -> Result<Self> {
        if map.ncols() != self.ambient_dim {
            return Err(Error::Shape(format!(
                "map has {} columns, subspace lives in ℝ^{}",
                map.ncols(),
                self.ambient_dim
            )));
        }
        let img = map * &self.basis;
        if img.ncols() == 0 {
            return Ok(Self::zero(map.nrows()));
        }
        // Relative to the map's scale rather than the image's, so that a
        // map which annihilates the subspace up to rounding yields {0}.
        let scale = linalg::spectral_norm(map).max(f64::MIN_POSITIVE);
        let svd = ThinSvd::new(&img);
        let cutoff = default_rank_tol(img.nrows(), img.ncols()) * scale;
        let r = svd.singular_values.iter().filter(|&&s| s > cutoff).count();
        if r == img.ncols() {
            Self::span_with(&img, 0.0)
        } else {
            Ok(Self {
                ambient_dim: map.nrows(),
                basis: svd.u.columns(0, r).into_owned(),
            })
        }
    }

    fn check_same_ambient(&self, other: &Subspace) -> Result<()> {
        if self.ambient_dim == other.ambient_dim {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "subspaces live in ℝ^{} and ℝ^{}",
                self.ambient_dim, other.ambient_dim
            )))
        }
    }
}

/// Classical Gram–Schmidt applied twice per column: orthonormal `Q` and
/// upper-triangular `R` with `vectors = QR`, for full-rank input.
fn gram_schmidt(vectors: &Matrix) -> (Matrix, Matrix) {
    let k = vectors.ncols();
    let mut q = vectors.clone();
    let mut r = Matrix::zeros(k, k);
    for j in 0..k {
        let mut v = q.column(j).into_owned();
        for _ in 0..2 {
            for i in 0..j {
                let qi = q.column(i);
                let c = qi.dot(&v);
                r[(i, j)] += c;
                v.axpy(-c, &qi, 1.0);
            }
        }
        let norm = v.norm();
        r[(j, j)] = norm;
        q.set_column(j, &(v / norm));
    }
    (q, r)
}

/// Whether `σ_min(R) > rel_tol·‖A‖` holds by a factor of two, using
/// `σ_min(R) ≥ 1/‖R⁻¹‖_F` and `σ_max(A) ≤ ‖A‖_F`.
fn clearly_full_rank(r: &Matrix, a_frobenius: f64, rel_tol: f64) -> bool {
    let k = r.ncols();
    match r.solve_upper_triangular(&Matrix::identity(k, k)) {
        Some(inv) if inv.iter().all(|x| x.is_finite()) => {
            1.0 / inv.norm() > 2.0 * rel_tol * a_frobenius
        }
        _ => false,
    }
}

/// An idempotent matrix together with its range and null space.
#[derive(Debug, Clone)]
pub struct Projector {
    pub matrix: Matrix,
    pub range: Subspace,
    pub nullspace: Subspace,
}

impl Projector {
    /// `‖P² − P‖`.
    pub fn idempotency_residual(&self) -> f64 {
        linalg::spectral_norm(&(&self.matrix * &self.matrix - &self.matrix))
    }
}

pub fn orthogonal_complement(s: &Subspace) -> Subspace {
    let n = s.ambient_dim;
    let d = s.dim();
    if d == 0 {
        return Subspace::full(n);
    }
    if d >= n {
        return Subspace::zero(n);
    }
    // Householder QR of [Q | I]: the first d columns of the orthogonal
    // factor span S, the remaining n − d span S⊥.
    let q = hstack(&s.basis, &Matrix::identity(n, n)).qr().q();
    let comp = q.columns(d, n - d).into_owned();
    // Scrub the rounding-level component along S.
    let comp = &comp - &s.basis * (s.basis.transpose() * &comp);
    Subspace::span_with(&comp, 0.0).expect("finite complement basis")
}

/// Smallest singular value of `[Q₁ | Q₂]`; zero when the dimensions
/// exceed the ambient dimension.
pub fn direct_sum_separation(s1: &Subspace, s2: &Subspace) -> f64 {
    column_separation(&hstack(&s1.basis, &s2.basis))
}

pub fn is_direct_sum(s1: &Subspace, s2: &Subspace) -> bool {
    is_direct_sum_with(s1, s2, DIRECT_SUM_TOL)
}

/// `S₁ ⊕ S₂` equals the ambient space: dimensions add up and the
/// concatenated bases are separated above `tol`.
pub fn is_direct_sum_with(s1: &Subspace, s2: &Subspace, tol: f64) -> bool {
    s1.ambient_dim == s2.ambient_dim
        && s1.dim() + s2.dim() == s1.ambient_dim
        && linalg::separation_exceeds(&hstack(&s1.basis, &s2.basis), tol)
}

pub fn oblique_projector(range: &Subspace, nullspace: &Subspace) -> Result<Projector> {
    oblique_projector_with(range, nullspace, DIRECT_SUM_TOL)
}

/// The projector onto `range` along `nullspace`.
///
/// Every `x` is decomposed as `x = r + n` by solving `[Q_R | Q_N]·c = x`;
/// the projector keeps the `r` part.
pub fn oblique_projector_with(
    range: &Subspace,
    nullspace: &Subspace,
    tol: f64,
) -> Result<Projector> {
    range.check_same_ambient(nullspace)?;
    if !is_direct_sum_with(range, nullspace, tol) {
        return Err(Error::Complement(format!(
            "range (dim {}) and null space (dim {}) in ℝ^{} (separation {:e})",
            range.dim(),
            nullspace.dim(),
            range.ambient_dim,
            direct_sum_separation(range, nullspace)
        )));
    }
    let n = range.ambient_dim;
    let system = hstack(&range.basis, &nullspace.basis);
    let coeffs = system
        .full_piv_lu()
        .solve(&Matrix::identity(n, n))
        .ok_or_else(|| Error::Complement("concatenated basis is singular".into()))?;
    let matrix = &range.basis * coeffs.rows(0, range.dim());
    Ok(Projector {
        matrix,
        range: range.clone(),
        nullspace: nullspace.clone(),
    })
}

/// `(P, Q)` with `P` onto `E₁` along `E₂` and `Q` onto `E₂⊥` along `E₁⊥`;
/// in the Euclidean inner product `Pᵀ = Q`.
pub fn adjoint_projector(e1: &Subspace, e2: &Subspace) -> Result<(Projector, Projector)> {
    let p = oblique_projector(e1, e2)?;
    let q = oblique_projector(&orthogonal_complement(e2), &orthogonal_complement(e1))?;
    Ok((p, q))
}

pub fn subspace_intersection(s1: &Subspace, s2: &Subspace) -> Result<Subspace> {
    subspace_intersection_with(s1, s2, DIRECT_SUM_TOL)
}

/// `S₁ ∩ S₂`, read off the null directions `(a, b)` of `[Q₁ | −Q₂]`,
/// which satisfy `Q₁a = Q₂b`.
pub fn subspace_intersection_with(s1: &Subspace, s2: &Subspace, tol: f64) -> Result<Subspace> {
    s1.check_same_ambient(s2)?;
    if s1.is_zero() || s2.is_zero() {
        return Ok(Subspace::zero(s1.ambient_dim));
    }
    let system = hstack(&s1.basis, &(-&s2.basis));
    let null = Subspace::null_space_abs(&system, tol);
    if null.is_zero() {
        return Ok(Subspace::zero(s1.ambient_dim));
    }
    let coeffs = null.basis.rows(0, s1.dim());
    let vectors = &s1.basis * coeffs;
    Subspace::span(&vectors)
}

/// Principal angles between two subspaces, in increasing order; there are
/// `min(dim S₁, dim S₂)` of them.
///
/// Small angles come from sines and large angles from cosines, so both
/// ends of the range are resolved to full relative accuracy.
pub fn principal_angles(s1: &Subspace, s2: &Subspace) -> Result<Vec<f64>> {
    s1.check_same_ambient(s2)?;
    let (small, big) = if s1.dim() <= s2.dim() {
        (s1, s2)
    } else {
        (s2, s1)
    };
    if small.is_zero() {
        return Ok(Vec::new());
    }
    let cosines = linalg::singular_values(&(big.basis.transpose() * &small.basis));
    let outside = &small.basis - &big.basis * (big.basis.transpose() * &small.basis);
    let mut sines = linalg::singular_values(&outside);
    sines.reverse();
    let angles = cosines
        .iter()
        .zip(sines.iter())
        .map(|(&c, &s)| {
            if c * c < 0.5 {
                c.clamp(-1.0, 1.0).acos()
            } else {
                s.clamp(0.0, 1.0).asin()
            }
        })
        .collect();
    Ok(angles)
}

/// Largest principal angle, or `π/2` when the dimensions differ.
pub fn subspace_distance(s1: &Subspace, s2: &Subspace) -> Result<f64> {
    if s1.dim() != s2.dim() {
        s1.check_same_ambient(s2)?;
        return Ok(FRAC_PI_2);
    }
    Ok(principal_angles(s1, s2)?.into_iter().fold(0.0, f64::max))
}

/// Equality up to principal angles `≤ angle_tol`.
pub fn subspaces_equal(s1: &Subspace, s2: &Subspace, angle_tol: f64) -> Result<bool> {
    Ok(subspace_distance(s1, s2)? <= angle_tol)
}

/// `inner ⊂ outer` up to principal angles `≤ angle_tol`.
pub fn is_contained(inner: &Subspace, outer: &Subspace, angle_tol: f64) -> Result<bool> {
    inner.check_same_ambient(outer)?;
    if inner.dim() > outer.dim() {
        return Ok(false);
    }
    Ok(principal_angles(inner, outer)?
        .into_iter()
        .all(|a| a <= angle_tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::dmatrix;

    fn line(v: &[f64]) -> Subspace {
        Subspace::span(&Matrix::from_column_slice(v.len(), 1, v)).unwrap()
    }

    #[test]
    fn nearly_dependent_columns_lose_rank() {
        let v = dmatrix![1.0, 1.0; 0.0, 1e-13; 0.0, 0.0];
        assert_eq!(Subspace::span(&v).unwrap().dim(), 1);
        let v = dmatrix![1.0, 1.0; 0.0, 1e-6; 0.0, 0.0];
        assert_eq!(Subspace::span(&v).unwrap().dim(), 2);
        let v = dmatrix![1.0, 0.0; 0.0, 0.0; 0.0, 0.0];
        assert_eq!(Subspace::span(&v).unwrap().dim(), 1);
    }

    fn close(a: &Matrix, b: &Matrix, tol: f64) {
        assert!((a - b).norm() <= tol, "{a} vs {b}");
    }

    #[test]
    fn span_keeps_orientation() {
        let s = line(&[0.0, 2.0]);
        close(s.basis(), &dmatrix![0.0; 1.0], 1e-15);
    }

    #[test]
    fn span_drops_dependent_columns() {
        let s = Subspace::span(&dmatrix![1.0, 2.0; 1.0, 2.0; 0.0, 0.0]).unwrap();
        assert_eq!(s.dim(), 1);
    }

    #[test]
    fn complement_of_axis() {
        let c = orthogonal_complement(&line(&[1.0, 0.0]));
        assert!(subspaces_equal(&c, &line(&[0.0, 1.0]), 1e-12).unwrap());
    }

    #[test]
    fn complement_of_full_space_is_zero() {
        let c = orthogonal_complement(&Subspace::full(3));
        assert_eq!(c.dim(), 0);
        assert_eq!(c.ambient_dim(), 3);
    }

    #[test]
    fn complement_of_diagonal_line() {
        let c = orthogonal_complement(&line(&[1.0, 1.0]));
        assert!(subspaces_equal(&c, &line(&[1.0, -1.0]), 1e-12).unwrap());
        assert_abs_diff_eq!(
            (c.basis().transpose() * line(&[1.0, 1.0]).basis()).norm(),
            0.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn orthogonal_projector_case() {
        let p = oblique_projector(&line(&[1.0, 0.0]), &line(&[0.0, 1.0])).unwrap();
        close(&p.matrix, &dmatrix![1.0, 0.0; 0.0, 0.0], 1e-15);
    }

    #[test]
    fn oblique_projector_along_diagonal() {
        let p = oblique_projector(&line(&[1.0, 0.0]), &line(&[1.0, 1.0])).unwrap();
        close(&p.matrix, &dmatrix![1.0, -1.0; 0.0, 0.0], 1e-14);
    }

    #[test]
    fn oblique_projector_onto_diagonal() {
        let p = oblique_projector(&line(&[1.0, 1.0]), &line(&[1.0, 0.0])).unwrap();
        close(&p.matrix, &dmatrix![0.0, 1.0; 0.0, 1.0], 1e-14);
    }

    #[test]
    fn oblique_projector_rejects_non_complements() {
        let e1 = line(&[1.0, 0.0]);
        assert!(matches!(
            oblique_projector(&e1, &e1),
            Err(Error::Complement(_))
        ));
        assert!(matches!(
            oblique_projector(&e1, &Subspace::zero(2)),
            Err(Error::Complement(_))
        ));
    }

    #[test]
    fn adjoint_projector_examples() {
        let (p, q) = adjoint_projector(&line(&[1.0, 0.0]), &line(&[0.0, 1.0])).unwrap();
        close(&p.matrix, &dmatrix![1.0, 0.0; 0.0, 0.0], 1e-15);
        close(&q.matrix, &dmatrix![1.0, 0.0; 0.0, 0.0], 1e-15);

        let (p, q) = adjoint_projector(&line(&[1.0, 0.0]), &line(&[1.0, 1.0])).unwrap();
        close(&p.matrix, &dmatrix![1.0, -1.0; 0.0, 0.0], 1e-14);
        close(&q.matrix, &dmatrix![1.0, 0.0; -1.0, 0.0], 1e-14);
    }

    #[test]
    fn direct_sum_examples() {
        let e1 = line(&[1.0, 0.0]);
        assert!(is_direct_sum(&e1, &line(&[0.0, 1.0])));
        assert!(!is_direct_sum(&e1, &e1));
        assert!(!is_direct_sum(&e1, &line(&[1.0, 1e-14])));
        assert!(is_direct_sum(&Subspace::full(2), &Subspace::zero(2)));
    }

    #[test]
    fn intersection_of_coordinate_planes() {
        let a = Subspace::span(&dmatrix![1.0, 0.0; 0.0, 1.0; 0.0, 0.0]).unwrap();
        let b = Subspace::span(&dmatrix![0.0, 0.0; 1.0, 0.0; 0.0, 1.0]).unwrap();
        let i = subspace_intersection(&a, &b).unwrap();
        assert!(subspaces_equal(&i, &line(&[0.0, 1.0, 0.0]), 1e-12).unwrap());
    }

    #[test]
    fn intersection_with_complement_is_zero() {
        let s = line(&[1.0, 2.0, 3.0]);
        let i = subspace_intersection(&s, &orthogonal_complement(&s)).unwrap();
        assert!(i.is_zero());
    }

    #[test]
    fn intersection_with_invertible_range() {
        let eps = 1e-3;
        let range = Subspace::range_of(&dmatrix![1.0, 0.0; 0.0, eps]);
        let i = subspace_intersection(&range, &line(&[0.0, 1.0])).unwrap();
        assert!(subspaces_equal(&i, &line(&[0.0, 1.0]), 1e-12).unwrap());
    }

    #[test]
    fn principal_angles_of_known_pair() {
        let theta: f64 = 0.3;
        let a = line(&[1.0, 0.0]);
        let b = line(&[theta.cos(), theta.sin()]);
        let angles = principal_angles(&a, &b).unwrap();
        assert_abs_diff_eq!(angles[0], theta, epsilon = 1e-14);

        let tiny = 1e-11;
        let c = line(&[1.0, tiny]);
        assert_abs_diff_eq!(principal_angles(&a, &c).unwrap()[0], tiny, epsilon = 1e-20);
    }

    #[test]
    fn null_space_and_range() {
        let a = dmatrix![1.0, 2.0, 3.0; 2.0, 4.0, 6.0];
        assert_eq!(Subspace::range_of(&a).dim(), 1);
        let n = Subspace::null_space_of(&a);
        assert_eq!(n.dim(), 2);
        assert_abs_diff_eq!((a * n.basis()).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn image_under_annihilating_map_is_zero() {
        let s = line(&[0.0, 1.0]);
        let img = s.image_under(&dmatrix![1.0, 0.0; 0.0, 0.0]).unwrap();
        assert!(img.is_zero());
    }
}
