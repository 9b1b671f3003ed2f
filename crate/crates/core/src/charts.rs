//! Fixed-rank operator classes near a double-splitting point `X`.
//!
//! The tangent space is `M(X) = {T : T·N(X) ⊂ R(X)}` with complement
//! `𝔼_X = {T : R(T) ⊂ N(X⁺), N(T) ⊃ R(X⁺)}`, and the chart
//! `T ↦ (T−X)X⁺X + C⁻¹T` with `C = I + (T−X)X⁺` straightens the rank-`r`
//! class near `X` onto `M(X)`.
//!
//! Operators are identified with column-major vectors in `ℝ^{mn}`; the
//! Euclidean product there is the trace pairing `⟨S, T⟩ = trace(SᵀT)`.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geninv::GenInverse;
use crate::linalg::{self, kron, spectral_norm, try_inverse, unvectorize, vectorize};
use crate::random;
use crate::subspace::{subspace_intersection, Subspace};
use crate::tolerance::{default_rank_tol, Tolerances, NEIGHBORHOOD_MARGIN};
use crate::Matrix;

/// An operator together with a generalized inverse of it.
#[derive(Debug, Clone)]
pub struct OperatorPoint {
    gen_inv: GenInverse,
}

impl OperatorPoint {
    /// Uses the Moore–Penrose inverse.
    pub fn new(x: &Matrix) -> Result<Self> {
        Ok(Self {
            gen_inv: GenInverse::moore_penrose(x)?,
        })
    }

    pub fn with_inverse(gen_inv: GenInverse) -> Self {
        Self { gen_inv }
    }

    pub fn x(&self) -> &Matrix {
        self.gen_inv.a()
    }

    pub fn x_plus(&self) -> &Matrix {
        self.gen_inv.a_plus()
    }

    pub fn gen_inv(&self) -> &GenInverse {
        &self.gen_inv
    }

    pub fn shape(&self) -> (usize, usize) {
        self.x().shape()
    }

    pub fn rank(&self) -> usize {
        linalg::rank(self.x())
    }

    /// `X·X⁺`, the projector onto `R(X)` along `N(X⁺)`.
    pub fn range_projector(&self) -> Matrix {
        self.x() * self.x_plus()
    }

    /// `X⁺·X`, the projector onto `R(X⁺)` along `N(X)`.
    pub fn domain_projector(&self) -> Matrix {
        self.x_plus() * self.x()
    }
}

/// A subspace of `m × n` operators with a trace-orthonormal basis.
#[derive(Debug, Clone)]
pub struct OperatorSubspace {
    rows: usize,
    cols: usize,
    space: Subspace,
}

impl OperatorSubspace {
    pub fn from_vectorized(rows: usize, cols: usize, space: Subspace) -> Result<Self> {
        if space.ambient_dim() != rows * cols {
            return Err(Error::Shape(format!(
                "subspace of ℝ^{} cannot hold {rows}×{cols} operators",
                space.ambient_dim()
            )));
        }
        Ok(Self { rows, cols, space })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    /// The subspace of `ℝ^{mn}` formed by the vectorized elements.
    pub fn space(&self) -> &Subspace {
        &self.space
    }

    pub fn element(&self, k: usize) -> Matrix {
        unvectorize(
            self.space.basis().column(k).as_slice(),
            self.rows,
            self.cols,
        )
    }

    pub fn elements(&self) -> Vec<Matrix> {
        (0..self.dim()).map(|k| self.element(k)).collect()
    }

    /// Orthogonal projection of `t` onto the subspace.
    pub fn project(&self, t: &Matrix) -> Matrix {
        let v = vectorize(t);
        let q = self.space.basis();
        let p = q * (q.transpose() * v);
        unvectorize(p.as_slice(), self.rows, self.cols)
    }

    /// `‖T − P(T)‖_F`, the trace-norm distance from `t` to the subspace.
    pub fn distance(&self, t: &Matrix) -> f64 {
        (t - self.project(t)).norm()
    }
}

/// Basis of `M(X) = {T : T·N(X) ⊂ R(X)}`, the kernel of
/// `T ↦ (I − P_{R(X)})·T·B_{N(X)}`.
pub fn tangent_space_basis(p: &OperatorPoint) -> OperatorSubspace {
    let (m, n) = p.shape();
    let null_x = Subspace::null_space_of(p.x());
    let range_x = Subspace::range_of(p.x());
    let escape = Matrix::identity(m, m) - range_x.orthogonal_projector();
    let constraint = kron(&null_x.basis().transpose(), &escape);
    // The constraint is built from orthonormal factors, so its nonzero
    // singular values are one and an absolute cutoff is appropriate.
    let space = if constraint.nrows() == 0 {
        Subspace::full(m * n)
    } else {
        Subspace::null_space_abs(&constraint, default_rank_tol(m, n))
    };
    OperatorSubspace {
        rows: m,
        cols: n,
        space,
    }
}

/// `M(X)` as the image of `T ↦ XX⁺T + (I − XX⁺)·T·X⁺X`.
pub fn tangent_space_image_form(p: &OperatorPoint) -> OperatorSubspace {
    let (m, n) = p.shape();
    let range_proj = p.range_projector();
    let dom_proj = p.domain_projector();
    let map = kron(&Matrix::identity(n, n), &range_proj)
        + kron(
            &dom_proj.transpose(),
            &(Matrix::identity(m, m) - &range_proj),
        );
    OperatorSubspace {
        rows: m,
        cols: n,
        space: Subspace::range_abs(&map, projector_cutoff(p)),
    }
}

/// Cutoff for images of maps built from `XX⁺` and `X⁺X`. Nonzero projectors
/// have norm at least one, so anything far below that is rounding.
fn projector_cutoff(p: &OperatorPoint) -> f64 {
    let (m, n) = p.shape();
    default_rank_tol(m, n) * (1.0 + spectral_norm(p.x()) * spectral_norm(p.x_plus()))
}

/// Basis of `𝔼_X`, the image of `T ↦ (I − XX⁺)·T·(I − X⁺X)`.
pub fn complement_space_basis(p: &OperatorPoint) -> OperatorSubspace {
    let (m, n) = p.shape();
    let left = Matrix::identity(m, m) - p.range_projector();
    let right = Matrix::identity(n, n) - p.domain_projector();
    let map = kron(&right.transpose(), &left);
    OperatorSubspace {
        rows: m,
        cols: n,
        space: Subspace::range_abs(&map, projector_cutoff(p)),
    }
}

/// The three summands of `T` relative to the splittings of `X`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorParts {
    /// `XX⁺·T`
    pub range_part: Matrix,
    /// `(I − XX⁺)·T·X⁺X`
    pub mixed_part: Matrix,
    /// `(I − XX⁺)·T·(I − X⁺X)`, the `𝔼_X` component.
    pub complement_part: Matrix,
}

pub fn decompose_operator(p: &OperatorPoint, t: &Matrix) -> Result<OperatorParts> {
    let (m, n) = p.shape();
    linalg::ensure_shape(t, m, n, "T")?;
    let range_proj = p.range_projector();
    let dom_proj = p.domain_projector();
    let left = Matrix::identity(m, m) - &range_proj;
    let range_part = &range_proj * t;
    let mixed_part = &left * t * &dom_proj;
    let complement_part = t - &range_part - &mixed_part;
    Ok(OperatorParts {
        range_part,
        mixed_part,
        complement_part,
    })
}

fn c_inverse(p: &OperatorPoint, t: &Matrix, margin: f64) -> Result<Matrix> {
    let g = p.gen_inv();
    let product = g.check_neighborhood(t, margin)?;
    try_inverse(&g.c_factor(t)).ok_or(Error::Neighborhood { product, margin })
}

/// `(T − X)X⁺X + C⁻¹T`.
pub fn chart_forward(p: &OperatorPoint, t: &Matrix) -> Result<Matrix> {
    chart_forward_with(p, t, NEIGHBORHOOD_MARGIN)
}

pub fn chart_forward_with(p: &OperatorPoint, t: &Matrix, margin: f64) -> Result<Matrix> {
    let c_inv = c_inverse(p, t, margin)?;
    Ok((t - p.x()) * p.domain_projector() + c_inv * t)
}

/// `m·X⁺X + C(m)·m·(I − X⁺X)`.
pub fn chart_inverse(p: &OperatorPoint, m: &Matrix) -> Result<Matrix> {
    chart_inverse_with(p, m, NEIGHBORHOOD_MARGIN)
}

pub fn chart_inverse_with(p: &OperatorPoint, m: &Matrix, margin: f64) -> Result<Matrix> {
    let g = p.gen_inv();
    g.check_neighborhood(m, margin)?;
    let n = p.shape().1;
    let dom_proj = p.domain_projector();
    Ok(m * &dom_proj + g.c_factor(m) * m * (Matrix::identity(n, n) - dom_proj))
}

/// Derivative of [`chart_forward`] at `T` applied to `dT`:
/// `dT·X⁺X + C⁻¹dT − C⁻¹·dT·X⁺·C⁻¹T`.
pub fn chart_derivative(p: &OperatorPoint, t: &Matrix, dt: &Matrix) -> Result<Matrix> {
    let (m, n) = p.shape();
    linalg::ensure_shape(dt, m, n, "dT")?;
    let c_inv = c_inverse(p, t, NEIGHBORHOOD_MARGIN)?;
    let c_inv_dt = &c_inv * dt;
    Ok(dt * p.domain_projector() + &c_inv_dt - &c_inv_dt * p.x_plus() * &c_inv * t)
}

/// Outcome of [`verify_chart_maps_manifold`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChartReport {
    pub rank: usize,
    pub dim_tangent: usize,
    pub dim_complement: usize,
    pub samples: usize,
    /// Largest relative round-trip error over both composition orders.
    pub roundtrip_max_residual: f64,
    /// Largest relative distance of a chart image from `M(X)`.
    pub tangency_max_residual: f64,
    /// Samples whose preimage changed rank or met `N(X⁺)`.
    pub failures: usize,
}

impl ChartReport {
    pub fn passed(&self, tol: &Tolerances) -> bool {
        self.failures == 0
            && self.roundtrip_max_residual <= 1e-10
            && self.tangency_max_residual <= tol.residual_tol
    }
}

/// Samples points `m = X + D` with `D ∈ M(X)` inside the ball, maps them back
/// with the chart inverse, and checks that the preimages have rank `r`,
/// avoid `N(X⁺)`, and map forward onto `M(X)` again. Arbitrary in-ball `T`
/// are also round-tripped through the forward chart.
pub fn verify_chart_maps_manifold(
    p: &OperatorPoint,
    samples: usize,
    seed: u64,
    tol: &Tolerances,
) -> Result<ChartReport> {
    let (m, n) = p.shape();
    let rank = p.rank();
    let tangent = tangent_space_basis(p);
    let complement = complement_space_basis(p);
    let radius = p.gen_inv().ball_radius().min(1e6);
    let rank_tol = tol.rank_tol_for(m, n);
    let mut rng = random::seeded(seed);

    let mut roundtrip: f64 = 0.0;
    let mut tangency: f64 = 0.0;
    let mut failures = 0;
    for _ in 0..samples {
        let scale = 0.3 * radius * rng.random_range(0.05..1.0);

        let coeffs = random::gaussian_vector(&mut rng, tangent.dim());
        let d = tangent.space().basis() * coeffs;
        let d = unvectorize(d.as_slice(), m, n);
        let d_norm = spectral_norm(&d);
        let point = if d_norm > 0.0 {
            p.x() + d * (scale / d_norm)
        } else {
            p.x().clone()
        };
        let t = chart_inverse_with(p, &point, tol.margin)?;
        let back = chart_forward_with(p, &t, tol.margin)?;
        roundtrip = roundtrip.max((&back - &point).norm() / (1.0 + point.norm()));
        tangency = tangency.max(tangent.distance(&back) / (1.0 + back.norm()));
        let meets = !subspace_intersection(
            &Subspace::range_of_with(&t, rank_tol),
            p.gen_inv().null_of_inverse(),
        )?
        .is_zero();
        if linalg::rank_of(&t, rank_tol) != rank || meets {
            failures += 1;
        }

        let e = random::gaussian_matrix(&mut rng, m, n);
        let t = p.x() + &e * (scale / spectral_norm(&e).max(f64::MIN_POSITIVE));
        let image = chart_forward_with(p, &t, tol.margin)?;
        let again = chart_inverse_with(p, &image, tol.margin)?;
        roundtrip = roundtrip.max((&again - &t).norm() / (1.0 + t.norm()));
    }

    Ok(ChartReport {
        rank,
        dim_tangent: tangent.dim(),
        dim_complement: complement.dim(),
        samples,
        roundtrip_max_residual: roundtrip,
        tangency_max_residual: tangency,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::subspace::{is_direct_sum, subspaces_equal};
    use nalgebra::dmatrix;

    fn e11() -> OperatorPoint {
        OperatorPoint::new(&dmatrix![1.0, 0.0; 0.0, 0.0]).unwrap()
    }

    #[test]
    fn tangent_dimension_examples() {
        assert_eq!(tangent_space_basis(&e11()).dim(), 3);
        let inv = OperatorPoint::new(&dmatrix![1.0, 0.0; 0.0, 0.5]).unwrap();
        assert_eq!(tangent_space_basis(&inv).dim(), 4);
        let x = random::rank_matrix(&mut random::seeded(1), 5, 4, 2);
        assert_eq!(
            tangent_space_basis(&OperatorPoint::new(&x).unwrap()).dim(),
            14
        );
    }

    #[test]
    fn tangent_space_of_e11_excludes_e22() {
        let t = tangent_space_basis(&e11());
        assert!(t.distance(&dmatrix![1.0, 0.0; 0.0, 0.0]) < 1e-14);
        assert!(t.distance(&dmatrix![0.0, 1.0; 0.0, 0.0]) < 1e-14);
        assert!(t.distance(&dmatrix![0.0, 0.0; 1.0, 0.0]) < 1e-14);
        assert!((t.distance(&dmatrix![0.0, 0.0; 0.0, 1.0]) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn complement_examples() {
        let c = complement_space_basis(&e11());
        assert_eq!(c.dim(), 1);
        let e = c.element(0);
        assert!((e[(1, 1)].abs() - 1.0).abs() < 1e-14);
        assert!(e[(0, 0)].abs() + e[(0, 1)].abs() + e[(1, 0)].abs() < 1e-14);

        let inv = OperatorPoint::new(&dmatrix![2.0, 1.0; 0.0, 1.0]).unwrap();
        assert_eq!(complement_space_basis(&inv).dim(), 0);

        let x = random::rank_matrix(&mut random::seeded(2), 4, 4, 2);
        let p = OperatorPoint::new(&x).unwrap();
        let c = complement_space_basis(&p);
        assert_eq!(c.dim(), 4);
        assert!(is_direct_sum(tangent_space_basis(&p).space(), c.space()));
    }

    #[test]
    fn image_form_matches_kernel_form() {
        let mut rng = random::seeded(3);
        for (m, n, r) in [(2, 2, 1), (4, 3, 2), (5, 5, 3), (3, 6, 1)] {
            let x = random::rank_matrix(&mut rng, m, n, r);
            let g = crate::geninv::gen_inverse_from_complements(
                &x,
                &random::complement(&mut rng, &Subspace::null_space_of(&x), 0.2),
                &random::complement(&mut rng, &Subspace::range_of(&x), 0.2),
            )
            .unwrap();
            let p = OperatorPoint::with_inverse(g);
            let kernel = tangent_space_basis(&p);
            let image = tangent_space_image_form(&p);
            assert!(subspaces_equal(kernel.space(), image.space(), 1e-8).unwrap());
        }
    }

    #[test]
    fn decomposition_examples() {
        let inv = OperatorPoint::new(&dmatrix![2.0, 1.0; 0.0, 1.0]).unwrap();
        let t = dmatrix![0.3, -1.0; 2.0, 0.5];
        let parts = decompose_operator(&inv, &t).unwrap();
        assert!((&parts.range_part - &t).norm() < 1e-14);
        assert!(parts.mixed_part.norm() < 1e-14 && parts.complement_part.norm() < 1e-14);

        let parts = decompose_operator(&e11(), &dmatrix![0.0, 0.0; 0.0, 1.0]).unwrap();
        assert!(parts.range_part.norm() == 0.0 && parts.mixed_part.norm() == 0.0);
        assert_eq!(parts.complement_part, dmatrix![0.0, 0.0; 0.0, 1.0]);
    }

    #[test]
    fn chart_forward_examples() {
        let p = e11();
        assert_eq!(chart_forward(&p, p.x()).unwrap(), *p.x());
        let s = 0.4;
        let t = dmatrix![1.0, 0.0; s, 0.0];
        assert!((chart_forward(&p, &t).unwrap() - &t).norm() < 1e-15);
        let t = dmatrix![1.0, 0.0; 0.0, 0.3];
        assert!((chart_forward(&p, &t).unwrap() - &t).norm() < 1e-15);
    }

    #[test]
    fn chart_inverse_examples() {
        let p = e11();
        assert_eq!(chart_inverse(&p, p.x()).unwrap(), *p.x());
        let m = dmatrix![1.0, 0.0; 0.4, 0.0];
        assert!((chart_inverse(&p, &m).unwrap() - &m).norm() < 1e-15);
    }

    #[test]
    fn chart_rejects_far_points() {
        let p = e11();
        let far = dmatrix![3.0, 0.0; 0.0, 0.0];
        assert!(matches!(
            chart_forward(&p, &far),
            Err(Error::Neighborhood { .. })
        ));
        assert!(matches!(
            chart_inverse(&p, &far),
            Err(Error::Neighborhood { .. })
        ));
    }

    #[test]
    fn derivative_at_base_is_identity() {
        let mut rng = random::seeded(4);
        let x = random::rank_matrix(&mut rng, 4, 3, 2);
        let p = OperatorPoint::new(&x).unwrap();
        for _ in 0..20 {
            let dt = random::gaussian_matrix(&mut rng, 4, 3);
            let d = chart_derivative(&p, &x, &dt).unwrap();
            assert!((d - &dt).norm() <= 1e-12 * (1.0 + dt.norm()));
        }
    }

    #[test]
    fn derivative_is_homogeneous() {
        let mut rng = random::seeded(5);
        let x = random::rank_matrix(&mut rng, 3, 3, 1);
        let p = OperatorPoint::new(&x).unwrap();
        let t =
            &x + random::gaussian_matrix(&mut rng, 3, 3) * (0.1 * p.gen_inv().ball_radius() / 3.0);
        let dt = random::gaussian_matrix(&mut rng, 3, 3);
        let a = 2.75;
        let lhs = chart_derivative(&p, &t, &(&dt * a)).unwrap();
        let rhs = chart_derivative(&p, &t, &dt).unwrap() * a;
        assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + dt.norm() * a));
    }

    #[test]
    fn verify_examples() {
        let tol = Tolerances::default();
        let r = verify_chart_maps_manifold(&e11(), 100, 1, &tol).unwrap();
        assert!(r.passed(&tol), "{r:?}");
        let inv = OperatorPoint::new(&dmatrix![2.0, 1.0; 0.0, 1.0]).unwrap();
        let r = verify_chart_maps_manifold(&inv, 20, 1, &tol).unwrap();
        assert!(r.passed(&tol), "{r:?}");
        assert_eq!((r.dim_tangent, r.dim_complement), (4, 0));
        let x = random::rank_matrix(&mut random::seeded(6), 5, 4, 2);
        let r = verify_chart_maps_manifold(&OperatorPoint::new(&x).unwrap(), 100, 2, &tol).unwrap();
        assert!(r.passed(&tol), "{r:?}");
        assert_eq!((r.rank, r.dim_tangent, r.dim_complement), (2, 14, 6));
    }
}
