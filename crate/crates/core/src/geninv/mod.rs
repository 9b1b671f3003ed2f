//! Generalized inverses and their perturbation.
//!
//! A generalized inverse `A⁺` of `A` satisfies `A·A⁺·A = A` and
//! `A⁺·A·A⁺ = A⁺`. It is pinned down by its range `R⁺ = R(A⁺)` and null
//! space `N⁺ = N(A⁺)`, which must complement `N(A)` and `R(A)`
//! respectively. Near `A`, with `C = I + (T−A)A⁺`, the matrix
//! `B = A⁺·C⁻¹` is a generalized inverse of `T` exactly when
//! `R(T) ∩ N⁺ = {0}`.

mod conditions;
mod family;

pub use conditions::{check_equivalent_conditions, ConditionCheck, ConditionReport};
pub use family::{
    is_locally_fine, mp_convergence_along, mp_convergence_experiment, sweep_to_csv, LocalFineness,
    SampledFamily, SweepRow,
};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, spectral_norm, try_inverse, ThinSvd};
use crate::subspace::{is_direct_sum, oblique_projector, Subspace};
use crate::tolerance::{default_rank_tol, GENINV_TOL};
use crate::Matrix;

/// A generalized inverse bundled with the subspaces that define it.
#[derive(Debug, Clone)]
pub struct GenInverse {
    a: Matrix,
    a_plus: Matrix,
    range_of_inverse: Subspace,
    null_of_inverse: Subspace,
}

impl GenInverse {
    /// The Moore–Penrose inverse, i.e. `R⁺ = N(A)⊥` and `N⁺ = R(A)⊥`.
    pub fn moore_penrose(a: &Matrix) -> Result<Self> {
        linalg::ensure_finite(a, "A")?;
        let a_plus = mp_inverse(a, default_rank_tol(a.nrows(), a.ncols()));
        Ok(Self::from_parts(a.clone(), a_plus))
    }

    /// Wraps an existing pair after checking both defining equations to
    /// the relative Penrose residual `tol`.
    pub fn from_pair(a: &Matrix, a_plus: &Matrix, tol: f64) -> Result<Self> {
        linalg::ensure_finite(a, "A")?;
        linalg::ensure_finite(a_plus, "A⁺")?;
        linalg::ensure_shape(a_plus, a.ncols(), a.nrows(), "A⁺")?;
        let residual = penrose_pair_residual(a, a_plus);
        if residual > tol {
            return Err(Error::NotAGenInverse { residual });
        }
        Ok(Self::from_parts(a.clone(), a_plus.clone()))
    }

    fn from_parts(a: Matrix, a_plus: Matrix) -> Self {
        let range_of_inverse = Subspace::range_of(&a_plus);
        let null_of_inverse = Subspace::null_space_of(&a_plus);
        Self {
            a,
            a_plus,
            range_of_inverse,
            null_of_inverse,
        }
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn a_plus(&self) -> &Matrix {
        &self.a_plus
    }

    /// `R⁺ = R(A⁺)`, a complement of `N(A)` in the domain.
    pub fn range_of_inverse(&self) -> &Subspace {
        &self.range_of_inverse
    }

    /// `N⁺ = N(A⁺)`, a complement of `R(A)` in the codomain.
    pub fn null_of_inverse(&self) -> &Subspace {
        &self.null_of_inverse
    }

    pub fn inverse_norm(&self) -> f64 {
        spectral_norm(&self.a_plus)
    }

    /// Radius `‖A⁺‖⁻¹` of the ball `V(A, A⁺)`; infinite for `A⁺ = 0`.
    pub fn ball_radius(&self) -> f64 {
        let n = self.inverse_norm();
        if n == 0.0 {
            f64::INFINITY
        } else {
            1.0 / n
        }
    }

    /// `C_A(A⁺, T) = I + (T − A)·A⁺`.
    pub fn c_factor(&self, t: &Matrix) -> Matrix {
        Matrix::identity(self.a.nrows(), self.a.nrows()) + (t - &self.a) * &self.a_plus
    }

    /// `D_A(A⁺, T) = I + A⁺·(T − A)`.
    pub fn d_factor(&self, t: &Matrix) -> Matrix {
        Matrix::identity(self.a.ncols(), self.a.ncols()) + &self.a_plus * (t - &self.a)
    }

    /// Checks `‖T − A‖·‖A⁺‖ < 1 − margin` and returns the product.
    pub fn check_neighborhood(&self, t: &Matrix, margin: f64) -> Result<f64> {
        linalg::ensure_shape(t, self.a.nrows(), self.a.ncols(), "T")?;
        linalg::ensure_finite(t, "T")?;
        let product = spectral_norm(&(t - &self.a)) * self.inverse_norm();
        if product < 1.0 - margin {
            Ok(product)
        } else {
            Err(Error::Neighborhood { product, margin })
        }
    }

    /// Penrose residuals of the stored pair.
    pub fn residuals(&self) -> PenroseResiduals {
        penrose_residuals(&self.a, &self.a_plus)
    }
}

/// `A⁺ = (A|_{R⁺})⁻¹ ∘ P` where `P` projects onto `R(A)` along `N⁺`.
pub fn gen_inverse_from_complements(
    a: &Matrix,
    r_plus: &Subspace,
    n_plus: &Subspace,
) -> Result<GenInverse> {
    linalg::ensure_finite(a, "A")?;
    let (m, n) = a.shape();
    if r_plus.ambient_dim() != n || n_plus.ambient_dim() != m {
        return Err(Error::Shape(format!(
            "R⁺ must live in ℝ^{n} and N⁺ in ℝ^{m}, got ℝ^{} and ℝ^{}",
            r_plus.ambient_dim(),
            n_plus.ambient_dim()
        )));
    }
    let null_a = Subspace::null_space_of(a);
    let range_a = Subspace::range_of(a);
    if !is_direct_sum(&null_a, r_plus) {
        return Err(Error::Complement("N(A) ⊕ R⁺ is not the domain".into()));
    }
    if !is_direct_sum(&range_a, n_plus) {
        return Err(Error::Complement("R(A) ⊕ N⁺ is not the codomain".into()));
    }
    let onto_range = oblique_projector(&range_a, n_plus)?;
    // A maps R⁺ isomorphically onto R(A); invert it on that subspace.
    let restricted = a * r_plus.basis();
    let restricted_inv = mp_inverse(&restricted, default_rank_tol(m, r_plus.dim()));
    let a_plus = r_plus.basis() * restricted_inv * &onto_range.matrix;
    Ok(GenInverse {
        a: a.clone(),
        a_plus,
        range_of_inverse: r_plus.clone(),
        null_of_inverse: n_plus.clone(),
    })
}

/// Moore–Penrose inverse `V·Σ⁺·Uᵀ`, dropping singular values at or below
/// `rel_tol · σ_max`.
pub fn mp_inverse(a: &Matrix, rel_tol: f64) -> Matrix {
    let (m, n) = a.shape();
    let svd = ThinSvd::new(a);
    let r = svd.rank(rel_tol);
    let mut out = Matrix::zeros(n, m);
    for k in 0..r {
        let inv = 1.0 / svd.singular_values[k];
        out += svd.v_t.row(k).transpose() * svd.u.column(k).transpose() * inv;
    }
    out
}

/// Absolute residuals of the four Penrose equations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PenroseResiduals {
    /// `‖A·X·A − A‖`
    pub axa: f64,
    /// `‖X·A·X − X‖`
    pub xax: f64,
    /// `‖(A·X)ᵀ − A·X‖`
    pub ax_symmetry: f64,
    /// `‖(X·A)ᵀ − X·A‖`
    pub xa_symmetry: f64,
    /// `(1 + ‖A‖)(1 + ‖X‖)`
    pub scale: f64,
}

impl PenroseResiduals {
    pub fn max_relative(&self) -> f64 {
        self.axa
            .max(self.xax)
            .max(self.ax_symmetry)
            .max(self.xa_symmetry)
            / self.scale
    }
}

pub fn penrose_residuals(a: &Matrix, x: &Matrix) -> PenroseResiduals {
    let ax = a * x;
    let xa = x * a;
    PenroseResiduals {
        axa: spectral_norm(&(&ax * a - a)),
        xax: spectral_norm(&(&xa * x - x)),
        ax_symmetry: spectral_norm(&(ax.transpose() - &ax)),
        xa_symmetry: spectral_norm(&(xa.transpose() - &xa)),
        scale: (1.0 + spectral_norm(a)) * (1.0 + spectral_norm(x)),
    }
}

/// `max(‖AXA − A‖, ‖XAX − X‖) / ((1 + ‖A‖)(1 + ‖X‖))`.
pub fn penrose_pair_residual(a: &Matrix, x: &Matrix) -> f64 {
    let r = penrose_residuals(a, x);
    r.axa.max(r.xax) / r.scale
}

/// Output of [`nashed_chen_inverse`].
#[derive(Debug, Clone)]
pub struct PerturbedInverse {
    /// `B = A⁺·C⁻¹`
    pub b: Matrix,
    pub c_inverse: Matrix,
    /// `‖T·B·T − T‖`; zero exactly when `R(T) ∩ N(A⁺) = {0}`.
    pub residual: f64,
    /// `‖B·T·B − B‖`, zero for every `T` in the ball.
    pub outer_residual: f64,
    /// `‖A⁺·C⁻¹ − D⁻¹·A⁺‖` with `D = I + A⁺(T − A)`.
    pub factorization_gap: f64,
}

/// `B = A⁺·(I + (T−A)A⁺)⁻¹` for `T` in the ball `‖T − A‖·‖A⁺‖ < 1 − margin`.
pub fn nashed_chen_inverse(g: &GenInverse, t: &Matrix, margin: f64) -> Result<PerturbedInverse> {
    g.check_neighborhood(t, margin)?;
    let c_inverse = try_inverse(&g.c_factor(t)).ok_or(Error::Neighborhood {
        product: g.inverse_norm() * spectral_norm(&(t - g.a())),
        margin,
    })?;
    let d_inverse = try_inverse(&g.d_factor(t)).ok_or(Error::Neighborhood {
        product: g.inverse_norm() * spectral_norm(&(t - g.a())),
        margin,
    })?;
    let b = g.a_plus() * &c_inverse;
    let tb = t * &b;
    let residual = spectral_norm(&(&tb * t - t));
    let outer_residual = spectral_norm(&(&b * t * &b - &b));
    let factorization_gap = spectral_norm(&(&b - d_inverse * g.a_plus()));
    Ok(PerturbedInverse {
        b,
        c_inverse,
        residual,
        outer_residual,
        factorization_gap,
    })
}

/// `δ = min(‖A⁺‖⁻¹, ‖A⁺·A·A⊕‖⁻¹)`: inside this radius the stability
/// condition transfers from `A⁺` to the other inverse `A⊕`.
pub fn transfer_radius(g: &GenInverse, a_oplus: &Matrix) -> Result<f64> {
    linalg::ensure_shape(a_oplus, g.a().ncols(), g.a().nrows(), "A⊕")?;
    let residual = penrose_pair_residual(g.a(), a_oplus);
    if residual > GENINV_TOL {
        return Err(Error::NotAGenInverse { residual });
    }
    let mixed = g.a_plus() * g.a() * a_oplus;
    let inv = |x: f64| if x == 0.0 { f64::INFINITY } else { 1.0 / x };
    Ok(inv(g.inverse_norm()).min(inv(spectral_norm(&mixed))))
}

/// Membership of a matrix in `F_r ∩ Φ_{m,n}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RankClass {
    /// `dim N(A)`
    pub nullity: usize,
    /// `codim R(A)`
    pub corank: usize,
    pub rank: usize,
}

pub fn classify_rank_class(a: &Matrix) -> RankClass {
    let rank = linalg::rank(a);
    RankClass {
        nullity: a.ncols() - rank,
        corank: a.nrows() - rank,
        rank,
    }
}
