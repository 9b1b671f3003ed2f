//! Integration of subspace distributions `x ↦ M(x)`.
//!
//! Fix `x₀`, `M₀ = M(x₀)` and a complement `E_*` of `M₀`. Wherever
//! `M(x) ⊕ E_* = E` (the co-final set), `M(x)` is the graph of a unique
//! `α(x): M₀ → E_*`. An integral surface through `x₀` is then the graph
//! of `ψ: M₀ → E_*` solving `ψ'(v) = α(v + ψ(v))`, which is integrated
//! here along rays from the base point.

pub mod families;
mod integrate;

pub use integrate::{integrability_residual, integrate_patch, verify_tangency, IntegralPatch};

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{self, hstack};
use crate::subspace::{
    is_direct_sum_with, oblique_projector, oblique_projector_with, Projector, Subspace,
};
use crate::tolerance::Tolerances;
use crate::{Matrix, Vector};

type SubspaceRule = dyn Fn(&Vector) -> Subspace + Send + Sync;
type DomainRule = dyn Fn(&Vector) -> bool + Send + Sync;

/// A rule `x ↦ M(x)` on a domain `Λ ⊂ ℝⁿ`.
#[derive(Clone)]
pub struct DistributionFamily {
    ambient_dim: usize,
    subspace_at: Arc<SubspaceRule>,
    domain: Arc<DomainRule>,
}

impl fmt::Debug for DistributionFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DistributionFamily")
            .field("ambient_dim", &self.ambient_dim)
            .finish_non_exhaustive()
    }
}

impl DistributionFamily {
    pub fn new<S, D>(ambient_dim: usize, subspace_at: S, domain: D) -> Self
    where
        S: Fn(&Vector) -> Subspace + Send + Sync + 'static,
        D: Fn(&Vector) -> bool + Send + Sync + 'static,
    {
        Self {
            ambient_dim,
            subspace_at: Arc::new(subspace_at),
            domain: Arc::new(domain),
        }
    }

    /// `M(x) = m` everywhere on `ℝⁿ`.
    pub fn constant(m: Subspace) -> Self {
        let n = m.ambient_dim();
        Self::new(n, move |_| m.clone(), |_| true)
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn contains(&self, x: &Vector) -> bool {
        x.len() == self.ambient_dim && x.iter().all(|v| v.is_finite()) && (self.domain)(x)
    }

    /// `M(x)`, or `Domain` when `x ∉ Λ`.
    pub fn subspace_at(&self, x: &Vector) -> Result<Subspace> {
        if !self.contains(x) {
            return Err(Error::Domain {
                point: x.iter().copied().collect(),
            });
        }
        let m = (self.subspace_at)(x);
        if m.ambient_dim() != self.ambient_dim {
            return Err(Error::Shape(format!(
                "M(x) lives in ℝ^{}, family in ℝ^{}",
                m.ambient_dim(),
                self.ambient_dim
            )));
        }
        Ok(m)
    }
}

/// `M₀ = M(x₀)`, a complement `E_*`, and the projectors between them.
#[derive(Debug, Clone)]
pub struct SplitFrame {
    x0: Vector,
    m0: Subspace,
    e_star: Subspace,
    onto_m0: Projector,
    onto_e_star: Projector,
    /// Direct-sum threshold used for co-final membership.
    direct_sum_tol: f64,
}

impl SplitFrame {
    pub fn new(family: &DistributionFamily, x0: &Vector, e_star: Subspace) -> Result<Self> {
        Self::with_tolerances(family, x0, e_star, &Tolerances::default())
    }

    pub fn with_tolerances(
        family: &DistributionFamily,
        x0: &Vector,
        e_star: Subspace,
        tol: &Tolerances,
    ) -> Result<Self> {
        let m0 = family.subspace_at(x0)?;
        let onto_m0 = oblique_projector_with(&m0, &e_star, tol.direct_sum_tol)?;
        let onto_e_star = oblique_projector_with(&e_star, &m0, tol.direct_sum_tol)?;
        Ok(Self {
            x0: x0.clone(),
            m0,
            e_star,
            onto_m0,
            onto_e_star,
            direct_sum_tol: tol.direct_sum_tol,
        })
    }

    /// Uses `E_* = M₀⊥`.
    pub fn orthogonal(family: &DistributionFamily, x0: &Vector) -> Result<Self> {
        let m0 = family.subspace_at(x0)?;
        Self::new(family, x0, crate::subspace::orthogonal_complement(&m0))
    }

    pub fn base_point(&self) -> &Vector {
        &self.x0
    }

    pub fn m0(&self) -> &Subspace {
        &self.m0
    }

    pub fn e_star(&self) -> &Subspace {
        &self.e_star
    }

    /// `P^{E_*}_{M₀}`, onto `M₀` along `E_*`.
    pub fn onto_m0(&self) -> &Projector {
        &self.onto_m0
    }

    /// `P^{M₀}_{E_*}`, onto `E_*` along `M₀`.
    pub fn onto_e_star(&self) -> &Projector {
        &self.onto_e_star
    }

    /// Coordinates of `P^{E_*}_{M₀}x` in the basis of `M₀`.
    pub fn m0_coords(&self, x: &Vector) -> Vector {
        self.m0.basis().transpose() * (&self.onto_m0.matrix * x)
    }

    /// Coordinates of `P^{M₀}_{E_*}x` in the basis of `E_*`.
    pub fn e_star_coords(&self, x: &Vector) -> Vector {
        self.e_star.basis().transpose() * (&self.onto_e_star.matrix * x)
    }

    /// `Q₀v + Q_*w`.
    pub fn point(&self, v: &Vector, w: &Vector) -> Vector {
        self.m0.basis() * v + self.e_star.basis() * w
    }
}

/// The unique `α: E₀ → E_*` with `E₁ = {e + αe : e ∈ E₀}`, stored in the
/// orthonormal bases of `E₀` and `E_*`.
#[derive(Debug, Clone)]
pub struct GraphOperator {
    pub alpha: Matrix,
    e0: Subspace,
    e_star: Subspace,
}

impl GraphOperator {
    /// `α` as a map on the ambient space, `Q_*·α·Q₀ᵀ`.
    pub fn ambient(&self) -> Matrix {
        self.e_star.basis() * &self.alpha * self.e0.basis().transpose()
    }

    /// The subspace `{e + αe : e ∈ E₀}`.
    pub fn graph(&self) -> Result<Subspace> {
        let cols = self.e0.basis() + self.e_star.basis() * &self.alpha;
        Subspace::span(&cols)
    }

    pub fn e0(&self) -> &Subspace {
        &self.e0
    }

    pub fn e_star(&self) -> &Subspace {
        &self.e_star
    }
}

/// `α = P^{E₀}_{E_*} ∘ P^{E_*}_{E₁}` restricted to `E₀`.
pub fn graph_operator(e0: &Subspace, e1: &Subspace, e_star: &Subspace) -> Result<GraphOperator> {
    let onto_e1 = oblique_projector(e1, e_star)?;
    let onto_e_star = oblique_projector(e_star, e0)?;
    let alpha = e_star.basis().transpose() * onto_e_star.matrix * onto_e1.matrix * e0.basis();
    Ok(GraphOperator {
        alpha,
        e0: e0.clone(),
        e_star: e_star.clone(),
    })
}

/// Whether `M(x) ⊕ E_* = E`.
pub fn cofinal_membership(
    family: &DistributionFamily,
    frame: &SplitFrame,
    x: &Vector,
) -> Result<bool> {
    let m = family.subspace_at(x)?;
    Ok(is_direct_sum_with(&m, &frame.e_star, frame.direct_sum_tol))
}

/// `α(x) = graph_operator(M₀, M(x), E_*)`.
///
/// Writing `e ∈ M₀` as `e = e₁ + s` with `e₁ ∈ M(x)`, `s ∈ E_*` gives
/// `αe = −s`, so a single solve against `[Q_{M(x)} | Q_*]` suffices.
pub fn alpha_field(
    family: &DistributionFamily,
    frame: &SplitFrame,
    x: &Vector,
) -> Result<GraphOperator> {
    let m = family.subspace_at(x)?;
    if m.dim() != frame.m0.dim() {
        return Err(Error::DimensionChanged {
            expected: frame.m0.dim(),
            found: m.dim(),
        });
    }
    let system = hstack(m.basis(), frame.e_star.basis());
    if !linalg::separation_exceeds(&system, frame.direct_sum_tol) {
        return Err(Error::NotCofinal {
            point: x.iter().copied().collect(),
        });
    }
    let sol = system
        .full_piv_lu()
        .solve(frame.m0.basis())
        .ok_or_else(|| Error::NotCofinal {
            point: x.iter().copied().collect(),
        })?;
    let k = m.dim();
    let alpha = -sol.rows(k, sol.nrows() - k).into_owned();
    Ok(GraphOperator {
        alpha,
        e0: frame.m0.clone(),
        e_star: frame.e_star.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::subspace::subspace_distance;
    use nalgebra::{dmatrix, dvector};

    fn line(v: &[f64]) -> Subspace {
        Subspace::span(&Matrix::from_column_slice(v.len(), 1, v)).unwrap()
    }

    #[test]
    fn identical_subspaces_give_zero() {
        let e0 = line(&[1.0, 2.0]);
        let g = graph_operator(&e0, &e0, &line(&[0.0, 1.0])).unwrap();
        assert!(g.alpha.norm() < 1e-15);
    }

    #[test]
    fn slope_in_the_plane() {
        let s = 0.7;
        let g = graph_operator(&line(&[1.0, 0.0]), &line(&[1.0, s]), &line(&[0.0, 1.0])).unwrap();
        assert!((g.alpha[(0, 0)] - s).abs() < 1e-15);
    }

    #[test]
    fn circle_alpha() {
        let fam = families::builtin("circle").unwrap();
        let frame = fam.frame().unwrap();
        for (x, y) in [(0.6, 0.8), (-0.3, 0.5), (0.0, 2.0)] {
            let a = alpha_field(&fam.family, &frame, &dvector![x, y]).unwrap();
            assert!((a.alpha[(0, 0)] + x / y).abs() < 1e-14);
            let direct = graph_operator(
                frame.m0(),
                &fam.family.subspace_at(&dvector![x, y]).unwrap(),
                frame.e_star(),
            )
            .unwrap();
            assert!((direct.alpha - &a.alpha).norm() < 1e-14);
        }
        let a = alpha_field(&fam.family, &frame, &dvector![0.6, 0.8]).unwrap();
        assert!((a.alpha[(0, 0)] + 0.75).abs() < 1e-15);
    }

    #[test]
    fn alpha_at_base_is_zero() {
        for name in families::BUILTIN_FAMILIES {
            let fam = families::builtin(name).unwrap();
            let frame = fam.frame().unwrap();
            let a = alpha_field(&fam.family, &frame, &fam.x0).unwrap();
            assert!(a.alpha.norm() < 1e-14, "{name}");
        }
    }

    #[test]
    fn paraboloid_alpha() {
        let fam = families::builtin("paraboloid").unwrap();
        let frame = fam.frame().unwrap();
        let a = alpha_field(&fam.family, &frame, &dvector![1.0, 2.0, 7.0]).unwrap();
        assert!((a.alpha - dmatrix![2.0, 4.0]).norm() < 1e-13);
    }

    #[test]
    fn graph_reproduces_target() {
        let fam = families::builtin("paraboloid").unwrap();
        let frame = fam.frame().unwrap();
        let x = dvector![0.3, -0.2, 1.0];
        let a = alpha_field(&fam.family, &frame, &x).unwrap();
        let d =
            subspace_distance(&a.graph().unwrap(), &fam.family.subspace_at(&x).unwrap()).unwrap();
        assert!(d < 1e-12);
    }

    #[test]
    fn not_cofinal_on_the_circle_equator() {
        let fam = families::builtin("circle").unwrap();
        let frame = fam.frame().unwrap();
        let x = dvector![1.0, 0.0];
        assert!(!cofinal_membership(&fam.family, &frame, &x).unwrap());
        assert!(matches!(
            alpha_field(&fam.family, &frame, &x),
            Err(Error::NotCofinal { .. })
        ));
        assert!(matches!(
            cofinal_membership(&fam.family, &frame, &dvector![0.0, 0.0]),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn operator_family_cofinality() {
        let fam = families::builtin("operator").unwrap();
        let frame = fam.frame().unwrap();
        assert!(cofinal_membership(&fam.family, &frame, &fam.x0).unwrap());
        // A_ε = diag(1, ε) is invertible, so M(A_ε) is all of B(ℝ²).
        let eps = dvector![1.0, 0.0, 0.0, 0.1];
        assert!(!cofinal_membership(&fam.family, &frame, &eps).unwrap());
        assert!(matches!(
            alpha_field(&fam.family, &frame, &eps),
            Err(Error::DimensionChanged {
                expected: 3,
                found: 4
            })
        ));
    }

    #[test]
    fn frame_requires_complement() {
        let fam = families::builtin("circle").unwrap();
        let err = SplitFrame::new(&fam.family, &fam.x0, line(&[1.0, 0.0]));
        assert!(matches!(err, Err(Error::Complement(_))));
    }
}
