use serde::Serialize;

use super::{nashed_chen_inverse, GenInverse};
use crate::error::Result;
use crate::linalg::{self, spectral_norm};
use crate::subspace::{
    direct_sum_separation, is_direct_sum_with, subspace_distance, subspace_intersection_with,
    Subspace,
};
use crate::tolerance::Tolerances;
use crate::Matrix;

/// One condition's verdict and the quantity it thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionCheck {
    pub holds: bool,
    pub residual: f64,
}

/// The seven equivalent stability conditions for `T` near `A`.
///
/// - (i) `R(T) ∩ N⁺ = {0}`; residual is the separation of the two bases.
/// - (ii) `B = A⁺C⁻¹` is a generalized inverse of `T` with `R(B) = R⁺`,
///   `N(B) = N⁺`; residual is the relative `‖TBT − T‖`.
/// - (iii) `R(T) ⊕ N⁺` is the codomain; residual is the separation.
/// - (iv) `N(T) ⊕ R⁺` is the domain; residual is the separation.
/// - (v) `(I − A⁺A)·N(T) = N(A)`; residual is the largest principal angle.
/// - (vi) `C⁻¹T·N(A) ⊂ R(A)`; residual is the relative escape from `R(A)`.
/// - (vii) `R(C⁻¹T) ⊂ R(A)`; residual is the relative escape from `R(A)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionReport {
    #[serde(rename = "i")]
    pub c_i: ConditionCheck,
    #[serde(rename = "ii")]
    pub c_ii: ConditionCheck,
    #[serde(rename = "iii")]
    pub c_iii: ConditionCheck,
    #[serde(rename = "iv")]
    pub c_iv: ConditionCheck,
    #[serde(rename = "v")]
    pub c_v: ConditionCheck,
    #[serde(rename = "vi")]
    pub c_vi: ConditionCheck,
    #[serde(rename = "vii")]
    pub c_vii: ConditionCheck,
}

impl ConditionReport {
    pub fn checks(&self) -> [ConditionCheck; 7] {
        [
            self.c_i, self.c_ii, self.c_iii, self.c_iv, self.c_v, self.c_vi, self.c_vii,
        ]
    }

    pub fn verdicts(&self) -> [bool; 7] {
        self.checks().map(|c| c.holds)
    }

    pub fn all_hold(&self) -> bool {
        self.verdicts().iter().all(|&b| b)
    }

    pub fn none_hold(&self) -> bool {
        self.verdicts().iter().all(|&b| !b)
    }

    /// Whether the seven verdicts agree, as they must inside the ball.
    pub fn consistent(&self) -> bool {
        self.all_hold() || self.none_hold()
    }
}

/// Evaluates each condition independently of the others.
pub fn check_equivalent_conditions(
    g: &GenInverse,
    t: &Matrix,
    tol: &Tolerances,
) -> Result<ConditionReport> {
    let perturbed = nashed_chen_inverse(g, t, tol.margin)?;
    let (m, n) = t.shape();
    let a = g.a();
    let rank_tol = tol.rank_tol_for(m, n);

    let range_t = Subspace::range_of_with(t, rank_tol);
    let null_t = Subspace::null_space_of_with(t, rank_tol);
    let range_a = Subspace::range_of_with(a, rank_tol);
    let null_a = Subspace::null_space_of_with(a, rank_tol);
    let r_plus = g.range_of_inverse();
    let n_plus = g.null_of_inverse();

    let sep_i = direct_sum_separation(&range_t, n_plus);
    let c_i = ConditionCheck {
        holds: subspace_intersection_with(&range_t, n_plus, tol.direct_sum_tol)?.is_zero(),
        residual: sep_i,
    };

    let b = &perturbed.b;
    let tbt = perturbed.residual / ((1.0 + spectral_norm(t)) * (1.0 + spectral_norm(b)));
    let b_rank_tol = tol.rank_tol_for(n, m);
    let range_gap = subspace_distance(&Subspace::range_of_with(b, b_rank_tol), r_plus)?;
    let null_gap = subspace_distance(&Subspace::null_space_of_with(b, b_rank_tol), n_plus)?;
    let c_ii = ConditionCheck {
        holds: tbt <= tol.residual_tol && range_gap <= tol.angle_tol && null_gap <= tol.angle_tol,
        residual: tbt,
    };

    let c_iii = ConditionCheck {
        holds: is_direct_sum_with(&range_t, n_plus, tol.direct_sum_tol),
        residual: sep_i,
    };

    let c_iv = ConditionCheck {
        holds: is_direct_sum_with(&null_t, r_plus, tol.direct_sum_tol),
        residual: direct_sum_separation(&null_t, r_plus),
    };

    let complement_of_inverse = Matrix::identity(n, n) - g.a_plus() * a;
    let image = null_t.image_under(&complement_of_inverse)?;
    let angle = subspace_distance(&image, &null_a)?;
    let c_v = ConditionCheck {
        holds: angle <= tol.angle_tol,
        residual: angle,
    };

    let c_inv_t = &perturbed.c_inverse * t;
    let escape = Matrix::identity(m, m) - range_a.orthogonal_projector();
    let scale = 1.0 + spectral_norm(&c_inv_t);
    let on_null = linalg::spectral_norm(&(&escape * &c_inv_t * null_a.basis())) / scale;
    let c_vi = ConditionCheck {
        holds: on_null <= tol.residual_tol,
        residual: on_null,
    };
    let everywhere = linalg::spectral_norm(&(&escape * &c_inv_t)) / scale;
    let c_vii = ConditionCheck {
        holds: everywhere <= tol.residual_tol,
        residual: everywhere,
    };

    Ok(ConditionReport {
        c_i,
        c_ii,
        c_iii,
        c_iv,
        c_v,
        c_vi,
        c_vii,
    })
}
