//! Numerical thresholds shared by every module.

use serde::{Deserialize, Serialize};

/// Smallest singular value of a concatenated pair of orthonormal bases
/// below which the pair is treated as linearly dependent.
pub const DIRECT_SUM_TOL: f64 = 1e-10;

/// Principal-angle threshold (radians) for subspace equality and containment.
pub const ANGLE_TOL: f64 = 1e-8;

/// Relative residual threshold for operator identities such as `TBT = T`.
pub const RESIDUAL_TOL: f64 = 1e-8;

/// Safety margin on `‖T−A‖·‖A⁺‖ < 1`.
pub const NEIGHBORHOOD_MARGIN: f64 = 1e-6;

/// Relative Penrose residual accepted when validating a supplied
/// generalized inverse.
pub const GENINV_TOL: f64 = 1e-10;

/// Relative singular-value cutoff scale; the rank tolerance is this times
/// `max(rows, cols)`.
pub const RANK_TOL_SCALE: f64 = 1e-10;

/// Default relative rank tolerance for an `rows × cols` matrix.
pub fn default_rank_tol(rows: usize, cols: usize) -> f64 {
    RANK_TOL_SCALE * rows.max(cols).max(1) as f64
}

/// Every threshold a computation may consult, with overridable defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Relative singular-value cutoff. `None` means `1e-10·max(rows, cols)`.
    pub rank_tol: Option<f64>,
    pub direct_sum_tol: f64,
    pub angle_tol: f64,
    pub residual_tol: f64,
    pub margin: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub ode_step: f64,
    pub grid_step: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rank_tol: None,
            direct_sum_tol: DIRECT_SUM_TOL,
            angle_tol: ANGLE_TOL,
            residual_tol: RESIDUAL_TOL,
            margin: NEIGHBORHOOD_MARGIN,
            newton_tol: 1e-13,
            newton_max_iter: 50,
            ode_step: 1e-3,
            grid_step: 1e-2,
        }
    }
}

impl Tolerances {
    pub fn rank_tol_for(&self, rows: usize, cols: usize) -> f64 {
        self.rank_tol
            .unwrap_or_else(|| default_rank_tol(rows, cols))
    }
}
