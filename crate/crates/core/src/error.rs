use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite entry in {0}")]
    NonFinite(String),

    /// Two subspaces that were required to be complementary are not.
    #[error("subspaces do not form a direct sum: {0}")]
    Complement(String),

    /// `‖T − A‖·‖A⁺‖` is not safely below one.
    #[error("operator outside the neighborhood: ‖T−A‖·‖A⁺‖ = {product} ≥ 1 − {margin}")]
    Neighborhood { product: f64, margin: f64 },

    #[error("matrix is not a generalized inverse (Penrose residual {residual:e})")]
    NotAGenInverse { residual: f64 },

    #[error("Newton iteration did not converge after {iterations} steps (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("Newton step system is numerically singular")]
    SingularJacobian,

    #[error(
        "supplied jacobian disagrees with finite differences (relative error {relative_error:e})"
    )]
    JacobianMismatch { relative_error: f64 },

    /// The point left the co-final set `{x : M(x) ⊕ E_* = E}`.
    #[error("point {point:?} is not in the co-final set")]
    NotCofinal { point: Vec<f64> },

    #[error("point {point:?} is outside the domain of the family")]
    Domain { point: Vec<f64> },

    #[error("invalid step: {0}")]
    Step(String),

    #[error("distribution dimension changed from {expected} to {found}")]
    DimensionChanged { expected: usize, found: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
