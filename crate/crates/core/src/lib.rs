//! Generalized inverses and their perturbation theory on dense real matrices.
//!
//! The crate is organized bottom-up:
//!
//! - [`subspace`]: rank decisions, subspaces with orthonormal bases, oblique
//!   projectors, direct sums, intersections and principal angles.
//! - [`geninv`]: generalized inverses with prescribed range and null space,
//!   the perturbed inverse `B = A⁺(I + (T−A)A⁺)⁻¹`, the seven equivalent
//!   stability conditions, transfer radii and locally fine points.
//! - [`conjugacy`]: the diffeomorphisms `φ`, `ψ` that conjugate a smooth map
//!   to its derivative near a locally fine point.
//! - [`charts`]: tangent spaces `M(X) = {T : T·N(X) ⊂ R(X)}` of fixed-rank
//!   operator classes and the chart `T ↦ (T−X)X⁺X + C⁻¹T`.
//! - [`frobenius`]: co-final sets, graph operators and numerical integration
//!   of subspace distributions.
//!
//! All operators are `nalgebra` dense matrices of `f64`.

pub mod charts;
pub mod conjugacy;
pub mod error;
pub mod frobenius;
pub mod geninv;
pub mod json;
pub mod linalg;
pub mod random;
pub mod subspace;
pub mod tolerance;

pub use error::{Error, Result};
pub use tolerance::Tolerances;

pub use charts::{OperatorPoint, OperatorSubspace};
pub use frobenius::{DistributionFamily, GraphOperator, IntegralPatch, SplitFrame};
pub use geninv::{ConditionReport, GenInverse, SampledFamily};
pub use subspace::{Projector, Subspace};

/// Dense real matrix, the concrete form of a bounded operator between
/// finite-dimensional spaces.
pub type Matrix = nalgebra::DMatrix<f64>;

/// Dense real column vector.
pub type Vector = nalgebra::DVector<f64>;

/// Library version embedded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
