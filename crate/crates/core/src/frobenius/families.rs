//! Named distributions with a preferred base point and complement.

use super::{DistributionFamily, SplitFrame};
use crate::charts::{tangent_space_basis, OperatorPoint};
use crate::error::{Error, Result};
use crate::linalg::unvectorize;
use crate::subspace::Subspace;
use crate::{Matrix, Vector};

pub const BUILTIN_FAMILIES: [&str; 4] = ["circle", "paraboloid", "contact", "operator"];

#[derive(Debug, Clone)]
pub struct BuiltinFamily {
    pub name: &'static str,
    pub family: DistributionFamily,
    pub x0: Vector,
    pub e_star: Subspace,
    /// Whether ray integration from `x0` yields an integral patch.
    pub integrable: bool,
}

impl BuiltinFamily {
    pub fn frame(&self) -> Result<SplitFrame> {
        SplitFrame::new(&self.family, &self.x0, self.e_star.clone())
    }
}

fn span(rows: usize, cols: usize, column_major: &[f64]) -> Subspace {
    Subspace::span(&Matrix::from_column_slice(rows, cols, column_major))
        .expect("family basis has full column rank")
}

fn axis(n: usize, k: usize) -> Subspace {
    let mut v = vec![0.0; n];
    v[k] = 1.0;
    span(n, 1, &v)
}

pub fn builtin(name: &str) -> Result<BuiltinFamily> {
    match name {
        "circle" => Ok(circle()),
        "paraboloid" => Ok(paraboloid()),
        "contact" => Ok(contact()),
        "operator" => Ok(operator()),
        other => Err(Error::InvalidInput(format!(
            "unknown family {other:?}; known families: {}",
            BUILTIN_FAMILIES.join(", ")
        ))),
    }
}

/// Tangent lines of the circles about the origin, `M(x, y) = span{(y, −x)}`
/// on `ℝ² ∖ {0}`, based at `(0, 1)` with `E_* = span{e₂}`. The integral
/// curve through the base point is `y = √(1 − x²)`.
pub fn circle() -> BuiltinFamily {
    let family = DistributionFamily::new(
        2,
        |p| span(2, 1, &[p[1], -p[0]]),
        |p| p[0] != 0.0 || p[1] != 0.0,
    );
    BuiltinFamily {
        name: "circle",
        family,
        x0: Vector::from_vec(vec![0.0, 1.0]),
        e_star: axis(2, 1),
        integrable: true,
    }
}

/// Tangent planes of `z = x² + y² + c`, `M(p) = span{(1, 0, 2p₁), (0, 1, 2p₂)}`.
pub fn paraboloid() -> BuiltinFamily {
    let family = DistributionFamily::new(
        3,
        |p| span(3, 2, &[1.0, 0.0, 2.0 * p[0], 0.0, 1.0, 2.0 * p[1]]),
        |_| true,
    );
    BuiltinFamily {
        name: "paraboloid",
        family,
        x0: Vector::zeros(3),
        e_star: axis(3, 2),
        integrable: true,
    }
}

/// The contact planes `dz = y·dx`, `M(p) = span{(1, 0, p₂), (0, 1, 0)}`,
/// which admit no integral surface.
pub fn contact() -> BuiltinFamily {
    let family = DistributionFamily::new(
        3,
        |p| span(3, 2, &[1.0, 0.0, p[1], 0.0, 1.0, 0.0]),
        |_| true,
    );
    BuiltinFamily {
        name: "contact",
        family,
        x0: Vector::zeros(3),
        e_star: axis(3, 2),
        integrable: false,
    }
}

/// `X ↦ M(X)` on vectorized `2 × 2` operators, based at the matrix unit
/// `e₁₁` with `E_*` spanned by `e₂₂`.
///
/// `dim M(X)` jumps from three to four off the rank-one class, so this is
/// not a distribution on any open set and carries `integrable = false`:
/// integrator stages leave the class and fail with `DimensionChanged`. It
/// exists for co-final membership queries.
pub fn operator() -> BuiltinFamily {
    let family = DistributionFamily::new(
        4,
        |p| {
            let x = unvectorize(p.as_slice(), 2, 2);
            let point = OperatorPoint::new(&x).expect("finite operator");
            tangent_space_basis(&point).space().clone()
        },
        |_| true,
    );
    BuiltinFamily {
        name: "operator",
        family,
        x0: Vector::from_vec(vec![1.0, 0.0, 0.0, 0.0]),
        e_star: axis(4, 3),
        integrable: false,
    }
}
