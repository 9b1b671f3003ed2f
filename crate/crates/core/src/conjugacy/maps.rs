//! Named test maps, all based at the origin.

use rand::Rng;

use super::SmoothMap;
use crate::error::{Error, Result};
use crate::geninv::mp_inverse;
use crate::random;
use crate::tolerance::default_rank_tol;
use crate::{Matrix, Vector};

pub const BUILTIN_MAPS: [&str; 4] = ["parabola", "sine", "rank-jump", "poly3"];

/// A registered map with its base point.
#[derive(Debug, Clone)]
pub struct BuiltinMap {
    pub name: &'static str,
    pub map: SmoothMap,
    pub x0: Vector,
    /// Whether `f'` has constant rank near `x₀`.
    pub constant_rank: bool,
}

impl BuiltinMap {
    /// Moore–Penrose inverse of `f'(x₀)`.
    pub fn t0_plus(&self) -> Matrix {
        let t0 = self.map.jacobian(&self.x0);
        mp_inverse(&t0, default_rank_tol(t0.nrows(), t0.ncols()))
    }
}

/// Looks up a map by name. `seed` only affects `poly3`.
pub fn builtin(name: &str, seed: u64) -> Result<BuiltinMap> {
    let (name, map, constant_rank) = match name {
        "parabola" => ("parabola", parabola()?, true),
        "sine" => ("sine", sine()?, true),
        "rank-jump" => ("rank-jump", rank_jump()?, false),
        "poly3" => ("poly3", poly3(seed)?, true),
        other => {
            return Err(Error::InvalidInput(format!(
                "unknown map {other:?}; known maps: {}",
                BUILTIN_MAPS.join(", ")
            )))
        }
    };
    let x0 = Vector::zeros(map.domain_dim());
    Ok(BuiltinMap {
        name,
        map,
        x0,
        constant_rank,
    })
}

/// `f(x, y) = (x, x²)`, rank one everywhere.
fn parabola() -> Result<SmoothMap> {
    SmoothMap::new(
        2,
        2,
        |p| Vector::from_vec(vec![p[0], p[0] * p[0]]),
        |p| Matrix::from_row_slice(2, 2, &[1.0, 0.0, 2.0 * p[0], 0.0]),
    )
}

/// `f(x) = sin x` on the line.
fn sine() -> Result<SmoothMap> {
    SmoothMap::new(
        1,
        1,
        |p| p.map(f64::sin),
        |p| Matrix::from_element(1, 1, p[0].cos()),
    )
}

/// `f(x, y) = (x, x² + y²)`: rank one on the axis `y = 0`, two elsewhere.
fn rank_jump() -> Result<SmoothMap> {
    SmoothMap::new(
        2,
        2,
        |p| Vector::from_vec(vec![p[0], p[0] * p[0] + p[1] * p[1]]),
        |p| Matrix::from_row_slice(2, 2, &[1.0, 0.0, 2.0 * p[0], 2.0 * p[1]]),
    )
}

/// `f(x) = Q·(u, v, a·u² + b·uv + c·v²)` with `(u, v)` the first two
/// coordinates of `R·x`, for seeded orthogonal `Q`, `R` and coefficients.
/// The jacobian has rank two everywhere on `ℝ³`.
fn poly3(seed: u64) -> Result<SmoothMap> {
    let mut rng = random::seeded(seed);
    let q = random::orthogonal(&mut rng, 3);
    let r = random::orthogonal(&mut rng, 3);
    let a: f64 = rng.random_range(-1.0..1.0);
    let b: f64 = rng.random_range(-1.0..1.0);
    let c: f64 = rng.random_range(-1.0..1.0);
    let p = r.rows(0, 2).into_owned();
    let (q2, p2) = (q.clone(), p.clone());
    SmoothMap::new(
        3,
        3,
        move |x| {
            let uv = &p * x;
            let (u, v) = (uv[0], uv[1]);
            &q * Vector::from_vec(vec![u, v, a * u * u + b * u * v + c * v * v])
        },
        move |x| {
            let uv = &p2 * x;
            let (u, v) = (uv[0], uv[1]);
            let inner = Matrix::from_row_slice(
                3,
                2,
                &[1.0, 0.0, 0.0, 1.0, 2.0 * a * u + b * v, b * u + 2.0 * c * v],
            );
            &q2 * inner * &p2
        },
    )
}
