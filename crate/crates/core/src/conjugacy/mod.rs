//! Local conjugacy of a smooth map to its derivative.
//!
//! For `f` with `T₀ = f'(x₀)` and a generalized inverse `T₀⁺`,
//!
//! ```text
//! φ(x) = T₀⁺(f(x) − f(x₀)) + (I − T₀⁺T₀)(x − x₀)
//! ψ(y) = f(φ⁻¹(T₀⁺y)) + (I − T₀T₀⁺)y
//! ```
//!
//! satisfy `φ'(x₀) = I`, `ψ'(0) = I`, and `f = ψ ∘ T₀ ∘ φ` near `x₀`
//! exactly when `x₀` is a locally fine point of `f'`.

pub mod maps;

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geninv::penrose_pair_residual;
use crate::linalg::{self, spectral_norm};
use crate::random;
use crate::tolerance::Tolerances;
use crate::{Matrix, Vector};

/// Penrose-pair residual accepted for the supplied `T₀⁺`.
pub const PAIR_TOL: f64 = 1e-8;

/// Step of the construction-time finite-difference checks.
pub const FD_STEP: f64 = 1e-6;

/// Relative agreement required between a jacobian and finite differences.
pub const JACOBIAN_TOL: f64 = 1e-5;

type EvalFn = dyn Fn(&Vector) -> Vector + Send + Sync;
type JacobianFn = dyn Fn(&Vector) -> Matrix + Send + Sync;

/// A `c¹` map `ℝⁿ → ℝᵐ` given by its values and its jacobian.
#[derive(Clone)]
pub struct SmoothMap {
    domain_dim: usize,
    codomain_dim: usize,
    eval: Arc<EvalFn>,
    jacobian: Arc<JacobianFn>,
}

impl fmt::Debug for SmoothMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothMap")
            .field("domain_dim", &self.domain_dim)
            .field("codomain_dim", &self.codomain_dim)
            .finish_non_exhaustive()
    }
}

impl SmoothMap {
    /// Builds the map and compares the jacobian with central differences at
    /// three seeded points of the unit ball.
    pub fn new<E, J>(domain_dim: usize, codomain_dim: usize, eval: E, jacobian: J) -> Result<Self>
    where
        E: Fn(&Vector) -> Vector + Send + Sync + 'static,
        J: Fn(&Vector) -> Matrix + Send + Sync + 'static,
    {
        if domain_dim == 0 || codomain_dim == 0 {
            return Err(Error::InvalidInput(
                "map dimensions must be positive".into(),
            ));
        }
        let map = Self {
            domain_dim,
            codomain_dim,
            eval: Arc::new(eval),
            jacobian: Arc::new(jacobian),
        };
        let mut rng = random::seeded(0x5eed_f00d);
        let probes: Vec<Vector> = (0..3)
            .map(|_| random::ball_point(&mut rng, domain_dim, 1.0))
            .collect();
        let relative_error = map.jacobian_error(&probes)?;
        if relative_error > JACOBIAN_TOL {
            return Err(Error::JacobianMismatch { relative_error });
        }
        Ok(map)
    }

    pub fn domain_dim(&self) -> usize {
        self.domain_dim
    }

    pub fn codomain_dim(&self) -> usize {
        self.codomain_dim
    }

    pub fn eval(&self, x: &Vector) -> Vector {
        (self.eval)(x)
    }

    pub fn jacobian(&self, x: &Vector) -> Matrix {
        (self.jacobian)(x)
    }

    /// Largest `‖J(x) − J_fd(x)‖ / max(‖J(x)‖, 1)` over `points`.
    pub fn jacobian_error(&self, points: &[Vector]) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for x in points {
            self.check_point(x)?;
            let j = self.jacobian(x);
            linalg::ensure_shape(&j, self.codomain_dim, self.domain_dim, "f'(x)")?;
            let value = self.eval(x);
            if value.len() != self.codomain_dim {
                return Err(Error::Shape(format!(
                    "f(x) has length {}, expected {}",
                    value.len(),
                    self.codomain_dim
                )));
            }
            let fd = central_difference(|p| self.eval(p), x, FD_STEP);
            let err = (&j - fd).norm() / j.norm().max(1.0);
            if !err.is_finite() {
                return Err(Error::NonFinite("f'(x)".into()));
            }
            worst = worst.max(err);
        }
        Ok(worst)
    }

    fn check_point(&self, x: &Vector) -> Result<()> {
        if x.len() != self.domain_dim {
            return Err(Error::Shape(format!(
                "point has length {}, expected {}",
                x.len(),
                self.domain_dim
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("point".into()));
        }
        Ok(())
    }
}

/// Central-difference jacobian of `f` at `x`.
pub fn central_difference(f: impl Fn(&Vector) -> Vector, x: &Vector, h: f64) -> Matrix {
    let n = x.len();
    let mut cols = Vec::with_capacity(n);
    for k in 0..n {
        let mut plus = x.clone();
        let mut minus = x.clone();
        plus[k] += h;
        minus[k] -= h;
        cols.push((f(&plus) - f(&minus)) / (2.0 * h));
    }
    let rows = cols.first().map_or(0, |c| c.len());
    Matrix::from_fn(rows, n, |i, j| cols[j][i])
}

/// `φ(x) = T₀⁺(f(x) − f(x₀)) + (I − T₀⁺T₀)(x − x₀)`.
#[derive(Debug, Clone)]
pub struct Phi {
    map: SmoothMap,
    x0: Vector,
    f_x0: Vector,
    t0: Matrix,
    t0_plus: Matrix,
    kernel_part: Matrix,
}

impl Phi {
    pub fn eval(&self, x: &Vector) -> Vector {
        &self.t0_plus * (self.map.eval(x) - &self.f_x0) + &self.kernel_part * (x - &self.x0)
    }

    /// `φ'(x) = T₀⁺f'(x) + I − T₀⁺T₀`.
    pub fn derivative(&self, x: &Vector) -> Matrix {
        &self.t0_plus * self.map.jacobian(x) + &self.kernel_part
    }

    /// Newton's method on `φ(x) = y` from `x₀ + y`.
    pub fn invert(&self, y: &Vector, tol: f64, max_iter: usize) -> Result<Vector> {
        self.map.check_point(y)?;
        let mut x = &self.x0 + y;
        let mut residual = f64::INFINITY;
        for _ in 0..=max_iter {
            let r = self.eval(&x) - y;
            residual = r.norm();
            if !residual.is_finite() {
                return Err(Error::NonFinite("Newton iterate".into()));
            }
            if residual <= tol {
                return Ok(x);
            }
            let step = self
                .derivative(&x)
                .full_piv_lu()
                .solve(&r)
                .filter(|s| s.iter().all(|v| v.is_finite()))
                .ok_or(Error::SingularJacobian)?;
            x -= step;
        }
        Err(Error::NoConvergence {
            iterations: max_iter,
            residual,
        })
    }

    pub fn base_point(&self) -> &Vector {
        &self.x0
    }

    pub fn t0(&self) -> &Matrix {
        &self.t0
    }

    pub fn t0_plus(&self) -> &Matrix {
        &self.t0_plus
    }

    pub fn map(&self) -> &SmoothMap {
        &self.map
    }
}

/// `ψ(y) = f(φ⁻¹(T₀⁺y)) + (I − T₀T₀⁺)y`.
#[derive(Debug, Clone)]
pub struct Psi {
    phi: Phi,
    cokernel_part: Matrix,
    newton_tol: f64,
    max_iter: usize,
}

impl Psi {
    pub fn eval(&self, y: &Vector) -> Result<Vector> {
        if y.len() != self.phi.map.codomain_dim {
            return Err(Error::Shape(format!(
                "ψ expects length {}, got {}",
                self.phi.map.codomain_dim,
                y.len()
            )));
        }
        let x = self
            .phi
            .invert(&(&self.phi.t0_plus * y), self.newton_tol, self.max_iter)?;
        Ok(self.phi.map.eval(&x) + &self.cokernel_part * y)
    }
}

/// `φ`, `ψ` and a heuristic radius inside which they are trusted.
#[derive(Debug, Clone)]
pub struct ConjugacyPair {
    pub phi: Phi,
    pub psi: Psi,
    pub valid_radius: f64,
}

impl ConjugacyPair {
    pub fn base_point(&self) -> &Vector {
        &self.phi.x0
    }

    pub fn t0_plus(&self) -> &Matrix {
        &self.phi.t0_plus
    }

    pub fn map(&self) -> &SmoothMap {
        &self.phi.map
    }
}

pub fn build_phi(f: &SmoothMap, x0: &Vector, t0_plus: &Matrix) -> Result<Phi> {
    f.check_point(x0)?;
    let t0 = f.jacobian(x0);
    linalg::ensure_shape(t0_plus, f.domain_dim, f.codomain_dim, "T₀⁺")?;
    linalg::ensure_finite(t0_plus, "T₀⁺")?;
    let residual = penrose_pair_residual(&t0, t0_plus);
    if residual > PAIR_TOL {
        return Err(Error::NotAGenInverse { residual });
    }
    let n = f.domain_dim;
    let kernel_part = Matrix::identity(n, n) - t0_plus * &t0;
    Ok(Phi {
        map: f.clone(),
        x0: x0.clone(),
        f_x0: f.eval(x0),
        t0,
        t0_plus: t0_plus.clone(),
        kernel_part,
    })
}

pub fn build_psi(phi: &Phi, newton_tol: f64, max_iter: usize) -> Psi {
    let m = phi.map.codomain_dim;
    Psi {
        cokernel_part: Matrix::identity(m, m) - &phi.t0 * &phi.t0_plus,
        phi: phi.clone(),
        newton_tol,
        max_iter,
    }
}

/// Builds `φ`, `ψ` and `valid_radius = min(1, 0.5 / (‖T₀⁺‖·L))`, where `L`
/// estimates the Lipschitz constant of `f'` from ten seeded probes within
/// distance 0.5 of `x₀`.
pub fn build_conjugacy(
    f: &SmoothMap,
    x0: &Vector,
    t0_plus: &Matrix,
    tol: &Tolerances,
) -> Result<ConjugacyPair> {
    let phi = build_phi(f, x0, t0_plus)?;
    let psi = build_psi(&phi, tol.newton_tol, tol.newton_max_iter);
    let valid_radius = estimate_valid_radius(f, x0, t0_plus);
    Ok(ConjugacyPair {
        phi,
        psi,
        valid_radius,
    })
}

fn estimate_valid_radius(f: &SmoothMap, x0: &Vector, t0_plus: &Matrix) -> f64 {
    let mut rng = random::seeded(0x11ab_cafe);
    let j0 = f.jacobian(x0);
    let mut lipschitz: f64 = 0.0;
    for _ in 0..10 {
        let dx = random::ball_point(&mut rng, x0.len(), 0.5);
        let dist = dx.norm();
        if dist > 0.0 {
            let jump = spectral_norm(&(f.jacobian(&(x0 + &dx)) - &j0));
            lipschitz = lipschitz.max(jump / dist);
        }
    }
    let denom = spectral_norm(t0_plus) * lipschitz;
    if denom > 0.0 {
        (0.5 / denom).min(1.0)
    } else {
        1.0
    }
}

/// `x` with `φ(x) = y`; `‖y‖ < valid_radius` is the caller's responsibility.
pub fn invert_phi(pair: &ConjugacyPair, y: &Vector, tol: f64, max_iter: usize) -> Result<Vector> {
    pair.phi.invert(y, tol, max_iter)
}

/// `max ‖f(x) − ψ(T₀·φ(x))‖` over the samples, evaluated in parallel.
pub fn verify_conjugacy(pair: &ConjugacyPair, samples: &[Vector]) -> Result<f64> {
    let residuals: Vec<f64> = samples
        .par_iter()
        .map(|x| {
            let lhs = pair.phi.map.eval(x);
            let rhs = pair.psi.eval(&(&pair.phi.t0 * pair.phi.eval(x)))?;
            Ok((lhs - rhs).norm())
        })
        .collect::<Result<_>>()?;
    Ok(residuals.into_iter().fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geninv::mp_inverse;
    use nalgebra::{dmatrix, dvector};

    fn parabola() -> SmoothMap {
        maps::builtin("parabola", 0).unwrap().map
    }

    fn sine() -> SmoothMap {
        maps::builtin("sine", 0).unwrap().map
    }

    fn linear(t: Matrix) -> SmoothMap {
        let (m, n) = t.shape();
        let t2 = t.clone();
        SmoothMap::new(n, m, move |x| &t * x, move |_| t2.clone()).unwrap()
    }

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn wrong_jacobian_is_rejected() {
        let err = SmoothMap::new(1, 1, |x| x.map(f64::sin), |_| dmatrix![2.0]);
        assert!(matches!(err, Err(Error::JacobianMismatch { .. })));
    }

    #[test]
    fn phi_of_linear_map_is_translation() {
        let t = dmatrix![1.0, 2.0, 0.0; 0.0, 0.0, 0.0];
        let f = linear(t.clone());
        let x0 = dvector![0.3, -0.2, 0.5];
        let phi = build_phi(&f, &x0, &mp_inverse(&t, 1e-10)).unwrap();
        let x = dvector![1.0, 2.0, -1.0];
        assert!((phi.eval(&x) - (&x - &x0)).norm() < 1e-14);
    }

    #[test]
    fn phi_of_parabola_is_identity() {
        let phi = build_phi(
            &parabola(),
            &dvector![0.0, 0.0],
            &dmatrix![1.0, 0.0; 0.0, 0.0],
        )
        .unwrap();
        let x = dvector![0.3, -0.7];
        assert!((phi.eval(&x) - &x).norm() < 1e-15);
    }

    #[test]
    fn phi_of_sine_is_sine() {
        let phi = build_phi(&sine(), &dvector![0.0], &dmatrix![1.0]).unwrap();
        assert!((phi.eval(&dvector![0.4])[0] - 0.4f64.sin()).abs() < 1e-15);
    }

    #[test]
    fn phi_rejects_non_inverse() {
        let err = build_phi(
            &parabola(),
            &dvector![0.0, 0.0],
            &dmatrix![2.0, 0.0; 0.0, 0.0],
        );
        assert!(matches!(err, Err(Error::NotAGenInverse { .. })));
    }

    #[test]
    fn phi_derivative_at_base_is_identity() {
        for name in maps::BUILTIN_MAPS {
            let b = maps::builtin(name, 7).unwrap();
            let phi = build_phi(&b.map, &b.x0, &b.t0_plus()).unwrap();
            let fd = central_difference(|x| phi.eval(x), &b.x0, FD_STEP);
            let n = b.map.domain_dim();
            assert!((fd - Matrix::identity(n, n)).norm() <= 1e-5, "{name}");
        }
    }

    #[test]
    fn invert_phi_examples() {
        let b = maps::builtin("sine", 0).unwrap();
        let pair = build_conjugacy(&b.map, &b.x0, &b.t0_plus(), &tol()).unwrap();
        assert_eq!(
            invert_phi(&pair, &dvector![0.0], 1e-13, 50).unwrap(),
            dvector![0.0]
        );
        let x = invert_phi(&pair, &dvector![0.3], 1e-13, 50).unwrap();
        assert!((x[0] - 0.304_692_654_015_397_5).abs() < 1e-12);

        let b = maps::builtin("parabola", 0).unwrap();
        let pair = build_conjugacy(&b.map, &b.x0, &b.t0_plus(), &tol()).unwrap();
        let x = invert_phi(&pair, &dvector![0.2, 0.5], 1e-13, 50).unwrap();
        assert!((x - dvector![0.2, 0.5]).norm() < 1e-15);
    }

    #[test]
    fn invert_phi_reports_non_convergence() {
        let b = maps::builtin("sine", 0).unwrap();
        let pair = build_conjugacy(&b.map, &b.x0, &b.t0_plus(), &tol()).unwrap();
        // sin never reaches 1.5.
        let err = invert_phi(&pair, &dvector![1.5], 1e-13, 50);
        assert!(matches!(
            err,
            Err(Error::NoConvergence { .. }) | Err(Error::SingularJacobian)
        ));
    }

    #[test]
    fn psi_examples() {
        let b = maps::builtin("parabola", 0).unwrap();
        let pair = build_conjugacy(&b.map, &b.x0, &b.t0_plus(), &tol()).unwrap();
        let (u, v) = (0.3, -0.4);
        let y = pair.psi.eval(&dvector![u, v]).unwrap();
        assert!((y - dvector![u, u * u + v]).norm() < 1e-14);

        let b = maps::builtin("sine", 0).unwrap();
        let pair = build_conjugacy(&b.map, &b.x0, &b.t0_plus(), &tol()).unwrap();
        assert!((pair.psi.eval(&dvector![0.45]).unwrap()[0] - 0.45).abs() < 1e-13);
    }

    #[test]
    fn psi_of_linear_map_is_identity() {
        let t = dmatrix![1.0, 0.0; 0.0, 0.0; 1.0, 1.0];
        let f = linear(t.clone());
        let pair =
            build_conjugacy(&f, &dvector![0.0, 0.0], &mp_inverse(&t, 1e-10), &tol()).unwrap();
        let y = dvector![0.1, -0.2, 0.3];
        assert!((pair.psi.eval(&y).unwrap() - &y).norm() < 1e-14);
    }

    #[test]
    fn base_invariants() {
        for name in maps::BUILTIN_MAPS {
            let b = maps::builtin(name, 3).unwrap();
            let pair = build_conjugacy(&b.map, &b.x0, &b.t0_plus(), &tol()).unwrap();
            assert!(pair.phi.eval(&b.x0).norm() <= 1e-10, "{name}");
            let zero = Vector::zeros(b.map.codomain_dim());
            let psi0 = pair.psi.eval(&zero).unwrap();
            assert!((psi0 - b.map.eval(&b.x0)).norm() <= 1e-10, "{name}");
            assert!(pair.valid_radius > 0.0 && pair.valid_radius <= 1.0);
        }
    }

    #[test]
    fn psi_derivative_at_zero_is_identity() {
        for name in ["parabola", "sine", "poly3"] {
            let b = maps::builtin(name, 3).unwrap();
            let pair = build_conjugacy(&b.map, &b.x0, &b.t0_plus(), &tol()).unwrap();
            let m = b.map.codomain_dim();
            let fd = central_difference(|y| pair.psi.eval(y).unwrap(), &Vector::zeros(m), FD_STEP);
            assert!((fd - Matrix::identity(m, m)).norm() <= 1e-5, "{name}");
        }
    }

    #[test]
    fn conjugacy_of_linear_map() {
        let t = dmatrix![2.0, 1.0, 0.0; 0.0, 0.0, 0.0];
        let f = linear(t.clone());
        let pair =
            build_conjugacy(&f, &dvector![0.0, 0.0, 0.0], &mp_inverse(&t, 1e-10), &tol()).unwrap();
        let mut rng = random::seeded(2);
        let samples: Vec<Vector> = (0..20)
            .map(|_| random::ball_point(&mut rng, 3, 0.5))
            .collect();
        assert!(verify_conjugacy(&pair, &samples).unwrap() <= 1e-12);
    }

    #[test]
    fn rank_jump_residual_is_y_squared() {
        let b = maps::builtin("rank-jump", 0).unwrap();
        let pair = build_conjugacy(&b.map, &b.x0, &b.t0_plus(), &tol()).unwrap();
        let r = verify_conjugacy(&pair, &[dvector![0.1, 0.2]]).unwrap();
        assert!((r - 0.04).abs() < 1e-14);
    }
}
