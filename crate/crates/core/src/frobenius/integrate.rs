use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;

use super::{alpha_field, cofinal_membership, DistributionFamily, SplitFrame};
use crate::error::{Error, Result};
use crate::subspace::{subspace_distance, Subspace};
use crate::{Matrix, Vector};

/// Samples of `ψ` on a lattice in `M₀`-coordinates around the base point.
#[derive(Debug, Clone)]
pub struct IntegralPatch {
    frame: SplitFrame,
    /// Integer lattice offsets from the base coordinate.
    offsets: Vec<Vec<i64>>,
    grid: Vec<Vector>,
    psi_values: Vec<Vector>,
    base_index: usize,
    step: f64,
    grid_step: f64,
}

impl IntegralPatch {
    pub fn frame(&self) -> &SplitFrame {
        &self.frame
    }

    /// Grid points in `M₀`-coordinates.
    pub fn grid(&self) -> &[Vector] {
        &self.grid
    }

    /// `E_*`-coordinates of `ψ` at each grid point.
    pub fn psi_values(&self) -> &[Vector] {
        &self.psi_values
    }

    pub fn base_index(&self) -> usize {
        self.base_index
    }

    /// ODE step size.
    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn grid_step(&self) -> f64 {
        self.grid_step
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// The ambient point `v + ψ(v)` for grid index `i`.
    pub fn surface_point(&self, i: usize) -> Vector {
        self.frame.point(&self.grid[i], &self.psi_values[i])
    }

    /// CSV rows `v_0,…,psi_0,…` in grid order.
    pub fn to_csv(&self) -> String {
        let d = self.frame.m0().dim();
        let k = self.frame.e_star().dim();
        let mut header: Vec<String> = (0..d).map(|i| format!("v_{i}")).collect();
        header.extend((0..k).map(|i| format!("psi_{i}")));
        let mut out = header.join(",");
        out.push('\n');
        for (v, w) in self.grid.iter().zip(&self.psi_values) {
            let row: Vec<String> = v.iter().chain(w.iter()).map(|x| format!("{x:e}")).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Lattice offsets `k ∈ ℤᵈ` with `‖k‖·h ≤ radius`, in lexicographic order.
fn lattice(dim: usize, radius: f64, h: f64) -> Vec<Vec<i64>> {
    let reach = (radius / h + 1e-9).floor() as i64;
    let limit = (radius / h) * (radius / h) + 1e-9;
    let mut out = Vec::new();
    let mut k = vec![-reach; dim];
    if dim == 0 {
        return vec![Vec::new()];
    }
    loop {
        let norm2: f64 = k.iter().map(|&c| (c * c) as f64).sum();
        if norm2 <= limit {
            out.push(k.clone());
        }
        let mut axis = dim;
        loop {
            if axis == 0 {
                return out;
            }
            axis -= 1;
            if k[axis] < reach {
                k[axis] += 1;
                break;
            }
            k[axis] = -reach;
        }
    }
}

/// Right-hand side of the ray ODE, `dψ/dt = α(Q₀v(t) + Q_*ψ)·û`.
struct RayField<'a> {
    family: &'a DistributionFamily,
    frame: &'a SplitFrame,
}

impl RayField<'_> {
    fn eval(&self, v: &Vector, psi: &Vector, dir: &Vector) -> Result<Vector> {
        let x = self.frame.point(v, psi);
        if !self.family.contains(&x) {
            return Err(Error::Domain {
                point: x.iter().copied().collect(),
            });
        }
        Ok(alpha_field(self.family, self.frame, &x)?.alpha * dir)
    }

    /// Classical RK4 over `[0, length]` along `start + t·dir` in `n` equal steps.
    fn integrate(
        &self,
        start: &Vector,
        psi0: &Vector,
        dir: &Vector,
        length: f64,
        n: usize,
    ) -> Result<Vector> {
        let h = length / n as f64;
        let mut psi = psi0.clone();
        for i in 0..n {
            let t = i as f64 * h;
            let v0 = start + dir * t;
            let vm = start + dir * (t + 0.5 * h);
            let v1 = start + dir * (t + h);
            let k1 = self.eval(&v0, &psi, dir)?;
            let k2 = self.eval(&vm, &(&psi + &k1 * (0.5 * h)), dir)?;
            let k3 = self.eval(&vm, &(&psi + &k2 * (0.5 * h)), dir)?;
            let k4 = self.eval(&v1, &(&psi + &k3 * h), dir)?;
            psi += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        }
        Ok(psi)
    }
}

fn steps_for(length: f64, ode_step: f64) -> usize {
    ((length / ode_step) - 1e-9).ceil().max(1.0) as usize
}

fn check_step(ode_step: f64) -> Result<()> {
    if ode_step.is_finite() && ode_step > 0.0 {
        Ok(())
    } else {
        Err(Error::Step(format!(
            "ode_step must be positive, got {ode_step}"
        )))
    }
}

/// Integrates `ψ' = α(v + ψ)` along straight rays from the base coordinate
/// to every lattice point within `radius`.
///
/// Lattice points sharing a direction lie on one ray, which is integrated
/// once with a checkpoint at each of them; rays run in parallel. Every
/// stage evaluation checks the domain, co-finality and `dim M(x)`.
pub fn integrate_patch(
    family: &DistributionFamily,
    frame: &SplitFrame,
    radius: f64,
    grid_step: f64,
    ode_step: f64,
) -> Result<IntegralPatch> {
    check_step(ode_step)?;
    if !(grid_step.is_finite() && grid_step > 0.0) {
        return Err(Error::Step(format!(
            "grid_step must be positive, got {grid_step}"
        )));
    }
    if !(radius.is_finite() && radius >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "radius must be nonnegative, got {radius}"
        )));
    }
    if family.ambient_dim() != frame.base_point().len() {
        return Err(Error::Shape(
            "family and frame live in different spaces".into(),
        ));
    }
    let dim = frame.m0().dim();
    let v0 = frame.m0_coords(frame.base_point());
    let w0 = frame.e_star_coords(frame.base_point());
    let offsets = lattice(dim, radius, grid_step);

    // Group by primitive direction: offset = multiple · primitive.
    let mut rays: BTreeMap<Vec<i64>, i64> = BTreeMap::new();
    for k in &offsets {
        let g = k.iter().fold(0, |acc, &c| gcd(acc, c));
        if g == 0 {
            continue;
        }
        let prim: Vec<i64> = k.iter().map(|&c| c / g).collect();
        let e = rays.entry(prim).or_insert(0);
        *e = (*e).max(g);
    }
    let rays: Vec<(Vec<i64>, i64)> = rays.into_iter().collect();

    let field = RayField { family, frame };
    let traced: Vec<Vec<(Vec<i64>, Vector)>> = rays
        .par_iter()
        .map(|(prim, max_mult)| {
            let step_vec = Vector::from_iterator(dim, prim.iter().map(|&c| c as f64 * grid_step));
            let seg = step_vec.norm();
            let dir = &step_vec / seg;
            let n = steps_for(seg, ode_step);
            let mut psi = w0.clone();
            let mut out = Vec::with_capacity(*max_mult as usize);
            for j in 1..=*max_mult {
                let start = &v0 + &step_vec * (j - 1) as f64;
                psi = field.integrate(&start, &psi, &dir, seg, n)?;
                let k: Vec<i64> = prim.iter().map(|&c| c * j).collect();
                out.push((k, psi.clone()));
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let mut values: HashMap<Vec<i64>, Vector> = traced.into_iter().flatten().collect();
    values.insert(vec![0; dim], w0.clone());

    let mut grid = Vec::with_capacity(offsets.len());
    let mut psi_values = Vec::with_capacity(offsets.len());
    let mut base_index = 0;
    for (i, k) in offsets.iter().enumerate() {
        if k.iter().all(|&c| c == 0) {
            base_index = i;
        }
        grid.push(&v0 + Vector::from_iterator(dim, k.iter().map(|&c| c as f64 * grid_step)));
        psi_values.push(values.remove(k).expect("every lattice point is traced"));
    }

    let patch = IntegralPatch {
        frame: frame.clone(),
        offsets,
        grid,
        psi_values,
        base_index,
        step: ode_step,
        grid_step,
    };
    for i in 0..patch.len() {
        let x = patch.surface_point(i);
        if !cofinal_membership(family, frame, &x)? {
            return Err(Error::NotCofinal {
                point: x.iter().copied().collect(),
            });
        }
    }
    Ok(patch)
}

/// `‖ψ₁(target) − ψ₂(target)‖` for `ψ` integrated along two polylines in
/// `M₀`-coordinates from the base coordinate to `target`.
pub fn integrability_residual(
    family: &DistributionFamily,
    frame: &SplitFrame,
    target: &Vector,
    paths: (&[Vector], &[Vector]),
    ode_step: f64,
) -> Result<f64> {
    check_step(ode_step)?;
    let v0 = frame.m0_coords(frame.base_point());
    let w0 = frame.e_star_coords(frame.base_point());
    let field = RayField { family, frame };
    let run = |path: &[Vector]| -> Result<Vector> {
        let (first, last) = match (path.first(), path.last()) {
            (Some(f), Some(l)) if path.len() >= 2 => (f, l),
            _ => {
                return Err(Error::InvalidInput(
                    "a path needs at least two vertices".into(),
                ))
            }
        };
        if first.len() != v0.len() || (first - &v0).norm() > 1e-12 {
            return Err(Error::InvalidInput(
                "path must start at the base coordinate".into(),
            ));
        }
        if (last - target).norm() > 1e-12 {
            return Err(Error::InvalidInput("path must end at the target".into()));
        }
        let mut psi = w0.clone();
        for seg in path.windows(2) {
            let delta = &seg[1] - &seg[0];
            let len = delta.norm();
            if len == 0.0 {
                continue;
            }
            psi = field.integrate(&seg[0], &psi, &(delta / len), len, steps_for(len, ode_step))?;
        }
        Ok(psi)
    };
    let a = run(paths.0)?;
    let b = run(paths.1)?;
    Ok((a - b).norm())
}

/// Largest number of lattice nodes in a tangency stencil.
pub const STENCIL: i64 = 7;

/// Finite-difference weights for the first derivative at offset zero from
/// samples at integer offsets `s` (unit spacing).
fn derivative_weights(s: &[i64]) -> Vec<f64> {
    let w = s.len();
    let vander = Matrix::from_fn(w, w, |p, k| (s[k] as f64).powi(p as i32));
    let mut rhs = Vector::zeros(w);
    rhs[1] = 1.0;
    let c = vander.lu().solve(&rhs).expect("distinct nodes");
    c.iter().copied().collect()
}

/// Largest principal angle between `(I + ψ'(v))M₀` and `M(v + ψ(v))` over
/// the grid.
///
/// `ψ'` is differentiated on the patch lattice, axis by axis, with up to
/// [`STENCIL`] nodes placed as centrally as the patch allows, so the stencil
/// becomes one-sided at the rim. Points with no lattice neighbour along
/// some axis are skipped.
pub fn verify_tangency(patch: &IntegralPatch, family: &DistributionFamily) -> Result<f64> {
    let frame = &patch.frame;
    let dim = frame.m0().dim();
    let k = frame.e_star().dim();
    let index: HashMap<&[i64], usize> = patch
        .offsets
        .iter()
        .enumerate()
        .map(|(i, o)| (o.as_slice(), i))
        .collect();
    let h = patch.grid_step;

    let angles: Vec<f64> = (0..patch.len())
        .into_par_iter()
        .map(|i| -> Result<Option<f64>> {
            let mut deriv = Matrix::zeros(k, dim);
            for axis in 0..dim {
                let at = |s: i64| {
                    let mut o = patch.offsets[i].clone();
                    o[axis] += s;
                    index.get(o.as_slice()).copied()
                };
                let mut lo = 0;
                while lo > 1 - STENCIL && at(lo - 1).is_some() {
                    lo -= 1;
                }
                let mut hi = 0;
                while hi < STENCIL - 1 && at(hi + 1).is_some() {
                    hi += 1;
                }
                let width = (hi - lo + 1).min(STENCIL);
                if width < 2 {
                    return Ok(None);
                }
                let start = (-(width / 2)).clamp(lo, hi - width + 1);
                let nodes: Vec<i64> = (start..start + width).collect();
                let weights = derivative_weights(&nodes);
                let mut col = Vector::zeros(k);
                for (&s, &c) in nodes.iter().zip(&weights) {
                    col += &patch.psi_values[at(s).expect("node exists")] * c;
                }
                deriv.set_column(axis, &(col / h));
            }
            let tangent = Subspace::span(&(frame.m0().basis() + frame.e_star().basis() * deriv))?;
            let target = family.subspace_at(&patch.surface_point(i))?;
            Ok(Some(subspace_distance(&tangent, &target)?))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    Ok(angles.into_iter().fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::super::families;
    use super::*;
    use nalgebra::dvector;

    #[test]
    fn lattice_counts() {
        assert_eq!(lattice(1, 0.9, 1e-3).len(), 1801);
        assert_eq!(lattice(2, 1.0, 1.0).len(), 5);
        assert_eq!(lattice(2, 0.0, 0.1), vec![vec![0, 0]]);
    }

    #[test]
    fn derivative_weights_are_exact_on_polynomials() {
        for nodes in [
            vec![-1, 0, 1],
            vec![-2, -1, 0, 1, 2],
            vec![0, 1, 2, 3, 4],
            vec![-3, -2, -1, 0, 1],
        ] {
            let w = derivative_weights(&nodes);
            for p in 0..nodes.len() as i32 {
                let d: f64 = nodes
                    .iter()
                    .zip(&w)
                    .map(|(&s, &c)| c * (s as f64).powi(p))
                    .sum();
                assert!((d - if p == 1 { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn flat_patch_from_constant_family() {
        let m0 = Subspace::span(&Matrix::from_column_slice(
            3,
            2,
            &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0],
        ))
        .unwrap();
        let family = DistributionFamily::constant(m0);
        let x0 = dvector![0.1, 0.2, 0.7];
        let e_star = Subspace::span(&Matrix::from_column_slice(3, 1, &[0.3, 0.0, 1.0])).unwrap();
        let frame = SplitFrame::new(&family, &x0, e_star).unwrap();
        let patch = integrate_patch(&family, &frame, 0.3, 0.1, 1e-2).unwrap();
        let w0 = frame.e_star_coords(&x0);
        assert!(patch.psi_values().iter().all(|w| (w - &w0).norm() < 1e-14));
        assert!(verify_tangency(&patch, &family).unwrap() < 1e-12);
    }

    #[test]
    fn base_value_is_initial_condition() {
        let fam = families::builtin("circle").unwrap();
        let frame = fam.frame().unwrap();
        let patch = integrate_patch(&fam.family, &frame, 0.1, 1e-2, 1e-3).unwrap();
        let b = patch.base_index();
        assert_eq!(patch.grid()[b], dvector![0.0]);
        assert_eq!(patch.psi_values()[b], dvector![1.0]);
    }

    #[test]
    fn circle_matches_closed_form() {
        let fam = families::builtin("circle").unwrap();
        let frame = fam.frame().unwrap();
        let patch = integrate_patch(&fam.family, &frame, 0.9, 1e-3, 1e-3).unwrap();
        let err = patch
            .grid()
            .iter()
            .zip(patch.psi_values())
            .map(|(v, w)| (w[0] - (1.0 - v[0] * v[0]).sqrt()).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-6, "{err:e}");
        assert!(verify_tangency(&patch, &fam.family).unwrap() <= 1e-5);
    }

    #[test]
    fn paraboloid_matches_closed_form() {
        let fam = families::builtin("paraboloid").unwrap();
        let frame = fam.frame().unwrap();
        let patch = integrate_patch(&fam.family, &frame, 0.5, 5e-2, 1e-3).unwrap();
        let err = patch
            .grid()
            .iter()
            .zip(patch.psi_values())
            .map(|(v, w)| (w[0] - v.norm_squared()).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-6, "{err:e}");
        assert!(verify_tangency(&patch, &fam.family).unwrap() <= 1e-5);
    }

    #[test]
    fn leaving_the_cofinal_set_aborts() {
        // Lines tilting from horizontal to vertical at |x| = 1, where they
        // stop being complementary to the vertical axis.
        let family = DistributionFamily::new(
            2,
            |p| {
                let theta = std::f64::consts::FRAC_PI_2 * p[0].abs().min(1.0);
                Subspace::span(&Matrix::from_column_slice(
                    2,
                    1,
                    &[theta.cos().max(0.0), theta.sin()],
                ))
                .unwrap()
            },
            |_| true,
        );
        let e_star = Subspace::span(&Matrix::from_column_slice(2, 1, &[0.0, 1.0])).unwrap();
        let frame = SplitFrame::new(&family, &dvector![0.0, 0.0], e_star).unwrap();
        assert!(integrate_patch(&family, &frame, 0.5, 0.1, 1e-2).is_ok());
        let err = integrate_patch(&family, &frame, 1.2, 0.1, 1e-2);
        assert!(matches!(err, Err(Error::NotCofinal { .. })), "{err:?}");
    }

    #[test]
    fn nonpositive_step_is_rejected() {
        let fam = families::builtin("circle").unwrap();
        let frame = fam.frame().unwrap();
        assert!(matches!(
            integrate_patch(&fam.family, &frame, 0.5, 1e-2, 0.0),
            Err(Error::Step(_))
        ));
        assert!(matches!(
            integrate_patch(&fam.family, &frame, 0.5, 1e-2, -1e-3),
            Err(Error::Step(_))
        ));
    }

    #[test]
    fn contact_family_is_path_dependent() {
        let fam = families::builtin("contact").unwrap();
        let frame = fam.frame().unwrap();
        let target = dvector![0.5, 0.5];
        let o = dvector![0.0, 0.0];
        let x_then_y = [o.clone(), dvector![0.5, 0.0], target.clone()];
        let y_then_x = [o.clone(), dvector![0.0, 0.5], target.clone()];
        let r = integrability_residual(&fam.family, &frame, &target, (&x_then_y, &y_then_x), 1e-3)
            .unwrap();
        assert!((r - 0.25).abs() < 1e-12, "{r}");
        let same =
            integrability_residual(&fam.family, &frame, &target, (&x_then_y, &x_then_y), 1e-3)
                .unwrap();
        assert_eq!(same, 0.0);
    }

    #[test]
    fn circle_paths_agree() {
        let fam = families::builtin("circle").unwrap();
        let frame = fam.frame().unwrap();
        let target = dvector![0.5];
        let direct = [dvector![0.0], target.clone()];
        let detour = [dvector![0.0], dvector![-0.3], dvector![0.7], target.clone()];
        let r =
            integrability_residual(&fam.family, &frame, &target, (&direct, &detour), 1e-3).unwrap();
        assert!(r <= 1e-8, "{r:e}");
    }

    #[test]
    fn patch_csv_layout() {
        let fam = families::builtin("paraboloid").unwrap();
        let frame = fam.frame().unwrap();
        let patch = integrate_patch(&fam.family, &frame, 0.1, 0.1, 1e-2).unwrap();
        let csv = patch.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("v_0,v_1,psi_0"));
        assert_eq!(lines.count(), patch.len());
    }

    #[test]
    fn integration_is_deterministic() {
        let fam = families::builtin("paraboloid").unwrap();
        let frame = fam.frame().unwrap();
        let a = integrate_patch(&fam.family, &frame, 0.3, 0.1, 1e-2).unwrap();
        let b = integrate_patch(&fam.family, &frame, 0.3, 0.1, 1e-2).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
    }
}
