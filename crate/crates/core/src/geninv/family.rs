use rayon::prelude::*;
use serde::Serialize;

use super::{mp_inverse, GenInverse};
use crate::error::{Error, Result};
use crate::linalg::{self, spectral_norm};
use crate::subspace::{subspace_intersection_with, Subspace};
use crate::tolerance::{default_rank_tol, Tolerances};
use crate::{Matrix, Vector};

/// Finitely many samples `x ↦ T_x` of an operator family around `x₀`.
#[derive(Debug, Clone)]
pub struct SampledFamily {
    points: Vec<Vector>,
    operators: Vec<Matrix>,
    base_index: usize,
}

impl SampledFamily {
    pub fn new(points: Vec<Vector>, operators: Vec<Matrix>, base_index: usize) -> Result<Self> {
        if points.len() != operators.len() {
            return Err(Error::InvalidInput(format!(
                "{} points but {} operators",
                points.len(),
                operators.len()
            )));
        }
        if base_index >= operators.len() {
            return Err(Error::InvalidInput(format!(
                "base index {base_index} out of range for {} samples",
                operators.len()
            )));
        }
        let (m, n) = operators[base_index].shape();
        for (k, t) in operators.iter().enumerate() {
            linalg::ensure_shape(t, m, n, &format!("T_{k}"))?;
            linalg::ensure_finite(t, &format!("T_{k}"))?;
        }
        Ok(Self {
            points,
            operators,
            base_index,
        })
    }

    /// Samples `f(x)` at each point, with `x₀ = points[base_index]`.
    pub fn from_fn(
        points: Vec<Vector>,
        base_index: usize,
        f: impl Fn(&Vector) -> Matrix,
    ) -> Result<Self> {
        let operators = points.iter().map(&f).collect();
        Self::new(points, operators, base_index)
    }

    pub fn points(&self) -> &[Vector] {
        &self.points
    }

    pub fn operators(&self) -> &[Matrix] {
        &self.operators
    }

    pub fn base_index(&self) -> usize {
        self.base_index
    }

    pub fn base(&self) -> &Matrix {
        &self.operators[self.base_index]
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }
}

/// Verdict of [`is_locally_fine`]. `witnesses` lists the samples where
/// `R(T_x)` meets `N(A⁺)`. A `true` verdict only covers the samples given.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LocalFineness {
    pub fine: bool,
    pub witnesses: Vec<usize>,
}

pub fn is_locally_fine(
    family: &SampledFamily,
    g: &GenInverse,
    tol: &Tolerances,
) -> Result<LocalFineness> {
    let a = g.a();
    linalg::ensure_shape(family.base(), a.nrows(), a.ncols(), "base operator")?;
    let base_gap = spectral_norm(&(family.base() - a));
    if base_gap > 1e-12 * (1.0 + spectral_norm(a)) {
        return Err(Error::InvalidInput(format!(
            "base operator differs from A by {base_gap:e}"
        )));
    }
    let (m, n) = a.shape();
    let rank_tol = tol.rank_tol_for(m, n);
    let mut witnesses = Vec::new();
    for (k, t) in family.operators().iter().enumerate() {
        g.check_neighborhood(t, tol.margin)?;
        let range = Subspace::range_of_with(t, rank_tol);
        let meet = subspace_intersection_with(&range, g.null_of_inverse(), tol.direct_sum_tol)?;
        if !meet.is_zero() {
            witnesses.push(k);
        }
    }
    Ok(LocalFineness {
        fine: witnesses.is_empty(),
        witnesses,
    })
}

/// One row of a Moore–Penrose convergence sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub t: f64,
    pub rank: usize,
    /// `‖T(t)⁺ − A⁺‖`
    pub mp_error: f64,
    /// `‖T(t)⁺‖`
    pub pinv_norm: f64,
}

/// Tabulates `rank(A + tΔ)` and `‖(A + tΔ)⁺ − A⁺‖` over decreasing steps.
pub fn mp_convergence_experiment(
    a: &Matrix,
    direction: &Matrix,
    steps: &[f64],
) -> Result<Vec<SweepRow>> {
    linalg::ensure_finite(a, "A")?;
    linalg::ensure_finite(direction, "Δ")?;
    linalg::ensure_shape(direction, a.nrows(), a.ncols(), "Δ")?;
    mp_convergence_along(a, steps, |t| Ok(a + direction * t))
}

/// Same table along an arbitrary curve `t ↦ T(t)` with `T(0) = A`.
pub fn mp_convergence_along<F>(a: &Matrix, steps: &[f64], curve: F) -> Result<Vec<SweepRow>>
where
    F: Fn(f64) -> Result<Matrix> + Sync,
{
    if steps.is_empty() {
        return Err(Error::InvalidInput("no steps given".into()));
    }
    if steps.iter().any(|&t| !(t.is_finite() && t > 0.0)) {
        return Err(Error::InvalidInput(
            "steps must be positive and finite".into(),
        ));
    }
    if steps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidInput(
            "steps must be strictly decreasing".into(),
        ));
    }
    let (m, n) = a.shape();
    let a_plus = mp_inverse(a, default_rank_tol(m, n));
    steps
        .par_iter()
        .map(|&t| {
            let tm = curve(t)?;
            linalg::ensure_shape(&tm, m, n, "T(t)")?;
            linalg::ensure_finite(&tm, "T(t)")?;
            let pinv = mp_inverse(&tm, default_rank_tol(m, n));
            Ok(SweepRow {
                t,
                rank: linalg::rank(&tm),
                mp_error: spectral_norm(&(&pinv - &a_plus)),
                pinv_norm: spectral_norm(&pinv),
            })
        })
        .collect()
}

/// CSV with header `t,rank,mp_error`.
pub fn sweep_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("t,rank,mp_error\n");
    for r in rows {
        out.push_str(&format!("{:e},{},{:e}\n", r.t, r.rank, r.mp_error));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};

    fn base() -> GenInverse {
        GenInverse::moore_penrose(&dmatrix![1.0, 0.0; 0.0, 0.0]).unwrap()
    }

    #[test]
    fn constant_family_is_fine() {
        let pts: Vec<Vector> = (0..5).map(|k| dvector![k as f64 * 0.01]).collect();
        let fam = SampledFamily::from_fn(pts, 0, |_| dmatrix![1.0, 0.0; 0.0, 0.0]).unwrap();
        let v = is_locally_fine(&fam, &base(), &Tolerances::default()).unwrap();
        assert!(v.fine && v.witnesses.is_empty());
    }

    #[test]
    fn rank_jump_family_has_witnesses() {
        let pts: Vec<Vector> = (0..=10).map(|k| dvector![k as f64 * 0.01]).collect();
        let fam = SampledFamily::from_fn(pts, 0, |x| dmatrix![1.0, 0.0; 0.0, x[0]]).unwrap();
        let v = is_locally_fine(&fam, &base(), &Tolerances::default()).unwrap();
        assert!(!v.fine);
        assert_eq!(v.witnesses, (1..=10).collect::<Vec<_>>());
    }

    #[test]
    fn parabola_jacobian_family_is_fine() {
        let pts: Vec<Vector> = (-5..=5)
            .flat_map(|i| (-5..=5).map(move |j| dvector![i as f64 * 0.02, j as f64 * 0.02]))
            .collect();
        let base_index = pts.iter().position(|p| p.norm() == 0.0).unwrap();
        let fam = SampledFamily::from_fn(pts, base_index, |p| dmatrix![1.0, 0.0; 2.0 * p[0], 0.0])
            .unwrap();
        let v = is_locally_fine(&fam, &base(), &Tolerances::default()).unwrap();
        assert!(v.fine, "{v:?}");
    }

    #[test]
    fn out_of_ball_sample_is_an_error() {
        let pts = vec![dvector![0.0], dvector![1.0]];
        let fam =
            SampledFamily::from_fn(pts, 0, |x| dmatrix![1.0 + 2.0 * x[0], 0.0; 0.0, 0.0]).unwrap();
        let err = is_locally_fine(&fam, &base(), &Tolerances::default());
        assert!(matches!(err, Err(Error::Neighborhood { .. })));
    }

    #[test]
    fn family_shape_mismatch() {
        let err = SampledFamily::new(
            vec![dvector![0.0], dvector![1.0]],
            vec![Matrix::zeros(2, 2), Matrix::zeros(2, 3)],
            0,
        );
        assert!(matches!(err, Err(Error::Shape(_))));
    }

    #[test]
    fn sweep_rank_preserving() {
        let a = dmatrix![1.0, 0.0; 0.0, 0.0];
        let rows = mp_convergence_experiment(&a, &a, &[0.1, 0.01, 0.001]).unwrap();
        for r in &rows {
            assert_eq!(r.rank, 1);
            let expected = (1.0 / (1.0 + r.t) - 1.0).abs();
            assert!((r.mp_error - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn sweep_rank_raising_diverges() {
        let a = dmatrix![1.0, 0.0; 0.0, 0.0];
        let d = dmatrix![0.0, 0.0; 0.0, 1.0];
        let rows = mp_convergence_experiment(&a, &d, &[0.1, 0.01, 0.001]).unwrap();
        for r in &rows {
            assert_eq!(r.rank, 2);
            assert!((r.pinv_norm - 1.0 / r.t).abs() < 1e-9 / r.t);
        }
    }

    #[test]
    fn sweep_invertible_converges() {
        let a = Matrix::identity(3, 3);
        let d = dmatrix![0.0, 1.0, 0.0; -1.0, 0.5, 0.0; 0.2, 0.0, 1.0];
        let rows = mp_convergence_experiment(&a, &d, &[0.1, 0.01, 0.001, 1e-4]).unwrap();
        assert!(rows.windows(2).all(|w| w[1].mp_error < w[0].mp_error));
        assert!(rows.last().unwrap().mp_error < 1e-3);
    }

    #[test]
    fn sweep_rejects_bad_steps() {
        let a = Matrix::identity(2, 2);
        assert!(mp_convergence_experiment(&a, &a, &[0.01, 0.1]).is_err());
        assert!(mp_convergence_experiment(&a, &a, &[0.1, -0.1]).is_err());
        assert!(mp_convergence_experiment(&a, &a, &[]).is_err());
    }

    #[test]
    fn csv_header() {
        let a = Matrix::identity(2, 2);
        let csv = sweep_to_csv(&mp_convergence_experiment(&a, &a, &[0.5]).unwrap());
        assert!(csv.starts_with("t,rank,mp_error\n"));
        assert_eq!(csv.lines().count(), 2);
    }
}
