//! Seeded random draws used by sweeps, property checks and benchmarks.
//!
//! Every generator takes an explicit `rng`; there is no ambient randomness.
//! Besides plain Gaussian draws there are samplers for generalized inverses
//! with oblique complements and for operators near them that keep or raise
//! the rank.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::charts::{chart_inverse, tangent_space_basis, OperatorPoint};
use crate::geninv::{gen_inverse_from_complements, GenInverse};
use crate::linalg::{spectral_norm, unvectorize};
use crate::subspace::{direct_sum_separation, Subspace};
use crate::{Matrix, Vector};

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn gaussian_vector<R: Rng>(rng: &mut R, len: usize) -> Vector {
    Vector::from_fn(len, |_, _| rng.sample(StandardNormal))
}

/// Haar-distributed orthogonal matrix.
pub fn orthogonal<R: Rng>(rng: &mut R, n: usize) -> Matrix {
    let qr = gaussian_matrix(rng, n, n).qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// `m × n` matrix of rank exactly `r` with singular values in `[0.5, 2]`.
pub fn rank_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, rank: usize) -> Matrix {
    assert!(rank <= rows.min(cols), "rank exceeds shape");
    let u = orthogonal(rng, rows).columns(0, rank).into_owned();
    let v = orthogonal(rng, cols).columns(0, rank).into_owned();
    let s = Vector::from_fn(rank, |_, _| rng.random_range(0.5..2.0));
    u * Matrix::from_diagonal(&s) * v.transpose()
}

/// `diag(s₁, …, s_r, 0, …)` with `s_i ∈ [0.5, 2]`.
pub fn diagonal_rank_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, rank: usize) -> Matrix {
    assert!(rank <= rows.min(cols), "rank exceeds shape");
    let mut a = Matrix::zeros(rows, cols);
    for i in 0..rank {
        a[(i, i)] = rng.random_range(0.5..2.0);
    }
    a
}

pub fn subspace<R: Rng>(rng: &mut R, ambient_dim: usize, dim: usize) -> Subspace {
    loop {
        let s = Subspace::span(&gaussian_matrix(rng, ambient_dim, dim)).expect("finite draw");
        if s.dim() == dim {
            return s;
        }
    }
}

/// A random complement of `s` whose direct-sum separation is at least
/// `min_separation` (keeps oblique projectors well conditioned).
pub fn complement<R: Rng>(rng: &mut R, s: &Subspace, min_separation: f64) -> Subspace {
    let n = s.ambient_dim();
    let d = n - s.dim();
    loop {
        let c = subspace(rng, n, d);
        if direct_sum_separation(s, &c) >= min_separation {
            return c;
        }
    }
}

/// Uniform point in the ball of the given radius.
pub fn ball_point<R: Rng>(rng: &mut R, dim: usize, radius: f64) -> Vector {
    if dim == 0 {
        return Vector::zeros(0);
    }
    let dir = gaussian_vector(rng, dim);
    let norm = dir.norm().max(f64::MIN_POSITIVE);
    let scale: f64 = rng.random::<f64>().powf(1.0 / dim as f64) * radius;
    dir * (scale / norm)
}

/// A rank-`r` matrix with a generalized inverse whose range and null space
/// are random complements separated by at least `min_separation`.
pub fn gen_inverse<R: Rng>(
    rng: &mut R,
    rows: usize,
    cols: usize,
    rank: usize,
    min_separation: f64,
) -> GenInverse {
    let a = rank_matrix(rng, rows, cols, rank);
    gen_inverse_for(rng, &a, min_separation)
}

/// A generalized inverse of `a` with random complements.
pub fn gen_inverse_for<R: Rng>(rng: &mut R, a: &Matrix, min_separation: f64) -> GenInverse {
    let r_plus = complement(rng, &Subspace::null_space_of(a), min_separation);
    let n_plus = complement(rng, &Subspace::range_of(a), min_separation);
    gen_inverse_from_complements(a, &r_plus, &n_plus)
        .expect("sampled complements are complementary")
}

/// `T = A + E` with a Gaussian direction `E` scaled so `‖E‖·‖A⁺‖ = fraction`.
pub fn ball_perturbation<R: Rng>(rng: &mut R, g: &GenInverse, fraction: f64) -> Matrix {
    let a = g.a();
    let e = gaussian_matrix(rng, a.nrows(), a.ncols());
    let scale = fraction * g.ball_radius().min(1e12) / spectral_norm(&e).max(f64::MIN_POSITIVE);
    a + e * scale
}

/// A rank-preserving `T` with `‖T − A‖·‖A⁺‖ ≤ fraction`, obtained as the
/// chart preimage of `A + D` for a random `D ∈ M(A)`.
pub fn rank_preserving_perturbation<R: Rng>(rng: &mut R, g: &GenInverse, fraction: f64) -> Matrix {
    let a = g.a();
    let (m, n) = a.shape();
    let point = OperatorPoint::with_inverse(g.clone());
    let tangent = tangent_space_basis(&point);
    let d = tangent.space().basis() * gaussian_vector(rng, tangent.dim());
    let d = unvectorize(d.as_slice(), m, n);
    let d_norm = spectral_norm(&d);
    if d_norm == 0.0 {
        return a.clone();
    }
    let inv_norm = g.inverse_norm();
    let mut scale = fraction * g.ball_radius().min(1e12) / d_norm;
    loop {
        let t = chart_inverse(&point, &(a + &d * scale)).expect("tangent point inside the ball");
        let q = spectral_norm(&(&t - a)) * inv_norm;
        if q <= fraction {
            return t;
        }
        scale *= 0.9 * fraction / q;
    }
}
