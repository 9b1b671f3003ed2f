//! Benchmark fixtures for the numerical kernels.

use geninv_core::charts::tangent_space_basis;
use geninv_core::linalg::unvectorize;
use geninv_core::{random, Matrix, OperatorPoint};

/// Seeded `n × n` matrix of rank `n / 2`.
pub fn half_rank_square(n: usize, seed: u64) -> Matrix {
    random::rank_matrix(&mut random::seeded(seed), n, n, n / 2)
}

/// A rank-`r` point with an oblique inverse and a tangent point `X + D`
/// at a third of the chart radius.
pub fn chart_fixture(m: usize, n: usize, r: usize, seed: u64) -> (OperatorPoint, Matrix) {
    let mut rng = random::seeded(seed);
    let g = random::gen_inverse(&mut rng, m, n, r, 0.2);
    let p = OperatorPoint::with_inverse(g);
    let tangent = tangent_space_basis(&p);
    let d = tangent.space().basis() * random::gaussian_vector(&mut rng, tangent.dim());
    let d = unvectorize(d.as_slice(), m, n);
    let scale = p.gen_inv().ball_radius().min(1.0) / (3.0 * d.norm().max(f64::MIN_POSITIVE));
    let point = p.x() + d * scale;
    (p, point)
}
