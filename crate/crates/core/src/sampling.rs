//! Seeded random draws shared by generators, samplers and test oracles.
//!
//! Every consumer derives its generator from a `(seed, stream)` pair so that
//! results do not depend on scheduling when work is spread across threads.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::kernels::Matrix;

/// Deterministic generator for the given master seed and stream index.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Matrix with i.i.d. standard normal entries, filled column by column.
pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    let data: Vec<f64> = (0..rows * cols).map(|_| standard_normal(rng)).collect();
    Matrix::from_vec(rows, cols, data)
}

/// Haar-distributed orthogonal `r x r` matrix (QR of a Gaussian with sign fix).
pub fn random_orthogonal<R: Rng + ?Sized>(r: usize, rng: &mut R) -> Matrix {
    random_orthonormal_frame(r, r, rng)
}

/// Uniformly distributed `p x r` matrix with orthonormal columns.
pub fn random_orthonormal_frame<R: Rng + ?Sized>(p: usize, r: usize, rng: &mut R) -> Matrix {
    assert!(r <= p, "frame with more columns than rows");
    let g = gaussian_matrix(p, r, rng);
    let qr = g.qr();
    let mut q = qr.q();
    let rmat = qr.r();
    for j in 0..r {
        if rmat[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Symmetric `p x p` matrix of rank at most `k`, normalized to unit Frobenius norm.
pub fn random_symmetric_low_rank<R: Rng + ?Sized>(p: usize, k: usize, rng: &mut R) -> Matrix {
    let k = k.min(p).max(1);
    let w = gaussian_matrix(p, k, rng);
    let mut wd = w.clone();
    for j in 0..k {
        let s = if rng.random::<bool>() { 1.0 } else { -1.0 };
        wd.column_mut(j).scale_mut(s * (0.5 + rng.random::<f64>()));
    }
    let g = &wd * w.transpose();
    let g = (&g + g.transpose()) * 0.5;
    let n = g.norm();
    if n == 0.0 {
        let mut e = Matrix::zeros(p, p);
        e[(0, 0)] = 1.0;
        e
    } else {
        g / n
    }
}

/// Radius factor `u^(1/dim)` that makes a scaled unit direction uniform in a ball.
pub fn uniform_ball_radius<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    u.powf(1.0 / dim.max(1) as f64)
}
