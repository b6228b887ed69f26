use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::{orthogonal_complement, sym_eig, Matrix};
use crate::sampling::{random_symmetric_low_rank, rng_for};

use super::Objective;

const EMBEDDED_RANK_REL_TOL: f64 = 1e-10;

/// Sampled lower bound on the restricted isometry constant:
/// `max |nabla^2 f(X)[G, G] - 1|` over `X` of rank `<= 2r` and unit `G` of rank `<= 4r`.
///
/// Sample `i` is drawn from stream `i` of `seed`, so a larger `n_samples`
/// extends the same sample set and the estimate is non-decreasing in it.
pub fn rsc_rsm_estimate<O: Objective + ?Sized>(obj: &O, r: usize, n_samples: usize, seed: u64) -> f64 {
    let p = obj.dim();
    (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(seed, i);
            let x = random_symmetric_low_rank(p, 2 * r, &mut rng);
            let g = random_symmetric_low_rank(p, 4 * r, &mut rng);
            (obj.euclid_hess_form(&x, &g, &g) - 1.0).abs()
        })
        .reduce(|| 0.0, f64::max)
}

/// Outcome of probing `nabla^2 f(X)[G, G] > 0` on sampled low-rank pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StrictConvexityProbe {
    pub holds: bool,
    pub samples: usize,
    /// Smallest sampled `nabla^2 f(X)[G, G]` with `||G||_F = 1`.
    pub min_curvature: f64,
}

/// Probe the restricted strict convexity condition on `X` of rank `<= r`
/// and nonzero `G` of rank `<= 2r`. Passing is necessary, not sufficient.
pub fn restricted_strict_convexity_check<O: Objective + ?Sized>(
    obj: &O,
    r: usize,
    n_samples: usize,
    seed: u64,
) -> StrictConvexityProbe {
    let p = obj.dim();
    let min_curvature = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(seed, i);
            let x = random_symmetric_low_rank(p, r, &mut rng);
            let g = random_symmetric_low_rank(p, 2 * r, &mut rng);
            obj.euclid_hess_form(&x, &g, &g)
        })
        .reduce(|| f64::INFINITY, f64::min);
    StrictConvexityProbe {
        holds: min_curvature > 0.0,
        samples: n_samples,
        min_curvature,
    }
}

/// Embedded-manifold Hessian of the denoising objective at a rank-`r` PSD `X`
/// along `xi = U S U^T + U_perp D U^T + U D^T U_perp^T`:
/// `||xi||_F^2 + 2 <X - X*, U_perp D Sigma^-1 D^T U_perp^T>`.
///
/// `U Sigma U^T` is the top-`r` eigendecomposition of `X` and `U_perp` the
/// complement returned by [`orthogonal_complement`].
pub fn embedded_hess_quadform(x: &Matrix, x_star: &Matrix, s: &Matrix, d: &Matrix) -> Result<f64> {
    let p = x.nrows();
    let r = s.nrows();
    if x_star.shape() != (p, p) || s.shape() != (r, r) || d.shape() != (p - r.min(p), r) {
        return Err(Error::contract(format!(
            "embedded quadform shapes disagree: X {:?}, X* {:?}, S {:?}, D {:?}",
            x.shape(),
            x_star.shape(),
            s.shape(),
            d.shape()
        )));
    }
    if (s - s.transpose()).norm() > 1e-12 * s.norm().max(1.0) {
        return Err(Error::contract("S must be symmetric"));
    }
    let eig = sym_eig(x)?;
    let lmax = eig.lambda_max();
    let tol = EMBEDDED_RANK_REL_TOL * lmax.abs().max(f64::MIN_POSITIVE);
    let rank = eig.lambda.iter().filter(|&&l| l > tol).count();
    if lmax <= 0.0 || rank != r {
        return Err(Error::contract(format!(
            "X has {rank} eigenvalues above tolerance, expected {r}"
        )));
    }
    let u = eig.u.columns(0, r).into_owned();
    let u_perp = orthogonal_complement(&u)?;
    let inv_sigma = Matrix::from_diagonal(&eig.lambda.rows(0, r).map(|l| 1.0 / l));

    let cross = &u_perp * d * u.transpose();
    let xi = &u * s * u.transpose() + &cross + cross.transpose();
    let correction = &u_perp * d * inv_sigma * d.transpose() * u_perp.transpose();
    Ok(xi.norm_squared() + 2.0 * (x - x_star).dot(&correction))
}
