use crate::error::{Error, Result};
use crate::geometry::FactorPoint;
use crate::kernels::{sym_eig, symmetrize, Matrix};

use super::Objective;

const RANK_REL_TOL: f64 = 1e-10;

/// `H(X) = 1/2 ||X - X*||_F^2` for a PSD target `X*` of rank `r`.
#[derive(Debug, Clone)]
pub struct DenoisingObjective {
    x_star: Matrix,
    r: usize,
}

impl DenoisingObjective {
    /// Validates that `x_star` is symmetric PSD with exactly `r` eigenvalues above `1e-10 lambda_max`.
    pub fn new(x_star: Matrix, r: usize) -> Result<Self> {
        let eig = sym_eig(&x_star)?;
        let lmax = eig.lambda_max();
        if lmax <= 0.0 {
            return Err(Error::contract("denoising target must be nonzero PSD"));
        }
        if eig.lambda_min() < -RANK_REL_TOL * lmax {
            return Err(Error::contract(format!(
                "denoising target is not PSD: lambda_min = {:e}",
                eig.lambda_min()
            )));
        }
        let rank = eig.lambda.iter().filter(|&&l| l > RANK_REL_TOL * lmax).count();
        if rank != r {
            return Err(Error::contract(format!(
                "denoising target has rank {rank}, expected {r}"
            )));
        }
        Ok(Self {
            x_star: symmetrize(&x_star),
            r,
        })
    }

    /// Target `Y* Y*^T`, of rank `r` by construction.
    pub fn from_factor(y_star: &FactorPoint) -> Self {
        Self {
            x_star: symmetrize(&y_star.outer()),
            r: y_star.r(),
        }
    }

    /// Degenerate zero target, so `H(X) = 1/2 ||X||_F^2`.
    pub fn zero(p: usize, r: usize) -> Self {
        Self {
            x_star: Matrix::zeros(p, p),
            r,
        }
    }

    pub fn target(&self) -> &Matrix {
        &self.x_star
    }
}

impl Objective for DenoisingObjective {
    fn dim(&self) -> usize {
        self.x_star.nrows()
    }

    fn target_rank(&self) -> usize {
        self.r
    }

    fn value(&self, x: &Matrix) -> f64 {
        0.5 * (x - &self.x_star).norm_squared()
    }

    fn euclid_grad(&self, x: &Matrix) -> Matrix {
        x - &self.x_star
    }

    fn euclid_hess_form(&self, _x: &Matrix, g1: &Matrix, g2: &Matrix) -> f64 {
        g1.dot(g2)
    }

    fn euclid_hess_apply(&self, _x: &Matrix, g: &Matrix) -> Matrix {
        symmetrize(g)
    }

    fn euclid_hess_gram(&self, _x: &Matrix, dirs: &[Matrix]) -> Matrix {
        let d = dirs.len();
        Matrix::from_fn(d, d, |a, b| dirs[a].dot(&dirs[b]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{gaussian_matrix, rng_for};

    #[test]
    fn validates_target() {
        let y = gaussian_matrix(5, 2, &mut rng_for(1, 0));
        let x = &y * y.transpose();
        assert!(DenoisingObjective::new(x.clone(), 2).is_ok());
        assert!(DenoisingObjective::new(x.clone(), 3).is_err());
        assert!(DenoisingObjective::new(-x, 2).is_err());
        assert!(DenoisingObjective::new(Matrix::zeros(3, 3), 1).is_err());
    }

    #[test]
    fn hessian_is_identity_form() {
        let obj = DenoisingObjective::zero(4, 1);
        let mut rng = rng_for(2, 0);
        let x = gaussian_matrix(4, 4, &mut rng);
        let a = gaussian_matrix(4, 4, &mut rng);
        let b = gaussian_matrix(4, 4, &mut rng);
        assert_eq!(obj.euclid_hess_form(&x, &a, &b), a.dot(&b));
        let k = obj.euclid_hess_gram(&x, &[a.clone(), b.clone()]);
        assert_eq!(k[(0, 1)], k[(1, 0)]);
        assert_eq!(k[(0, 0)], a.norm_squared());
    }
}
