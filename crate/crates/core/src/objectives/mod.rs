//! Objectives `f` on symmetric `p x p` matrices and their lifts `h([Y]) = f(Y Y^T)`
//! to the quotient manifold.

mod denoising;
mod diagnostics;
mod instance;
mod trace_regression;

pub use denoising::DenoisingObjective;
pub use diagnostics::{
    embedded_hess_quadform, restricted_strict_convexity_check, rsc_rsm_estimate,
    StrictConvexityProbe,
};
pub use instance::{
    ground_truth_factor, make_denoising, make_trace_regression, make_trace_regression_with,
    GeneratedProblem, GroundTruth, Instance, Problem, ProblemKind, ProblemSpec, SpectrumSpec,
};
pub use trace_regression::TraceRegressionObjective;

use crate::error::{Error, Result};
use crate::geometry::{horizontal_defect, horizontal_project, FactorPoint, HorizontalTangent};
use crate::kernels::{symmetrize, Matrix};

/// A twice differentiable function of a symmetric matrix.
///
/// `euclid_grad` must return a symmetric matrix and `euclid_hess_form` must be
/// a symmetric bilinear form in its two directions.
pub trait Objective: Send + Sync {
    /// Side length `p` of the matrix argument.
    fn dim(&self) -> usize;

    /// Rank `r` of the intended low-rank solution.
    fn target_rank(&self) -> usize;

    fn value(&self, x: &Matrix) -> f64;

    fn euclid_grad(&self, x: &Matrix) -> Matrix;

    /// `nabla^2 f(X)[G1, G2]`.
    fn euclid_hess_form(&self, x: &Matrix, g1: &Matrix, g2: &Matrix) -> f64;

    /// Symmetric `M` with `<M, G2> = nabla^2 f(X)[G, G2]` for every symmetric `G2`.
    ///
    /// The default probes the form against a symmetric elementary basis,
    /// which costs `p(p+1)/2` form evaluations.
    fn euclid_hess_apply(&self, x: &Matrix, g: &Matrix) -> Matrix {
        let p = self.dim();
        let mut m = Matrix::zeros(p, p);
        let mut e = Matrix::zeros(p, p);
        for j in 0..p {
            for i in j..p {
                e[(i, j)] = 1.0;
                e[(j, i)] = 1.0;
                let v = self.euclid_hess_form(x, g, &e);
                e[(i, j)] = 0.0;
                e[(j, i)] = 0.0;
                if i == j {
                    m[(i, i)] = v;
                } else {
                    m[(i, j)] = 0.5 * v;
                    m[(j, i)] = 0.5 * v;
                }
            }
        }
        m
    }

    /// Gram matrix `K_kl = nabla^2 f(X)[G_k, G_l]` over a list of directions.
    fn euclid_hess_gram(&self, x: &Matrix, dirs: &[Matrix]) -> Matrix {
        let d = dirs.len();
        let mut k = Matrix::zeros(d, d);
        for a in 0..d {
            for b in a..d {
                let v = self.euclid_hess_form(x, &dirs[a], &dirs[b]);
                k[(a, b)] = v;
                k[(b, a)] = v;
            }
        }
        k
    }
}

impl<O: Objective + ?Sized> Objective for &O {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn target_rank(&self) -> usize {
        (**self).target_rank()
    }
    fn value(&self, x: &Matrix) -> f64 {
        (**self).value(x)
    }
    fn euclid_grad(&self, x: &Matrix) -> Matrix {
        (**self).euclid_grad(x)
    }
    fn euclid_hess_form(&self, x: &Matrix, g1: &Matrix, g2: &Matrix) -> f64 {
        (**self).euclid_hess_form(x, g1, g2)
    }
    fn euclid_hess_apply(&self, x: &Matrix, g: &Matrix) -> Matrix {
        (**self).euclid_hess_apply(x, g)
    }
    fn euclid_hess_gram(&self, x: &Matrix, dirs: &[Matrix]) -> Matrix {
        (**self).euclid_hess_gram(x, dirs)
    }
}

/// `-f`: flips the sign of value, gradient and Hessian.
#[derive(Debug, Clone)]
pub struct Negated<O>(pub O);

impl<O: Objective> Objective for Negated<O> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn target_rank(&self) -> usize {
        self.0.target_rank()
    }
    fn value(&self, x: &Matrix) -> f64 {
        -self.0.value(x)
    }
    fn euclid_grad(&self, x: &Matrix) -> Matrix {
        -self.0.euclid_grad(x)
    }
    fn euclid_hess_form(&self, x: &Matrix, g1: &Matrix, g2: &Matrix) -> f64 {
        -self.0.euclid_hess_form(x, g1, g2)
    }
    fn euclid_hess_apply(&self, x: &Matrix, g: &Matrix) -> Matrix {
        -self.0.euclid_hess_apply(x, g)
    }
    fn euclid_hess_gram(&self, x: &Matrix, dirs: &[Matrix]) -> Matrix {
        -self.0.euclid_hess_gram(x, dirs)
    }
}

fn check_dim<O: Objective + ?Sized>(obj: &O, y: &FactorPoint) -> Result<()> {
    if y.p() != obj.dim() {
        return Err(Error::contract(format!(
            "factor has {} rows but the objective acts on {}x{} matrices",
            y.p(),
            obj.dim(),
            obj.dim()
        )));
    }
    Ok(())
}

fn check_horizontal(y: &FactorPoint, theta: &Matrix) -> Result<()> {
    if theta.shape() != y.matrix().shape() {
        return Err(Error::contract(format!(
            "tangent shape {:?} does not match factor {:?}",
            theta.shape(),
            y.matrix().shape()
        )));
    }
    let (asym, tol) = horizontal_defect(y, theta);
    if asym > tol {
        return Err(Error::contract(format!(
            "tangent is not horizontal at the factor (defect {asym:e} > {tol:e})"
        )));
    }
    Ok(())
}

/// `Y theta^T + theta Y^T`, the image of a tangent under `Y -> Y Y^T`.
pub fn symmetric_lift(y: &Matrix, theta: &Matrix) -> Matrix {
    let m = y * theta.transpose();
    &m + m.transpose()
}

/// `f(Y Y^T)`.
pub fn lifted_value<O: Objective + ?Sized>(obj: &O, y: &FactorPoint) -> Result<f64> {
    check_dim(obj, y)?;
    Ok(obj.value(&y.outer()))
}

/// Horizontal lift of the Riemannian gradient, `2 nabla f(Y Y^T) Y`.
pub fn riemannian_grad_lift<O: Objective + ?Sized>(
    obj: &O,
    y: &FactorPoint,
) -> Result<HorizontalTangent> {
    check_dim(obj, y)?;
    let g = obj.euclid_grad(&y.outer());
    Ok(HorizontalTangent::new_unchecked(g * y.matrix() * 2.0))
}

/// `nabla^2 f(YY^T)[Y theta^T + theta Y^T, same] + 2 <nabla f(YY^T), theta theta^T>`.
pub fn riemannian_hess_quadform<O: Objective + ?Sized>(
    obj: &O,
    y: &FactorPoint,
    theta: &HorizontalTangent,
) -> Result<f64> {
    riemannian_hess_bilinear(obj, y, theta, theta)
}

/// Polarized Riemannian Hessian:
/// `nabla^2 f[Z_theta, Z_eta] + 2 <nabla f, theta eta^T>` with `Z_v = Y v^T + v Y^T`.
pub fn riemannian_hess_bilinear<O: Objective + ?Sized>(
    obj: &O,
    y: &FactorPoint,
    theta: &HorizontalTangent,
    eta: &HorizontalTangent,
) -> Result<f64> {
    check_dim(obj, y)?;
    check_horizontal(y, theta.matrix())?;
    check_horizontal(y, eta.matrix())?;
    let x = y.outer();
    let zt = symmetric_lift(y.matrix(), theta.matrix());
    let ze = symmetric_lift(y.matrix(), eta.matrix());
    let g = obj.euclid_grad(&x);
    let curvature = 2.0 * (g * eta.matrix()).dot(theta.matrix());
    Ok(obj.euclid_hess_form(&x, &zt, &ze) + curvature)
}

/// Horizontal lift of `Hess h([Y])[v]` for horizontal `v`:
/// `P_H(2 nabla f v + 2 M Y)` with `M` the Euclidean Hessian applied to `Z_v`.
pub fn riemannian_hess_apply<O: Objective + ?Sized>(
    obj: &O,
    y: &FactorPoint,
    v: &Matrix,
) -> Result<HorizontalTangent> {
    check_dim(obj, y)?;
    check_horizontal(y, v)?;
    let x = y.outer();
    let g = obj.euclid_grad(&x);
    let m = symmetrize(&obj.euclid_hess_apply(&x, &symmetric_lift(y.matrix(), v)));
    let out = (g * v + m * y.matrix()) * 2.0;
    horizontal_project(y, &out)
}
