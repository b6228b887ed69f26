use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{horizontal_project, FactorPoint, HorizontalTangent};
use crate::kernels::{orthogonal_complement, sym_eig, Matrix, Vector};
use crate::objectives::{riemannian_hess_apply, symmetric_lift, Objective};
use crate::sampling::{gaussian_matrix, rng_for};

/// Dimension `p r - r(r-1)/2` of the horizontal space.
pub fn horizontal_dim(p: usize, r: usize) -> usize {
    p * r - r * (r - 1) / 2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumMethod {
    /// Assemble the Hessian on an orthonormal horizontal basis.
    Dense,
    /// Lanczos on Hessian-vector products restricted to the horizontal space.
    Iterative,
    /// Dense when the horizontal dimension fits under the cap, iterative otherwise.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumOptions {
    pub method: SpectrumMethod,
    /// Largest horizontal dimension assembled densely.
    pub basis_cap: usize,
    pub max_iters: usize,
    /// Ritz residuals must fall below `tol * max(|lambda_min|, |lambda_max|)`.
    pub tol: f64,
    /// Seed of the Lanczos start vector.
    pub seed: u64,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self {
            method: SpectrumMethod::Auto,
            basis_cap: 4000,
            max_iters: 5000,
            tol: 1e-8,
            seed: 0,
        }
    }
}

impl SpectrumOptions {
    pub fn with_method(method: SpectrumMethod) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }
}

/// Extreme eigenvalues of the Riemannian Hessian on the horizontal space.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HessianSpectrumEstimate {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub method: SpectrumMethod,
    /// Largest Ritz residual norm; zero for the dense method.
    pub residual: f64,
    pub iterations: usize,
}

/// Orthonormal basis of the horizontal space at `Y`.
///
/// Built from `Y (Y^T Y)^-1 S_k` over a symmetric basis `S_k` together with
/// `U_perp E_ij` over elementary `(p-r) x r` matrices, then orthonormalized.
pub fn horizontal_basis(y: &FactorPoint, cap: usize) -> Result<Vec<HorizontalTangent>> {
    let (p, r) = (y.p(), y.r());
    let dim = horizontal_dim(p, r);
    if dim > cap {
        return Err(Error::ResourceLimit {
            what: "horizontal basis",
            needed: dim,
            cap,
        });
    }
    let svd = y.svd();
    let inv_sigma = Matrix::from_diagonal(&svd.sigma.map(|s| 1.0 / s));
    // Y (Y^T Y)^-1 = U Sigma^-1 V^T.
    let pinv_t = &svd.u * inv_sigma * svd.v.transpose();
    let mut raw = Vec::with_capacity(dim);
    for j in 0..r {
        for i in j..r {
            let mut s = Matrix::zeros(r, r);
            s[(i, j)] = 1.0;
            s[(j, i)] = 1.0;
            raw.push(&pinv_t * s);
        }
    }
    if r < p {
        let u_perp = orthogonal_complement(&svd.u)?;
        for j in 0..r {
            for i in 0..p - r {
                let mut e = Matrix::zeros(p - r, r);
                e[(i, j)] = 1.0;
                raw.push(&u_perp * e);
            }
        }
    }
    let mut basis: Vec<Matrix> = Vec::with_capacity(dim);
    for mut v in raw {
        for _ in 0..2 {
            for b in &basis {
                let c = b.dot(&v);
                v -= b * c;
            }
        }
        let n = v.norm();
        if n <= 1e-12 {
            return Err(Error::NumericalFailure {
                rows: p,
                cols: r,
                context: "horizontal basis lost rank during orthonormalization".into(),
            });
        }
        basis.push(v / n);
    }
    Ok(basis.into_iter().map(HorizontalTangent::new_unchecked).collect())
}

/// Riemannian Hessian as a `dim x dim` matrix in the basis of [`horizontal_basis`].
pub fn dense_hessian<O: Objective + ?Sized>(obj: &O, y: &FactorPoint, cap: usize) -> Result<Matrix> {
    let basis = horizontal_basis(y, cap)?;
    let x = y.outer();
    let lifts: Vec<Matrix> = basis.iter().map(|b| symmetric_lift(y.matrix(), b.matrix())).collect();
    let mut h = obj.euclid_hess_gram(&x, &lifts);
    let grad = obj.euclid_grad(&x);
    let gb: Vec<Matrix> = basis.iter().map(|b| &grad * b.matrix()).collect();
    let d = basis.len();
    for k in 0..d {
        for l in k..d {
            let c = gb[k].dot(basis[l].matrix()) + gb[l].dot(basis[k].matrix());
            h[(k, l)] += c;
            if l != k {
                h[(l, k)] += c;
            }
        }
    }
    Ok((&h + h.transpose()) * 0.5)
}

/// `(lambda_min, lambda_max)` of the Riemannian Hessian restricted to the horizontal space.
pub fn hess_extreme_eigs<O: Objective + ?Sized>(
    obj: &O,
    y: &FactorPoint,
    opts: &SpectrumOptions,
) -> Result<HessianSpectrumEstimate> {
    let dim = horizontal_dim(y.p(), y.r());
    let method = match opts.method {
        SpectrumMethod::Auto if dim <= opts.basis_cap => SpectrumMethod::Dense,
        SpectrumMethod::Auto => SpectrumMethod::Iterative,
        m => m,
    };
    match method {
        SpectrumMethod::Dense => {
            let h = dense_hessian(obj, y, opts.basis_cap)?;
            let eig = sym_eig(&h)?;
            Ok(HessianSpectrumEstimate {
                lambda_min: eig.lambda_min(),
                lambda_max: eig.lambda_max(),
                method,
                residual: 0.0,
                iterations: 0,
            })
        }
        _ => lanczos_extremes(obj, y, opts),
    }
}

/// Lanczos with full reorthogonalization on `v -> Hess h([Y])[v]`.
fn lanczos_extremes<O: Objective + ?Sized>(
    obj: &O,
    y: &FactorPoint,
    opts: &SpectrumOptions,
) -> Result<HessianSpectrumEstimate> {
    let dim = horizontal_dim(y.p(), y.r());
    let start = gaussian_matrix(y.p(), y.r(), &mut rng_for(opts.seed, 0));
    let mut q = horizontal_project(y, &start)?.into_matrix();
    q /= q.norm();
    let mut qs: Vec<Matrix> = vec![q];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut best = (0.0, 0.0, f64::INFINITY);
    let limit = opts.max_iters.max(1);
    for k in 0..limit {
        let mut w = riemannian_hess_apply(obj, y, &qs[k])?.into_matrix();
        let a = w.dot(&qs[k]);
        alphas.push(a);
        for _ in 0..2 {
            for v in &qs {
                let c = v.dot(&w);
                w -= v * c;
            }
        }
        // Reorthogonalization leaves rounding drift off the horizontal space.
        let w = horizontal_project(y, &w)?.into_matrix();
        let b = w.norm();

        let (lmin, lmax, res) = ritz_extremes(obj, y, &alphas, &betas, &qs)?;
        best = (lmin, lmax, res);
        let scale = lmin.abs().max(lmax.abs()).max(f64::MIN_POSITIVE);
        let exhausted = k + 1 >= dim || b <= 1e-14 * scale;
        if res <= opts.tol * scale || exhausted {
            if res > opts.tol * scale {
                return Err(Error::NumericalFailure {
                    rows: y.p(),
                    cols: y.r(),
                    context: format!(
                        "Lanczos exhausted the horizontal space with residual {res:e}"
                    ),
                });
            }
            return Ok(HessianSpectrumEstimate {
                lambda_min: lmin,
                lambda_max: lmax,
                method: SpectrumMethod::Iterative,
                residual: res,
                iterations: k + 1,
            });
        }
        betas.push(b);
        qs.push(w / b);
    }
    Err(Error::NumericalFailure {
        rows: y.p(),
        cols: y.r(),
        context: format!(
            "Lanczos did not converge in {limit} iterations (residual {:e})",
            best.2
        ),
    })
}

/// Extreme Ritz values of the tridiagonal matrix and their true residual norms.
fn ritz_extremes<O: Objective + ?Sized>(
    obj: &O,
    y: &FactorPoint,
    alphas: &[f64],
    betas: &[f64],
    qs: &[Matrix],
) -> Result<(f64, f64, f64)> {
    let m = alphas.len();
    let mut t = Matrix::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alphas[i];
        if i + 1 < m {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    let eig = sym_eig(&t)?;
    let mut residual: f64 = 0.0;
    for idx in [0, m - 1] {
        let s: Vector = eig.u.column(idx).into_owned();
        let mut x = Matrix::zeros(y.p(), y.r());
        for (j, q) in qs.iter().take(m).enumerate() {
            x += q * s[j];
        }
        let hx = riemannian_hess_apply(obj, y, &x)?.into_matrix();
        residual = residual.max((hx - &x * eig.lambda[idx]).norm());
    }
    Ok((eig.lambda[m - 1], eig.lambda[0], residual))
}
