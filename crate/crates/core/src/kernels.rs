//! Dense linear-algebra primitives.
//!
//! Matrices are `nalgebra` types. Thin SVD and symmetric eigendecomposition
//! are delegated to `faer` (whose SVD stays accurate on rank-deficient input)
//! and then normalized: values are sorted non-increasing and singular-vector /
//! eigenvector signs are canonicalized so that the largest-magnitude entry of
//! every left vector is positive (ties broken by the lowest row index). With
//! that convention every downstream alignment matrix is deterministic.

use faer::Side;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Dense real matrix used throughout the crate (column-major storage).
pub type Matrix = DMatrix<f64>;
/// Dense real vector.
pub type Vector = DVector<f64>;

const SYMMETRY_TOL: f64 = 1e-10;

/// Thin singular value decomposition `A = U diag(sigma) V^T`.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub u: Matrix,
    pub sigma: Vector,
    pub v: Matrix,
}

impl SvdResult {
    /// Number of retained singular triplets.
    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }

    /// `U diag(sigma) V^T`.
    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        for (j, s) in self.sigma.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        us * self.v.transpose()
    }
}

/// Eigendecomposition `S = U diag(lambda) U^T` of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct EigResult {
    pub u: Matrix,
    pub lambda: Vector,
}

impl EigResult {
    pub fn reconstruct(&self) -> Matrix {
        let mut ul = self.u.clone();
        for (j, l) in self.lambda.iter().enumerate() {
            ul.column_mut(j).scale_mut(*l);
        }
        ul * self.u.transpose()
    }

    pub fn lambda_min(&self) -> f64 {
        self.lambda[self.lambda.len() - 1]
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda[0]
    }
}

/// Result of aligning `Y2` onto `Y1` over the orthogonal group.
#[derive(Debug, Clone)]
pub struct Alignment {
    /// Orthogonal `r x r` minimizer of `||Y2 Q - Y1||_F`.
    pub q: Matrix,
    /// `||Y2 Q - Y1||_F`.
    pub residual: f64,
    /// Smallest singular value of `Y1^T Y2`; zero means the minimizer is not unique.
    pub cross_sigma_min: f64,
    /// Largest singular value of `Y1^T Y2`.
    pub cross_sigma_max: f64,
}

pub(crate) fn ensure_finite(a: &Matrix, what: &str) -> Result<()> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(Error::contract(format!("{what}: empty matrix")));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::contract(format!("{what}: non-finite entry")));
    }
    Ok(())
}

/// Flip paired columns so that the largest-magnitude entry of each column of `u` is positive.
fn canonicalize_signs(u: &mut Matrix, mut v: Option<&mut Matrix>) {
    for j in 0..u.ncols() {
        let mut best = 0usize;
        let mut best_abs = -1.0;
        for i in 0..u.nrows() {
            let a = u[(i, j)].abs();
            if a > best_abs {
                best_abs = a;
                best = i;
            }
        }
        if u[(best, j)] < 0.0 {
            u.column_mut(j).neg_mut();
            if let Some(v) = v.as_deref_mut() {
                v.column_mut(j).neg_mut();
            }
        }
    }
}

fn to_faer(a: &Matrix) -> faer::Mat<f64> {
    faer::Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

fn from_faer(a: faer::MatRef<'_, f64>) -> Matrix {
    Matrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

fn descending_order(values: &Vector) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    idx
}

fn select_columns(m: &Matrix, idx: &[usize]) -> Matrix {
    Matrix::from_fn(m.nrows(), idx.len(), |i, j| m[(i, idx[j])])
}

/// Thin SVD with `k = min(rows, cols)` triplets.
pub fn thin_svd(a: &Matrix) -> Result<SvdResult> {
    truncated_svd(a, a.nrows().min(a.ncols()))
}

/// SVD keeping the leading `k` triplets.
pub fn truncated_svd(a: &Matrix, k: usize) -> Result<SvdResult> {
    ensure_finite(a, "svd")?;
    let kmax = a.nrows().min(a.ncols());
    if k == 0 || k > kmax {
        return Err(Error::contract(format!(
            "svd: requested {k} triplets from a {}x{} matrix",
            a.nrows(),
            a.ncols()
        )));
    }
    let svd = to_faer(a).thin_svd().map_err(|_| Error::NumericalFailure {
        rows: a.nrows(),
        cols: a.ncols(),
        context: "SVD iteration did not converge".into(),
    })?;
    let values = Vector::from_iterator(kmax, (0..kmax).map(|i| svd.S().column_vector()[i]));
    let u = from_faer(svd.U());
    let v_full = from_faer(svd.V());
    let order = descending_order(&values);
    let order = &order[..k];
    let sigma = Vector::from_iterator(k, order.iter().map(|&i| values[i].max(0.0)));
    let mut u = select_columns(&u, order);
    let mut v = select_columns(&v_full, order);
    canonicalize_signs(&mut u, Some(&mut v));
    Ok(SvdResult { u, sigma, v })
}

/// Singular values in non-increasing order (no vectors).
pub fn singular_values(a: &Matrix) -> Result<Vector> {
    ensure_finite(a, "singular values")?;
    let s = to_faer(a).singular_values().map_err(|_| Error::NumericalFailure {
        rows: a.nrows(),
        cols: a.ncols(),
        context: "SVD iteration did not converge".into(),
    })?;
    let mut v: Vec<f64> = s.iter().map(|x| x.max(0.0)).collect();
    v.sort_by(|a, b| b.total_cmp(a));
    Ok(Vector::from_vec(v))
}

/// Spectral norm `||A|| = sigma_1(A)`.
pub fn spectral_norm(a: &Matrix) -> f64 {
    if a.iter().all(|x| *x == 0.0) {
        return 0.0;
    }
    singular_values(a).map_or(f64::NAN, |s| s[0])
}

/// Symmetric eigendecomposition with eigenvalues in non-increasing order.
///
/// The input is symmetrized as `(S + S^T)/2` before factorizing; an input
/// whose asymmetry exceeds `1e-10 ||S||_F` is rejected.
pub fn sym_eig(s: &Matrix) -> Result<EigResult> {
    ensure_finite(s, "sym_eig")?;
    if !s.is_square() {
        return Err(Error::contract(format!(
            "sym_eig: matrix is {}x{}, not square",
            s.nrows(),
            s.ncols()
        )));
    }
    let asym = (s - s.transpose()).norm();
    if asym > SYMMETRY_TOL * s.norm() {
        return Err(Error::contract(format!(
            "sym_eig: asymmetry {asym:e} exceeds {SYMMETRY_TOL:e} * ||S||_F"
        )));
    }
    let sym = (s + s.transpose()) * 0.5;
    let n = sym.nrows();
    let eig = to_faer(&sym)
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| Error::NumericalFailure {
            rows: n,
            cols: n,
            context: "symmetric eigen-iteration did not converge".into(),
        })?;
    let values = Vector::from_iterator(n, (0..n).map(|i| eig.S().column_vector()[i]));
    let vectors = from_faer(eig.U());
    let order = descending_order(&values);
    let lambda = Vector::from_iterator(n, order.iter().map(|&i| values[i]));
    let mut u = select_columns(&vectors, &order);
    canonicalize_signs(&mut u, None);
    Ok(EigResult { u, lambda })
}

/// `||A_max(r)||_F`: Frobenius norm of the best rank-`r` approximation.
pub fn truncated_frob_norm(a: &Matrix, r: usize) -> Result<f64> {
    let kmax = a.nrows().min(a.ncols());
    if r == 0 || r > kmax {
        return Err(Error::contract(format!(
            "truncated norm: rank {r} outside 1..={kmax}"
        )));
    }
    let s = singular_values(a)?;
    Ok(s.iter().take(r).map(|x| x * x).sum::<f64>().sqrt())
}

/// Best orthogonal `Q` minimizing `||Y2 Q - Y1||_F`.
///
/// With `Y1^T Y2 = Q_U Sigma Q_V^T`, the minimizer is `Q = Q_V Q_U^T`. A
/// singular cross product is allowed; the canonicalized SVD then picks one
/// minimizer deterministically.
pub fn procrustes_align(y1: &Matrix, y2: &Matrix) -> Result<Alignment> {
    if y1.shape() != y2.shape() {
        return Err(Error::contract(format!(
            "procrustes: shapes {:?} and {:?} differ",
            y1.shape(),
            y2.shape()
        )));
    }
    let cross = y1.transpose() * y2;
    let svd = thin_svd(&cross)?;
    let q = &svd.v * svd.u.transpose();
    let residual = (y2 * &q - y1).norm();
    let r = svd.len();
    Ok(Alignment {
        q,
        residual,
        cross_sigma_min: svd.sigma[r - 1],
        cross_sigma_max: svd.sigma[0],
    })
}

/// Orthonormal basis of the orthogonal complement of the column span of `u`
/// (assumed to have orthonormal columns).
pub fn orthogonal_complement(u: &Matrix) -> Result<Matrix> {
    let p = u.nrows();
    let k = u.ncols();
    if k >= p {
        return Ok(Matrix::zeros(p, 0));
    }
    let proj = Matrix::identity(p, p) - u * u.transpose();
    let eig = sym_eig(&proj)?;
    Ok(eig.u.columns(0, p - k).into_owned())
}

/// `(A + A^T)/2`.
pub fn symmetrize(a: &Matrix) -> Matrix {
    (a + a.transpose()) * 0.5
}
