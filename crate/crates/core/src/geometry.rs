//! Quotient manifold of full-column-rank `p x r` factors modulo `O(r)`.
//!
//! The total space carries the Euclidean metric `<A, B> = tr(A^T B)`. A point
//! `[Y]` is represented by any member `Y` of its fiber `{Y O : O in O(r)}`,
//! tangent vectors are represented by horizontal lifts (`Y^T theta`
//! symmetric), and geodesics are straight lines `Y1 + t (Y2 Q* - Y1)` in the
//! total space, with `Q*` the Procrustes alignment of `Y2` onto `Y1`.

use crate::error::{Error, Result};
use crate::kernels::{self, procrustes_align, Matrix, SvdResult};

/// Default relative rank tolerance: `sigma_r(Y) > 1e-10 sigma_1(Y)`.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;
const RANK_TOL_FLOOR: f64 = 1e-300;
const HORIZONTAL_TOL: f64 = 1e-8;

/// A full-column-rank factor `Y` with its thin SVD cached.
#[derive(Debug, Clone)]
pub struct FactorPoint {
    y: Matrix,
    svd: SvdResult,
    rank_tol: f64,
}

impl FactorPoint {
    pub fn new(y: Matrix) -> Result<Self> {
        Self::with_rank_tol(y, DEFAULT_RANK_TOL)
    }

    /// Construct with a custom relative rank tolerance.
    pub fn with_rank_tol(y: Matrix, rel_tol: f64) -> Result<Self> {
        kernels::ensure_finite(&y, "factor")?;
        if y.ncols() > y.nrows() {
            return Err(Error::contract(format!(
                "factor is {}x{}; need r <= p",
                y.nrows(),
                y.ncols()
            )));
        }
        let svd = kernels::thin_svd(&y)?;
        let r = y.ncols();
        let tol = (rel_tol * svd.sigma[0]).max(RANK_TOL_FLOOR);
        let sigma_min = svd.sigma[r - 1];
        if sigma_min <= tol {
            return Err(Error::RankDeficient { sigma_min, tol });
        }
        Ok(Self {
            y,
            svd,
            rank_tol: rel_tol,
        })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.y
    }

    pub fn into_matrix(self) -> Matrix {
        self.y
    }

    pub fn p(&self) -> usize {
        self.y.nrows()
    }

    pub fn r(&self) -> usize {
        self.y.ncols()
    }

    pub fn svd(&self) -> &SvdResult {
        &self.svd
    }

    /// `sigma_1(Y) = ||Y||`.
    pub fn sigma_max(&self) -> f64 {
        self.svd.sigma[0]
    }

    /// `sigma_r(Y)`.
    pub fn sigma_min(&self) -> f64 {
        self.svd.sigma[self.r() - 1]
    }

    /// `sigma_i(Y)` with 1-based index.
    pub fn sigma(&self, i: usize) -> f64 {
        self.svd.sigma[i - 1]
    }

    pub fn rank_tol(&self) -> f64 {
        self.rank_tol
    }

    /// `Y Y^T`.
    pub fn outer(&self) -> Matrix {
        &self.y * self.y.transpose()
    }

    /// Right-multiply by an `r x r` matrix (a fiber move when it is orthogonal).
    pub fn rotate(&self, o: &Matrix) -> Result<FactorPoint> {
        FactorPoint::with_rank_tol(&self.y * o, self.rank_tol)
    }
}

/// Horizontal lift `theta` of a quotient tangent vector: `Y^T theta` symmetric.
///
/// The base point is not stored; operations take it explicitly and verify
/// membership where it matters.
#[derive(Debug, Clone, PartialEq)]
pub struct HorizontalTangent {
    theta: Matrix,
}

impl HorizontalTangent {
    /// Certify that `theta` lies in the horizontal space at `base`.
    pub fn new(base: &FactorPoint, theta: Matrix) -> Result<Self> {
        check_shape(base, &theta)?;
        let (asym, tol) = horizontal_defect(base, &theta);
        if asym > tol {
            return Err(Error::contract(format!(
                "tangent is not horizontal: ||Y^T theta - theta^T Y||_F = {asym:e} > {tol:e}"
            )));
        }
        Ok(Self { theta })
    }

    pub(crate) fn new_unchecked(theta: Matrix) -> Self {
        Self { theta }
    }

    pub fn zeros(base: &FactorPoint) -> Self {
        Self {
            theta: Matrix::zeros(base.p(), base.r()),
        }
    }

    pub fn matrix(&self) -> &Matrix {
        &self.theta
    }

    pub fn into_matrix(self) -> Matrix {
        self.theta
    }

    /// Frobenius norm, which equals the quotient metric norm.
    pub fn norm(&self) -> f64 {
        self.theta.norm()
    }

    pub fn scaled(&self, s: f64) -> HorizontalTangent {
        Self {
            theta: &self.theta * s,
        }
    }

    pub fn inner(&self, other: &HorizontalTangent) -> f64 {
        self.theta.dot(&other.theta)
    }
}

fn check_shape(base: &FactorPoint, z: &Matrix) -> Result<()> {
    if z.shape() != base.y.shape() {
        return Err(Error::contract(format!(
            "direction shape {:?} does not match base {:?}",
            z.shape(),
            base.y.shape()
        )));
    }
    Ok(())
}

/// `(||Y^T Z - Z^T Y||_F, tolerance)` for the horizontal-membership test.
pub fn horizontal_defect(base: &FactorPoint, z: &Matrix) -> (f64, f64) {
    let m = base.y.transpose() * z;
    let asym = (&m - m.transpose()).norm();
    let tol = HORIZONTAL_TOL * (base.sigma_max() * z.norm()).max(1.0);
    (asym, tol)
}

pub fn is_horizontal(base: &FactorPoint, z: &Matrix) -> bool {
    let (a, t) = horizontal_defect(base, z);
    a <= t
}

/// Skew-symmetric `Omega` solving `(Y^T Y) Omega + Omega (Y^T Y) = Y^T Z - Z^T Y`.
///
/// Solved in the eigenbasis of `Y^T Y = V diag(sigma^2) V^T`, where the
/// Sylvester operator is diagonal.
pub fn vertical_generator(base: &FactorPoint, z: &Matrix) -> Result<Matrix> {
    check_shape(base, z)?;
    let yt_z = base.y.transpose() * z;
    let c = &yt_z - yt_z.transpose();
    let v = &base.svd.v;
    let ct = v.transpose() * c * v;
    let s2: Vec<f64> = base.svd.sigma.iter().map(|s| s * s).collect();
    let r = base.r();
    let omega_t = Matrix::from_fn(r, r, |i, j| ct[(i, j)] / (s2[i] + s2[j]));
    let omega = v * omega_t * v.transpose();
    Ok((&omega - omega.transpose()) * 0.5)
}

/// Orthogonal projection of `Z` onto the vertical space `{Y Omega : Omega skew}`.
pub fn vertical_project(base: &FactorPoint, z: &Matrix) -> Result<Matrix> {
    let omega = vertical_generator(base, z)?;
    Ok(&base.y * omega)
}

/// Orthogonal projection of `Z` onto the horizontal space at `base`.
pub fn horizontal_project(base: &FactorPoint, z: &Matrix) -> Result<HorizontalTangent> {
    let v = vertical_project(base, z)?;
    Ok(HorizontalTangent::new_unchecked(z - v))
}

/// Geodesic distance `d([Y1],[Y2]) = min_O ||Y2 O - Y1||_F`.
pub fn quotient_distance(y1: &FactorPoint, y2: &FactorPoint) -> Result<f64> {
    Ok(procrustes_align(&y1.y, &y2.y)?.residual)
}

fn cross_tolerance(y1: &FactorPoint, y2: &FactorPoint) -> f64 {
    (DEFAULT_RANK_TOL * y1.sigma_max() * y2.sigma_max()).max(RANK_TOL_FLOOR)
}

/// Horizontal lift at `Y1` of the Riemannian logarithm of `[Y2]`: `Y2 Q* - Y1`.
///
/// Fails when `Y1^T Y2` is singular, where the minimizing alignment (and
/// hence the logarithm) is not unique.
pub fn log_map(y1: &FactorPoint, y2: &FactorPoint) -> Result<HorizontalTangent> {
    let al = procrustes_align(&y1.y, &y2.y)?;
    if al.cross_sigma_min <= cross_tolerance(y1, y2) {
        return Err(Error::NonUnique {
            sigma_min: al.cross_sigma_min,
        });
    }
    Ok(HorizontalTangent::new_unchecked(&y2.y * al.q - &y1.y))
}

/// Point `[Y + t theta]` on the geodesic from `[Y]` with initial velocity `theta`.
pub fn exp_map(base: &FactorPoint, theta: &HorizontalTangent, t: f64) -> Result<FactorPoint> {
    check_shape(base, &theta.theta)?;
    let (asym, tol) = horizontal_defect(base, &theta.theta);
    if asym > tol {
        return Err(Error::contract(format!(
            "exp_map: tangent is not horizontal at the base (defect {asym:e})"
        )));
    }
    if t == 0.0 {
        return Ok(base.clone());
    }
    let y = &base.y + &theta.theta * t;
    match FactorPoint::with_rank_tol(y, base.rank_tol) {
        Ok(p) => Ok(p),
        Err(Error::RankDeficient { sigma_min, .. }) => Err(Error::RankCollapse { t, sigma_min }),
        Err(e) => Err(e),
    }
}

/// Injectivity radius at `[Y]`, equal to `sigma_r(Y)`.
pub fn injectivity_radius(y: &FactorPoint) -> f64 {
    y.sigma_min()
}

/// Radius `sigma_r(Y)/3` below which geodesic balls around `[Y]` are convex.
pub fn convexity_radius(y: &FactorPoint) -> f64 {
    y.sigma_min() / 3.0
}

/// Minimizing geodesic `t -> [start + t direction]`, `t in [0, 1]`.
#[derive(Debug, Clone)]
pub struct GeodesicSegment {
    pub start: FactorPoint,
    pub direction: HorizontalTangent,
    pub length: f64,
}

impl GeodesicSegment {
    pub fn between(y1: &FactorPoint, y2: &FactorPoint) -> Result<Self> {
        let direction = log_map(y1, y2)?;
        let length = direction.norm();
        Ok(Self {
            start: y1.clone(),
            direction,
            length,
        })
    }

    pub fn at(&self, t: f64) -> Result<FactorPoint> {
        exp_map(&self.start, &self.direction, t)
    }
}
