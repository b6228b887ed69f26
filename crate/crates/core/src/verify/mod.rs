//! Independent oracles: finite differences, brute-force distances, a dense
//! isometry certificate for tiny dimensions, and named property suites.

mod suites;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{FactorPoint, HorizontalTangent};
use crate::kernels::{sym_eig, Matrix, Vector};
use crate::objectives::{riemannian_grad_lift, riemannian_hess_quadform, Objective};
use crate::sampling::{random_orthogonal, random_symmetric_low_rank, rng_for, standard_normal};

pub use suites::{run_suite, SuiteSummary, SUITE_NAMES};

/// Central finite differences with one Richardson extrapolation step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdSpec {
    pub step: f64,
    pub rel_tol: f64,
}

impl FdSpec {
    pub fn first_order() -> Self {
        Self {
            step: 1e-5,
            rel_tol: 1e-5,
        }
    }

    pub fn second_order() -> Self {
        Self {
            step: 1e-4,
            rel_tol: 1e-5,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.step > 0.0 && self.rel_tol > 0.0 && self.step.is_finite() {
            Ok(())
        } else {
            Err(Error::contract("finite-difference step and tolerance must be positive"))
        }
    }
}

/// Absolute floor on the denominator of every relative error.
pub const FD_ABS_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FdMeasurement {
    pub analytic: f64,
    pub numeric: f64,
    /// `|a - n| / max(|a|, |n|, FD_ABS_FLOOR)`.
    pub rel_err: f64,
}

impl FdMeasurement {
    fn new(analytic: f64, numeric: f64) -> Self {
        let denom = analytic.abs().max(numeric.abs()).max(FD_ABS_FLOOR);
        Self {
            analytic,
            numeric,
            rel_err: (analytic - numeric).abs() / denom,
        }
    }

    pub fn passes(&self, rel_tol: f64) -> bool {
        self.rel_err <= rel_tol
    }
}

fn line_value<O: Objective + ?Sized>(obj: &O, y: &Matrix, theta: &Matrix, t: f64) -> f64 {
    let z = y + theta * t;
    obj.value(&(&z * z.transpose()))
}

/// `<grad h(Y), theta>` against the derivative of `t -> h(Y + t theta)` at zero.
pub fn fd_gradient_check<O: Objective + ?Sized>(
    obj: &O,
    y: &FactorPoint,
    theta: &HorizontalTangent,
    spec: &FdSpec,
) -> Result<FdMeasurement> {
    spec.validate()?;
    let analytic = riemannian_grad_lift(obj, y)?.inner(theta);
    let (ym, th) = (y.matrix(), theta.matrix());
    let d = |t: f64| (line_value(obj, ym, th, t) - line_value(obj, ym, th, -t)) / (2.0 * t);
    let numeric = (4.0 * d(spec.step / 2.0) - d(spec.step)) / 3.0;
    Ok(FdMeasurement::new(analytic, numeric))
}

/// `Hess h(Y)[theta, theta]` against the second derivative of `t -> h(Y + t theta)` at zero.
pub fn fd_hessian_check<O: Objective + ?Sized>(
    obj: &O,
    y: &FactorPoint,
    theta: &HorizontalTangent,
    spec: &FdSpec,
) -> Result<FdMeasurement> {
    spec.validate()?;
    let analytic = riemannian_hess_quadform(obj, y, theta)?;
    let (ym, th) = (y.matrix(), theta.matrix());
    let h0 = line_value(obj, ym, th, 0.0);
    let s = |t: f64| (line_value(obj, ym, th, t) - 2.0 * h0 + line_value(obj, ym, th, -t)) / (t * t);
    let numeric = (4.0 * s(spec.step / 2.0) - s(spec.step)) / 3.0;
    Ok(FdMeasurement::new(analytic, numeric))
}

/// `min(||y1 - y2||, ||y1 + y2||)`: the quotient distance when `r = 1`.
pub fn brute_distance_rank1(y1: &Vector, y2: &Vector) -> f64 {
    (y1 - y2).norm().min((y1 + y2).norm())
}

fn cayley(s: &Matrix) -> Matrix {
    let r = s.nrows();
    let id = Matrix::identity(r, r);
    let lhs = &id - s * 0.5;
    let rhs = &id + s * 0.5;
    lhs.lu().solve(&rhs).unwrap_or(id)
}

/// `min ||Y2 O - Y1||_F` over sampled orthogonal `O`: an upper bound on the quotient distance.
///
/// The first half of the samples is Haar-distributed; the second half is a
/// (1+1) random search around the incumbent via Cayley rotations.
pub fn sampled_distance_upper_bound(y1: &Matrix, y2: &Matrix, n_samples: usize, seed: u64) -> Result<f64> {
    if y1.shape() != y2.shape() {
        return Err(Error::contract("sampled distance: shapes differ"));
    }
    let r = y1.ncols();
    let mut rng = rng_for(seed, 0);
    let cost = |o: &Matrix| (y2 * o - y1).norm();
    let mut best_o = Matrix::identity(r, r);
    let mut best = f64::INFINITY;
    let global = n_samples.div_ceil(2);
    for _ in 0..global {
        let o = random_orthogonal(r, &mut rng);
        let c = cost(&o);
        if c < best {
            best = c;
            best_o = o;
        }
    }
    let mut scale = 0.5;
    for _ in global..n_samples {
        let mut s = Matrix::zeros(r, r);
        for i in 0..r {
            for j in (i + 1)..r {
                let v = standard_normal(&mut rng) * scale;
                s[(i, j)] = v;
                s[(j, i)] = -v;
            }
        }
        let o = &best_o * cayley(&s);
        let c = cost(&o);
        if c < best {
            best = c;
            best_o = o;
            scale *= 1.5;
        } else {
            scale = (scale * 0.9).max(1e-14);
        }
    }
    Ok(best)
}

/// Lower bound on the restricted isometry constant, exact in the symmetric
/// directions when `4r >= p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeltaCertificate {
    pub delta: f64,
    /// True when the rank restriction on `G` is vacuous, so the value
    /// bounds the isometry constant from above as well.
    pub exact: bool,
}

/// Largest dimension accepted by [`dense_delta_certificate`].
pub const DENSE_DELTA_MAX_DIM: usize = 8;

fn symmetric_basis(p: usize) -> Vec<Matrix> {
    let mut basis = Vec::with_capacity(p * (p + 1) / 2);
    let w = std::f64::consts::FRAC_1_SQRT_2;
    for j in 0..p {
        for i in j..p {
            let mut e = Matrix::zeros(p, p);
            if i == j {
                e[(i, i)] = 1.0;
            } else {
                e[(i, j)] = w;
                e[(j, i)] = w;
            }
            basis.push(e);
        }
    }
    basis
}

fn from_coords(basis: &[Matrix], c: &Vector) -> Matrix {
    let p = basis[0].nrows();
    basis.iter().zip(c.iter()).fold(Matrix::zeros(p, p), |acc, (b, &w)| acc + b * w)
}

fn to_coords(basis: &[Matrix], g: &Matrix) -> Vector {
    Vector::from_iterator(basis.len(), basis.iter().map(|b| b.dot(g)))
}

fn truncate_symmetric(g: &Matrix, k: usize) -> Result<Matrix> {
    let eig = sym_eig(g)?;
    let mut order: Vec<usize> = (0..eig.lambda.len()).collect();
    order.sort_by(|&a, &b| eig.lambda[b].abs().total_cmp(&eig.lambda[a].abs()));
    let p = g.nrows();
    let mut out = Matrix::zeros(p, p);
    for &i in order.iter().take(k) {
        let u = eig.u.column(i);
        out += u * u.transpose() * eig.lambda[i];
    }
    Ok(out)
}

/// Maximize `|nabla^2 f(X)[G, G] - 1|` over `X` of rank `<= 2r` and unit
/// symmetric `G` of rank `<= 4r`, for `p <= 8`.
///
/// Each restart draws a fresh `X`. When `4r >= p` the maximum over `G` is an
/// eigenvalue problem; otherwise it is approached by projected power
/// iterations on both ends of the spectrum.
pub fn dense_delta_certificate<O: Objective + ?Sized>(
    obj: &O,
    r: usize,
    restarts: usize,
    seed: u64,
) -> Result<DeltaCertificate> {
    let p = obj.dim();
    if p > DENSE_DELTA_MAX_DIM {
        return Err(Error::contract(format!(
            "dense isometry certificate needs p <= {DENSE_DELTA_MAX_DIM}, got {p}"
        )));
    }
    if r == 0 || restarts == 0 {
        return Err(Error::contract("rank and restarts must be positive"));
    }
    let basis = symmetric_basis(p);
    let exact = 4 * r >= p;
    let mut best: f64 = 0.0;
    for k in 0..restarts {
        let mut rng = rng_for(seed, k as u64);
        let x = random_symmetric_low_rank(p, 2 * r, &mut rng) * (1.0 + rng.random::<f64>());
        let gram = crate::kernels::symmetrize(&obj.euclid_hess_gram(&x, &basis));
        let eig = sym_eig(&gram)?;
        if exact {
            best = best
                .max((eig.lambda_max() - 1.0).abs())
                .max((eig.lambda_min() - 1.0).abs());
            continue;
        }
        let shift = eig.lambda_max().abs().max(eig.lambda_min().abs()) + 1.0;
        for sign in [1.0, -1.0] {
            let mut g = random_symmetric_low_rank(p, 4 * r, &mut rng);
            let mut prev = f64::NAN;
            for _ in 0..500 {
                let c = to_coords(&basis, &g);
                let hc = &gram * &c * sign + &c * shift;
                let next = truncate_symmetric(&from_coords(&basis, &hc), 4 * r)?;
                let n = next.norm();
                if n == 0.0 {
                    break;
                }
                g = next / n;
                let v = obj.euclid_hess_form(&x, &g, &g);
                if (v - prev).abs() <= 1e-15 * v.abs().max(1.0) {
                    break;
                }
                prev = v;
            }
            best = best.max((obj.euclid_hess_form(&x, &g, &g) - 1.0).abs());
        }
    }
    Ok(DeltaCertificate { delta: best, exact })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{horizontal_project, quotient_distance};
    use crate::objectives::{
        make_denoising, make_trace_regression, DenoisingObjective, SpectrumSpec,
        TraceRegressionObjective,
    };
    use crate::sampling::gaussian_matrix;

    #[test]
    fn fd_at_target_is_zero_for_both() {
        let (obj, gt) = make_denoising(6, 2, SpectrumSpec::new(2.0, 1.0), 1).unwrap();
        let th = horizontal_project(&gt.y_star, &gaussian_matrix(6, 2, &mut rng_for(1, 1))).unwrap();
        let m = fd_gradient_check(&obj, &gt.y_star, &th, &FdSpec::first_order()).unwrap();
        assert_eq!(m.analytic, 0.0);
        assert!(m.numeric.abs() < 1e-14);
        assert!(m.passes(1e-5));
        let m = fd_hessian_check(&obj, &gt.y_star, &th, &FdSpec::second_order()).unwrap();
        assert!(m.passes(1e-5), "{m:?}");
    }

    #[test]
    fn fd_plug_in_with_zero_target() {
        let obj = DenoisingObjective::zero(5, 2);
        let y = FactorPoint::new(gaussian_matrix(5, 2, &mut rng_for(2, 0))).unwrap();
        // theta = Y is horizontal; <2 Y Y^T Y, Y> = 2 ||Y^T Y||_F^2.
        let th = HorizontalTangent::new(&y, y.matrix().clone()).unwrap();
        let m = fd_gradient_check(&obj, &y, &th, &FdSpec::first_order()).unwrap();
        let yty = y.matrix().transpose() * y.matrix();
        assert!((m.analytic - 2.0 * yty.norm_squared()).abs() < 1e-12 * m.analytic);
        assert!(m.rel_err < 1e-6);
        // h(tY) = t^4 ||Y^T Y||^2 / 2, so the second derivative at 1 is 6 ||Y^T Y||^2.
        let m = fd_hessian_check(&obj, &y, &th, &FdSpec::second_order()).unwrap();
        assert!((m.analytic - 6.0 * yty.norm_squared()).abs() < 1e-10 * m.analytic);
        assert!(m.rel_err < 1e-6);
    }

    #[test]
    fn fd_trace_regression_probes() {
        let (obj, _) = make_trace_regression(6, 2, 80, 0.1, 3).unwrap();
        for i in 0..20 {
            let mut rng = rng_for(4, i);
            let y = FactorPoint::new(gaussian_matrix(6, 2, &mut rng)).unwrap();
            let th = horizontal_project(&y, &gaussian_matrix(6, 2, &mut rng)).unwrap();
            assert!(fd_gradient_check(&obj, &y, &th, &FdSpec::first_order()).unwrap().passes(1e-5));
            assert!(fd_hessian_check(&obj, &y, &th, &FdSpec::second_order()).unwrap().passes(1e-5));
        }
    }

    #[test]
    fn rank1_brute_distance() {
        let mut rng = rng_for(5, 0);
        let y1 = gaussian_matrix(7, 1, &mut rng);
        let v1 = Vector::from_column_slice(y1.as_slice());
        assert_eq!(brute_distance_rank1(&v1, &v1), 0.0);
        assert_eq!(brute_distance_rank1(&v1, &-&v1), 0.0);
        for _ in 0..50 {
            let y2 = gaussian_matrix(7, 1, &mut rng);
            let v2 = Vector::from_column_slice(y2.as_slice());
            let q = quotient_distance(
                &FactorPoint::new(y1.clone()).unwrap(),
                &FactorPoint::new(y2.clone()).unwrap(),
            )
            .unwrap();
            assert!((brute_distance_rank1(&v1, &v2) - q).abs() < 1e-12);
            let s = sampled_distance_upper_bound(&y1, &y2, 20, 1).unwrap();
            assert!((s - q).abs() < 1e-12);
        }
    }

    #[test]
    fn sampled_bound_dominates_and_reaches_fiber() {
        let mut rng = rng_for(6, 0);
        let y1 = gaussian_matrix(8, 2, &mut rng);
        let y2 = &y1 * random_orthogonal(2, &mut rng);
        let s = sampled_distance_upper_bound(&y1, &y2, 10_000, 2).unwrap();
        assert!(s <= 1e-6, "bound {s}");
        let y3 = gaussian_matrix(8, 3, &mut rng);
        let y4 = gaussian_matrix(8, 3, &mut rng);
        let q = quotient_distance(&FactorPoint::new(y3.clone()).unwrap(), &FactorPoint::new(y4.clone()).unwrap())
            .unwrap();
        let s = sampled_distance_upper_bound(&y3, &y4, 200, 3).unwrap();
        assert!(q <= s + 1e-12);
    }

    #[test]
    fn denoising_certificate_is_zero() {
        let obj = DenoisingObjective::zero(6, 1);
        let c = dense_delta_certificate(&obj, 1, 3, 1).unwrap();
        assert!(!c.exact);
        assert!(c.delta < 1e-10);
        let c = dense_delta_certificate(&obj, 2, 3, 1).unwrap();
        assert!(c.exact && c.delta < 1e-10);
    }

    #[test]
    fn constructed_isometry_certificate_is_zero() {
        let p = 5;
        let basis = symmetric_basis(p);
        let y = Vector::zeros(basis.len());
        let obj = TraceRegressionObjective::new(&basis, y, 1).unwrap();
        let c = dense_delta_certificate(&obj, 1, 2, 4).unwrap();
        assert!(c.delta < 1e-10, "{c:?}");
    }

    #[test]
    fn quadratic_certificate_ignores_probe_point() {
        let (obj, _) = make_trace_regression(6, 2, 60, 0.0, 7).unwrap();
        let a = dense_delta_certificate(&obj, 2, 1, 1).unwrap();
        let b = dense_delta_certificate(&obj, 2, 1, 99).unwrap();
        assert!(a.exact);
        assert!((a.delta - b.delta).abs() <= 1e-12 * a.delta.max(1.0));
        let rough = crate::objectives::rsc_rsm_estimate(&obj, 2, 200, 3);
        assert!(rough <= a.delta + 1e-12);
    }

    #[test]
    fn ascent_certificate_beats_sampling() {
        let (obj, _) = make_trace_regression(8, 1, 60, 0.0, 8).unwrap();
        let c = dense_delta_certificate(&obj, 1, 4, 2).unwrap();
        let rough = crate::objectives::rsc_rsm_estimate(&obj, 1, 200, 3);
        assert!(c.delta >= rough, "{} < {rough}", c.delta);
    }

    #[test]
    fn oversized_dimension_is_rejected() {
        let obj = DenoisingObjective::zero(9, 1);
        assert!(dense_delta_certificate(&obj, 1, 1, 0).is_err());
    }
}
