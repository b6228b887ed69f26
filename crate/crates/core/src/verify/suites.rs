use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    exp_map, horizontal_project, injectivity_radius, log_map, quotient_distance, FactorPoint,
};
use crate::kernels::{orthogonal_complement, procrustes_align, singular_values, thin_svd, truncated_frob_norm, Matrix};
use crate::landscape::{hess_extreme_eigs, horizontal_dim, SpectrumMethod, SpectrumOptions};
use crate::objectives::{
    embedded_hess_quadform, make_denoising, make_trace_regression, make_trace_regression_with,
    riemannian_grad_lift, riemannian_hess_quadform, symmetric_lift, DenoisingObjective, Objective,
    SpectrumSpec,
};
use crate::sampling::{gaussian_matrix, random_orthogonal, random_orthonormal_frame, random_symmetric_low_rank, rng_for};

use super::{dense_delta_certificate, fd_gradient_check, fd_hessian_check, FdSpec};

/// Published suite names, in execution order.
pub const SUITE_NAMES: &[&str] = &[
    "fiber-correspondence",
    "distance-transfer",
    "norm-sandwich",
    "positive-determinant",
    "totally-normal-neighborhood",
    "injectivity-radius",
    "singular-value-derivatives",
    "procrustes-perturbation",
    "truncated-frobenius-dual",
    "fd-gradient",
    "fd-hessian",
    "spectrum-agreement",
    "gradient-comparison",
    "hessian-comparison",
    "rsc-gradient-bound",
    "embedded-hessian",
];

/// Outcome of a suite over `instances` seeded instances.
///
/// `worst_rel_err` is the largest per-check relative error: `|a - b| / scale`
/// for identities and `(lhs - rhs) / |rhs|` for inequalities, so it is
/// negative when every inequality holds with room.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub suite: String,
    pub instances: usize,
    pub passes: usize,
    pub worst_rel_err: f64,
    pub seed: u64,
}

impl SuiteSummary {
    pub fn all_pass(&self) -> bool {
        self.passes == self.instances
    }
}

/// Relative slack on inequalities between exactly computed quantities.
const INEQ_SLACK: f64 = 1e-10;

struct Tally {
    pass: bool,
    worst: f64,
}

impl Tally {
    fn new() -> Self {
        Self {
            pass: true,
            worst: f64::NEG_INFINITY,
        }
    }

    fn record(&mut self, ok: bool, err: f64) {
        self.pass &= ok && err.is_finite();
        self.worst = if err.is_nan() { f64::INFINITY } else { self.worst.max(err) };
    }

    /// `lhs <= rhs (1 + rel_slack) + abs_slack`.
    fn le(&mut self, lhs: f64, rhs: f64, rel_slack: f64, abs_slack: f64) {
        let scale = rhs.abs().max(abs_slack).max(f64::MIN_POSITIVE);
        let ok = lhs <= rhs + rel_slack * rhs.abs() + abs_slack;
        self.record(ok, (lhs - rhs) / scale);
    }

    /// `|a - b| <= tol * max(|a|, |b|, floor)`.
    fn close(&mut self, a: f64, b: f64, tol: f64, floor: f64) {
        let err = (a - b).abs() / a.abs().max(b.abs()).max(floor).max(f64::MIN_POSITIVE);
        self.record(err <= tol, err);
    }
}

type SuiteFn = fn(&mut ChaCha8Rng, usize, &mut Tally) -> Result<()>;

fn suite_fn(name: &str) -> Option<SuiteFn> {
    Some(match name {
        "fiber-correspondence" => fiber_correspondence,
        "distance-transfer" => distance_transfer,
        "norm-sandwich" => norm_sandwich,
        "positive-determinant" => positive_determinant,
        "totally-normal-neighborhood" => totally_normal,
        "injectivity-radius" => injectivity,
        "singular-value-derivatives" => singular_value_derivatives,
        "procrustes-perturbation" => procrustes_perturbation,
        "truncated-frobenius-dual" => truncated_dual,
        "fd-gradient" => fd_gradient,
        "fd-hessian" => fd_hessian,
        "spectrum-agreement" => spectrum_agreement,
        "gradient-comparison" => gradient_comparison,
        "hessian-comparison" => hessian_comparison,
        "rsc-gradient-bound" => rsc_gradient_bound,
        "embedded-hessian" => embedded_hessian,
        _ => return None,
    })
}

/// Run a named suite; instance `i` draws from stream `i` of `seed`.
pub fn run_suite(name: &str, seed: u64, instances: usize) -> Result<SuiteSummary> {
    let f = suite_fn(name).ok_or_else(|| {
        Error::contract(format!("unknown suite '{name}'; available: {}", SUITE_NAMES.join(", ")))
    })?;
    let outcomes = (0..instances)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(seed, i as u64);
            let mut t = Tally::new();
            f(&mut rng, i, &mut t)?;
            Ok((t.pass, t.worst))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SuiteSummary {
        suite: name.to_string(),
        instances,
        passes: outcomes.iter().filter(|o| o.0).count(),
        worst_rel_err: outcomes.iter().map(|o| o.1).fold(f64::NEG_INFINITY, f64::max),
        seed,
    })
}

fn dims(rng: &mut ChaCha8Rng, max_r: usize) -> (usize, usize) {
    let r = rng.random_range(1..=max_r);
    (r + rng.random_range(1..=8), r)
}

fn random_point(rng: &mut ChaCha8Rng, p: usize, r: usize) -> Result<FactorPoint> {
    FactorPoint::new(gaussian_matrix(p, r, rng))
}

fn scaled_direction(rng: &mut ChaCha8Rng, p: usize, r: usize, norm: f64) -> Matrix {
    let g = gaussian_matrix(p, r, rng);
    let n = g.norm();
    g * (norm / n)
}

fn fiber_correspondence(rng: &mut ChaCha8Rng, _: usize, t: &mut Tally) -> Result<()> {
    let (p, r) = dims(rng, 4);
    let y = random_point(rng, p, r)?;
    let yo = y.rotate(&random_orthogonal(r, rng))?;
    t.le(quotient_distance(&y, &yo)?, 1e-10, 0.0, 0.0);
    let x = y.outer();
    t.le((&x - yo.outer()).norm() / x.norm(), 1e-12, 0.0, 0.0);
    Ok(())
}

fn distance_transfer(rng: &mut ChaCha8Rng, _: usize, t: &mut Tally) -> Result<()> {
    let (p, r) = dims(rng, 4);
    let y2 = random_point(rng, p, r)?;
    let s = y2.sigma_max() * 10f64.powf(rng.random_range(-3.0..1.0));
    let y1 = FactorPoint::new(y2.matrix() * random_orthogonal(r, rng) + scaled_direction(rng, p, r, s))?;
    let d = quotient_distance(&y1, &y2)?;
    let gap = (y1.outer() - y2.outer()).norm();
    let c = 1.0 / (2.0 * (std::f64::consts::SQRT_2 - 1.0));
    t.le(d * d, c * gap * gap / y2.sigma_min().powi(2), INEQ_SLACK, 0.0);
    let q = procrustes_align(y1.matrix(), y2.matrix())?.q;
    let e = y1.matrix() - y2.matrix() * q;
    t.le((&e * e.transpose()).norm_squared(), 2.0 * gap * gap, INEQ_SLACK, 0.0);

    let x = y2.sigma_min() / 3.0;
    let len = rng.random::<f64>() * x;
    let near = FactorPoint::new(y2.matrix() + scaled_direction(rng, p, r, len))?;
    let dn = quotient_distance(&near, &y2)?;
    let gn = (near.outer() - y2.outer()).norm();
    t.le(gn, 7.0 / 3.0 * y2.sigma_max() * dn, INEQ_SLACK, 0.0);
    Ok(())
}

fn norm_sandwich(rng: &mut ChaCha8Rng, _: usize, t: &mut Tally) -> Result<()> {
    let (p, r) = dims(rng, 4);
    let y = random_point(rng, p, r)?;
    for _ in 0..5 {
        let th = horizontal_project(&y, &gaussian_matrix(p, r, rng))?;
        let lift = symmetric_lift(y.matrix(), th.matrix()).norm_squared();
        let n2 = th.norm().powi(2);
        t.le(2.0 * y.sigma_min().powi(2) * n2, lift, INEQ_SLACK, 0.0);
        t.le(lift, 4.0 * y.sigma_max().powi(2) * n2, INEQ_SLACK, 0.0);
    }
    Ok(())
}

/// `Y' = (Y + theta) O` with `||theta||_F = frac * sigma_r(Y)`; even instances
/// push straight at the nearest rank-deficient matrix.
fn perturbed_partner(rng: &mut ChaCha8Rng, y: &FactorPoint, frac: f64, adversarial: bool) -> Result<FactorPoint> {
    let (p, r) = (y.p(), y.r());
    let radius = frac * y.sigma_min();
    let theta = if adversarial {
        let svd = y.svd();
        svd.u.column(r - 1) * svd.v.column(r - 1).transpose() * (-radius)
    } else {
        scaled_direction(rng, p, r, radius)
    };
    FactorPoint::new((y.matrix() + theta) * random_orthogonal(r, rng))
}

fn positive_determinant(rng: &mut ChaCha8Rng, i: usize, t: &mut Tally) -> Result<()> {
    let (p, r) = dims(rng, 4);
    let y = random_point(rng, p, r)?;
    let frac = rng.random_range(0.0..0.999);
    let yp = perturbed_partner(rng, &y, frac, i.is_multiple_of(2))?;
    let d = quotient_distance(&yp, &y)?;
    t.le(d, y.sigma_min(), 0.0, 0.0);
    let o = procrustes_align(y.matrix(), yp.matrix())?.q;
    let target = yp.matrix() * o;
    let base = (y.matrix().transpose() * y.matrix()).determinant();
    for k in 0..=10 {
        let s = k as f64 / 10.0;
        let g = y.matrix() + (&target - y.matrix()) * s;
        let det = (y.matrix().transpose() * g).determinant();
        t.record(det > 0.0, -det / base);
    }
    Ok(())
}

fn totally_normal(rng: &mut ChaCha8Rng, _: usize, t: &mut Tally) -> Result<()> {
    let (p, r) = dims(rng, 4);
    let y = random_point(rng, p, r)?;
    let x = y.sigma_min() / 3.0;
    let frac = rng.random::<f64>() / 3.0;
    let yp = perturbed_partner(rng, &y, frac, false)?;
    let d = quotient_distance(&yp, &y)?;
    t.le(d, x, 0.0, 0.0);
    let margin = yp.sigma_min() - (y.sigma_min() - x);
    t.record(margin > 0.0, -margin / x);
    Ok(())
}

fn injectivity(rng: &mut ChaCha8Rng, _: usize, t: &mut Tally) -> Result<()> {
    let (p, r) = dims(rng, 4);
    let y = random_point(rng, p, r)?;
    let sv = singular_values(y.matrix())?;
    t.close(injectivity_radius(&y), sv[r - 1], 1e-14, 0.0);
    let dir = horizontal_project(&y, &gaussian_matrix(p, r, rng))?;
    let len = rng.random_range(0.05..0.95) * y.sigma_min();
    let th = dir.scaled(len / dir.norm());
    for k in 1..=9 {
        let s = k as f64 / 10.0;
        let yt = exp_map(&y, &th, s)?;
        t.close(quotient_distance(&yt, &y)?, s * len, 1e-9, 0.0);
    }
    let end = exp_map(&y, &th, 1.0)?;
    let rotated = end.rotate(&random_orthogonal(r, rng))?;
    let back = log_map(&y, &rotated)?;
    t.le((back.matrix() - th.matrix()).norm() / len, 1e-8, 0.0, 0.0);
    t.le(y.sigma_min() - len, injectivity_radius(&end), 1e-12, 0.0);
    Ok(())
}

/// Central difference with one Richardson step.
fn richardson_first(f: impl Fn(f64) -> f64, h: f64) -> f64 {
    let d = |s: f64| (f(s) - f(-s)) / (2.0 * s);
    (4.0 * d(h / 2.0) - d(h)) / 3.0
}

fn richardson_second(f: impl Fn(f64) -> f64, h: f64) -> f64 {
    let f0 = f(0.0);
    let s = |s: f64| (f(s) - 2.0 * f0 + f(-s)) / (s * s);
    (4.0 * s(h / 2.0) - s(h)) / 3.0
}

fn singular_value_derivatives(rng: &mut ChaCha8Rng, _: usize, t: &mut Tally) -> Result<()> {
    let m = rng.random_range(3..=8);
    let n = rng.random_range(2..=m);
    let u = random_orthonormal_frame(m, n, rng);
    let v = random_orthogonal(n, rng);
    let s: Vec<f64> = (0..n).map(|i| (n - i) as f64 + 0.5 * rng.random::<f64>()).collect();
    let a0 = &u * Matrix::from_diagonal(&crate::kernels::Vector::from_vec(s.clone())) * v.transpose();
    let b = gaussian_matrix(m, n, rng);
    let a = |h: f64| &a0 + &b * h;
    let sigma = |i: usize, h: f64| singular_values(&a(h)).map(|sv| sv[i]).unwrap_or(f64::NAN);
    let proj = |i: usize, h: f64| -> Matrix {
        let svd = thin_svd(&a(h)).expect("finite matrix");
        svd.u.column(i) * svd.v.column(i).transpose()
    };
    let u_full = {
        let comp = orthogonal_complement(&u)?;
        let mut f = Matrix::zeros(m, m);
        f.columns_mut(0, n).copy_from(&u);
        f.columns_mut(n, m - n).copy_from(&comp);
        f
    };
    let bb = u_full.transpose() * &b * &v;
    let scale = b.norm();
    let h = 1e-3;
    for i in 0..n {
        let dir = u.column(i).dot(&(&b * v.column(i)));
        let num = richardson_first(|x| sigma(i, x), h);
        t.close(dir, num, 1e-5, 1e-6 * scale);

        let mut dproj = Matrix::zeros(m, n);
        for (r, c) in (0..m).flat_map(|r| (0..n).map(move |c| (r, c))) {
            dproj[(r, c)] = richardson_first(|x| proj(i, x)[(r, c)], h);
        }
        let closed_form = b.dot(&dproj);
        let num2 = richardson_second(|x| sigma(i, x), h);
        t.close(closed_form, num2, 1e-5, 1e-6 * scale * scale);

        let mut closed = 0.0;
        for j in 0..n {
            if j != i {
                let (bij, bji) = (bb[(i, j)], bb[(j, i)]);
                closed += (s[i] * (bij * bij + bji * bji) + 2.0 * s[j] * bij * bji) / (s[i] * s[i] - s[j] * s[j]);
            }
        }
        for k in n..m {
            closed += bb[(k, i)].powi(2) / s[i];
        }
        t.close(closed, num2, 1e-5, 1e-6 * scale * scale);
    }
    Ok(())
}

fn procrustes_perturbation(rng: &mut ChaCha8Rng, _: usize, t: &mut Tally) -> Result<()> {
    let r = rng.random_range(2..=4);
    let p = r + rng.random_range(1..=6);
    let y = random_point(rng, p, r)?;
    let frac = rng.random::<f64>() * 0.495;
    let yp = perturbed_partner(rng, &y, frac, false)?;
    let d = quotient_distance(&yp, &y)?;
    let dy = gaussian_matrix(p, r, rng) * rng.random_range(0.1..2.0);
    let dyp = gaussian_matrix(p, r, rng) * rng.random_range(0.1..2.0);
    let o_at = |h: f64| -> Matrix {
        procrustes_align(&(y.matrix() + &dy * h), &(yp.matrix() + &dyp * h))
            .expect("finite inputs")
            .q
    };
    let step = 1e-4;
    let diff = |h: f64| (o_at(h) - o_at(-h)) / (2.0 * h);
    let deriv = (diff(step / 2.0) * 4.0 - diff(step)) / 3.0;
    let s = (y.sigma(r).powi(2) + y.sigma(r - 1).powi(2)).sqrt();
    let bound = std::f64::consts::SQRT_2 * (dyp.norm() / s + dy.norm() / (s - d));
    t.le(deriv.norm(), bound, 0.0, 1e-6);
    Ok(())
}

fn truncated_dual(rng: &mut ChaCha8Rng, i: usize, t: &mut Tally) -> Result<()> {
    let p1 = rng.random_range(2..=9);
    let p2 = rng.random_range(2..=9);
    let k = rng.random_range(1..=p1.min(p2));
    let low_rank = i.is_multiple_of(3);
    let x = if low_rank {
        gaussian_matrix(p1, k, rng) * gaussian_matrix(k, p2, rng)
    } else {
        gaussian_matrix(p1, p2, rng)
    };
    let r = rng.random_range(1..=p1.min(p2));
    let trunc = truncated_frob_norm(&x, r)?;
    let svd = thin_svd(&x)?;
    let mut best = Matrix::zeros(p1, p2);
    for j in 0..r {
        best += svd.u.column(j) * svd.v.column(j).transpose() * svd.sigma[j];
    }
    let best = &best / best.norm();
    t.close(best.dot(&x), trunc, 1e-12, 0.0);
    for _ in 0..20 {
        let b = gaussian_matrix(p1, r, rng) * gaussian_matrix(r, p2, rng);
        let b = &b / b.norm();
        t.le(b.dot(&x), trunc, 1e-12, 0.0);
    }
    if low_rank && k <= r {
        t.close(trunc, x.norm(), 1e-12, 0.0);
    }
    Ok(())
}

/// Denoising or trace regression with a random point at the scale of the target.
fn probe_problem(rng: &mut ChaCha8Rng, i: usize) -> Result<(Box<dyn Objective>, FactorPoint)> {
    let r = rng.random_range(1..=3);
    let seed: u64 = rng.random();
    let (obj, gt): (Box<dyn Objective>, _) = if i.is_multiple_of(2) {
        let p = r + rng.random_range(1..=10);
        let spec = SpectrumSpec::new(if r == 1 { 1.0 } else { rng.random_range(1.0..3.0) }, 1.0);
        let (o, gt) = make_denoising(p, r, spec, seed)?;
        (Box::new(o), gt)
    } else {
        let p = r + rng.random_range(1..=5);
        let (o, gt) = make_trace_regression(p, r, 10 * p * r, 0.1, seed)?;
        (Box::new(o), gt)
    };
    let (p, r) = (gt.p(), gt.r());
    let y = FactorPoint::new(gt.y_star.matrix() + gaussian_matrix(p, r, rng) * rng.random_range(0.05..1.0))?;
    Ok((obj, y))
}

fn fd_gradient(rng: &mut ChaCha8Rng, i: usize, t: &mut Tally) -> Result<()> {
    for k in 0..2 {
        let (obj, y) = probe_problem(rng, i + k)?;
        let th = horizontal_project(&y, &gaussian_matrix(y.p(), y.r(), rng))?;
        let spec = FdSpec::first_order();
        let m = fd_gradient_check(obj.as_ref(), &y, &th, &spec)?;
        t.record(m.passes(spec.rel_tol), m.rel_err);
    }
    Ok(())
}

fn fd_hessian(rng: &mut ChaCha8Rng, i: usize, t: &mut Tally) -> Result<()> {
    for k in 0..2 {
        let (obj, y) = probe_problem(rng, i + k)?;
        let th = horizontal_project(&y, &gaussian_matrix(y.p(), y.r(), rng))?;
        let spec = FdSpec::second_order();
        let m = fd_hessian_check(obj.as_ref(), &y, &th, &spec)?;
        t.record(m.passes(spec.rel_tol), m.rel_err);
    }
    Ok(())
}

/// Largest horizontal dimension exercised by the spectrum agreement suite.
const AGREEMENT_MAX_DIM: usize = 60;

fn spectrum_agreement(rng: &mut ChaCha8Rng, i: usize, t: &mut Tally) -> Result<()> {
    let (obj, y) = loop {
        let (obj, y) = probe_problem(rng, i)?;
        if horizontal_dim(y.p(), y.r()) <= AGREEMENT_MAX_DIM {
            break (obj, y);
        }
    };
    let seed: u64 = rng.random();
    let dense = hess_extreme_eigs(obj.as_ref(), &y, &SpectrumOptions { seed, ..SpectrumOptions::with_method(SpectrumMethod::Dense) })?;
    let iter = hess_extreme_eigs(obj.as_ref(), &y, &SpectrumOptions { seed, ..SpectrumOptions::with_method(SpectrumMethod::Iterative) })?;
    t.close(dense.lambda_min, iter.lambda_min, 1e-7, 0.0);
    t.close(dense.lambda_max, iter.lambda_max, 1e-7, 0.0);
    Ok(())
}

/// Noisy trace regression small enough for an exact isometry certificate.
struct ComparisonCase {
    obj: crate::objectives::TraceRegressionObjective,
    denoise: DenoisingObjective,
    x_star: Matrix,
    grad_trunc: f64,
    delta: f64,
}

fn comparison_case(rng: &mut ChaCha8Rng) -> Result<ComparisonCase> {
    let r = 2;
    let p = rng.random_range(4..=8);
    let seed: u64 = rng.random();
    let spec = SpectrumSpec::new(rng.random_range(1.0..2.0), 1.0);
    let (obj, gt) = make_trace_regression_with(p, r, 40 * p, 0.05, spec, seed)?;
    let cert = dense_delta_certificate(&obj, r, 1, seed)?;
    debug_assert!(cert.exact);
    Ok(ComparisonCase {
        denoise: DenoisingObjective::from_factor(&gt.y_star),
        obj,
        x_star: gt.x_star,
        grad_trunc: gt.grad_at_star_trunc,
        delta: cert.delta,
    })
}

fn comparison_point(rng: &mut ChaCha8Rng, case: &ComparisonCase) -> Result<FactorPoint> {
    let p = case.obj.dim();
    FactorPoint::new(gaussian_matrix(p, 2, rng) * rng.random_range(0.2..2.0))
}

fn gradient_comparison(rng: &mut ChaCha8Rng, _: usize, t: &mut Tally) -> Result<()> {
    let case = comparison_case(rng)?;
    for _ in 0..2 {
        let y = comparison_point(rng, &case)?;
        let gh = riemannian_grad_lift(&case.obj, &y)?;
        let g_den = riemannian_grad_lift(&case.denoise, &y)?;
        let lhs = (gh.matrix() - g_den.matrix()).norm();
        let err = (y.outer() - &case.x_star).norm();
        let rhs = 2.0 * case.delta * y.sigma_max() * err + 2.0 * y.sigma_max() * case.grad_trunc;
        t.le(lhs, rhs, INEQ_SLACK, 0.0);
    }
    Ok(())
}

fn hessian_comparison(rng: &mut ChaCha8Rng, _: usize, t: &mut Tally) -> Result<()> {
    let case = comparison_case(rng)?;
    for _ in 0..2 {
        let y = comparison_point(rng, &case)?;
        let th = horizontal_project(&y, &gaussian_matrix(y.p(), 2, rng))?;
        let qh = riemannian_hess_quadform(&case.obj, &y, &th)?;
        let q_den = riemannian_hess_quadform(&case.denoise, &y, &th)?;
        let tt = (th.matrix() * th.matrix().transpose()).norm();
        let err = (y.outer() - &case.x_star).norm();
        let rhs = case.delta * symmetric_lift(y.matrix(), th.matrix()).norm_squared()
            + 2.0 * case.delta * err * tt
            + 2.0 * case.grad_trunc * tt;
        t.le((qh - q_den).abs(), rhs, INEQ_SLACK, 0.0);
    }
    Ok(())
}

fn rsc_gradient_bound(rng: &mut ChaCha8Rng, _: usize, t: &mut Tally) -> Result<()> {
    let case = comparison_case(rng)?;
    let p = case.obj.dim();
    for _ in 0..3 {
        let c = random_symmetric_low_rank(p, 2, rng) * rng.random_range(0.1..3.0);
        let d = random_symmetric_low_rank(p, 2, rng) * rng.random_range(0.1..3.0);
        let h = gaussian_matrix(p, 4, rng) * gaussian_matrix(4, p, rng);
        let diff = &c - &d;
        let lhs = (case.obj.euclid_grad(&c) - case.obj.euclid_grad(&d) - &diff).dot(&h).abs();
        t.le(lhs, case.delta * diff.norm() * h.norm(), INEQ_SLACK, 0.0);
    }
    Ok(())
}

/// Radius of the embedded comparison, in units of `sigma_r(X*)`.
pub(crate) const EMBEDDED_RADIUS: f64 = 0.2;

fn embedded_hessian(rng: &mut ChaCha8Rng, i: usize, t: &mut Tally) -> Result<()> {
    let r = rng.random_range(1..=3);
    let p = r + rng.random_range(2..=10);
    let kappa = if r == 1 { 1.0 } else { rng.random_range(1.0..3.0) };
    let (_, gt) = make_denoising(p, r, SpectrumSpec::new(kappa, 1.0), rng.random())?;
    let sigma_r_x = gt.sigmar * gt.sigmar;
    let frac = if i.is_multiple_of(2) { 1.0 } else { rng.random::<f64>() };
    let target = frac * EMBEDDED_RADIUS * sigma_r_x;
    let g = gaussian_matrix(p, r, rng);
    let gap = |s: f64| {
        let y = gt.y_star.matrix() + &g * s;
        (&y * y.transpose() - &gt.x_star).norm()
    };
    let mut hi = 1e-3;
    while gap(hi) < target {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if gap(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let y = gt.y_star.matrix() + &g * lo;
    let x = &y * y.transpose();
    let s = {
        let a = gaussian_matrix(r, r, rng);
        (&a + a.transpose()) * 0.5
    };
    let d = gaussian_matrix(p - r, r, rng) * rng.random_range(0.1..3.0);
    let xi_sq = s.norm_squared() + 2.0 * d.norm_squared();
    let q = embedded_hess_quadform(&x, &gt.x_star, &s, &d)?;
    let floor = (1.0 - 2.0 * EMBEDDED_RADIUS / (1.0 - EMBEDDED_RADIUS)) * xi_sq;
    t.le(floor, q, 0.0, 1e-8 * xi_sq);
    Ok(())
}
