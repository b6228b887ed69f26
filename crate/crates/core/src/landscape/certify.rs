use std::io::Write;

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{horizontal_project, FactorPoint, HorizontalTangent};
use crate::kernels::{orthogonal_complement, procrustes_align, Matrix};
use crate::objectives::{riemannian_grad_lift, riemannian_hess_quadform, GroundTruth, Objective};
use crate::sampling::{gaussian_matrix, random_orthogonal, rng_for, uniform_ball_radius};

use super::regions::{classify_metrics, PointMetrics, RegionLabel, RegionParams, RegionSet};
use super::spectrum::{hess_extreme_eigs, HessianSpectrumEstimate, SpectrumOptions};
use super::thresholds::{
    compute_thresholds, escape_curvature_coefficient, grad_floor_bounded, grad_floor_frobenius,
    grad_floor_spectral, local_hessian_bracket, BoundContext, ThresholdReport,
};

/// Relative slack granted to every bound.
pub const BOUND_SLACK: f64 = 1e-8;

/// Point generators; each draws from its own derived stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Sampler {
    /// `Y* + rho theta` with horizontal unit `theta` and `rho` uniform in the
    /// ball of radius `radius_scale * mu sigma_r(Y*) / kappa*`, then rotated
    /// by a random orthogonal matrix.
    BallAroundStar { radius_scale: f64 },
    /// `(Y* + s G / ||G||_F) O` with Gaussian `G`, `s = radius_scale * mu sigma_r / kappa`.
    FiberPerturbed { radius_scale: f64 },
    /// `c Y* O` with `c` log-uniform in `[min, max]`.
    Scaled { min: f64, max: f64 },
    /// `scale ||Y*|| G / sqrt(p)` with i.i.d. standard normal `G`.
    Gaussian { scale: f64 },
    /// Strict-saddle neighborhood: `k >= 1` columns of `Y*` (in its singular
    /// basis) replaced by `eps` times directions orthogonal to `Y*`, with `eps`
    /// set so the denoising gradient is `fill * u` times the saddle threshold,
    /// `u` uniform in `(0, 1]`.
    SaddleNeighborhood { fill: f64 },
}

impl Sampler {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Sampler::BallAroundStar { radius_scale } | Sampler::FiberPerturbed { radius_scale } => {
                radius_scale.is_finite() && radius_scale >= 0.0
            }
            Sampler::Scaled { min, max } => min.is_finite() && max.is_finite() && 0.0 < min && min <= max,
            Sampler::Gaussian { scale } => scale.is_finite() && scale > 0.0,
            Sampler::SaddleNeighborhood { fill } => fill.is_finite() && fill > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::contract(format!("invalid sampler parameters: {self:?}")))
        }
    }

    pub fn draw(&self, gt: &GroundTruth, params: &RegionParams, rng: &mut ChaCha8Rng) -> Result<FactorPoint> {
        let (p, r) = (gt.p(), gt.r());
        let y_star = gt.y_star.matrix();
        let radius = params.mu * gt.sigmar / gt.kappa;
        let y = match *self {
            Sampler::BallAroundStar { radius_scale } => {
                let dir = horizontal_project(&gt.y_star, &gaussian_matrix(p, r, rng))?;
                let dim = super::spectrum::horizontal_dim(p, r);
                let rho = radius_scale * radius * uniform_ball_radius(dim, rng);
                let o = random_orthogonal(r, rng);
                (y_star + dir.matrix() * (rho / dir.norm())) * o
            }
            Sampler::FiberPerturbed { radius_scale } => {
                let g = gaussian_matrix(p, r, rng);
                let s = radius_scale * radius / g.norm();
                let o = random_orthogonal(r, rng);
                (y_star + g * s) * o
            }
            Sampler::Scaled { min, max } => {
                let t: f64 = rng.random();
                let c = (min.ln() + t * (max.ln() - min.ln())).exp();
                y_star * random_orthogonal(r, rng) * c
            }
            Sampler::Gaussian { scale } => {
                gaussian_matrix(p, r, rng) * (scale * gt.sigma1 / (p as f64).sqrt())
            }
            Sampler::SaddleNeighborhood { fill } => saddle_point(gt, params, fill, rng)?,
        };
        FactorPoint::new(y)
    }
}

fn saddle_point(gt: &GroundTruth, params: &RegionParams, fill: f64, rng: &mut ChaCha8Rng) -> Result<Matrix> {
    let (p, r) = (gt.p(), gt.r());
    if r == p {
        return Err(Error::contract("saddle sampler needs r < p"));
    }
    let svd = gt.y_star.svd();
    let k = rng.random_range(1..=r.min(p - r));
    let cols = sample(rng, r, k).into_vec();
    // Denoising gradient at the constructed point is 2 eps^3 sqrt(k) in norm.
    let threshold = params.alpha * params.mu * gt.sigmar.powi(3) / (4.0 * gt.kappa);
    let u: f64 = 1.0 - rng.random::<f64>();
    let eps = (fill * u * threshold / (2.0 * (k as f64).sqrt())).cbrt();
    let u_perp = orthogonal_complement(&svd.u)?;
    let mix = crate::sampling::random_orthonormal_frame(p - r, k, rng);
    let w = &u_perp * mix;
    let mut y = Matrix::zeros(p, r);
    for j in 0..r {
        y.column_mut(j).copy_from(&(svd.u.column(j) * svd.sigma[j]));
    }
    for (slot, &j) in cols.iter().enumerate() {
        y.column_mut(j).copy_from(&(w.column(slot) * eps));
    }
    Ok(y * random_orthogonal(r, rng))
}

/// `theta = Y - Y* Q` with `Q` the best alignment of `Y*` onto `Y`.
#[derive(Debug, Clone)]
pub struct EscapeDirection {
    pub theta: HorizontalTangent,
    /// False when `Y^T Y*` is singular and `Q` is one of several minimizers.
    pub unique: bool,
}

pub fn escape_direction(y: &FactorPoint, gt: &GroundTruth) -> Result<EscapeDirection> {
    let al = procrustes_align(y.matrix(), gt.y_star.matrix())?;
    let tol = 1e-10 * y.sigma_max() * gt.sigma1;
    let theta = y.matrix() - gt.y_star.matrix() * &al.q;
    Ok(EscapeDirection {
        theta: HorizontalTangent::new_unchecked(theta),
        unique: al.cross_sigma_min > tol,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    /// The isometry estimate exceeded the gate, so no bound was asserted.
    Skipped,
}

impl CheckStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            CheckStatus::Pass => "true",
            CheckStatus::Fail => "false",
            CheckStatus::Skipped => "skipped",
        }
    }
}

/// Per-point certification outcome. `margin >= 0` means the tightest bound held.
#[derive(Debug, Clone, Serialize)]
pub struct RegionReport {
    pub point_id: usize,
    pub labels: RegionSet,
    pub dist_to_star: f64,
    pub grad_denoising_norm: f64,
    pub grad_norm: f64,
    pub spectrum: Option<HessianSpectrumEstimate>,
    /// Bound of the tightest check (relative to its slack).
    pub bound_value: f64,
    pub observed: f64,
    pub margin: f64,
    pub status: CheckStatus,
    /// Region and bound that failed, if any.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CertifyConfig {
    pub samplers: Vec<Sampler>,
    pub n_points: usize,
    pub seed: u64,
    /// Isometry constant used in the bounds; zero for the denoising objective.
    pub delta: f64,
    /// Skip asserting bounds when `delta` exceeds this value.
    pub delta_gate: Option<f64>,
    pub spectrum: SpectrumOptions,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        Self {
            samplers: vec![
                Sampler::BallAroundStar { radius_scale: 1.0 },
                Sampler::FiberPerturbed { radius_scale: 1.0 },
                Sampler::Scaled { min: 0.5, max: 3.0 },
                Sampler::Gaussian { scale: 1.0 },
                Sampler::SaddleNeighborhood { fill: 0.9 },
            ],
            n_points: 100,
            seed: 0,
            delta: 0.0,
            delta_gate: None,
            spectrum: SpectrumOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificationReport {
    pub thresholds: ThresholdReport,
    pub context: BoundContext,
    pub gated: bool,
    pub rows: Vec<RegionReport>,
}

impl CertificationReport {
    pub fn failures(&self) -> impl Iterator<Item = &RegionReport> {
        self.rows.iter().filter(|r| r.status == CheckStatus::Fail)
    }

    pub fn all_pass(&self) -> bool {
        self.failures().next().is_none()
    }
}

struct Check {
    name: String,
    bound: f64,
    observed: f64,
    margin: f64,
    slack: f64,
}

impl Check {
    fn at_least(name: String, observed: f64, bound: f64, slack: f64) -> Self {
        Self {
            name,
            bound,
            observed,
            margin: observed - bound,
            slack,
        }
    }

    fn at_most(name: String, observed: f64, bound: f64, slack: f64) -> Self {
        Self {
            name,
            bound,
            observed,
            margin: bound - observed,
            slack,
        }
    }

    fn holds(&self) -> bool {
        self.margin >= -self.slack
    }
}

/// Sample points, classify them and check the bound attached to each region.
pub fn certify_landscape<O: Objective + ?Sized>(
    obj: &O,
    gt: &GroundTruth,
    params: &RegionParams,
    cfg: &CertifyConfig,
) -> Result<CertificationReport> {
    let thresholds = compute_thresholds(gt, params)?;
    if cfg.samplers.is_empty() {
        return Err(Error::contract("at least one sampler is required"));
    }
    for s in &cfg.samplers {
        s.validate()?;
    }
    let ctx = BoundContext::for_truth(gt, cfg.delta);
    let gated = cfg.delta_gate.is_some_and(|g| cfg.delta > g);
    let rows = (0..cfg.n_points)
        .into_par_iter()
        .map(|i| {
            let sampler = cfg.samplers[i % cfg.samplers.len()];
            let mut rng = rng_for(cfg.seed, i as u64);
            let y = sampler.draw(gt, params, &mut rng)?;
            certify_point(obj, gt, params, &ctx, &cfg.spectrum, i, &y, gated)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CertificationReport {
        thresholds,
        context: ctx,
        gated,
        rows,
    })
}

/// Classify one point and check every bound attached to its regions.
#[allow(clippy::too_many_arguments)]
pub fn certify_point<O: Objective + ?Sized>(
    obj: &O,
    gt: &GroundTruth,
    params: &RegionParams,
    ctx: &BoundContext,
    spectrum_opts: &SpectrumOptions,
    point_id: usize,
    y: &FactorPoint,
    gated: bool,
) -> Result<RegionReport> {
    let metrics = PointMetrics::at(y, gt)?;
    let labels = classify_metrics(&metrics, gt, params);
    let grad_norm = riemannian_grad_lift(obj, y)?.norm();
    let s2 = gt.sigmar.powi(2);
    let s3 = gt.sigmar.powi(3);
    let mut checks = Vec::new();
    let mut spectrum = None;

    if labels.contains(RegionLabel::R1) || labels.contains(RegionLabel::R2) {
        spectrum = Some(hess_extreme_eigs(obj, y, spectrum_opts)?);
    }
    if labels.contains(RegionLabel::R1) {
        let est = spectrum.as_ref().expect("spectrum computed for R1");
        let (lo, hi) = local_hessian_bracket(gt, params, ctx);
        let slack = BOUND_SLACK * s2;
        checks.push(Check::at_least("R1 lambda_min".into(), est.lambda_min, lo, slack));
        checks.push(Check::at_most("R1 lambda_max".into(), est.lambda_max, hi, slack));
    }
    if labels.contains(RegionLabel::R2) {
        let esc = escape_direction(y, gt)?;
        let th_sq = esc.theta.norm().powi(2);
        let q = riemannian_hess_quadform(obj, y, &esc.theta)?;
        let bound = escape_curvature_coefficient(gt, params, ctx) * th_sq;
        checks.push(Check::at_most("R2 escape curvature".into(), q, bound, BOUND_SLACK * s2 * th_sq));
    }
    let grad_slack = |floor: f64| BOUND_SLACK * s3.max(floor.abs());
    if labels.contains(RegionLabel::R3Prime) {
        let f = grad_floor_bounded(gt, params, ctx);
        checks.push(Check::at_least("R3' gradient floor".into(), grad_norm, f, grad_slack(f)));
    }
    if labels.contains(RegionLabel::R3DoublePrime) {
        let f = grad_floor_spectral(gt, params, ctx, metrics.factor_norm);
        checks.push(Check::at_least("R3'' gradient floor".into(), grad_norm, f, grad_slack(f)));
    }
    if labels.contains(RegionLabel::R3TriplePrime) {
        let f = grad_floor_frobenius(gt, params, ctx);
        checks.push(Check::at_least("R3''' gradient floor".into(), grad_norm, f, grad_slack(f)));
    }

    let tightest = checks
        .iter()
        .min_by(|a, b| (a.margin / a.slack).total_cmp(&(b.margin / b.slack)));
    let failed: Vec<&Check> = checks.iter().filter(|c| !c.holds()).collect();
    let status = if gated {
        CheckStatus::Skipped
    } else if failed.is_empty() {
        CheckStatus::Pass
    } else {
        CheckStatus::Fail
    };
    let failure = if status == CheckStatus::Fail {
        Some(
            failed
                .iter()
                .map(|c| format!("{}: observed {:e} vs bound {:e}", c.name, c.observed, c.bound))
                .collect::<Vec<_>>()
                .join("; "),
        )
    } else {
        None
    };
    Ok(RegionReport {
        point_id,
        labels,
        dist_to_star: metrics.dist_to_star,
        grad_denoising_norm: metrics.grad_denoising_norm,
        grad_norm,
        spectrum,
        bound_value: tightest.map_or(f64::NAN, |c| c.bound),
        observed: tightest.map_or(f64::NAN, |c| c.observed),
        margin: tightest.map_or(f64::NAN, |c| c.margin),
        status,
        failure,
    })
}

/// Full-precision decimal rendering used by every CSV writer.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        String::new()
    }
}

pub const REGION_CSV_HEADER: [&str; 10] = [
    "point_id",
    "region_labels",
    "dist_to_star",
    "grad_H_norm",
    "grad_h_norm",
    "lambda_min",
    "lambda_max",
    "bound_value",
    "margin",
    "pass",
];

pub fn write_region_csv<W: Write>(rows: &[RegionReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REGION_CSV_HEADER)?;
    for row in rows {
        let (lmin, lmax) = row
            .spectrum
            .as_ref()
            .map_or((f64::NAN, f64::NAN), |s| (s.lambda_min, s.lambda_max));
        w.write_record([
            row.point_id.to_string(),
            row.labels.to_string(),
            fmt_f64(row.dist_to_star),
            fmt_f64(row.grad_denoising_norm),
            fmt_f64(row.grad_norm),
            fmt_f64(lmin),
            fmt_f64(lmax),
            fmt_f64(row.bound_value),
            fmt_f64(row.margin),
            row.status.as_str().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Horizontal Hessian spectrum at a first-order stationary point.
///
/// `fosp_tol` defaults to `1e-8 max(1, sigma_1(Y)^3)`.
pub fn strict_convexity_fosp_check<O: Objective + ?Sized>(
    obj: &O,
    y_hat: &FactorPoint,
    fosp_tol: Option<f64>,
    opts: &SpectrumOptions,
) -> Result<HessianSpectrumEstimate> {
    let tol = fosp_tol.unwrap_or(1e-8 * y_hat.sigma_max().powi(3).max(1.0));
    let g = riemannian_grad_lift(obj, y_hat)?.norm();
    if g > tol {
        return Err(Error::NotStationary { grad_norm: g, tol });
    }
    hess_extreme_eigs(obj, y_hat, opts)
}
