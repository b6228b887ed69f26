//! Gradient descent on the factor, with optional perturbation at strict
//! saddles, spectral initialization and the local error bound.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{horizontal_project, quotient_distance, FactorPoint};
use crate::kernels::{sym_eig, Matrix};
use crate::landscape::{
    classify_region, fmt_f64, hess_extreme_eigs, local_hessian_bracket,
    strong_convexity_margin, BoundContext, RegionParams, RegionSet, SpectrumOptions,
};
use crate::objectives::{riemannian_grad_lift, GroundTruth, Objective, TraceRegressionObjective};
use crate::sampling::{gaussian_matrix, rng_for};

/// Step-size rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StepRule {
    Fixed {
        eta: f64,
    },
    /// Armijo backtracking. Each search starts from twice the last accepted step.
    Armijo {
        initial: f64,
        c1: f64,
        shrink: f64,
        max_backtracks: usize,
    },
}

impl Default for StepRule {
    fn default() -> Self {
        StepRule::Armijo {
            initial: 1.0,
            c1: 1e-4,
            shrink: 0.5,
            max_backtracks: 50,
        }
    }
}

impl StepRule {
    /// `1 / lambda_max`, with `lambda_max` the upper Hessian bound on the local region.
    pub fn inverse_local_smoothness(gt: &GroundTruth, params: &RegionParams, ctx: &BoundContext) -> Self {
        StepRule::Fixed {
            eta: 1.0 / local_hessian_bracket(gt, params, ctx).1,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            StepRule::Fixed { eta } => eta.is_finite() && eta > 0.0,
            StepRule::Armijo {
                initial,
                c1,
                shrink,
                ..
            } => {
                initial.is_finite() && initial > 0.0 && c1 > 0.0 && c1 < 1.0 && shrink > 0.0 && shrink < 1.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::contract(format!("invalid step rule {self:?}")))
        }
    }
}

/// Random horizontal kick applied at points with small gradient and certified negative curvature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationConfig {
    /// Defaults to `0.1 sigma_r(Y*) / kappa*` with a target, else `0.1 sigma_r(Y_k)`.
    #[serde(default)]
    pub radius: Option<f64>,
    pub trigger_tol: f64,
    #[serde(default)]
    pub cooldown_iters: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GdConfig {
    pub step: StepRule,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub perturbation: Option<PerturbationConfig>,
    pub seed: u64,
    /// Region labels are recorded per iterate when a target is supplied.
    pub region_params: RegionParams,
}

impl Default for GdConfig {
    fn default() -> Self {
        Self {
            step: StepRule::default(),
            max_iters: 5000,
            grad_tol: 1e-10,
            perturbation: None,
            seed: 0,
            region_params: RegionParams::default(),
        }
    }
}

impl GdConfig {
    pub fn validate(&self) -> Result<()> {
        self.step.validate()?;
        if self.max_iters == 0 {
            return Err(Error::contract("max_iters must be at least 1"));
        }
        if !(self.grad_tol.is_finite() && self.grad_tol > 0.0) {
            return Err(Error::contract("grad_tol must be positive"));
        }
        if let Some(p) = &self.perturbation {
            if !(p.trigger_tol.is_finite() && p.trigger_tol > 0.0) {
                return Err(Error::contract("perturbation trigger_tol must be positive"));
            }
            if p.radius.is_some_and(|r| !(r.is_finite() && r > 0.0)) {
                return Err(Error::contract("perturbation radius must be positive"));
            }
        }
        self.region_params.validate()
    }
}

/// One row per iterate; row `k` describes `Y_k` and the step that produced it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterateRecord {
    pub iter: usize,
    pub obj: f64,
    pub grad_norm: f64,
    pub dist_to_star: Option<f64>,
    pub step: f64,
    pub regions: Option<RegionSet>,
    pub perturbed: bool,
}

#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub iterates: Vec<IterateRecord>,
    pub converged: bool,
    /// Number of steps taken.
    pub iterations: usize,
    pub final_point: FactorPoint,
}

impl TrajectoryRecord {
    pub fn last(&self) -> &IterateRecord {
        self.iterates.last().expect("trajectory has at least one row")
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iter", "obj", "grad_norm", "dist_to_star", "step", "regions", "perturbed_flag"])?;
        for row in &self.iterates {
            w.write_record([
                row.iter.to_string(),
                fmt_f64(row.obj),
                fmt_f64(row.grad_norm),
                row.dist_to_star.map_or_else(String::new, fmt_f64),
                fmt_f64(row.step),
                row.regions.as_ref().map_or_else(String::new, |r| r.to_string()),
                row.perturbed.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn checked_point(y: Matrix, iteration: usize) -> Result<FactorPoint> {
    FactorPoint::new(y).map_err(|e| match e {
        Error::RankDeficient { sigma_min, .. } => Error::IterateRankCollapse { iteration, sigma_min },
        other => other,
    })
}

/// Per-step quantities already known to the caller.
struct StepInfo {
    iter: usize,
    step: f64,
    perturbed: bool,
    grad_norm: f64,
}

fn record<O: Objective + ?Sized>(
    obj: &O,
    y: &FactorPoint,
    gt: Option<&GroundTruth>,
    params: &RegionParams,
    info: StepInfo,
) -> Result<IterateRecord> {
    let StepInfo { iter, step, perturbed, grad_norm } = info;
    let (dist_to_star, regions) = match gt {
        Some(gt) => (
            Some(quotient_distance(y, &gt.y_star)?),
            Some(classify_region(y, gt, params)?),
        ),
        None => (None, None),
    };
    Ok(IterateRecord {
        iter,
        obj: obj.value(&y.outer()),
        grad_norm,
        dist_to_star,
        step,
        regions,
        perturbed,
    })
}

/// `Y_{k+1} = Y_k - eta_k grad h(Y_k)` until `||grad||_F <= grad_tol` or `max_iters` steps.
pub fn riemannian_gd<O: Objective + ?Sized>(
    obj: &O,
    y0: &FactorPoint,
    cfg: &GdConfig,
    gt: Option<&GroundTruth>,
) -> Result<TrajectoryRecord> {
    cfg.validate()?;
    if y0.p() != obj.dim() {
        return Err(Error::contract("initial point dimension does not match objective"));
    }
    let mut rng = rng_for(cfg.seed, 0);
    let spectrum_opts = SpectrumOptions {
        seed: cfg.seed,
        ..SpectrumOptions::default()
    };
    let params = &cfg.region_params;
    let mut y = y0.clone();
    let mut grad = riemannian_grad_lift(obj, &y)?.into_matrix();
    let mut g_norm = grad.norm();
    let mut iterates = vec![record(obj, &y, gt, params, StepInfo { iter: 0, step: 0.0, perturbed: false, grad_norm: g_norm })?];
    let mut last_eta = match cfg.step {
        StepRule::Fixed { eta } => eta,
        StepRule::Armijo { initial, .. } => initial / 2.0,
    };
    let mut last_kick: Option<usize> = None;
    let mut k = 0;
    while g_norm > cfg.grad_tol && k < cfg.max_iters {
        let iteration = k + 1;
        let mut perturbed = false;
        if let Some(pc) = &cfg.perturbation {
            let cooled = last_kick.is_none_or(|j| k >= j + pc.cooldown_iters);
            if g_norm < pc.trigger_tol && cooled {
                let est = hess_extreme_eigs(obj, &y, &spectrum_opts)?;
                if est.lambda_min < -pc.trigger_tol {
                    let radius = pc.radius.unwrap_or_else(|| match gt {
                        Some(gt) => 0.1 * gt.sigmar / gt.kappa,
                        None => 0.1 * y.sigma_min(),
                    });
                    let dir = horizontal_project(&y, &gaussian_matrix(y.p(), y.r(), &mut rng))?;
                    let kick = dir.matrix() * (radius / dir.norm());
                    y = checked_point(y.matrix() + kick, iteration)?;
                    grad = riemannian_grad_lift(obj, &y)?.into_matrix();
                    g_norm = grad.norm();
                    perturbed = true;
                    last_kick = Some(k);
                }
            }
        }
        let (next, eta) = match cfg.step {
            StepRule::Fixed { eta } => (checked_point(y.matrix() - &grad * eta, iteration)?, eta),
            StepRule::Armijo {
                c1,
                shrink,
                max_backtracks,
                ..
            } => {
                let h0 = obj.value(&y.outer());
                let decrease = c1 * g_norm * g_norm;
                let mut eta = 2.0 * last_eta;
                let mut accepted = None;
                for _ in 0..=max_backtracks {
                    let cand = y.matrix() - &grad * eta;
                    if let Ok(pt) = FactorPoint::new(cand) {
                        if obj.value(&pt.outer()) <= h0 - eta * decrease {
                            accepted = Some(pt);
                            break;
                        }
                    }
                    eta *= shrink;
                }
                match accepted {
                    Some(pt) => (pt, eta),
                    None => {
                        return Err(Error::StepFailure {
                            iteration,
                            backtracks: max_backtracks,
                        })
                    }
                }
            }
        };
        last_eta = eta;
        y = next;
        grad = riemannian_grad_lift(obj, &y)?.into_matrix();
        g_norm = grad.norm();
        if !g_norm.is_finite() {
            return Err(Error::NumericalFailure {
                rows: y.p(),
                cols: y.r(),
                context: format!("gradient diverged at iteration {iteration}"),
            });
        }
        k = iteration;
        iterates.push(record(obj, &y, gt, params, StepInfo { iter: k, step: eta, perturbed, grad_norm: g_norm })?);
    }
    Ok(TrajectoryRecord {
        converged: g_norm <= cfg.grad_tol,
        iterations: k,
        iterates,
        final_point: y,
    })
}

/// `U_r Lambda_r^{1/2}` from the top-`r` eigenpairs of `A^*(y)`.
///
/// `eig_floor` defaults to `1e-8 lambda_1`.
pub fn spectral_init(obj: &TraceRegressionObjective, r: usize, eig_floor: Option<f64>) -> Result<FactorPoint> {
    let p = obj.dim();
    if r == 0 || r > p {
        return Err(Error::contract(format!("rank {r} out of range for dimension {p}")));
    }
    let m = obj.adjoint(obj.observations());
    let eig = sym_eig(&m)?;
    let lambda1 = eig.lambda_max();
    let floor = eig_floor.unwrap_or(1e-8 * lambda1.max(0.0));
    let above = eig.lambda.iter().take(r).filter(|&&l| l > 0.0 && l > floor).count();
    if lambda1 <= 0.0 || above < r {
        return Err(Error::InitializationFailure(format!(
            "only {above} of the top {r} eigenvalues of the adjoint exceed the floor {floor:e}"
        )));
    }
    let mut y = eig.u.columns(0, r).into_owned();
    for (j, mut col) in y.column_iter_mut().enumerate() {
        col *= eig.lambda[j].max(floor).sqrt();
    }
    FactorPoint::new(y)
}

/// Distance from a stationary point in the local region to the target and its two upper bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorBoundReport {
    /// `d([Y_hat], [Y*])`.
    pub lhs: f64,
    /// `2 ||nabla f(X*) Y*||_F / (m sigma_r^2)`, `m = (1 - mu/kappa)^2 - 7 mu / 3`.
    pub middle: f64,
    /// `2 ||Y*|| ||(nabla f(X*))_max(r)||_F / (m sigma_r^2)`.
    pub rhs: f64,
    /// Absolute slack granted on `lhs <= rhs`.
    pub slack: f64,
    pub holds: bool,
    pub grad_norm: f64,
}

/// Absolute slack on the error bound, relative to `sigma_r(Y*)`.
pub const ERROR_BOUND_SLACK: f64 = 1e-7;

/// Check the local error bound at `y_hat`.
///
/// Requires `||grad h(y_hat)|| <= fosp_tol` (default `1e-8 max(1, sigma_1(Y*)^3)`)
/// and `y_hat` in the local region.
pub fn error_bound_check<O: Objective + ?Sized>(
    obj: &O,
    y_hat: &FactorPoint,
    gt: &GroundTruth,
    mu: f64,
    fosp_tol: Option<f64>,
) -> Result<ErrorBoundReport> {
    let margin = strong_convexity_margin(gt.kappa, mu);
    if margin <= 0.0 {
        return Err(Error::HypothesisViolation(format!(
            "(1 - mu/kappa)^2 - 7 mu/3 = {margin:e} must be positive (mu = {mu}, kappa = {})",
            gt.kappa
        )));
    }
    let grad_norm = riemannian_grad_lift(obj, y_hat)?.norm();
    let tol = fosp_tol.unwrap_or(1e-8 * gt.sigma1.powi(3).max(1.0));
    if grad_norm > tol {
        return Err(Error::NotStationary { grad_norm, tol });
    }
    let lhs = quotient_distance(y_hat, &gt.y_star)?;
    let radius = mu * gt.sigmar / gt.kappa;
    if lhs > radius {
        return Err(Error::HypothesisViolation(format!(
            "stationary point at distance {lhs:e} lies outside the local region of radius {radius:e}"
        )));
    }
    let denom = margin * gt.sigmar.powi(2);
    let middle = 2.0 * gt.grad_at_star_factor / denom;
    let rhs = 2.0 * gt.sigma1 * gt.grad_at_star_trunc / denom;
    let slack = ERROR_BOUND_SLACK * gt.sigmar;
    Ok(ErrorBoundReport {
        lhs,
        middle,
        rhs,
        slack,
        holds: lhs <= rhs + slack,
        grad_norm,
    })
}
