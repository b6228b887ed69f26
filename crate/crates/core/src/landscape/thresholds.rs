//! Closed-form landscape bounds as functions of the target, the region
//! parameters, the restricted isometry constant `delta` and the size of
//! `(nabla f(X*))_max(r)`.
//!
//! With `delta = 0` and a vanishing gradient at the target every bound
//! reduces to its denoising counterpart.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objectives::GroundTruth;

use super::regions::{local_radius, saddle_grad_threshold, RegionParams, SADDLE_GAP};

/// Perturbation of a general objective away from the denoising objective.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BoundContext {
    /// Restricted isometry constant (or an estimate of it).
    pub delta: f64,
    /// `||(nabla f(X*))_max(r)||_F`.
    pub grad_trunc: f64,
}

impl BoundContext {
    /// The denoising objective: exact isometry and a stationary target.
    pub fn denoising() -> Self {
        Self::default()
    }

    pub fn new(delta: f64, grad_trunc: f64) -> Self {
        Self { delta, grad_trunc }
    }

    pub fn for_truth(gt: &GroundTruth, delta: f64) -> Self {
        Self::new(delta, gt.grad_at_star_trunc)
    }
}

/// `(1 - mu/kappa)^2 - 7 mu / 3`; positive iff the local region is strongly convex.
pub fn strong_convexity_margin(kappa: f64, mu: f64) -> f64 {
    (1.0 - mu / kappa).powi(2) - 7.0 * mu / 3.0
}

fn margin_checked(gt: &GroundTruth, params: &RegionParams) -> Result<f64> {
    let m = strong_convexity_margin(gt.kappa, params.mu);
    if m <= 0.0 {
        return Err(Error::HypothesisViolation(format!(
            "(1 - mu/kappa)^2 - 7 mu/3 = {m:e} must be positive (mu = {}, kappa = {})",
            params.mu, gt.kappa
        )));
    }
    Ok(m)
}

fn r1_perturbation(gt: &GroundTruth, params: &RegionParams, ctx: &BoundContext) -> f64 {
    let reach = gt.sigma1 + params.mu * gt.sigmar / gt.kappa;
    4.0 * ctx.delta * reach * reach
        + 14.0 * ctx.delta * params.mu * gt.sigmar.powi(2) / 3.0
        + 2.0 * ctx.grad_trunc
}

/// Bracket `[lower, upper]` on the Riemannian Hessian spectrum over the local region.
pub fn local_hessian_bracket(
    gt: &GroundTruth,
    params: &RegionParams,
    ctx: &BoundContext,
) -> (f64, f64) {
    let mu = params.mu;
    let s2 = gt.sigmar.powi(2);
    let reach = gt.sigma1 + mu * gt.sigmar / gt.kappa;
    let pert = r1_perturbation(gt, params, ctx);
    let lower = (2.0 * (1.0 - mu / gt.kappa).powi(2) - 14.0 * mu / 3.0) * s2 - pert;
    let upper = 4.0 * reach * reach + 14.0 * mu * s2 / 3.0 + pert;
    (lower, upper)
}

/// Coefficient `c` with `Hess h[theta, theta] <= c ||theta||_F^2` along the escape direction.
pub fn escape_curvature_coefficient(
    gt: &GroundTruth,
    params: &RegionParams,
    ctx: &BoundContext,
) -> f64 {
    (params.alpha - SADDLE_GAP) * gt.sigmar.powi(2)
        + 2.0
            * ctx.delta
            * (2.0 * params.beta.powi(2) * gt.sigma1.powi(2) + (1.0 + params.gamma) * gt.x_star_frob)
        + 2.0 * ctx.grad_trunc
}

/// Gradient floor on the large-gradient region with bounded norms.
pub fn grad_floor_bounded(gt: &GroundTruth, params: &RegionParams, ctx: &BoundContext) -> f64 {
    let (beta, gamma) = (params.beta, params.gamma);
    saddle_grad_threshold(gt, params)
        - (2.0 * ctx.delta * beta * (1.0 + gamma) * gt.sigma1 * gt.x_star_frob
            + 2.0 * beta * gt.sigma1 * ctx.grad_trunc)
}

/// Gradient floor when `||Y|| > beta ||Y*||`; depends on `||Y||`.
pub fn grad_floor_spectral(
    gt: &GroundTruth,
    params: &RegionParams,
    ctx: &BoundContext,
    factor_norm: f64,
) -> f64 {
    let (beta, gamma) = (params.beta, params.gamma);
    2.0 * (beta.powi(3) - beta) * gt.sigma1.powi(3)
        - (2.0 * ctx.delta * (1.0 + gamma) * factor_norm * gt.x_star_frob
            + 2.0 * factor_norm * ctx.grad_trunc)
}

/// Gradient floor when `||Y Y^T||_F > gamma ||X*||_F`.
pub fn grad_floor_frobenius(gt: &GroundTruth, params: &RegionParams, ctx: &BoundContext) -> f64 {
    let gamma = params.gamma;
    let rt = (gt.r() as f64).sqrt();
    (2.0 * (gamma - 1.0) - 2.0 * ctx.delta * (gamma + 1.0)) * gamma.sqrt() * gt.x_star_frob.powf(1.5)
        / rt
        - 2.0 * gamma.sqrt() * gt.x_star_frob.sqrt() * ctx.grad_trunc / rt
}

/// Largest `delta` for which the three gradient floors stay positive.
pub fn delta_min(gt: &GroundTruth, params: &RegionParams) -> f64 {
    let (a, m, b, g) = (params.alpha, params.mu, params.beta, params.gamma);
    let k2 = gt.kappa * gt.kappa;
    let t1 = a * m / (32.0 * k2 * b * (1.0 + g)) * gt.sigmar.powi(2) / gt.x_star_frob;
    let t2 = (b * b - 1.0) / (4.0 * (1.0 + g)) * gt.sigma1.powi(2) / gt.x_star_frob;
    let t3 = (g - 1.0) / (4.0 * (g + 1.0));
    t1.min(t2).min(t3)
}

/// Largest `||(nabla f(X*))_max(r)||_F` for which the three gradient floors stay positive.
pub fn psi(gt: &GroundTruth, params: &RegionParams) -> f64 {
    let (a, m, b, g) = (params.alpha, params.mu, params.beta, params.gamma);
    let k2 = gt.kappa * gt.kappa;
    let t1 = a * m / (32.0 * k2 * b) * gt.sigmar.powi(2);
    let t2 = (b * b - 1.0) / 4.0 * gt.sigma1.powi(2);
    let t3 = (g - 1.0) / 4.0 * gt.x_star_frob;
    t1.min(t2).min(t3)
}

/// Every threshold for one target and parameter set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub delta_min: f64,
    pub psi: f64,
    /// Lower end of the local Hessian bracket for the denoising objective.
    pub r1_hess_lower: f64,
    /// Upper end of the local Hessian bracket for the denoising objective.
    pub r1_hess_upper: f64,
    /// Escape-direction curvature coefficient for the denoising objective.
    pub r2_curvature_upper: f64,
    /// Gradient floors on the three large-gradient regions when `delta <= delta_min`
    /// and the target gradient is at most `psi`.
    pub r3_grad_lowers: [f64; 3],
    /// `(1 - mu/kappa)^2 - 7 mu / 3`.
    pub strong_convexity_margin: f64,
    /// Largest `delta` covered by every landscape guarantee at once.
    pub delta_condition: f64,
    /// Largest target gradient covered by every landscape guarantee at once.
    pub noise_condition: f64,
    /// `mu sigma_r(Y*) / kappa*`.
    pub r1_radius: f64,
    /// `alpha mu sigma_r(Y*)^3 / (4 kappa*)`.
    pub r2_grad_threshold: f64,
}

pub fn compute_thresholds(gt: &GroundTruth, params: &RegionParams) -> Result<ThresholdReport> {
    params.validate()?;
    let margin = margin_checked(gt, params)?;
    let (a, m, b, g) = (params.alpha, params.mu, params.beta, params.gamma);
    let k = gt.kappa;
    let s2 = gt.sigmar.powi(2);
    let (lower, upper) = local_hessian_bracket(gt, params, &BoundContext::denoising());
    let dmin = delta_min(gt, params);
    let psi = psi(gt, params);
    let delta_local = margin / (4.0 * (2.0 * (k + m / k).powi(2) + 7.0 * m / 3.0));
    let delta_saddle =
        (SADDLE_GAP - a) * s2 / (8.0 * (2.0 * b * b * gt.sigma1.powi(2) + (1.0 + g) * gt.x_star_frob));
    let noise_local = margin * s2 / 4.0;
    let noise_saddle = (SADDLE_GAP - a) / 8.0 * s2;
    let rt = (gt.r() as f64).sqrt();
    Ok(ThresholdReport {
        delta_min: dmin,
        psi,
        r1_hess_lower: lower,
        r1_hess_upper: upper,
        r2_curvature_upper: escape_curvature_coefficient(gt, params, &BoundContext::denoising()),
        r3_grad_lowers: [
            a * m * gt.sigmar.powi(3) / (8.0 * k),
            (b.powi(3) - b) * gt.sigma1.powi(3),
            (g - 1.0) * g.sqrt() * gt.x_star_frob.powf(1.5) / rt,
        ],
        strong_convexity_margin: margin,
        delta_condition: delta_local.min(delta_saddle).min(dmin),
        noise_condition: noise_local.min(noise_saddle).min(psi),
        r1_radius: local_radius(gt, params),
        r2_grad_threshold: saddle_grad_threshold(gt, params),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{make_denoising, SpectrumSpec};

    fn unit_truth(r: usize) -> GroundTruth {
        make_denoising(8, r, SpectrumSpec::new(1.0, 1.0), 3).unwrap().1
    }

    #[test]
    fn psi_matches_direct_evaluation() {
        let gt = unit_truth(2);
        let params = RegionParams::new(0.1, 0.5, 1.5, 1.5).unwrap();
        let rep = compute_thresholds(&gt, &params).unwrap();
        let xf = gt.x_star_frob;
        let terms = [0.05 / 48.0, 1.25 / 4.0, 0.125 * xf];
        let expect = terms.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!((rep.psi - expect).abs() < 1e-14);
        assert!((xf - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn spectral_floor_value() {
        let gt = unit_truth(2);
        let rep = compute_thresholds(&gt, &RegionParams::new(0.1, 0.5, 1.5, 1.5).unwrap()).unwrap();
        assert!((rep.r3_grad_lowers[1] - 1.875 * gt.sigma1.powi(3)).abs() < 1e-12);
    }

    #[test]
    fn zero_radius_gives_the_pure_lower_bound() {
        let gt = make_denoising(8, 2, SpectrumSpec::new(3.0, 0.7), 1).unwrap().1;
        let rep = compute_thresholds(&gt, &RegionParams::new(0.0, 0.5, 1.5, 1.5).unwrap()).unwrap();
        assert!((rep.r1_hess_lower - 2.0 * gt.sigmar.powi(2)).abs() < 1e-12);
        assert!((rep.r1_hess_upper - 4.0 * gt.sigma1.powi(2)).abs() < 1e-12);
    }

    #[test]
    fn delta_zero_context_reproduces_denoising_bounds() {
        let gt = unit_truth(3);
        let params = RegionParams::new(0.2, 0.5, 1.5, 1.5).unwrap();
        let ctx = BoundContext::denoising();
        let (lo, hi) = local_hessian_bracket(&gt, &params, &ctx);
        let mu = 0.2;
        assert!((lo - (2.0 * 0.8f64.powi(2) - 14.0 * mu / 3.0)).abs() < 1e-12);
        assert!((hi - (4.0 * 1.2f64.powi(2) + 14.0 * mu / 3.0)).abs() < 1e-12);
        assert!((escape_curvature_coefficient(&gt, &params, &ctx) - (0.5 - SADDLE_GAP)).abs() < 1e-15);
        let worse = BoundContext::new(0.01, 0.001);
        assert!(local_hessian_bracket(&gt, &params, &worse).0 < lo);
        assert!(grad_floor_bounded(&gt, &params, &worse) < grad_floor_bounded(&gt, &params, &ctx));
    }

    #[test]
    fn floors_at_thresholds_dominate_reported_values() {
        // At delta = delta_min and trunc = psi the general floors still exceed the
        // reported simplified floors.
        let gt = make_denoising(10, 3, SpectrumSpec::new(2.0, 1.0), 2).unwrap().1;
        let params = RegionParams::new(0.2, 0.5, 1.5, 1.5).unwrap();
        let rep = compute_thresholds(&gt, &params).unwrap();
        let ctx = BoundContext::new(rep.delta_min, rep.psi);
        assert!(grad_floor_bounded(&gt, &params, &ctx) >= rep.r3_grad_lowers[0] - 1e-15);
        let y_norm = params.beta * gt.sigma1;
        assert!(grad_floor_spectral(&gt, &params, &ctx, y_norm) >= rep.r3_grad_lowers[1] - 1e-12);
        assert!(grad_floor_frobenius(&gt, &params, &ctx) >= rep.r3_grad_lowers[2] - 1e-12);
    }

    #[test]
    fn nonpositive_margin_is_rejected() {
        let gt = unit_truth(2);
        let params = RegionParams::new(1.0 / 3.0, 0.5, 1.5, 1.5).unwrap();
        assert!(strong_convexity_margin(1.0, 1.0 / 3.0) < 0.0);
        assert!(matches!(
            compute_thresholds(&gt, &params),
            Err(Error::HypothesisViolation(_))
        ));
    }
}
