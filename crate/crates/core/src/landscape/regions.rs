use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{quotient_distance, FactorPoint};
use crate::objectives::GroundTruth;

/// `2(sqrt 2 - 1)`, the curvature gap at strict saddles of the denoising objective.
pub const SADDLE_GAP: f64 = 2.0 * (std::f64::consts::SQRT_2 - 1.0);

/// Shape parameters of the five regions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionParams {
    /// Radius of the local region in units of `sigma_r(Y*) / kappa*`; in `[0, 1/3]`.
    pub mu: f64,
    /// Gradient budget of the saddle region; in `[0, 2(sqrt 2 - 1))`.
    pub alpha: f64,
    /// Spectral-norm cap `||Y|| <= beta ||Y*||`; `> 1`.
    pub beta: f64,
    /// Frobenius cap `||Y Y^T||_F <= gamma ||X*||_F`; `> 1`.
    pub gamma: f64,
}

impl Default for RegionParams {
    fn default() -> Self {
        Self {
            mu: 0.2,
            alpha: 0.5,
            beta: 1.5,
            gamma: 1.5,
        }
    }
}

impl RegionParams {
    pub fn new(mu: f64, alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        let p = Self {
            mu,
            alpha,
            beta,
            gamma,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.mu, self.alpha, self.beta, self.gamma]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::HypothesisViolation("region parameters must be finite".into()));
        }
        if !(0.0..=1.0 / 3.0).contains(&self.mu) {
            return Err(Error::HypothesisViolation(format!(
                "mu = {} must lie in [0, 1/3]",
                self.mu
            )));
        }
        if !(self.alpha >= 0.0 && self.alpha < SADDLE_GAP) {
            return Err(Error::HypothesisViolation(format!(
                "alpha = {} must lie in [0, 2(sqrt 2 - 1)) = [0, {SADDLE_GAP:.6}) for saddle points to carry negative curvature",
                self.alpha
            )));
        }
        if self.beta <= 1.0 {
            return Err(Error::HypothesisViolation(format!(
                "beta = {} must exceed 1",
                self.beta
            )));
        }
        if self.gamma <= 1.0 {
            return Err(Error::HypothesisViolation(format!(
                "gamma = {} must exceed 1",
                self.gamma
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RegionLabel {
    /// Local region around the target: geodesically strongly convex.
    #[serde(rename = "R1")]
    R1,
    /// Small gradient away from the target: strict saddles.
    #[serde(rename = "R2")]
    R2,
    /// Large gradient with bounded norms.
    #[serde(rename = "R3'")]
    R3Prime,
    /// Spectral norm too large.
    #[serde(rename = "R3''")]
    R3DoublePrime,
    /// Frobenius norm of `Y Y^T` too large.
    #[serde(rename = "R3'''")]
    R3TriplePrime,
}

impl RegionLabel {
    pub const ALL: [RegionLabel; 5] = [
        RegionLabel::R1,
        RegionLabel::R2,
        RegionLabel::R3Prime,
        RegionLabel::R3DoublePrime,
        RegionLabel::R3TriplePrime,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            RegionLabel::R1 => "R1",
            RegionLabel::R2 => "R2",
            RegionLabel::R3Prime => "R3'",
            RegionLabel::R3DoublePrime => "R3''",
            RegionLabel::R3TriplePrime => "R3'''",
        }
    }
}

impl fmt::Display for RegionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The (possibly several) regions containing a point, in label order.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RegionSet(Vec<RegionLabel>);

impl RegionSet {
    pub fn contains(&self, label: RegionLabel) -> bool {
        self.0.contains(&label)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = RegionLabel> + '_ {
        self.0.iter().copied()
    }
}

impl fmt::Display for RegionSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<&str> = self.0.iter().map(|l| l.as_str()).collect();
        f.write_str(&parts.join(";"))
    }
}

/// The four fiber-invariant quantities the region predicates depend on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointMetrics {
    /// `d([Y], [Y*])`.
    pub dist_to_star: f64,
    /// `||2 (Y Y^T - X*) Y||_F`, the denoising gradient.
    pub grad_denoising_norm: f64,
    /// `||Y||`.
    pub factor_norm: f64,
    /// `||Y Y^T||_F`.
    pub outer_frob: f64,
}

impl PointMetrics {
    pub fn at(y: &FactorPoint, gt: &GroundTruth) -> Result<Self> {
        if y.matrix().shape() != gt.y_star.matrix().shape() {
            return Err(Error::contract(format!(
                "point shape {:?} does not match target {:?}",
                y.matrix().shape(),
                gt.y_star.matrix().shape()
            )));
        }
        let outer = y.outer();
        let grad = (&outer - &gt.x_star) * y.matrix() * 2.0;
        Ok(Self {
            dist_to_star: quotient_distance(y, &gt.y_star)?,
            grad_denoising_norm: grad.norm(),
            factor_norm: y.sigma_max(),
            outer_frob: outer.norm(),
        })
    }
}

/// `mu sigma_r(Y*) / kappa*`.
pub fn local_radius(gt: &GroundTruth, params: &RegionParams) -> f64 {
    params.mu * gt.sigmar / gt.kappa
}

/// `alpha mu sigma_r(Y*)^3 / (4 kappa*)`.
pub fn saddle_grad_threshold(gt: &GroundTruth, params: &RegionParams) -> f64 {
    params.alpha * params.mu * gt.sigmar.powi(3) / (4.0 * gt.kappa)
}

/// Evaluate the five region predicates on precomputed metrics.
pub fn classify_metrics(m: &PointMetrics, gt: &GroundTruth, params: &RegionParams) -> RegionSet {
    let radius = local_radius(gt, params);
    let grad_cap = saddle_grad_threshold(gt, params);
    let norm_ok = m.factor_norm <= params.beta * gt.sigma1;
    let frob_ok = m.outer_frob <= params.gamma * gt.x_star_frob;
    let mut labels = Vec::with_capacity(2);
    if m.dist_to_star <= radius {
        labels.push(RegionLabel::R1);
    }
    if m.dist_to_star > radius && m.grad_denoising_norm <= grad_cap && norm_ok && frob_ok {
        labels.push(RegionLabel::R2);
    }
    if m.grad_denoising_norm > grad_cap && norm_ok && frob_ok {
        labels.push(RegionLabel::R3Prime);
    }
    if !norm_ok && frob_ok {
        labels.push(RegionLabel::R3DoublePrime);
    }
    if !frob_ok {
        labels.push(RegionLabel::R3TriplePrime);
    }
    RegionSet(labels)
}

/// Every region containing `Y`.
pub fn classify_region(y: &FactorPoint, gt: &GroundTruth, params: &RegionParams) -> Result<RegionSet> {
    Ok(classify_metrics(&PointMetrics::at(y, gt)?, gt, params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{make_denoising, SpectrumSpec};
    use crate::sampling::{gaussian_matrix, random_orthogonal, rng_for};

    fn truth() -> GroundTruth {
        make_denoising(20, 3, SpectrumSpec::new(2.0, 1.0), 1).unwrap().1
    }

    #[test]
    fn params_validation() {
        assert!(RegionParams::new(0.2, 0.5, 1.5, 1.5).is_ok());
        assert!(RegionParams::new(0.4, 0.5, 1.5, 1.5).is_err());
        assert!(RegionParams::new(0.2, 1.0, 1.5, 1.5).is_err());
        assert!(RegionParams::new(0.2, 0.5, 1.0, 1.5).is_err());
        assert!(RegionParams::new(0.2, 0.5, 1.5, 1.0).is_err());
        assert!(RegionParams::new(f64::NAN, 0.5, 1.5, 1.5).is_err());
    }

    #[test]
    fn target_is_local_and_large_multiples_are_not() {
        let gt = truth();
        let params = RegionParams::default();
        assert!(classify_region(&gt.y_star, &gt, &params).unwrap().contains(RegionLabel::R1));
        let big = FactorPoint::new(gt.y_star.matrix() * 2.0).unwrap();
        let set = classify_region(&big, &gt, &params).unwrap();
        assert!(set.contains(RegionLabel::R3TriplePrime));
        assert_eq!(set.to_string(), "R3'''");
    }

    #[test]
    fn random_points_are_always_covered() {
        let gt = truth();
        let params = RegionParams::new(0.3, 0.5, 1.5, 1.5).unwrap();
        let mut rng = rng_for(2, 0);
        for _ in 0..1000 {
            let y = FactorPoint::new(gaussian_matrix(20, 3, &mut rng) * 0.3).unwrap();
            assert!(!classify_region(&y, &gt, &params).unwrap().is_empty());
        }
    }

    #[test]
    fn classification_is_fiber_invariant() {
        let gt = truth();
        let params = RegionParams::default();
        let mut rng = rng_for(3, 0);
        for _ in 0..50 {
            let y = FactorPoint::new(gt.y_star.matrix() + gaussian_matrix(20, 3, &mut rng) * 0.1)
                .unwrap();
            let o = random_orthogonal(3, &mut rng);
            let a = classify_region(&y, &gt, &params).unwrap();
            let b = classify_region(&y.rotate(&o).unwrap(), &gt, &params).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn label_serialization() {
        let s = serde_json::to_string(&RegionLabel::R3DoublePrime).unwrap();
        assert_eq!(s, "\"R3''\"");
        let back: RegionLabel = serde_json::from_str(&s).unwrap();
        assert_eq!(back, RegionLabel::R3DoublePrime);
    }
}
