use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::FactorPoint;
use crate::kernels::{truncated_frob_norm, Matrix, Vector};
use crate::sampling::{random_orthonormal_frame, rng_for, standard_normal};

use super::{DenoisingObjective, Objective, TraceRegressionObjective};

const FACTOR_STREAM: u64 = 0;
const SENSING_STREAM: u64 = 1;
const NOISE_STREAM: u64 = 2;

/// Singular values of `Y*`, decreasing linearly from `kappa * sigma_r` to `sigma_r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSpec {
    pub kappa: f64,
    pub sigma_r: f64,
}

impl Default for SpectrumSpec {
    fn default() -> Self {
        Self {
            kappa: 1.0,
            sigma_r: 1.0,
        }
    }
}

impl SpectrumSpec {
    pub fn new(kappa: f64, sigma_r: f64) -> Self {
        Self { kappa, sigma_r }
    }

    pub fn values(&self, r: usize) -> Result<Vec<f64>> {
        if r == 0 {
            return Err(Error::contract("rank must be at least 1"));
        }
        if !(self.sigma_r.is_finite() && self.sigma_r > 0.0) {
            return Err(Error::contract("sigma_r must be positive and finite"));
        }
        if !(self.kappa.is_finite() && self.kappa >= 1.0) {
            return Err(Error::contract("kappa must be at least 1"));
        }
        if r == 1 {
            if self.kappa != 1.0 {
                return Err(Error::contract("a rank-one target has condition number 1"));
            }
            return Ok(vec![self.sigma_r]);
        }
        let top = self.kappa * self.sigma_r;
        Ok((0..r)
            .map(|i| {
                if i == r - 1 {
                    self.sigma_r
                } else {
                    top + (self.sigma_r - top) * i as f64 / (r - 1) as f64
                }
            })
            .collect())
    }
}

/// `Y* = U* diag(s)` with `U*` a random orthonormal frame drawn from `seed`.
pub fn ground_truth_factor(
    p: usize,
    r: usize,
    spectrum: SpectrumSpec,
    seed: u64,
) -> Result<FactorPoint> {
    if r > p {
        return Err(Error::contract(format!("rank {r} exceeds dimension {p}")));
    }
    let s = spectrum.values(r)?;
    let mut u = random_orthonormal_frame(p, r, &mut rng_for(seed, FACTOR_STREAM));
    for (j, sj) in s.iter().enumerate() {
        u.column_mut(j).scale_mut(*sj);
    }
    FactorPoint::new(u)
}

/// The target `X* = Y* Y*^T` and the quantities every bound is expressed in.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub y_star: FactorPoint,
    pub x_star: Matrix,
    /// `sigma_1(Y*)`.
    pub sigma1: f64,
    /// `sigma_r(Y*)`.
    pub sigmar: f64,
    /// `sigma_1(Y*) / sigma_r(Y*)`.
    pub kappa: f64,
    /// `||X*||_F`.
    pub x_star_frob: f64,
    /// `||(nabla f(X*))_max(r)||_F`.
    pub grad_at_star_trunc: f64,
    /// `||nabla f(X*) Y*||_F`.
    pub grad_at_star_factor: f64,
}

impl GroundTruth {
    pub fn new<O: Objective + ?Sized>(obj: &O, y_star: FactorPoint) -> Result<Self> {
        if y_star.p() != obj.dim() {
            return Err(Error::contract("ground truth dimension does not match objective"));
        }
        let x_star = y_star.outer();
        let grad = obj.euclid_grad(&x_star);
        let grad_at_star_trunc = truncated_frob_norm(&grad, y_star.r())?;
        let grad_at_star_factor = (&grad * y_star.matrix()).norm();
        Ok(Self {
            sigma1: y_star.sigma_max(),
            sigmar: y_star.sigma_min(),
            kappa: y_star.sigma_max() / y_star.sigma_min(),
            x_star_frob: x_star.norm(),
            x_star,
            grad_at_star_trunc,
            grad_at_star_factor,
            y_star,
        })
    }

    pub fn p(&self) -> usize {
        self.y_star.p()
    }

    pub fn r(&self) -> usize {
        self.y_star.r()
    }

    /// `||Y*|| = sigma_1(Y*)`.
    pub fn factor_norm(&self) -> f64 {
        self.sigma1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Denoising,
    TraceRegression,
}

/// Everything needed to regenerate a problem instance bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub p: usize,
    pub r: usize,
    /// Number of measurements; ignored for denoising.
    pub n: usize,
    pub kappa_star: f64,
    pub sigma_r_star: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for ProblemSpec {
    fn default() -> Self {
        Self {
            kind: ProblemKind::Denoising,
            p: 20,
            r: 3,
            n: 0,
            kappa_star: 2.0,
            sigma_r_star: 1.0,
            noise_sigma: 0.0,
            seed: 0,
        }
    }
}

impl ProblemSpec {
    pub fn spectrum(&self) -> SpectrumSpec {
        SpectrumSpec::new(self.kappa_star, self.sigma_r_star)
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 || self.r == 0 {
            return Err(Error::contract("p and r must be at least 1"));
        }
        if self.r > self.p {
            return Err(Error::contract(format!(
                "rank {} exceeds dimension {}",
                self.r, self.p
            )));
        }
        if self.kind == ProblemKind::TraceRegression && self.n == 0 {
            return Err(Error::contract("trace regression needs n >= 1 measurements"));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::contract("noise_sigma must be finite and nonnegative"));
        }
        self.spectrum().values(self.r).map(|_| ())
    }

    pub fn build(&self) -> Result<GeneratedProblem> {
        self.validate()?;
        let problem = match self.kind {
            ProblemKind::Denoising => {
                let (obj, truth) = make_denoising(self.p, self.r, self.spectrum(), self.seed)?;
                (Problem::Denoising(obj), truth)
            }
            ProblemKind::TraceRegression => {
                let (obj, truth) = make_trace_regression_with(
                    self.p,
                    self.r,
                    self.n,
                    self.noise_sigma,
                    self.spectrum(),
                    self.seed,
                )?;
                (Problem::TraceRegression(obj), truth)
            }
        };
        Ok(GeneratedProblem {
            spec: self.clone(),
            objective: problem.0,
            truth: problem.1,
        })
    }
}

/// Either concrete objective behind one type.
#[derive(Debug, Clone)]
pub enum Problem {
    Denoising(DenoisingObjective),
    TraceRegression(TraceRegressionObjective),
}

impl Problem {
    pub fn as_objective(&self) -> &dyn Objective {
        match self {
            Problem::Denoising(o) => o,
            Problem::TraceRegression(o) => o,
        }
    }
}

impl Objective for Problem {
    fn dim(&self) -> usize {
        self.as_objective().dim()
    }
    fn target_rank(&self) -> usize {
        self.as_objective().target_rank()
    }
    fn value(&self, x: &Matrix) -> f64 {
        self.as_objective().value(x)
    }
    fn euclid_grad(&self, x: &Matrix) -> Matrix {
        self.as_objective().euclid_grad(x)
    }
    fn euclid_hess_form(&self, x: &Matrix, g1: &Matrix, g2: &Matrix) -> f64 {
        self.as_objective().euclid_hess_form(x, g1, g2)
    }
    fn euclid_hess_apply(&self, x: &Matrix, g: &Matrix) -> Matrix {
        self.as_objective().euclid_hess_apply(x, g)
    }
    fn euclid_hess_gram(&self, x: &Matrix, dirs: &[Matrix]) -> Matrix {
        self.as_objective().euclid_hess_gram(x, dirs)
    }
}

#[derive(Debug, Clone)]
pub struct GeneratedProblem {
    pub spec: ProblemSpec,
    pub objective: Problem,
    pub truth: GroundTruth,
}

pub fn make_denoising(
    p: usize,
    r: usize,
    spectrum: SpectrumSpec,
    seed: u64,
) -> Result<(DenoisingObjective, GroundTruth)> {
    let y_star = ground_truth_factor(p, r, spectrum, seed)?;
    let obj = DenoisingObjective::from_factor(&y_star);
    let truth = GroundTruth::new(&obj, y_star)?;
    Ok((obj, truth))
}

/// Gaussian trace regression with a unit spectrum (`kappa = sigma_r = 1`).
pub fn make_trace_regression(
    p: usize,
    r: usize,
    n: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<(TraceRegressionObjective, GroundTruth)> {
    make_trace_regression_with(p, r, n, noise_sigma, SpectrumSpec::default(), seed)
}

/// Gaussian trace regression: `y = A(X*) + eps`, `eps ~ N(0, noise_sigma^2 I_n)`.
pub fn make_trace_regression_with(
    p: usize,
    r: usize,
    n: usize,
    noise_sigma: f64,
    spectrum: SpectrumSpec,
    seed: u64,
) -> Result<(TraceRegressionObjective, GroundTruth)> {
    if n == 0 {
        return Err(Error::contract("trace regression needs n >= 1 measurements"));
    }
    if !(noise_sigma.is_finite() && noise_sigma >= 0.0) {
        return Err(Error::contract("noise_sigma must be finite and nonnegative"));
    }
    let y_star = ground_truth_factor(p, r, spectrum, seed)?;
    let sensing =
        TraceRegressionObjective::gaussian_sensing(p, n, &mut rng_for(seed, SENSING_STREAM));
    let clean = TraceRegressionObjective::from_parts(p, r, sensing, Vector::zeros(n), 0.0);
    let mut y = clean.measure(&y_star.outer());
    if noise_sigma > 0.0 {
        let mut rng = rng_for(seed, NOISE_STREAM);
        for v in y.iter_mut() {
            *v += noise_sigma * standard_normal(&mut rng);
        }
    }
    let obj = TraceRegressionObjective::from_parts(p, r, clean.into_sensing(), y, noise_sigma);
    let truth = GroundTruth::new(&obj, y_star)?;
    Ok((obj, truth))
}

/// Serialized problem instance; sensing matrices are regenerated from the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub kind: ProblemKind,
    pub p: usize,
    pub r: usize,
    pub n: usize,
    pub seed: u64,
    pub noise_sigma: f64,
    pub kappa_star: f64,
    pub sigma_r_star: f64,
    /// Singular values of `Y*`.
    pub spectrum: Vec<f64>,
    /// Observations; empty for denoising.
    pub y: Vec<f64>,
}

impl Instance {
    pub fn from_problem(problem: &GeneratedProblem) -> Self {
        let spec = &problem.spec;
        let y = match &problem.objective {
            Problem::Denoising(_) => Vec::new(),
            Problem::TraceRegression(o) => o.observations().iter().copied().collect(),
        };
        Self {
            kind: spec.kind,
            p: spec.p,
            r: spec.r,
            n: if spec.kind == ProblemKind::Denoising { 0 } else { spec.n },
            seed: spec.seed,
            noise_sigma: spec.noise_sigma,
            kappa_star: spec.kappa_star,
            sigma_r_star: spec.sigma_r_star,
            spectrum: problem.truth.y_star.svd().sigma.iter().copied().collect(),
            y,
        }
    }

    pub fn spec(&self) -> ProblemSpec {
        ProblemSpec {
            kind: self.kind,
            p: self.p,
            r: self.r,
            n: self.n,
            kappa_star: self.kappa_star,
            sigma_r_star: self.sigma_r_star,
            noise_sigma: self.noise_sigma,
            seed: self.seed,
        }
    }

    /// Regenerate the problem and confirm the stored observations match exactly.
    pub fn rebuild(&self) -> Result<GeneratedProblem> {
        let problem = self.spec().build()?;
        let fresh = Instance::from_problem(&problem);
        if fresh.y != self.y {
            return Err(Error::contract(
                "stored observations do not match the regenerated instance",
            ));
        }
        Ok(problem)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::lifted_value;

    #[test]
    fn spectrum_shapes() {
        assert_eq!(SpectrumSpec::new(2.0, 1.0).values(3).unwrap(), vec![2.0, 1.5, 1.0]);
        assert_eq!(SpectrumSpec::new(1.0, 3.0).values(1).unwrap(), vec![3.0]);
        assert!(SpectrumSpec::new(2.0, 1.0).values(1).is_err());
        assert!(SpectrumSpec::new(0.5, 1.0).values(2).is_err());
    }

    #[test]
    fn ground_truth_quantities() {
        let (obj, gt) = make_denoising(8, 3, SpectrumSpec::new(5.0, 0.5), 4).unwrap();
        assert!((gt.sigma1 - 2.5).abs() < 1e-12);
        assert!((gt.sigmar - 0.5).abs() < 1e-12);
        assert!((gt.kappa - 5.0).abs() < 1e-10);
        assert!(gt.grad_at_star_trunc < 1e-10);
        assert!(lifted_value(&obj, &gt.y_star).unwrap() < 1e-20);
    }

    #[test]
    fn noiseless_trace_regression_is_exact_at_target() {
        let (obj, gt) = make_trace_regression(6, 2, 50, 0.0, 3).unwrap();
        assert_eq!(gt.grad_at_star_trunc, 0.0);
        assert_eq!(lifted_value(&obj, &gt.y_star).unwrap(), 0.0);
        assert_eq!(obj.euclid_grad(&gt.x_star).amax(), 0.0);
    }

    #[test]
    fn generation_is_deterministic() {
        let (a, _) = make_trace_regression(5, 2, 40, 0.1, 9).unwrap();
        let (b, _) = make_trace_regression(5, 2, 40, 0.1, 9).unwrap();
        let (c, _) = make_trace_regression(5, 2, 40, 0.1, 10).unwrap();
        assert_eq!(a.observations(), b.observations());
        assert_ne!(a.observations(), c.observations());
    }

    #[test]
    fn hessian_form_is_constant_in_x() {
        let (obj, gt) = make_trace_regression(5, 1, 30, 0.0, 2).unwrap();
        let d = Matrix::from_fn(5, 5, |i, j| (i + j) as f64);
        let a = obj.euclid_hess_form(&gt.x_star, &d, &d);
        let b = obj.euclid_hess_form(&Matrix::identity(5, 5), &d, &d);
        assert_eq!(a, b);
    }

    #[test]
    fn instance_round_trip() {
        let spec = ProblemSpec {
            kind: ProblemKind::TraceRegression,
            p: 6,
            r: 2,
            n: 25,
            noise_sigma: 0.01,
            seed: 5,
            ..ProblemSpec::default()
        };
        let problem = spec.build().unwrap();
        let inst = Instance::from_problem(&problem);
        let json = inst.to_json().unwrap();
        let back = Instance::from_json(&json).unwrap();
        assert_eq!(back, inst);
        back.rebuild().unwrap();
        let mut tampered = back.clone();
        tampered.y[0] += 1.0;
        assert!(tampered.rebuild().is_err());
    }

    #[test]
    fn spec_validation() {
        let mut s = ProblemSpec {
            kind: ProblemKind::TraceRegression,
            ..ProblemSpec::default()
        };
        assert!(s.validate().is_err());
        s.n = 10;
        assert!(s.validate().is_ok());
        s.r = 30;
        assert!(s.validate().is_err());
    }
}
