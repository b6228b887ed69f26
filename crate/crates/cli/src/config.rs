use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use quotient_landscape::landscape::{CertifyConfig, RegionParams, Sampler};
use quotient_landscape::objectives::ProblemSpec;
use quotient_landscape::optimizers::GdConfig;

use crate::error::CliError;

/// How `optimize` chooses its starting point.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitRule {
    /// Spectral initialization for trace regression, a Gaussian draw for denoising.
    #[default]
    Auto,
    /// Top-`r` eigenpairs of the adjoint applied to the observations.
    Spectral {
        #[serde(default)]
        eig_floor: Option<f64>,
    },
    /// Start at the target factor.
    Target,
    /// One draw from a scan sampler, seeded by the optimizer seed.
    Sample { sampler: Sampler },
}

/// A complete experiment: problem, region shapes, scan and optimizer settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub region_params: RegionParams,
    /// For trace regression a zero `delta` is replaced by the sampled estimate,
    /// and a missing `delta_gate` defaults to `delta_min`.
    pub scan: CertifyConfig,
    /// Number of sampled pairs behind the isometry estimate.
    pub delta_samples: usize,
    pub init: InitRule,
    pub optimizer: GdConfig,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            problem: ProblemSpec::default(),
            region_params: RegionParams::default(),
            scan: CertifyConfig::default(),
            delta_samples: 200,
            init: InitRule::default(),
            optimizer: GdConfig::default(),
            output_dir: PathBuf::from("out"),
        }
    }
}

/// Top-level scalars that command-line flags may override.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub n_points: Option<usize>,
}

impl ExperimentConfig {
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self, CliError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
                serde_json::from_str(&text)
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => ExperimentConfig::default(),
        };
        cfg.apply(overrides);
        cfg.validate()?;
        Ok(cfg)
    }

    /// `--seed` reseeds the problem, the scan and the optimizer together.
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.problem.seed = seed;
            self.scan.seed = seed;
            self.optimizer.seed = seed;
        }
        if let Some(dir) = &o.output_dir {
            self.output_dir = dir.clone();
        }
        if let Some(n) = o.n_points {
            self.scan.n_points = n;
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let cfg_err = |e: quotient_landscape::Error| CliError::Config(e.to_string());
        self.problem.validate().map_err(cfg_err)?;
        self.region_params.validate().map_err(cfg_err)?;
        if self.scan.n_points == 0 {
            return Err(CliError::Config("scan.n_points must be at least 1".into()));
        }
        if self.scan.samplers.is_empty() {
            return Err(CliError::Config("scan.samplers must not be empty".into()));
        }
        for s in &self.scan.samplers {
            s.validate().map_err(cfg_err)?;
        }
        if !(self.scan.delta.is_finite() && self.scan.delta >= 0.0) {
            return Err(CliError::Config("scan.delta must be finite and nonnegative".into()));
        }
        if self.delta_samples == 0 {
            return Err(CliError::Config("delta_samples must be at least 1".into()));
        }
        if let InitRule::Sample { sampler } = &self.init {
            sampler.validate().map_err(cfg_err)?;
        }
        self.optimizer.validate().map_err(cfg_err)
    }
}
