use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use quotient_landscape::landscape::{
    certify_landscape, classify_region, delta_min, RegionLabel, ThresholdReport, BoundContext,
    write_region_csv,
};
use quotient_landscape::objectives::{
    rsc_rsm_estimate, GeneratedProblem, Instance, Problem, ProblemKind,
};
use quotient_landscape::optimizers::{error_bound_check, riemannian_gd, spectral_init, ErrorBoundReport};
use quotient_landscape::sampling::rng_for;
use quotient_landscape::verify::{run_suite, SuiteSummary, SUITE_NAMES};
use quotient_landscape::landscape::Sampler;

use crate::config::{ExperimentConfig, InitRule};
use crate::error::CliError;

/// Stream of the optimizer seed used for sampled starting points.
const INIT_STREAM: u64 = 0x1f;

/// Where a result came from. Only `timestamp` varies between identical runs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub timestamp: String,
    pub command: String,
    pub config: ExperimentConfig,
}

impl Provenance {
    fn new(command: &str, config: &ExperimentConfig) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            timestamp: chrono::Utc::now().to_rfc3339(),
            command: command.into(),
            config: config.clone(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct InstanceDocument {
    pub provenance: Provenance,
    pub instance: Instance,
}

#[derive(Debug, Serialize)]
struct ScanDocument<'a> {
    provenance: Provenance,
    thresholds: &'a ThresholdReport,
    context: BoundContext,
    /// `sampled` when the isometry constant was estimated, `config` otherwise.
    delta_source: &'static str,
    gated: bool,
    n_points: usize,
    n_pass: usize,
    n_fail: usize,
    n_skipped: usize,
}

#[derive(Debug, Serialize)]
struct OptimizeDocument {
    provenance: Provenance,
    init: String,
    converged: bool,
    iterations: usize,
    final_objective: f64,
    final_grad_norm: f64,
    final_dist_to_star: Option<f64>,
    final_regions: Option<String>,
    error_bound: Option<ErrorBoundReport>,
    /// Why the error bound was not evaluated, if it was not.
    error_bound_skipped: Option<String>,
}

#[derive(Debug, Serialize)]
struct VerifyDocument {
    provenance: Provenance,
    summary: SuiteSummary,
    pass: bool,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::core(format!("serializing {}", path.display()))(e.into()))?;
    text.push('\n');
    fs::write(path, text)
        .map_err(|e| CliError::core(format!("writing {}", path.display()))(e.into()))
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::core(format!("creating {}", dir.display()))(e.into()))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::core(format!("creating {}", path.display()))(e.into()))
}

/// Build the problem from a stored instance when given, else from the config.
fn load_problem(cfg: &mut ExperimentConfig, instance: Option<&Path>) -> Result<GeneratedProblem, CliError> {
    if let Some(path) = instance {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let doc: InstanceDocument = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        cfg.problem = doc.instance.spec();
        return doc.instance.rebuild().map_err(CliError::core("rebuilding instance"));
    }
    cfg.problem.build().map_err(CliError::core("building problem"))
}

pub fn generate(cfg: &ExperimentConfig) -> Result<PathBuf, CliError> {
    let problem = cfg.problem.build().map_err(CliError::core("generate"))?;
    ensure_dir(&cfg.output_dir)?;
    let path = cfg.output_dir.join("instance.json");
    let doc = InstanceDocument {
        provenance: Provenance::new("generate", cfg),
        instance: Instance::from_problem(&problem),
    };
    write_json(&path, &doc)?;
    Ok(path)
}

pub fn scan(cfg: &ExperimentConfig, instance: Option<&Path>) -> Result<(), CliError> {
    let mut cfg = cfg.clone();
    let problem = load_problem(&mut cfg, instance)?;
    let (obj, gt) = (&problem.objective, &problem.truth);
    if cfg.region_params.mu == 0.0 {
        eprintln!(
            "warning: mu = 0 makes the local region the target fiber alone; the scan is degenerate"
        );
    }
    let mut certify = cfg.scan.clone();
    let mut delta_source = "config";
    if problem.spec.kind == ProblemKind::TraceRegression {
        if certify.delta == 0.0 {
            certify.delta = rsc_rsm_estimate(obj, gt.r(), cfg.delta_samples, certify.seed);
            delta_source = "sampled";
        }
        if certify.delta_gate.is_none() {
            certify.delta_gate = Some(delta_min(gt, &cfg.region_params));
        }
    }
    let report = certify_landscape(obj, gt, &cfg.region_params, &certify)
        .map_err(CliError::core("scan"))?;
    if report.gated {
        eprintln!(
            "note: delta = {:e} exceeds the gate {:e}; bounds were evaluated but not asserted",
            certify.delta,
            certify.delta_gate.unwrap_or(f64::NAN)
        );
    }

    ensure_dir(&cfg.output_dir)?;
    write_region_csv(&report.rows, create(&cfg.output_dir.join("regions.csv"))?)
        .map_err(CliError::core("writing regions.csv"))?;
    let n_fail = report.failures().count();
    let n_skipped = report.rows.iter().filter(|r| r.status.as_str() == "skipped").count();
    let doc = ScanDocument {
        provenance: Provenance::new("scan", &cfg),
        thresholds: &report.thresholds,
        context: report.context,
        delta_source,
        gated: report.gated,
        n_points: report.rows.len(),
        n_pass: report.rows.len() - n_fail - n_skipped,
        n_fail,
        n_skipped,
    };
    write_json(&cfg.output_dir.join("thresholds.json"), &doc)?;

    if n_fail > 0 {
        for row in report.failures() {
            eprintln!(
                "point {} [{}]: {}",
                row.point_id,
                row.labels,
                row.failure.as_deref().unwrap_or("failed")
            );
        }
        return Err(CliError::Failed(format!(
            "{n_fail} of {} points failed certification",
            report.rows.len()
        )));
    }
    Ok(())
}

pub fn optimize(cfg: &ExperimentConfig, instance: Option<&Path>) -> Result<(), CliError> {
    let mut cfg = cfg.clone();
    let problem = load_problem(&mut cfg, instance)?;
    let (obj, gt) = (&problem.objective, &problem.truth);
    let gaussian = Sampler::Gaussian { scale: 1.0 };
    let draw = |sampler: Sampler| {
        sampler
            .draw(gt, &cfg.region_params, &mut rng_for(cfg.optimizer.seed, INIT_STREAM))
            .map_err(CliError::core("drawing the starting point"))
    };
    let spectral = |floor: Option<f64>| match obj {
        Problem::TraceRegression(o) => {
            spectral_init(o, gt.r(), floor).map_err(CliError::core("spectral initialization"))
        }
        Problem::Denoising(_) => Err(CliError::Config(
            "spectral initialization needs a trace-regression problem".into(),
        )),
    };
    let (y0, init) = match cfg.init {
        InitRule::Auto => match obj {
            Problem::TraceRegression(_) => (spectral(None)?, "spectral"),
            Problem::Denoising(_) => (draw(gaussian)?, "gaussian"),
        },
        InitRule::Spectral { eig_floor } => (spectral(eig_floor)?, "spectral"),
        InitRule::Target => (gt.y_star.clone(), "target"),
        InitRule::Sample { sampler } => (draw(sampler)?, "sample"),
    };

    let tr = riemannian_gd(obj, &y0, &cfg.optimizer, Some(gt)).map_err(CliError::core("optimize"))?;
    ensure_dir(&cfg.output_dir)?;
    tr.write_csv(create(&cfg.output_dir.join("trajectory.csv"))?)
        .map_err(CliError::core("writing trajectory.csv"))?;

    let last = tr.last();
    let in_r1 = classify_region(&tr.final_point, gt, &cfg.region_params)
        .map_err(CliError::core("classifying the final iterate"))?
        .contains(RegionLabel::R1);
    let (error_bound, error_bound_skipped) = if !tr.converged {
        (None, Some("optimizer did not converge".to_string()))
    } else if !in_r1 {
        (None, Some("final iterate lies outside the local region".to_string()))
    } else {
        match error_bound_check(obj, &tr.final_point, gt, cfg.region_params.mu, None) {
            Ok(rep) => (Some(rep), None),
            Err(e @ (quotient_landscape::Error::HypothesisViolation(_)
            | quotient_landscape::Error::NotStationary { .. })) => (None, Some(e.to_string())),
            Err(e) => return Err(CliError::core("error bound")(e)),
        }
    };
    let doc = OptimizeDocument {
        provenance: Provenance::new("optimize", &cfg),
        init: init.into(),
        converged: tr.converged,
        iterations: tr.iterations,
        final_objective: last.obj,
        final_grad_norm: last.grad_norm,
        final_dist_to_star: last.dist_to_star,
        final_regions: last.regions.as_ref().map(|r| r.to_string()),
        error_bound_skipped,
        error_bound,
    };
    write_json(&cfg.output_dir.join("final_report.json"), &doc)?;
    if doc.error_bound.is_some_and(|r| !r.holds) {
        return Err(CliError::Failed("the error bound does not hold at the final iterate".into()));
    }
    Ok(())
}

pub fn verify(
    cfg: &ExperimentConfig,
    suite: &str,
    seed: u64,
    instances: usize,
) -> Result<SuiteSummary, CliError> {
    if !SUITE_NAMES.contains(&suite) {
        return Err(CliError::Config(format!(
            "unknown suite '{suite}'; available suites: {}",
            SUITE_NAMES.join(", ")
        )));
    }
    if instances == 0 {
        return Err(CliError::Config("--instances must be at least 1".into()));
    }
    let summary = run_suite(suite, seed, instances).map_err(CliError::core(format!("suite {suite}")))?;
    ensure_dir(&cfg.output_dir)?;
    let doc = VerifyDocument {
        provenance: Provenance::new("verify", cfg),
        pass: summary.all_pass(),
        summary: summary.clone(),
    };
    write_json(&cfg.output_dir.join(format!("verify_{suite}.json")), &doc)?;
    if !doc.pass {
        return Err(CliError::Failed(format!(
            "suite {suite}: {} of {} instances passed (worst {:e})",
            summary.passes, summary.instances, summary.worst_rel_err
        )));
    }
    Ok(summary)
}
