//! `qlandscape`: generate problem instances, certify landscapes, run
//! gradient descent and drive the verification suites.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{ExperimentConfig, Overrides};
use error::{CliError, EXIT_PASS};

#[derive(Debug, Parser)]
#[command(name = "qlandscape", version, about = "Landscape certification for Burer-Monteiro factorization")]
struct Cli {
    /// JSON experiment configuration; defaults apply to omitted fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for the problem, the scan and the optimizer (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Number of scan points (overrides the config).
    #[arg(long, global = true)]
    n_points: Option<usize>,
    /// Worker threads; defaults to the machine's parallelism.
    #[arg(long, global = true, env = "LANDSCAPE_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write instance.json for the configured problem.
    Generate,
    /// Sample points, classify them and check the region bounds.
    Scan {
        /// Previously generated instance.json; replaces the configured problem.
        #[arg(long)]
        instance: Option<PathBuf>,
    },
    /// Run Riemannian gradient descent and report the final iterate.
    Optimize {
        #[arg(long)]
        instance: Option<PathBuf>,
    },
    /// Run a named property suite.
    Verify {
        suite: String,
        #[arg(long, default_value_t = 100)]
        instances: usize,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let overrides = Overrides {
        seed: cli.seed,
        output_dir: cli.output_dir,
        n_points: cli.n_points,
    };
    let cfg = ExperimentConfig::load(cli.config.as_deref(), &overrides)?;
    match cli.command {
        Command::Generate => {
            let path = commands::generate(&cfg)?;
            println!("wrote {}", path.display());
        }
        Command::Scan { instance } => {
            commands::scan(&cfg, instance.as_deref())?;
            println!("all certified points pass; results in {}", cfg.output_dir.display());
        }
        Command::Optimize { instance } => {
            commands::optimize(&cfg, instance.as_deref())?;
            println!("results in {}", cfg.output_dir.display());
        }
        Command::Verify { suite, instances } => {
            let s = commands::verify(&cfg, &suite, cli.seed.unwrap_or(0), instances)?;
            println!(
                "{}: {}/{} instances pass (worst {:e})",
                s.suite, s.passes, s.instances, s.worst_rel_err
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { error::EXIT_USAGE } else { EXIT_PASS };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::from(EXIT_PASS),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
