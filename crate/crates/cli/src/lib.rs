//! Experiment harness for `ltvid-core`: JSON configs, scenario generation,
//! noise sweeps, seeded parallel trials and reproducible result files.

pub mod config;
pub mod error;
pub mod output;
pub mod run;
pub mod scenario;

use std::fmt;
use std::path::{Path, PathBuf};

pub use config::ExperimentConfig;
pub use error::{HarnessError, Result};
pub use ltvid_core;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Identify,
    Density,
    Verify,
    Sweep,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Command::Identify => "identify",
            Command::Density => "density",
            Command::Verify => "verify",
            Command::Sweep => "sweep",
        })
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub passed: bool,
    pub summary: String,
    pub files: Vec<PathBuf>,
}

/// Runs `command` and writes its results. `seed` overrides the configured
/// seed and `out` the configured output directory.
pub fn execute(
    command: Command,
    config: &ExperimentConfig,
    seed: Option<u64>,
    out: Option<&Path>,
) -> Result<Outcome> {
    let mut config = config.clone();
    if let Some(s) = seed {
        config.scenario.seed = s;
    }
    config.validate()?;
    let seed = config.scenario.seed;
    let formats = config.outputs.formats.clone();
    let (passed, summary, artifacts) = match command {
        Command::Identify => {
            let r = run::run_identify(&config, seed)?;
            let summary = format!(
                "{} trial(s), {} failed, worst relative error {:.3e}, median delay RMSE {:.3e}",
                r.trials.len(),
                r.failures,
                r.worst_rel_err,
                r.median_rmse_tau
            );
            (r.passed, summary, output::identify_artifacts(&r, &formats)?)
        }
        Command::Sweep => {
            let r = run::run_sweep(&config, seed)?;
            let medians: Vec<String> = r
                .levels
                .iter()
                .map(|l| format!("{} dB: {:.3e}", l.snr_db, l.median_rmse_tau))
                .collect();
            let summary = format!(
                "median delay RMSE {}; nonincreasing: {}",
                medians.join(", "),
                r.nonincreasing
            );
            (r.passed, summary, output::sweep_artifacts(&r, &formats)?)
        }
        Command::Density => {
            let r = run::run_density(&config)?;
            let exact = r
                .exact_density
                .map(|e| format!(", exact {e:.6}"))
                .unwrap_or_default();
            let summary = format!(
                "{} points, density in [{:.6}, {:.6}]{exact}, verdict {}",
                r.points, r.report.lower_estimate, r.report.upper_estimate, r.verdict
            );
            (r.passed, summary, output::density_artifacts(&r, &formats)?)
        }
        Command::Verify => {
            let r = run::run_verify(&config, seed)?;
            let summary = format!(
                "max ratio {:.6} ({} of {} above 1 + {:e}){}; max identity error {:.3e}{}",
                r.ratio.max_ratio,
                r.ratio.exceeding,
                r.ratio.pairs.len(),
                r.ratio.tolerance,
                if r.ratio.degenerate { " [degenerate]" } else { "" },
                r.identity.max_abs_err,
                if r.identity.degenerate { " [degenerate]" } else { "" },
            );
            (r.passed, summary, output::verify_artifacts(&r, &formats)?)
        }
    };
    let dir = out.map(Path::to_path_buf).unwrap_or_else(|| config.outputs.dir.clone());
    let files = output::emit(&dir, &command.to_string(), &config, seed, passed, &artifacts)?;
    Ok(Outcome {
        passed,
        summary,
        files,
    })
}
