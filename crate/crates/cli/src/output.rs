//! Result files and the run manifest. All renderings are pure functions of
//! the report, so identical runs produce identical bytes.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use ltvid_core::io::fmt_f64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, Format};
use crate::error::{HarnessError, Result};
use crate::run::{DensityRun, IdentifyReport, SweepReport, VerifyReport};

pub const MANIFEST_NAME: &str = "manifest.json";

/// One output file, by name relative to the output directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub config_sha256: String,
    pub passed: bool,
    /// SHA-256 of every other file written by the run.
    pub files: BTreeMap<String, String>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of the canonical JSON form of `config`.
pub fn config_hash(config: &ExperimentConfig) -> Result<String> {
    Ok(sha256_hex(&serde_json::to_vec(config)?))
}

fn json_artifact<T: Serialize>(name: &str, value: &T) -> Result<Artifact> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(Artifact {
        name: format!("{name}.json"),
        bytes,
    })
}

fn csv_artifact(name: &str, header: &[&str], rows: Vec<Vec<String>>) -> Result<Artifact> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| HarnessError::Core(ltvid_core::Error::Io(e.into_error())))?;
    Ok(Artifact {
        name: format!("{name}.csv"),
        bytes,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn identify_artifacts(report: &IdentifyReport, formats: &[Format]) -> Result<Vec<Artifact>> {
    let mut out = Vec::new();
    if formats.contains(&Format::Json) {
        out.push(json_artifact("identify", report)?);
    }
    if formats.contains(&Format::Csv) {
        let mut rows = Vec::new();
        for t in &report.trials {
            let taps = t.estimate.as_ref().map(|e| e.taps.as_slice()).unwrap_or(&[]);
            for (role, list) in [("truth", t.truth.as_slice()), ("estimate", taps)] {
                for tap in list {
                    rows.push(vec![
                        t.trial.to_string(),
                        role.to_string(),
                        fmt_f64(tap.amplitude().re),
                        fmt_f64(tap.amplitude().im),
                        fmt_f64(tap.delay()),
                        fmt_f64(tap.doppler()),
                    ]);
                }
            }
        }
        out.push(csv_artifact(
            "identify_taps",
            &["trial", "role", "a_re", "a_im", "tau", "nu"],
            rows,
        )?);
    }
    Ok(out)
}

pub fn sweep_artifacts(report: &SweepReport, formats: &[Format]) -> Result<Vec<Artifact>> {
    let mut out = Vec::new();
    if formats.contains(&Format::Json) {
        out.push(json_artifact("sweep", report)?);
    }
    if formats.contains(&Format::Csv) {
        let rows = report
            .levels
            .iter()
            .map(|l| {
                vec![
                    fmt_f64(l.snr_db),
                    l.trials.to_string(),
                    l.failures.to_string(),
                    fmt_f64(l.median_rmse_tau),
                ]
            })
            .collect();
        out.push(csv_artifact(
            "sweep",
            &["snr_db", "trials", "failures", "median_rmse_tau"],
            rows,
        )?);
        let rows = report
            .levels
            .iter()
            .flat_map(|l| {
                l.rmse_tau
                    .iter()
                    .enumerate()
                    .map(move |(t, r)| vec![fmt_f64(l.snr_db), t.to_string(), fmt_f64(*r)])
            })
            .collect();
        out.push(csv_artifact("sweep_trials", &["snr_db", "trial", "rmse_tau"], rows)?);
    }
    Ok(out)
}

pub fn density_artifacts(run: &DensityRun, formats: &[Format]) -> Result<Vec<Artifact>> {
    let mut out = Vec::new();
    if formats.contains(&Format::Json) {
        out.push(json_artifact("density", run)?);
    }
    if formats.contains(&Format::Csv) {
        let r = &run.report;
        let rows = (0..r.radii.len())
            .map(|n| {
                let area = r.radii[n] * r.radii[n];
                vec![
                    fmt_f64(r.radii[n]),
                    r.n_minus[n].to_string(),
                    r.n_plus[n].to_string(),
                    fmt_f64(r.n_minus[n] as f64 / area),
                    fmt_f64(r.n_plus[n] as f64 / area),
                ]
            })
            .collect();
        out.push(csv_artifact(
            "density",
            &["r", "n_minus", "n_plus", "lower", "upper"],
            rows,
        )?);
    }
    Ok(out)
}

pub fn verify_artifacts(report: &VerifyReport, formats: &[Format]) -> Result<Vec<Artifact>> {
    let mut out = Vec::new();
    if formats.contains(&Format::Json) {
        out.push(json_artifact("verify", report)?);
    }
    if formats.contains(&Format::Csv) {
        let rows = report
            .ratio
            .pairs
            .iter()
            .map(|p| {
                vec![
                    p.pair.to_string(),
                    p.support_h.to_string(),
                    p.support_k.to_string(),
                    opt(p.ratio),
                    opt(p.tv_over_l2),
                ]
            })
            .collect();
        out.push(csv_artifact(
            "verify_ratio",
            &["pair", "support_h", "support_k", "ratio", "tv_over_l2"],
            rows,
        )?);
        let rows = report
            .identity
            .checks
            .iter()
            .map(|c| vec![fmt_f64(c.point.tau), fmt_f64(c.point.nu), fmt_f64(c.abs_err)])
            .collect();
        out.push(csv_artifact("verify_identity", &["tau", "nu", "abs_err"], rows)?);
    }
    Ok(out)
}

/// Writes `artifacts` and a manifest into `dir`, creating it if needed.
/// Returns the paths written, manifest last.
pub fn emit(
    dir: &Path,
    command: &str,
    config: &ExperimentConfig,
    seed: u64,
    passed: bool,
    artifacts: &[Artifact],
) -> Result<Vec<PathBuf>> {
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| HarnessError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::with_capacity(artifacts.len() + 1);
    let mut files = BTreeMap::new();
    for a in artifacts {
        let path = dir.join(&a.name);
        fs::write(&path, &a.bytes).map_err(io_err(&path))?;
        files.insert(a.name.clone(), sha256_hex(&a.bytes));
        written.push(path);
    }
    let manifest = Manifest {
        command: command.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed,
        config_sha256: config_hash(config)?,
        passed,
        files,
    };
    let path = dir.join(MANIFEST_NAME);
    let mut bytes = serde_json::to_vec_pretty(&manifest)?;
    bytes.push(b'\n');
    fs::write(&path, bytes).map_err(io_err(&path))?;
    written.push(path);
    Ok(written)
}
