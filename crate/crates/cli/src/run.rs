//! The four harness operations. Each returns a typed report; rendering to
//! files lives in [`crate::output`].

use std::fs::File;
use std::io::BufReader;

use ltvid_core::analysis::IdentityCheck;
use ltvid_core::estimation::{noisy_rank_tol, simulate_samples, EstimationRecord};
use ltvid_core::measures::adversarial_patterns;
use ltvid_core::num_complex::Complex64;
use ltvid_core::{
    density_estimates, exact_pattern_density, identifiability_ratio, identifiability_verdict,
    identify, io, residue_pattern_points, ChannelSpec, DensityReport, Error as CoreError,
    GaussianProbe, IdentifyOptions, ResiduePattern, SampledSignal, Tap, TimeFreqPoint, TimeGrid,
    Verdict,
};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Setup, VerifySignal};
use crate::error::{HarnessError, Result};
use crate::scenario::{add_awgn, build_channel, random_pair, trial_rng, Stream};

/// Largest of the per-parameter relative errors of one matched tap:
/// `|d tau| / max(|tau|, 1)`, `|d nu| / max(|nu|, 1)`, `|d a| / |a|`.
pub fn tap_relative_error(truth: &Tap, estimate: &Tap) -> f64 {
    let rel = |d: f64, v: f64| d.abs() / v.abs().max(1.0);
    let da = (estimate.amplitude() - truth.amplitude()).norm() / truth.amplitude().norm();
    rel(estimate.delay() - truth.delay(), truth.delay())
        .max(rel(estimate.doppler() - truth.doppler(), truth.doppler()))
        .max(da)
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Non-finite values serialize as `null`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialOutcome {
    pub trial: u32,
    pub snr_db: Option<f64>,
    pub truth: Vec<Tap>,
    /// Absent when estimation failed; see `error`.
    pub estimate: Option<EstimationRecord>,
    /// Worst per-tap relative error, infinite when a tap went unmatched.
    pub max_rel_err: f64,
    pub rmse_tau: f64,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

fn options_for(config: &ExperimentConfig, snr_db: Option<f64>) -> IdentifyOptions {
    let e = &config.estimation;
    let order_hint = if e.detect_order {
        None
    } else {
        Some(e.order_hint.unwrap_or(config.scenario.taps))
    };
    let rank_tol = e.rank_tol.unwrap_or_else(|| match snr_db {
        None => IdentifyOptions::default().rank_tol,
        Some(db) => noisy_rank_tol(10f64.powf(db / 10.0)),
    });
    IdentifyOptions {
        order_hint,
        rank_tol,
    }
}

/// Simulates and identifies one trial. Estimation failures are recorded in
/// the outcome; simulation failures abort.
fn run_trial(
    config: &ExperimentConfig,
    setup: &Setup,
    root: u64,
    level: u32,
    trial: u32,
    snr_db: Option<f64>,
) -> Result<TrialOutcome> {
    let mut rng = trial_rng(root, Stream::Scenario, 0, trial);
    let spec = build_channel(&mut rng, &setup.lattice, &config.scenario)?;
    let b = setup.probe.bandwidth();
    let clean = simulate_samples(&spec, b, &setup.plan)?;
    let samples = match snr_db {
        None => clean,
        Some(db) => add_awgn(&mut trial_rng(root, Stream::Noise, level, trial), &clean, db),
    };
    let truth = spec.taps().to_vec();
    let estimated = identify(&samples, b, &setup.plan, options_for(config, snr_db))
        .and_then(|r| r.with_matching(&truth, 1.0, 1.0));
    Ok(match estimated {
        Ok(res) => {
            let m = res.matching.as_ref().expect("matching attached");
            let max_rel_err = if m.unmatched() > 0 {
                f64::INFINITY
            } else {
                m.pairs
                    .iter()
                    .map(|p| tap_relative_error(&p.truth, &p.estimate))
                    .fold(0.0, f64::max)
            };
            TrialOutcome {
                trial,
                snr_db,
                truth,
                max_rel_err,
                rmse_tau: if m.pairs.is_empty() { f64::INFINITY } else { m.rmse_tau },
                warnings: res.warnings.clone(),
                estimate: Some(res.to_record()),
                error: None,
            }
        }
        Err(e) => TrialOutcome {
            trial,
            snr_db,
            truth,
            estimate: None,
            max_rel_err: f64::INFINITY,
            rmse_tau: f64::INFINITY,
            warnings: Vec::new(),
            error: Some(e.to_string()),
        },
    })
}

fn run_level(
    config: &ExperimentConfig,
    setup: &Setup,
    root: u64,
    level: u32,
    snr_db: Option<f64>,
) -> Result<Vec<TrialOutcome>> {
    (0..config.noise.trials as u32)
        .into_par_iter()
        .map(|t| run_trial(config, setup, root, level, t, snr_db))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentifyReport {
    pub snr_db: Option<f64>,
    pub trials: Vec<TrialOutcome>,
    pub failures: usize,
    pub worst_rel_err: f64,
    pub median_rmse_tau: f64,
    pub passed: bool,
}

/// Scenario, simulation, optional noise at the first configured level,
/// estimation and matching for every trial.
pub fn run_identify(config: &ExperimentConfig, seed: u64) -> Result<IdentifyReport> {
    let setup = config.validate()?;
    let snr_db = config.noise.snr_db.first().copied();
    let trials = run_level(config, &setup, seed, 0, snr_db)?;
    let failures = trials.iter().filter(|t| t.error.is_some()).count();
    let worst_rel_err = trials.iter().map(|t| t.max_rel_err).fold(0.0, f64::max);
    let rmse: Vec<f64> = trials.iter().map(|t| t.rmse_tau).collect();
    let median_rmse_tau = median(&rmse);
    let passed = match snr_db {
        None => worst_rel_err <= config.thresholds.tap_rel_err,
        Some(_) => config
            .thresholds
            .median_rmse_tau
            .map_or(true, |limit| median_rmse_tau <= limit),
    };
    Ok(IdentifyReport {
        snr_db,
        trials,
        failures,
        worst_rel_err,
        median_rmse_tau,
        passed,
    })
}

/// Non-finite values serialize as `null`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepLevel {
    pub snr_db: f64,
    pub trials: usize,
    pub failures: usize,
    pub median_rmse_tau: f64,
    pub rmse_tau: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub levels: Vec<SweepLevel>,
    /// Median delay RMSE never rises as the SNR increases.
    pub nonincreasing: bool,
    pub passed: bool,
}

/// Identification over every configured SNR. Trial `t` sees the same channel
/// at every level; only the noise differs.
pub fn run_sweep(config: &ExperimentConfig, seed: u64) -> Result<SweepReport> {
    let setup = config.validate()?;
    if config.noise.snr_db.is_empty() {
        return Err(HarnessError::validation("noise.snr_db", "sweep needs at least one level"));
    }
    let mut order: Vec<usize> = (0..config.noise.snr_db.len()).collect();
    order.sort_by(|&a, &b| config.noise.snr_db[a].total_cmp(&config.noise.snr_db[b]));
    let mut levels = Vec::with_capacity(order.len());
    for &n in &order {
        let db = config.noise.snr_db[n];
        let trials = run_level(config, &setup, seed, n as u32, Some(db))?;
        let rmse_tau: Vec<f64> = trials.iter().map(|t| t.rmse_tau).collect();
        levels.push(SweepLevel {
            snr_db: db,
            trials: trials.len(),
            failures: trials.iter().filter(|t| t.error.is_some()).count(),
            median_rmse_tau: median(&rmse_tau),
            rmse_tau,
        });
    }
    let nonincreasing = levels
        .windows(2)
        .all(|w| w[1].median_rmse_tau <= w[0].median_rmse_tau);
    let within = config.thresholds.median_rmse_tau.map_or(true, |limit| {
        levels
            .last()
            .is_some_and(|l| l.median_rmse_tau <= limit)
    });
    Ok(SweepReport {
        levels,
        nonincreasing,
        passed: nonincreasing && within,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversarialPair {
    pub h: ResiduePattern,
    pub k: ResiduePattern,
    pub density_h: f64,
    pub density_k: f64,
    /// No index lies in both patterns over one common period.
    pub disjoint: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityRun {
    pub alpha: f64,
    pub lattice_density: f64,
    pub points: usize,
    pub report: DensityReport,
    pub exact_density: Option<f64>,
    /// Largest relative gap of the two windowed estimates to the exact density.
    pub relative_error: Option<f64>,
    pub verdict: Verdict,
    pub adversarial: Option<AdversarialPair>,
    pub passed: bool,
}

fn disjoint(h: &ResiduePattern, k: &ResiduePattern) -> bool {
    let p = h.period().max(1) * k.period().max(1);
    let p = p as i64;
    (0..p).all(|i| !(h.contains(i, i) && k.contains(i, i)))
}

pub fn run_density(config: &ExperimentConfig) -> Result<DensityRun> {
    let setup = config.validate()?;
    let d = &config.density;
    let (points, exact_density) = match &d.points {
        Some(path) => {
            let file = File::open(path).map_err(|source| HarnessError::Io {
                path: path.clone(),
                source,
            })?;
            (io::read_points(BufReader::new(file))?, None)
        }
        None => {
            let pattern = match &d.pattern {
                Some(p) => p.clone(),
                None => ResiduePattern::new(1, [0])?,
            };
            let pts = residue_pattern_points(&pattern, &setup.lattice, d.half_width)?;
            (pts, Some(exact_pattern_density(&pattern, &setup.lattice)))
        }
    };
    let report = density_estimates(&points, &d.radii)?;
    let relative_error = exact_density.map(|e| {
        ((report.lower_estimate - e).abs() / e).max((report.upper_estimate - e).abs() / e)
    });
    let verdict = identifiability_verdict(d.alpha, &setup.lattice)?;
    let adversarial = match (verdict, d.adversarial_n) {
        (Verdict::NotIdentifiable, Some(n)) => {
            let (h, k) = adversarial_patterns(d.alpha, &setup.lattice, n)?;
            Some(AdversarialPair {
                density_h: exact_pattern_density(&h, &setup.lattice),
                density_k: exact_pattern_density(&k, &setup.lattice),
                disjoint: disjoint(&h, &k),
                h,
                k,
            })
        }
        _ => None,
    };
    let passed = relative_error.map_or(true, |e| e <= config.thresholds.density_rel_err)
        && adversarial.as_ref().map_or(true, |a| a.disjoint);
    Ok(DensityRun {
        alpha: d.alpha,
        lattice_density: setup.lattice.density(),
        points: points.len(),
        report,
        exact_density,
        relative_error,
        verdict,
        adversarial,
        passed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioTrial {
    pub pair: u32,
    pub support_h: usize,
    pub support_k: usize,
    /// `None` when `H = K`.
    pub ratio: Option<f64>,
    /// `||mu_H - mu_K||_TV / ||mu_H - mu_K||_2`, an upper bound for `ratio`.
    pub tv_over_l2: Option<f64>,
}

/// Non-finite values serialize as `null`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioSection {
    pub pairs: Vec<RatioTrial>,
    pub max_ratio: f64,
    pub min_ratio: f64,
    pub exceeding: usize,
    pub tolerance: f64,
    pub degenerate: bool,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentitySection {
    pub dt: f64,
    pub checks: Vec<IdentityCheck>,
    pub max_abs_err: f64,
    pub tolerance: f64,
    pub degenerate: bool,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub ratio: RatioSection,
    pub identity: IdentitySection,
    pub passed: bool,
}

fn tv_over_l2(h: &ChannelSpec, k: &ChannelSpec) -> Option<f64> {
    let atoms = ltvid_core::channel::difference_atoms(h, k);
    let l2 = atoms.iter().map(|(_, a)| a.norm_sqr()).sum::<f64>().sqrt();
    (l2 > 0.0).then(|| atoms.iter().map(|(_, a)| a.norm()).sum::<f64>() / l2)
}

fn ratio_sweep(config: &ExperimentConfig, setup: &Setup, seed: u64) -> Result<RatioSection> {
    let v = &config.verify;
    let probe = setup.probe;
    let pairs = (0..v.pairs as u32)
        .into_par_iter()
        .map(|n| {
            let mut rng = trial_rng(seed, Stream::Pairs, 0, n);
            let (h, k) = random_pair(
                &mut rng,
                &setup.lattice,
                v.index_half_width,
                v.max_support,
                config.scenario.amplitude,
            )?;
            let grid = TimeGrid::covering(&probe, &[&h, &k])?;
            let ratio = match identifiability_ratio(&h, &k, &probe, &grid) {
                Ok(r) => Some(r),
                Err(CoreError::UndefinedRatio) => None,
                Err(e) => return Err(e.into()),
            };
            Ok(RatioTrial {
                pair: n,
                support_h: h.len(),
                support_k: k.len(),
                ratio,
                tv_over_l2: tv_over_l2(&h, &k),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let ratios: Vec<f64> = pairs.iter().filter_map(|p| p.ratio).collect();
    let tolerance = config.thresholds.ratio_slack;
    let max_ratio = ratios.iter().copied().fold(f64::NAN, f64::max);
    let min_ratio = ratios.iter().copied().fold(f64::NAN, f64::min);
    let exceeding = ratios.iter().filter(|&&r| r > 1.0 + tolerance).count();
    let degenerate = ratios.is_empty();
    Ok(RatioSection {
        pairs,
        max_ratio,
        min_ratio,
        exceeding,
        tolerance,
        degenerate,
        passed: exceeding == 0,
    })
}

/// The configured test signal on `[-span, span]` with pitch `dt`.
pub fn verify_signal(config: &ExperimentConfig, seed: u64) -> Result<SampledSignal> {
    let v = &config.verify;
    let b = config.probe.bandwidth;
    let grid = TimeGrid::spanning(-v.span, v.span, v.dt)?;
    let g = GaussianProbe::new(b, 0.0)?;
    match v.signal {
        VerifySignal::Probe => Ok(g.sample(&grid)?),
        VerifySignal::Zero => Ok(SampledSignal::from_fn(&grid, |_| Complex64::new(0.0, 0.0))?),
        VerifySignal::Random { components, spread } => {
            let mut rng = trial_rng(seed, Stream::Signal, 0, 0);
            let atoms: Vec<(Complex64, f64, f64)> = (0..components)
                .map(|_| {
                    let c = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                    let tau = rng.random_range(-spread..=spread);
                    let nu = rng.random_range(-spread..=spread);
                    (c, tau, nu)
                })
                .collect();
            Ok(SampledSignal::from_fn(&grid, |t| {
                atoms.iter().fold(Complex64::new(0.0, 0.0), |acc, &(c, tau, nu)| {
                    acc + c * g.real_value(t - tau) * Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * nu * t)
                })
            })?)
        }
    }
}

pub fn verify_points(config: &ExperimentConfig, seed: u64) -> Vec<TimeFreqPoint> {
    let v = &config.verify;
    let mut rng = trial_rng(seed, Stream::Signal, 1, 0);
    (0..v.points)
        .map(|_| {
            TimeFreqPoint::new(
                rng.random_range(-v.extent..=v.extent),
                rng.random_range(-v.extent..=v.extent),
            )
        })
        .collect()
}

fn identity_check(config: &ExperimentConfig, seed: u64) -> Result<IdentitySection> {
    let tolerance = config.thresholds.identity_abs_err;
    let dt = config.verify.dt;
    let x = verify_signal(config, seed)?;
    let points = verify_points(config, seed);
    if x.values().iter().all(|v| *v == Complex64::new(0.0, 0.0)) || points.is_empty() {
        return Ok(IdentitySection {
            dt,
            checks: Vec::new(),
            max_abs_err: 0.0,
            tolerance,
            degenerate: true,
            passed: true,
        });
    }
    let report = ltvid_core::verify_stft_bargmann(&x, config.probe.bandwidth, &points)?;
    Ok(IdentitySection {
        dt,
        passed: report.max_abs_err <= tolerance,
        max_abs_err: report.max_abs_err,
        checks: report.checks,
        tolerance,
        degenerate: false,
    })
}

/// Identifiability-ratio sweep over random operator pairs and the
/// STFT/Bargmann discrepancy check.
pub fn run_verify(config: &ExperimentConfig, seed: u64) -> Result<VerifyReport> {
    let setup = config.validate()?;
    let ratio = ratio_sweep(config, &setup, seed)?;
    let identity = identity_check(config, seed)?;
    Ok(VerifyReport {
        passed: ratio.passed && identity.passed,
        ratio,
        identity,
    })
}
