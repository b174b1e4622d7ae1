//! Channel identification from samples of the probe response.
//!
//! With the Gaussian probe centred at the observation horizon `T` and samples
//! `r_m = (Hx)(tau_min + m T / M)`, the normalized sequence
//! `y_m = r_{M-m} / lambda_m` is an exact sum of `K` damped cisoids
//! `sum_k alpha_k z_k^m`, `m = 1..M`. Poles are estimated with the matrix
//! pencil method and mapped back to delay, Doppler and gain.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{apply_channel, modulation, GaussianProbe};
use crate::error::{Error, Result};
use crate::measures::{ChannelSpec, Tap};
use crate::ComplexRecord;

/// Singular-value floor relative to the largest, for noiseless data.
pub const NOISELESS_RANK_TOL: f64 = 1e-8;

/// Smallest normalization weight accepted before dividing by it.
pub const LAMBDA_FLOOR: f64 = 1e-300;

/// Pole moduli up to `1 + POLE_MODULUS_SLACK` are clamped to the unit circle.
pub const POLE_MODULUS_SLACK: f64 = 1e-6;

/// Rank threshold under a declared linear SNR: `max(1e-8, 3 / sqrt(snr))`.
pub fn noisy_rank_tol(snr_linear: f64) -> f64 {
    NOISELESS_RANK_TOL.max(3.0 / snr_linear.sqrt())
}

/// Observation window and Doppler branch for identification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PlanRecord", into = "PlanRecord")]
pub struct SamplingPlan {
    tau_min: f64,
    horizon: f64,
    count: usize,
    nu_window: (f64, f64),
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct PlanRecord {
    tau_min: f64,
    horizon: f64,
    count: usize,
    nu_window: [f64; 2],
}

impl SamplingPlan {
    pub fn new(tau_min: f64, horizon: f64, count: usize, nu_window: (f64, f64)) -> Result<Self> {
        if !tau_min.is_finite() {
            return Err(Error::invalid("tau_min must be finite"));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::invalid(format!("horizon must be positive, got {horizon}")));
        }
        if count < 2 {
            return Err(Error::invalid(format!("sample count must be >= 2, got {count}")));
        }
        let (lo, hi) = nu_window;
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::invalid(format!(
                "Doppler window [{lo}, {hi}) must be nonempty"
            )));
        }
        let period = count as f64 / horizon;
        if !(hi - lo < period) {
            return Err(Error::invalid(format!(
                "Doppler window width {} must be below M / T = {period}",
                hi - lo
            )));
        }
        Ok(Self {
            tau_min,
            horizon,
            count,
            nu_window,
        })
    }

    pub fn tau_min(&self) -> f64 {
        self.tau_min
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn nu_window(&self) -> (f64, f64) {
        self.nu_window
    }

    /// Doppler ambiguity `M / T`.
    pub fn doppler_period(&self) -> f64 {
        self.count as f64 / self.horizon
    }

    /// `t_m = tau_min + m T / M`, `m = 0..M-1`.
    pub fn times(&self) -> Vec<f64> {
        let step = self.horizon / self.count as f64;
        (0..self.count)
            .map(|m| self.tau_min + m as f64 * step)
            .collect()
    }

    /// The probe the closed forms assume: bandwidth `B`, centred at `T`.
    pub fn probe(&self, bandwidth: f64) -> Result<GaussianProbe> {
        GaussianProbe::new(bandwidth, self.horizon)
    }
}

impl TryFrom<PlanRecord> for SamplingPlan {
    type Error = Error;
    fn try_from(r: PlanRecord) -> Result<Self> {
        SamplingPlan::new(r.tau_min, r.horizon, r.count, (r.nu_window[0], r.nu_window[1]))
    }
}

impl From<SamplingPlan> for PlanRecord {
    fn from(p: SamplingPlan) -> Self {
        PlanRecord {
            tau_min: p.tau_min,
            horizon: p.horizon,
            count: p.count,
            nu_window: [p.nu_window.0, p.nu_window.1],
        }
    }
}

/// `lambda_j = sqrt(B) exp(-pi B^2 T^2 j^2 / (2 M^2))` for `j = 0..=M`.
pub fn lambda_weights(bandwidth: f64, horizon: f64, count: usize) -> Vec<f64> {
    let c = PI * bandwidth * bandwidth * horizon * horizon / (2.0 * (count * count) as f64);
    (0..=count)
        .map(|j| bandwidth.sqrt() * (-c * (j * j) as f64).exp())
        .collect()
}

/// `y_m = r_{M-m} / lambda_m` for `m = 1..=M`; element `m - 1` holds `y_m`.
pub fn normalize_samples(
    r: &[Complex64],
    bandwidth: f64,
    horizon: f64,
    count: usize,
) -> Result<Vec<Complex64>> {
    if r.len() != count {
        return Err(Error::invalid(format!(
            "expected {count} samples, got {}",
            r.len()
        )));
    }
    if !(bandwidth > 0.0 && horizon > 0.0) || count == 0 {
        return Err(Error::invalid("bandwidth, horizon and count must be positive"));
    }
    let lambda = lambda_weights(bandwidth, horizon, count);
    (1..=count)
        .map(|m| {
            if lambda[m] < LAMBDA_FLOOR {
                return Err(Error::Underflow {
                    index: m,
                    value: lambda[m],
                });
            }
            Ok(r[count - m] / lambda[m])
        })
        .collect()
}

/// `alpha_k` and `z_k` of one tap under the given plan.
pub fn cisoid_parameters(tap: &Tap, bandwidth: f64, plan: &SamplingPlan) -> (Complex64, Complex64) {
    let b2 = bandwidth * bandwidth;
    let d = tap.delay() - plan.tau_min;
    let (t, m) = (plan.horizon, plan.count as f64);
    let alpha = tap.amplitude()
        * (-PI * b2 * d * d / 2.0).exp()
        * modulation(tap.doppler(), t)
        * modulation(tap.doppler(), plan.tau_min);
    let z = Complex64::from_polar(
        (-PI * b2 * t * d / m).exp(),
        2.0 * PI * tap.doppler() * t / m,
    );
    (alpha, z)
}

/// `r_m = lambda_{M-m} sum_k alpha_k z_k^{M-m}` built from the closed forms.
pub fn closed_form_samples(spec: &ChannelSpec, bandwidth: f64, plan: &SamplingPlan) -> Vec<Complex64> {
    let m_total = plan.count;
    let lambda = lambda_weights(bandwidth, plan.horizon, m_total);
    let params: Vec<_> = spec
        .taps()
        .iter()
        .map(|t| cisoid_parameters(t, bandwidth, plan))
        .collect();
    (0..m_total)
        .map(|m| {
            let j = (m_total - m) as i32;
            let s: Complex64 = params.iter().map(|(a, z)| a * z.powi(j)).sum();
            s * lambda[m_total - m]
        })
        .collect()
}

/// Samples of the probe response on the plan's grid.
pub fn simulate_samples(spec: &ChannelSpec, bandwidth: f64, plan: &SamplingPlan) -> Result<Vec<Complex64>> {
    let probe = plan.probe(bandwidth)?;
    Ok(apply_channel(spec, &probe, &plan.times()))
}

/// `y_m = sum_k alpha_k z_k^m`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CisoidModel {
    pub poles: Vec<Complex64>,
    pub amplitudes: Vec<Complex64>,
}

impl CisoidModel {
    pub fn new(poles: Vec<Complex64>, amplitudes: Vec<Complex64>) -> Result<Self> {
        if poles.len() != amplitudes.len() {
            return Err(Error::invalid("poles and amplitudes differ in length"));
        }
        Ok(Self { poles, amplitudes })
    }

    pub fn order(&self) -> usize {
        self.poles.len()
    }

    /// `y_1..=y_M`.
    pub fn synthesize(&self, count: usize) -> Vec<Complex64> {
        (1..=count as i32)
            .map(|m| {
                self.poles
                    .iter()
                    .zip(&self.amplitudes)
                    .map(|(z, a)| a * z.powi(m))
                    .sum()
            })
            .collect()
    }

    /// Smallest pairwise pole distance (`inf` below two poles).
    pub fn min_pole_separation(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (i, a) in self.poles.iter().enumerate() {
            for b in &self.poles[i + 1..] {
                best = best.min((a - b).norm());
            }
        }
        best
    }

    /// `||y - synthesize|| / ||y||`, zero for an all-zero `y`.
    pub fn relative_residual(&self, y: &[Complex64]) -> f64 {
        let fit = self.synthesize(y.len());
        let num: f64 = y.iter().zip(&fit).map(|(a, b)| (a - b).norm_sqr()).sum();
        let den: f64 = y.iter().map(|a| a.norm_sqr()).sum();
        if den == 0.0 {
            0.0
        } else {
            (num / den).sqrt()
        }
    }
}

/// Pencil parameter `floor(M/3)` clipped to `[K, M-K]`.
pub fn pencil_parameter(count: usize, order: usize) -> usize {
    (count / 3).max(order).min(count.saturating_sub(order)).max(1)
}

fn hankel(y: &[Complex64], l: usize) -> DMatrix<Complex64> {
    let rows = y.len() - l;
    DMatrix::from_fn(rows, l + 1, |i, j| y[i + j])
}

/// Full-column-rank least squares by Householder QR.
fn lstsq(a: DMatrix<Complex64>, b: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let (rows, cols) = a.shape();
    if rows < cols {
        return Err(Error::Internal(format!("underdetermined {rows} x {cols} system")));
    }
    let qr = a.qr();
    let r = qr.r();
    let diag: Vec<f64> = (0..cols).map(|i| r[(i, i)].norm()).collect();
    let top = diag.iter().copied().fold(0.0, f64::max);
    if diag.iter().any(|&d| !(d > top * f64::EPSILON * rows as f64)) {
        return Err(Error::Numerical("least-squares matrix is rank deficient".into()));
    }
    let rhs = qr.q().adjoint() * b;
    r.solve_upper_triangular(&rhs)
        .ok_or_else(|| Error::Numerical("triangular solve failed".into()))
}

/// Matrix pencil estimate of `y_m = sum alpha_k z_k^m`, `m = 1..=M`, where
/// `y[m - 1]` holds `y_m`.
///
/// The order is `order_hint` if given, else the number of Hankel singular
/// values at least `rank_tol` times the largest. Poles are returned sorted by
/// decreasing modulus, then by argument.
pub fn matrix_pencil(y: &[Complex64], order_hint: Option<usize>, rank_tol: f64) -> Result<CisoidModel> {
    let m = y.len();
    if m < 2 {
        return Err(Error::InsufficientSamples {
            order: order_hint.unwrap_or(1),
            needed: 2,
            available: m,
        });
    }
    if y.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::Numerical("non-finite samples".into()));
    }
    if order_hint == Some(0) || y.iter().all(|v| v.norm_sqr() == 0.0) {
        return Ok(CisoidModel::default());
    }
    if let Some(k) = order_hint {
        if k > m / 2 {
            return Err(Error::InsufficientSamples {
                order: k,
                needed: 2 * k,
                available: m,
            });
        }
    }

    let mut l = pencil_parameter(m, order_hint.unwrap_or(1));
    let mut svd = hankel(y, l).svd(false, true);
    let order = match order_hint {
        Some(k) => k,
        None => {
            let sv = &svd.singular_values;
            let top = sv.max();
            sv.iter().filter(|&&s| s >= rank_tol * top).count()
        }
    };
    if order == 0 {
        return Ok(CisoidModel::default());
    }
    if order > m / 2 {
        return Err(Error::InsufficientSamples {
            order,
            needed: 2 * order,
            available: m,
        });
    }
    let clipped = pencil_parameter(m, order);
    if clipped != l {
        l = clipped;
        svd = hankel(y, l).svd(false, true);
    }
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::Numerical("SVD did not return right singular vectors".into()))?;
    if v_t.nrows() < order {
        return Err(Error::Numerical("Hankel matrix rank below model order".into()));
    }

    // Rows of Y span the Vandermonde vectors [1, z, .., z^L]; their basis is the
    // transpose of the leading rows of V^H.
    let basis = v_t.rows(0, order).transpose();
    let upper = basis.rows(0, l).into_owned();
    let lower = basis.rows(1, l).into_owned();
    let shift = lstsq(upper, &lower)?;
    let schur = nalgebra::linalg::Schur::try_new(shift, 1e-15, 10_000)
        .ok_or_else(|| Error::Numerical("eigenvalue iteration did not converge".into()))?;
    let mut poles: Vec<Complex64> = schur
        .eigenvalues()
        .ok_or_else(|| Error::Numerical("eigenvalues unavailable".into()))?
        .iter()
        .copied()
        .collect();
    poles.sort_by(|a, b| {
        b.norm()
            .total_cmp(&a.norm())
            .then(a.arg().total_cmp(&b.arg()))
    });

    let amplitudes = fit_amplitudes(y, &poles)?;
    CisoidModel::new(poles, amplitudes)
}

fn vandermonde(poles: &[Complex64], count: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(count, poles.len(), |i, k| poles[k].powi(i as i32 + 1))
}

/// Least-squares amplitudes over all `M` equations.
pub fn fit_amplitudes(y: &[Complex64], poles: &[Complex64]) -> Result<Vec<Complex64>> {
    if poles.is_empty() {
        return Ok(Vec::new());
    }
    let v = vandermonde(poles, y.len());
    let rhs = DMatrix::from_column_slice(y.len(), 1, y);
    let sol = lstsq(v, &rhs)?;
    Ok(sol.column(0).iter().copied().collect())
}

/// 2-norm condition number of the `M x K` matrix `[z_k^m]`, `m = 1..=M`.
/// Returns `inf` when the matrix is rank deficient to machine precision.
pub fn vandermonde_condition(poles: &[Complex64], count: usize) -> Result<f64> {
    if poles.is_empty() || count < poles.len() {
        return Err(Error::invalid(format!(
            "need 1 <= K <= M, got K = {}, M = {count}",
            poles.len()
        )));
    }
    let sv: DVector<f64> = vandermonde(poles, count).singular_values();
    let (hi, lo) = (sv.max(), sv.min());
    let floor = hi * f64::EPSILON * count.max(poles.len()) as f64;
    if !(lo > floor) {
        return Ok(f64::INFINITY);
    }
    Ok(hi / lo)
}

/// Taps recovered from a cisoid model, with non-fatal diagnostics.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Backmapped {
    pub taps: Vec<Tap>,
    pub warnings: Vec<String>,
}

/// Inverts the pole/amplitude parametrization.
///
/// `tau = tau_min - M ln|z| / (pi B^2 T)` with `|z|` clamped to 1, and `nu` is
/// the representative of `M arg(z) / (2 pi T)` modulo `M/T` in the plan's
/// Doppler window. A representative that falls in the gap outside the window
/// is replaced by the nearer of its two neighbours and reported.
pub fn backmap(model: &CisoidModel, bandwidth: f64, plan: &SamplingPlan) -> Result<Backmapped> {
    let b2 = bandwidth * bandwidth;
    let (t, m) = (plan.horizon, plan.count as f64);
    let period = plan.doppler_period();
    let (nu_lo, nu_hi) = plan.nu_window;
    let mut out = Backmapped::default();

    for (k, (z, alpha)) in model.poles.iter().zip(&model.amplitudes).enumerate() {
        let modulus = z.norm();
        if !modulus.is_finite() || !alpha.re.is_finite() || !alpha.im.is_finite() {
            return Err(Error::Numerical(format!("non-finite pole or amplitude at {k}")));
        }
        if modulus == 0.0 {
            return Err(Error::DegeneratePole(k));
        }
        let delay = if modulus > 1.0 + POLE_MODULUS_SLACK {
            out.warnings
                .push(format!("pole {k}: |z| = {modulus} > 1, delay set to tau_min"));
            plan.tau_min
        } else {
            plan.tau_min - m * modulus.min(1.0).ln() / (PI * b2 * t)
        };

        let raw = z.arg() * m / (2.0 * PI * t);
        let mut nu = nu_lo + (raw - nu_lo).rem_euclid(period);
        if nu >= nu_hi {
            let below = nu - period;
            let nearer = if nu - nu_hi <= nu_lo - below { nu } else { below };
            out.warnings.push(format!(
                "pole {k}: Doppler {nu} outside window [{nu_lo}, {nu_hi}), using {nearer}"
            ));
            nu = nearer;
        }

        let d = delay - plan.tau_min;
        let amplitude = alpha
            * (PI * b2 * d * d / 2.0).exp()
            * modulation(nu, -t)
            * modulation(nu, -plan.tau_min);
        match Tap::new(amplitude, delay, nu) {
            Ok(tap) => out.taps.push(tap),
            Err(_) => out
                .warnings
                .push(format!("pole {k}: zero or non-finite gain, tap dropped")),
        }
    }
    Ok(out)
}

/// Error of one matched truth/estimate pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub truth: Tap,
    pub estimate: Tap,
    pub delay_err: f64,
    pub doppler_err: f64,
    pub amplitude_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub pairs: Vec<MatchedPair>,
    pub unmatched_truth: usize,
    pub unmatched_estimate: usize,
    pub rmse_tau: f64,
    pub rmse_nu: f64,
    pub rmse_amp: f64,
}

impl MatchReport {
    pub fn unmatched(&self) -> usize {
        self.unmatched_truth + self.unmatched_estimate
    }
}

/// Greedy minimum-distance assignment under
/// `sqrt((d_tau / delay_scale)^2 + (d_nu / doppler_scale)^2)`.
///
/// Pairs are reported in truth (delay, Doppler) order, so the report does not
/// depend on the order of either input list. RMSEs are zero when nothing
/// matched.
pub fn match_taps(
    truth: &[Tap],
    estimate: &[Tap],
    delay_scale: f64,
    doppler_scale: f64,
) -> Result<MatchReport> {
    if !(delay_scale > 0.0 && doppler_scale > 0.0) {
        return Err(Error::invalid("matching scales must be positive"));
    }
    let key = |t: &Tap| (t.delay(), t.doppler(), t.amplitude().re, t.amplitude().im);
    let cmp_key = |a: &Tap, b: &Tap| {
        let (ka, kb) = (key(a), key(b));
        ka.0.total_cmp(&kb.0)
            .then(ka.1.total_cmp(&kb.1))
            .then(ka.2.total_cmp(&kb.2))
            .then(ka.3.total_cmp(&kb.3))
    };

    let mut candidates = Vec::with_capacity(truth.len() * estimate.len());
    for (i, t) in truth.iter().enumerate() {
        for (j, e) in estimate.iter().enumerate() {
            let dt = (t.delay() - e.delay()) / delay_scale;
            let dn = (t.doppler() - e.doppler()) / doppler_scale;
            candidates.push(((dt * dt + dn * dn).sqrt(), i, j));
        }
    }
    candidates.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then_with(|| cmp_key(&truth[a.1], &truth[b.1]))
            .then_with(|| cmp_key(&estimate[a.2], &estimate[b.2]))
    });

    let mut used_t = vec![false; truth.len()];
    let mut used_e = vec![false; estimate.len()];
    let mut pairs = Vec::new();
    for (_, i, j) in candidates {
        if used_t[i] || used_e[j] {
            continue;
        }
        used_t[i] = true;
        used_e[j] = true;
        let (t, e) = (truth[i], estimate[j]);
        pairs.push(MatchedPair {
            truth: t,
            estimate: e,
            delay_err: (e.delay() - t.delay()).abs(),
            doppler_err: (e.doppler() - t.doppler()).abs(),
            amplitude_err: (e.amplitude() - t.amplitude()).norm(),
        });
    }
    pairs.sort_by(|a, b| cmp_key(&a.truth, &b.truth));

    let rms = |f: fn(&MatchedPair) -> f64| -> f64 {
        if pairs.is_empty() {
            0.0
        } else {
            (pairs.iter().map(|p| f(p).powi(2)).sum::<f64>() / pairs.len() as f64).sqrt()
        }
    };
    Ok(MatchReport {
        rmse_tau: rms(|p| p.delay_err),
        rmse_nu: rms(|p| p.doppler_err),
        rmse_amp: rms(|p| p.amplitude_err),
        unmatched_truth: truth.len() - pairs.len(),
        unmatched_estimate: estimate.len() - pairs.len(),
        pairs,
    })
}

/// Options for [`identify`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentifyOptions {
    pub order_hint: Option<usize>,
    pub rank_tol: f64,
}

impl Default for IdentifyOptions {
    fn default() -> Self {
        Self {
            order_hint: None,
            rank_tol: NOISELESS_RANK_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationResult {
    pub taps: Vec<Tap>,
    pub model: CisoidModel,
    pub vandermonde_cond: f64,
    pub fit_residual: f64,
    pub matching: Option<MatchReport>,
    pub warnings: Vec<String>,
}

impl EstimationResult {
    /// Compares the recovered taps against `truth`.
    pub fn with_matching(mut self, truth: &[Tap], delay_scale: f64, doppler_scale: f64) -> Result<Self> {
        self.matching = Some(match_taps(truth, &self.taps, delay_scale, doppler_scale)?);
        Ok(self)
    }

    pub fn to_record(&self) -> EstimationRecord {
        EstimationRecord {
            taps: self.taps.clone(),
            poles: self.model.poles.iter().map(|&z| z.into()).collect(),
            cond: self.vandermonde_cond,
            residual: self.fit_residual,
            matching: self.matching.as_ref().map(|m| MatchingSummary {
                rmse_tau: m.rmse_tau,
                rmse_nu: m.rmse_nu,
                rmse_amp: m.rmse_amp,
                unmatched: m.unmatched(),
            }),
        }
    }
}

/// JSON shape of an [`EstimationResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationRecord {
    pub taps: Vec<Tap>,
    pub poles: Vec<ComplexRecord>,
    pub cond: f64,
    pub residual: f64,
    pub matching: Option<MatchingSummary>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchingSummary {
    pub rmse_tau: f64,
    pub rmse_nu: f64,
    pub rmse_amp: f64,
    pub unmatched: usize,
}

/// Full pipeline: normalize, matrix pencil, back-map, diagnostics.
pub fn identify(
    samples: &[Complex64],
    bandwidth: f64,
    plan: &SamplingPlan,
    options: IdentifyOptions,
) -> Result<EstimationResult> {
    let y = normalize_samples(samples, bandwidth, plan.horizon, plan.count)?;
    let model = matrix_pencil(&y, options.order_hint, options.rank_tol)?;
    let vandermonde_cond = if model.order() == 0 {
        1.0
    } else {
        vandermonde_condition(&model.poles, plan.count)?
    };
    let fit_residual = model.relative_residual(&y);
    let Backmapped { taps, warnings } = backmap(&model, bandwidth, plan)?;
    Ok(EstimationResult {
        taps,
        model,
        vandermonde_cond,
        fit_residual,
        matching: None,
        warnings,
    })
}
