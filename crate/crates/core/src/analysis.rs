//! Gaussian-window STFT and the Bargmann transform by trapezoidal quadrature,
//! and a pointwise check of the identity relating them:
//!
//! `V_g x(tau, nu) = (Bf)(z) e^{-pi |z|^2 / 2} e^{-pi i tau nu}`
//!
//! with `f(u) = (sqrt2 / B)^{1/2} x(u sqrt2 / B)` and
//! `z = tau B / sqrt2 - i nu sqrt2 / B`.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{modulation, SampledSignal};
use crate::error::{Error, Result};
use crate::ComplexRecord;

/// Half-width of the STFT window support, in units of `1/B`.
pub const STFT_SUPPORT: f64 = 8.0;

/// Largest `|z|` accepted by [`bargmann_transform`].
pub const BARGMANN_MAX_MODULUS: f64 = 6.0;

/// Integrand magnitudes below this fraction of the peak are dropped.
pub const BARGMANN_FLOOR: f64 = 1e-18;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeFreqPoint {
    pub tau: f64,
    pub nu: f64,
}

impl TimeFreqPoint {
    pub fn new(tau: f64, nu: f64) -> Self {
        Self { tau, nu }
    }

    /// Bargmann-plane image `tau B / sqrt2 - i nu sqrt2 / B`.
    pub fn bargmann_point(&self, bandwidth: f64) -> Complex64 {
        Complex64::new(self.tau * bandwidth / SQRT_2, -self.nu * SQRT_2 / bandwidth)
    }
}

fn trapezoid_weight(n: usize, len: usize) -> f64 {
    if len > 1 && (n == 0 || n == len - 1) {
        0.5
    } else {
        1.0
    }
}

/// `V_g x(tau, nu) = int x(t) g(t - tau) e^{-2 pi i nu t} dt` with
/// `g(t) = sqrt(B) e^{-pi B^2 t^2 / 2}`.
///
/// The grid of `x` must cover `[tau - 8/B, tau + 8/B]`.
pub fn stft_gaussian(x: &SampledSignal, bandwidth: f64, p: TimeFreqPoint) -> Result<Complex64> {
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::invalid(format!("bandwidth must be positive, got {bandwidth}")));
    }
    let need_lo = p.tau - STFT_SUPPORT / bandwidth;
    let need_hi = p.tau + STFT_SUPPORT / bandwidth;
    let slack = 1e-9 * x.dt();
    if x.t0() > need_lo + slack || x.t_end() < need_hi - slack {
        return Err(Error::Coverage {
            need_lo,
            need_hi,
            have_lo: x.t0(),
            have_hi: x.t_end(),
        });
    }
    let len = x.len();
    let sb = bandwidth.sqrt();
    let sum = x
        .values()
        .iter()
        .enumerate()
        .fold(Complex64::new(0.0, 0.0), |acc, (n, v)| {
            let t = x.time(n);
            let s = t - p.tau;
            let g = sb * (-PI * bandwidth * bandwidth * s * s / 2.0).exp();
            acc + v * (g * trapezoid_weight(n, len)) * modulation(p.nu, t)
        });
    Ok(sum * x.dt())
}

/// `(Bf)(z) = 2^{1/4} e^{-pi z^2 / 2} int f(u) e^{2 pi u z - pi u^2} du`.
///
/// The prefactor is folded into the exponent so the integrand magnitude is
/// `|f(u)| e^{-pi (u - Re z)^2 + pi |z|^2 / 2}`. Quadrature runs over the
/// samples whose integrand exceeds [`BARGMANN_FLOOR`] of the peak; if that
/// window reaches either end of the grid the support is truncated and a
/// coverage error is returned.
pub fn bargmann_transform(f: &SampledSignal, z: Complex64) -> Result<Complex64> {
    let modulus = z.norm();
    if !(modulus <= BARGMANN_MAX_MODULUS) {
        return Err(Error::Range {
            modulus,
            limit: BARGMANN_MAX_MODULUS,
        });
    }
    let scale = 2.0_f64.powf(0.25);
    let half_z2 = z * z * (PI / 2.0);
    let terms: Vec<Complex64> = f
        .values()
        .iter()
        .enumerate()
        .map(|(n, v)| {
            let u = f.time(n);
            let exponent = z * (2.0 * PI * u) - PI * u * u - half_z2;
            v * exponent.exp()
        })
        .collect();
    let peak = terms.iter().map(|t| t.norm()).fold(0.0, f64::max);
    if peak == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let floor = BARGMANN_FLOOR * peak;
    let first = terms.iter().position(|t| t.norm() > floor).unwrap_or(0);
    let last = terms.iter().rposition(|t| t.norm() > floor).unwrap_or(0);
    if first == 0 || last == terms.len() - 1 {
        let centre = z.re;
        return Err(Error::Coverage {
            need_lo: centre - 3.7,
            need_hi: centre + 3.7,
            have_lo: f.t0(),
            have_hi: f.t_end(),
        });
    }
    let sum: Complex64 = terms[first..=last].iter().sum();
    Ok(sum * f.dt() * scale)
}

/// `f(u) = (sqrt2 / B)^{1/2} x(u sqrt2 / B)` tabulated at the pitch of `x`
/// over the image of its grid, using cubic interpolation of `x`.
pub fn bargmann_preimage(x: &SampledSignal, bandwidth: f64) -> Result<SampledSignal> {
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::invalid(format!("bandwidth must be positive, got {bandwidth}")));
    }
    let stretch = SQRT_2 / bandwidth;
    let u_lo = x.t0() / stretch;
    let u_hi = x.t_end() / stretch;
    let du = x.dt();
    let count = ((u_hi - u_lo) / du).floor() as usize + 1;
    let amp = stretch.sqrt();
    let values = (0..count)
        .map(|k| {
            let u = u_lo + k as f64 * du;
            x.interpolate(u * stretch)
                .map(|v| v * amp)
                .ok_or_else(|| Error::Internal(format!("resample point {u} outside grid")))
        })
        .collect::<Result<Vec<_>>>()?;
    SampledSignal::new(u_lo, du, values)
}

/// One evaluated point of the STFT/Bargmann identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub point: TimeFreqPoint,
    pub lhs: ComplexRecord,
    pub rhs: ComplexRecord,
    pub abs_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub max_abs_err: f64,
    pub checks: Vec<IdentityCheck>,
}

/// Evaluates both sides of the STFT/Bargmann identity at each point.
pub fn verify_stft_bargmann(
    x: &SampledSignal,
    bandwidth: f64,
    points: &[TimeFreqPoint],
) -> Result<IdentityReport> {
    let f = bargmann_preimage(x, bandwidth)?;
    let checks = points
        .par_iter()
        .map(|&p| {
            let lhs = stft_gaussian(x, bandwidth, p)?;
            let z = p.bargmann_point(bandwidth);
            let rhs = bargmann_transform(&f, z)?
                * (-PI * z.norm_sqr() / 2.0).exp()
                * Complex64::from_polar(1.0, -PI * p.tau * p.nu);
            Ok(IdentityCheck {
                point: p,
                lhs: lhs.into(),
                rhs: rhs.into(),
                abs_err: (lhs - rhs).norm(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_abs_err = checks.iter().map(|c| c.abs_err).fold(0.0, f64::max);
    Ok(IdentityReport {
        max_abs_err,
        checks,
    })
}
