//! The delay-Doppler operator `(Hx)(t) = sum_k a_k x(t - tau_k) e^{-2 pi i nu_k t}`
//! acting on sampled signals, the Gaussian probe, and grid L2 machinery.

use std::collections::HashMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{same_point, ChannelSpec};

/// Uniformly sampled complex signal starting at `t0` with pitch `dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSignal {
    t0: f64,
    dt: f64,
    values: Vec<Complex64>,
}

impl SampledSignal {
    pub fn new(t0: f64, dt: f64, values: Vec<Complex64>) -> Result<Self> {
        if !t0.is_finite() {
            return Err(Error::invalid("signal start must be finite"));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid(format!("sample pitch must be positive, got {dt}")));
        }
        if values.is_empty() {
            return Err(Error::invalid("signal must have at least one sample"));
        }
        Ok(Self { t0, dt, values })
    }

    /// Samples `f` on `grid`.
    pub fn from_fn(grid: &TimeGrid, f: impl Fn(f64) -> Complex64 + Sync) -> Result<Self> {
        let values = grid.times().par_iter().map(|&t| f(t)).collect();
        Self::new(grid.start, grid.step, values)
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, n: usize) -> f64 {
        self.t0 + n as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.values.len() - 1)
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.values.len()).map(|n| self.time(n)).collect()
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self {
            t0: self.t0,
            dt: self.dt,
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    /// Four-point Lagrange interpolation; `None` outside `[t0, t_end]`.
    ///
    /// Falls back to lower-order stencils when fewer than four samples exist.
    pub fn interpolate(&self, t: f64) -> Option<Complex64> {
        let n = self.values.len();
        let x = (t - self.t0) / self.dt;
        let last = (n - 1) as f64;
        let eps = 1e-9;
        if !(x >= -eps && x <= last + eps) {
            return None;
        }
        if n == 1 {
            return Some(self.values[0]);
        }
        let x = x.clamp(0.0, last);
        let width = n.min(4);
        let base = (x.floor() as isize - (width as isize - 1) / 2)
            .clamp(0, (n - width) as isize) as usize;
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..width {
            let xi = (base + i) as f64;
            let mut w = 1.0;
            for j in 0..width {
                if j != i {
                    let xj = (base + j) as f64;
                    w *= (x - xj) / (xi - xj);
                }
            }
            acc += self.values[base + i] * w;
        }
        Some(acc)
    }
}

/// Uniform sample times `start + n * step`, `n < count`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub start: f64,
    pub step: f64,
    pub count: usize,
}

impl TimeGrid {
    pub fn new(start: f64, step: f64, count: usize) -> Result<Self> {
        if !start.is_finite() || !(step > 0.0 && step.is_finite()) || count == 0 {
            return Err(Error::invalid(format!(
                "invalid time grid (start {start}, step {step}, count {count})"
            )));
        }
        Ok(Self { start, step, count })
    }

    /// Grid spanning `[lo, hi]` with pitch at most `max_step`.
    pub fn spanning(lo: f64, hi: f64, max_step: f64) -> Result<Self> {
        if !(hi > lo) {
            return Err(Error::invalid("grid span must be nonempty"));
        }
        let intervals = ((hi - lo) / max_step).ceil().max(1.0) as usize;
        Self::new(lo, (hi - lo) / intervals as f64, intervals + 1)
    }

    /// Default grid for probing `specs` with `probe`: support radius `8/B`
    /// beyond the delayed probe centres, pitch small enough that the Riemann
    /// sum of `|Hx - Kx|^2` does not alias for the Doppler spread present.
    pub fn covering(probe: &GaussianProbe, specs: &[&ChannelSpec]) -> Result<Self> {
        let b = probe.bandwidth();
        let taps = specs.iter().flat_map(|s| s.taps());
        let (mut tau_lo, mut tau_hi) = (0.0_f64, 0.0_f64);
        let (mut nu_lo, mut nu_hi) = (0.0_f64, 0.0_f64);
        for t in taps {
            tau_lo = tau_lo.min(t.delay());
            tau_hi = tau_hi.max(t.delay());
            nu_lo = nu_lo.min(t.doppler());
            nu_hi = nu_hi.max(t.doppler());
        }
        let radius = 8.0 / b;
        let step = 1.0 / (8.0 * b + 2.0 * (nu_hi - nu_lo));
        Self::spanning(
            probe.center() + tau_lo - radius,
            probe.center() + tau_hi + radius,
            step,
        )
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.count)
            .map(|n| self.start + n as f64 * self.step)
            .collect()
    }
}

/// `x(t) = sqrt(B) exp(-pi B^2 (t - T)^2 / 2)`, unit L2 norm for every `B`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ProbeRecord", into = "ProbeRecord")]
pub struct GaussianProbe {
    bandwidth: f64,
    center: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct ProbeRecord {
    bandwidth: f64,
    center: f64,
}

impl GaussianProbe {
    pub fn new(bandwidth: f64, center: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::invalid(format!(
                "probe bandwidth must be positive, got {bandwidth}"
            )));
        }
        if !center.is_finite() {
            return Err(Error::invalid("probe centre must be finite"));
        }
        Ok(Self { bandwidth, center })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn real_value(&self, t: f64) -> f64 {
        let b = self.bandwidth;
        let s = t - self.center;
        b.sqrt() * (-PI * b * b * s * s / 2.0).exp()
    }

    pub fn value(&self, t: f64) -> Complex64 {
        Complex64::new(self.real_value(t), 0.0)
    }

    pub fn sample(&self, grid: &TimeGrid) -> Result<SampledSignal> {
        SampledSignal::from_fn(grid, |t| self.value(t))
    }
}

impl TryFrom<ProbeRecord> for GaussianProbe {
    type Error = Error;
    fn try_from(r: ProbeRecord) -> Result<Self> {
        GaussianProbe::new(r.bandwidth, r.center)
    }
}

impl From<GaussianProbe> for ProbeRecord {
    fn from(p: GaussianProbe) -> Self {
        ProbeRecord {
            bandwidth: p.bandwidth,
            center: p.center,
        }
    }
}

/// `e^{-2 pi i nu t}` with the phase reduced modulo one cycle first.
pub(crate) fn modulation(nu: f64, t: f64) -> Complex64 {
    let cycles = (nu * t).rem_euclid(1.0);
    Complex64::from_polar(1.0, -2.0 * PI * cycles)
}

fn response_at(spec: &ChannelSpec, probe: &GaussianProbe, t: f64) -> Complex64 {
    spec.taps().iter().fold(Complex64::new(0.0, 0.0), |acc, tap| {
        acc + tap.amplitude() * probe.real_value(t - tap.delay()) * modulation(tap.doppler(), t)
    })
}

/// Response of the channel to the probe at each of `times`. Taps are summed
/// in stored order.
pub fn apply_channel(spec: &ChannelSpec, probe: &GaussianProbe, times: &[f64]) -> Vec<Complex64> {
    times
        .par_iter()
        .with_min_len(512)
        .map(|&t| response_at(spec, probe, t))
        .collect()
}

/// Response sampled on `grid`.
pub fn respond(spec: &ChannelSpec, probe: &GaussianProbe, grid: &TimeGrid) -> Result<SampledSignal> {
    SampledSignal::new(grid.start, grid.step, apply_channel(spec, probe, &grid.times()))
}

/// Riemann approximation `sqrt(dt * sum |x_n|^2)`. The caller is responsible
/// for the grid capturing the signal's mass.
pub fn l2_norm_grid(signal: &SampledSignal) -> f64 {
    (signal.dt() * signal.values().iter().map(|v| v.norm_sqr()).sum::<f64>()).sqrt()
}

/// Atoms of `mu_H - mu_K`, merged on identical support points.
///
/// Points are keyed by lattice index when either spec carries a lattice, and
/// by coordinate equality within the snap tolerance otherwise.
pub fn difference_atoms(h: &ChannelSpec, k: &ChannelSpec) -> Vec<((f64, f64), Complex64)> {
    let lattice = h.lattice().or(k.lattice()).copied();
    let mut atoms: Vec<((f64, f64), Complex64)> = Vec::new();
    let mut by_index: HashMap<(i64, i64), usize> = HashMap::new();
    let signed = h
        .taps()
        .iter()
        .map(|t| (t, 1.0))
        .chain(k.taps().iter().map(|t| (t, -1.0)));
    for (tap, sign) in signed {
        let pos = tap.position();
        let a = tap.amplitude() * sign;
        let slot = match lattice.and_then(|l| l.index_of(pos.0, pos.1)) {
            Some(idx) => by_index.get(&idx).copied().or_else(|| {
                by_index.insert(idx, atoms.len());
                None
            }),
            None => atoms.iter().position(|(p, _)| same_point(*p, pos)),
        };
        match slot {
            Some(i) => atoms[i].1 += a,
            None => atoms.push((pos, a)),
        }
    }
    atoms
}

/// `||H - K||` in the operator space: the l2 norm of the difference measure.
pub fn operator_distance(h: &ChannelSpec, k: &ChannelSpec) -> f64 {
    difference_atoms(h, k)
        .iter()
        .map(|(_, a)| a.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// `||Hx - Kx||_{L2, grid} / ||H - K||`.
pub fn identifiability_ratio(
    h: &ChannelSpec,
    k: &ChannelSpec,
    probe: &GaussianProbe,
    grid: &TimeGrid,
) -> Result<f64> {
    let denom = operator_distance(h, k);
    if denom == 0.0 {
        return Err(Error::UndefinedRatio);
    }
    let times = grid.times();
    let diff: Vec<Complex64> = apply_channel(h, probe, &times)
        .into_iter()
        .zip(apply_channel(k, probe, &times))
        .map(|(a, b)| a - b)
        .collect();
    let signal = SampledSignal::new(grid.start, grid.step, diff)?;
    Ok(l2_norm_grid(&signal) / denom)
}
