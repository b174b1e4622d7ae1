//! Channel scenarios and reproducible randomness.

use std::f64::consts::PI;

use ltvid_core::num_complex::Complex64;
use ltvid_core::{ChannelSpec, Lattice, Tap};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::{AmplitudeLaw, IndexBox, ScenarioConfig, ScenarioMode};
use crate::error::{HarnessError, Result};

/// Independent random streams derived from one root seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Scenario,
    Noise,
    Pairs,
    Signal,
}

/// Generator for `(stream, level, trial)`. Distinct triples never share a
/// ChaCha stream, so trials can run in any order on any thread.
pub fn trial_rng(root: u64, stream: Stream, level: u32, trial: u32) -> ChaCha8Rng {
    let kind = match stream {
        Stream::Scenario => 0u64,
        Stream::Noise => 1,
        Stream::Pairs => 2,
        Stream::Signal => 3,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(root);
    rng.set_stream((kind << 56) | ((level as u64) << 32) | trial as u64);
    rng
}

pub fn draw_amplitude<R: Rng + ?Sized>(rng: &mut R, law: AmplitudeLaw) -> Complex64 {
    let mag = match law {
        AmplitudeLaw::LogNormal { sigma } => {
            let z: f64 = StandardNormal.sample(rng);
            (sigma * z - sigma * sigma / 2.0).exp()
        }
        AmplitudeLaw::Unit => 1.0,
    };
    Complex64::from_polar(mag, 2.0 * PI * rng.random::<f64>())
}

/// `k` distinct lattice taps with indices drawn uniformly from `candidates`.
pub fn channel_from_indices<R: Rng + ?Sized>(
    rng: &mut R,
    lattice: &Lattice,
    candidates: &[(i64, i64)],
    k: usize,
    law: AmplitudeLaw,
) -> Result<ChannelSpec> {
    if k > candidates.len() {
        return Err(HarnessError::validation(
            "scenario.taps",
            format!("K = {k} exceeds the {} eligible indices", candidates.len()),
        ));
    }
    let picks = sample(rng, candidates.len(), k).into_vec();
    let mut taps = Vec::with_capacity(k);
    for n in picks {
        let (i, j) = candidates[n];
        let (tau, nu) = lattice.point(i, j);
        taps.push(Tap::new(draw_amplitude(rng, law), tau, nu)?);
    }
    Ok(ChannelSpec::new(taps, Some(*lattice))?)
}

pub fn random_channel<R: Rng + ?Sized>(
    rng: &mut R,
    lattice: &Lattice,
    index_box: IndexBox,
    k: usize,
    law: AmplitudeLaw,
) -> Result<ChannelSpec> {
    let candidates: Vec<_> = index_box.indices().collect();
    channel_from_indices(rng, lattice, &candidates, k, law)
}

/// Scenario for one trial.
pub fn build_channel<R: Rng + ?Sized>(
    rng: &mut R,
    lattice: &Lattice,
    scenario: &ScenarioConfig,
) -> Result<ChannelSpec> {
    match scenario.mode {
        ScenarioMode::Random => random_channel(
            rng,
            lattice,
            scenario.index_box,
            scenario.taps,
            scenario.amplitude,
        ),
        ScenarioMode::Pattern => {
            let pattern = scenario
                .pattern
                .as_ref()
                .ok_or_else(|| HarnessError::validation("scenario.pattern", "required in pattern mode"))?;
            let candidates: Vec<_> = scenario
                .index_box
                .indices()
                .filter(|&(i, j)| pattern.contains(i, j))
                .collect();
            channel_from_indices(rng, lattice, &candidates, scenario.taps, scenario.amplitude)
        }
        ScenarioMode::Explicit => Ok(ChannelSpec::new(scenario.explicit.clone(), Some(*lattice))?),
    }
}

/// Two independent channels with support sizes uniform in `1..=max_support`
/// on `[-w, w]^2`. Supports may overlap.
pub fn random_pair<R: Rng + ?Sized>(
    rng: &mut R,
    lattice: &Lattice,
    half_width: i64,
    max_support: usize,
    law: AmplitudeLaw,
) -> Result<(ChannelSpec, ChannelSpec)> {
    let candidates: Vec<_> = IndexBox::square(half_width).indices().collect();
    let cap = max_support.min(candidates.len());
    let kh = rng.random_range(1..=cap);
    let h = channel_from_indices(rng, lattice, &candidates, kh, law)?;
    let kk = rng.random_range(1..=cap);
    let k = channel_from_indices(rng, lattice, &candidates, kk, law)?;
    Ok((h, k))
}

/// Complex white Gaussian noise at `snr_db` relative to the mean sample
/// power `||r||^2 / M`.
pub fn add_awgn<R: Rng + ?Sized>(rng: &mut R, r: &[Complex64], snr_db: f64) -> Vec<Complex64> {
    let power = r.iter().map(|v| v.norm_sqr()).sum::<f64>() / r.len().max(1) as f64;
    let sigma = (power / 10f64.powf(snr_db / 10.0) / 2.0).sqrt();
    r.iter()
        .map(|&v| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            v + Complex64::new(sigma * re, sigma * im)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_differ_and_repeat() {
        let a: u64 = trial_rng(1, Stream::Scenario, 0, 0).random();
        let b: u64 = trial_rng(1, Stream::Scenario, 0, 1).random();
        let c: u64 = trial_rng(1, Stream::Noise, 0, 0).random();
        let d: u64 = trial_rng(1, Stream::Scenario, 0, 0).random();
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, d);
    }

    #[test]
    fn log_normal_magnitudes_have_unit_mean() {
        let mut rng = trial_rng(3, Stream::Scenario, 0, 0);
        let n = 200_000;
        let law = AmplitudeLaw::LogNormal { sigma: 0.5 };
        let mean = (0..n).map(|_| draw_amplitude(&mut rng, law).norm()).sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.01, "{mean}");
    }

    #[test]
    fn random_channel_has_distinct_taps_in_box() {
        let lat = Lattice::diagonal(0.5, 0.25).unwrap();
        let ib = IndexBox {
            delay: [0, 1],
            doppler: [-1, 1],
        };
        let mut rng = trial_rng(0, Stream::Scenario, 0, 0);
        let spec = random_channel(&mut rng, &lat, ib, 6, AmplitudeLaw::Unit).unwrap();
        assert_eq!(spec.len(), 6);
        for t in spec.taps() {
            let (i, j) = lat.index_of(t.delay(), t.doppler()).unwrap();
            assert!((0..=1).contains(&i) && (-1..=1).contains(&j));
            assert!((t.amplitude().norm() - 1.0).abs() < 1e-15);
        }
        assert!(random_channel(&mut rng, &lat, ib, 7, AmplitudeLaw::Unit).is_err());
    }

    #[test]
    fn noise_power_matches_snr() {
        let r = vec![Complex64::new(3.0, -4.0); 100_000];
        let mut rng = trial_rng(5, Stream::Noise, 0, 0);
        let noisy = add_awgn(&mut rng, &r, 20.0);
        let p = noisy
            .iter()
            .zip(&r)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            / r.len() as f64;
        assert!((p / 0.25 - 1.0).abs() < 0.02, "{p}");
    }
}
