//! Identification of delay-Doppler linear time-varying channels.
//!
//! - [`measures`]: lattices, discrete spreading measures, Beurling-density
//!   estimates and the density criterion for identifiability.
//! - [`channel`]: the channel operator, Gaussian probe and grid L2 norms.
//! - [`analysis`]: Gaussian-window STFT, Bargmann transform and their identity.
//! - [`estimation`]: reduction to damped cisoids and matrix-pencil recovery.
//! - [`io`]: CSV formats.

pub mod analysis;
pub mod channel;
pub mod error;
pub mod estimation;
pub mod io;
pub mod measures;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use analysis::{
    bargmann_transform, stft_gaussian, verify_stft_bargmann, IdentityReport, TimeFreqPoint,
};
pub use channel::{
    apply_channel, identifiability_ratio, l2_norm_grid, operator_distance, GaussianProbe,
    SampledSignal, TimeGrid,
};
pub use error::{Error, Result};
pub use estimation::{
    backmap, identify, lambda_weights, match_taps, matrix_pencil, normalize_samples,
    vandermonde_condition, CisoidModel, EstimationRecord, EstimationResult, IdentifyOptions,
    MatchReport, SamplingPlan,
};
pub use measures::{
    density_estimates, exact_pattern_density, identifiability_verdict, residue_pattern_points,
    windowed_counts, ChannelSpec, DensityReport, Lattice, ResiduePattern, Tap, Verdict,
};
pub use num_complex;

/// Complex number as `{re, im}` in JSON outputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexRecord {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for ComplexRecord {
    fn from(z: Complex64) -> Self {
        Self { re: z.re, im: z.im }
    }
}

impl From<ComplexRecord> for Complex64 {
    fn from(z: ComplexRecord) -> Self {
        Complex64::new(z.re, z.im)
    }
}
