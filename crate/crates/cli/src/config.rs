//! Experiment configuration. JSON on disk; every field a run depends on is
//! checked by [`ExperimentConfig::validate`] before any computation starts.

use std::fs;
use std::path::{Path, PathBuf};

use ltvid_core::estimation::LAMBDA_FLOOR;
use ltvid_core::{GaussianProbe, Lattice, ResiduePattern, SamplingPlan, Tap};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

/// Largest number of lattice indices a scenario box may enumerate.
const MAX_BOX_POINTS: i128 = 1 << 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Generator `A` of the lattice `A Z^2`, rows `[[a11, a12], [a21, a22]]`.
    pub lattice: [[f64; 2]; 2],
    pub probe: ProbeConfig,
    pub plan: PlanConfig,
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub estimation: EstimationConfig,
    #[serde(default)]
    pub density: DensityConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub outputs: OutputConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    pub bandwidth: f64,
    /// Probe centre; identification requires it to equal `plan.horizon`.
    pub center: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanConfig {
    pub tau_min: f64,
    pub horizon: f64,
    pub count: usize,
    pub nu_window: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioMode {
    Random,
    Pattern,
    Explicit,
}

/// Inclusive lattice index ranges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexBox {
    pub delay: [i64; 2],
    pub doppler: [i64; 2],
}

impl IndexBox {
    pub fn square(half_width: i64) -> Self {
        Self {
            delay: [-half_width, half_width],
            doppler: [-half_width, half_width],
        }
    }

    pub fn len(&self) -> usize {
        let w = |r: [i64; 2]| (r[1] - r[0] + 1).max(0) as usize;
        w(self.delay) * w(self.doppler)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major `(i, j)` indices.
    pub fn indices(&self) -> impl Iterator<Item = (i64, i64)> + '_ {
        (self.delay[0]..=self.delay[1])
            .flat_map(move |i| (self.doppler[0]..=self.doppler[1]).map(move |j| (i, j)))
    }
}

/// Magnitude law for random tap gains. Phases are always uniform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum AmplitudeLaw {
    /// `|a| = exp(sigma Z - sigma^2 / 2)`, mean one.
    LogNormal { sigma: f64 },
    Unit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub mode: ScenarioMode,
    /// Number of taps `K`.
    pub taps: usize,
    pub index_box: IndexBox,
    pub amplitude: AmplitudeLaw,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern: Option<ResiduePattern>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub explicit: Vec<Tap>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// Empty for noiseless runs. `identify` uses the first level, `sweep` all.
    pub snr_db: Vec<f64>,
    pub trials: usize,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            snr_db: Vec::new(),
            trials: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimationConfig {
    /// Model order; the scenario's `K` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order_hint: Option<usize>,
    /// Select the order from the Hankel singular values instead.
    #[serde(default)]
    pub detect_order: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank_tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityConfig {
    pub alpha: f64,
    /// Support pattern on the lattice; the whole lattice when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern: Option<ResiduePattern>,
    /// CSV point set (`tau,nu`) used instead of a pattern.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<PathBuf>,
    pub radii: Vec<f64>,
    /// Lattice index half-width of the generated point cloud.
    pub half_width: u64,
    /// Resolution for the disjoint adversarial pair when `alpha > 1/2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adversarial_n: Option<u64>,
}

impl Default for DensityConfig {
    fn default() -> Self {
        Self {
            alpha: 0.4,
            pattern: None,
            points: None,
            radii: vec![5.0, 10.0, 20.0],
            half_width: 40,
            adversarial_n: None,
        }
    }
}

/// Test signal for the STFT/Bargmann check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VerifySignal {
    /// The Gaussian window itself, centred at zero.
    Probe,
    /// Sum of time-frequency shifted Gaussians with random shifts in
    /// `[-spread, spread]^2` and random complex weights.
    Random { components: usize, spread: f64 },
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    /// Random operator pairs for the ratio sweep.
    pub pairs: usize,
    pub max_support: usize,
    /// Pair supports are drawn from `[-w, w]^2` lattice indices.
    pub index_half_width: i64,
    pub signal: VerifySignal,
    /// Evaluation points, uniform in `[-extent, extent]^2`.
    pub points: usize,
    pub extent: f64,
    pub dt: f64,
    /// The test signal is tabulated on `[-span, span]`.
    pub span: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            pairs: 100,
            max_support: 8,
            index_half_width: 4,
            signal: VerifySignal::Probe,
            points: 20,
            extent: 2.0,
            dt: 1.0 / 64.0,
            span: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    /// Per-tap relative error for noiseless identification.
    pub tap_rel_err: f64,
    /// Largest accepted median delay RMSE under noise, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub median_rmse_tau: Option<f64>,
    /// Accepted excess of the identifiability ratio over one.
    pub ratio_slack: f64,
    pub identity_abs_err: f64,
    /// Relative gap between windowed and exact density at the largest radius.
    pub density_rel_err: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            tap_rel_err: 1e-6,
            median_rmse_tau: None,
            ratio_slack: 1e-3,
            identity_abs_err: 1e-6,
            density_rel_err: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            formats: vec![Format::Json, Format::Csv],
        }
    }
}

impl Default for ExperimentConfig {
    /// Noiseless four-tap identification on the half-integer lattice.
    fn default() -> Self {
        Self {
            lattice: [[0.5, 0.0], [0.0, 0.5]],
            probe: ProbeConfig {
                bandwidth: 1.0,
                center: 8.0,
            },
            plan: PlanConfig {
                tau_min: 0.0,
                horizon: 8.0,
                count: 64,
                nu_window: [-4.0, 3.99],
            },
            scenario: ScenarioConfig {
                mode: ScenarioMode::Random,
                taps: 4,
                index_box: IndexBox {
                    delay: [0, 4],
                    doppler: [-7, 7],
                },
                amplitude: AmplitudeLaw::LogNormal { sigma: 0.5 },
                pattern: None,
                explicit: Vec::new(),
                seed: 7,
            },
            noise: NoiseConfig::default(),
            estimation: EstimationConfig::default(),
            density: DensityConfig::default(),
            verify: VerifyConfig::default(),
            thresholds: Thresholds::default(),
            outputs: OutputConfig::default(),
        }
    }
}

/// Core objects built from a validated config.
#[derive(Debug, Clone, Copy)]
pub struct Setup {
    pub lattice: Lattice,
    pub probe: GaussianProbe,
    pub plan: SamplingPlan,
}

fn fail<T>(field: &str, message: impl Into<String>) -> Result<T> {
    Err(HarnessError::validation(field, message))
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        fail(field, format!("must be positive and finite, got {v}"))
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| HarnessError::validation("--config", format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|source| HarnessError::Parse {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Checks every precondition of every command.
    pub fn validate(&self) -> Result<Setup> {
        let lattice = Lattice::new(self.lattice)
            .or_else(|e| fail("lattice", e.to_string()))?;

        positive("probe.bandwidth", self.probe.bandwidth)?;
        let b = self.probe.bandwidth;
        let p = &self.plan;
        if !p.tau_min.is_finite() {
            return fail("plan.tau_min", "must be finite");
        }
        positive("plan.horizon", p.horizon)?;
        let k = self.scenario.taps;
        if k == 0 {
            return fail("scenario.taps", "need at least one tap");
        }
        if p.count < 2 * k + 1 {
            return fail(
                "plan.count",
                format!("M = {} is below 2K + 1 = {} for K = {k}", p.count, 2 * k + 1),
            );
        }
        let [lo, hi] = p.nu_window;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return fail("plan.nu_window", format!("need finite lo < hi, got [{lo}, {hi}]"));
        }
        let period = p.count as f64 / p.horizon;
        if hi - lo >= period {
            return fail(
                "plan.nu_window",
                format!("width {} must be below M / horizon = {period}", hi - lo),
            );
        }
        if (self.probe.center - p.horizon).abs() > 1e-12 * p.horizon.abs().max(1.0) {
            return fail(
                "probe.center",
                format!(
                    "must equal plan.horizon = {}, got {}",
                    p.horizon, self.probe.center
                ),
            );
        }
        let lambda_last = b.sqrt() * (-std::f64::consts::PI * b * b * p.horizon * p.horizon / 2.0).exp();
        if !(lambda_last > LAMBDA_FLOOR) {
            return fail(
                "plan.horizon",
                format!("normalization weight at M underflows for B = {b}, T = {}", p.horizon),
            );
        }
        let plan = SamplingPlan::new(p.tau_min, p.horizon, p.count, (lo, hi))
            .or_else(|e| fail("plan", e.to_string()))?;
        let probe = GaussianProbe::new(b, self.probe.center)
            .or_else(|e| fail("probe", e.to_string()))?;

        self.validate_scenario(&lattice)?;
        self.validate_noise()?;
        self.validate_estimation()?;
        self.validate_density()?;
        self.validate_verify()?;
        self.validate_thresholds()?;
        if self.outputs.formats.is_empty() {
            return fail("outputs.formats", "need at least one format");
        }
        Ok(Setup {
            lattice,
            probe,
            plan,
        })
    }

    fn in_window(&self, tau: f64, nu: f64) -> bool {
        let [lo, hi] = self.plan.nu_window;
        tau >= self.plan.tau_min && nu >= lo && nu < hi
    }

    fn validate_scenario(&self, lattice: &Lattice) -> Result<()> {
        let s = &self.scenario;
        let ib = s.index_box;
        if ib.delay[0] > ib.delay[1] || ib.doppler[0] > ib.doppler[1] {
            return fail("scenario.index_box", "ranges must satisfy lo <= hi");
        }
        let size = (ib.delay[1] as i128 - ib.delay[0] as i128 + 1)
            * (ib.doppler[1] as i128 - ib.doppler[0] as i128 + 1);
        if size > MAX_BOX_POINTS {
            return fail("scenario.index_box", format!("{size} indices exceeds {MAX_BOX_POINTS}"));
        }
        match s.amplitude {
            AmplitudeLaw::LogNormal { sigma } if !(sigma >= 0.0 && sigma.is_finite()) => {
                return fail("scenario.amplitude.sigma", format!("must be nonnegative, got {sigma}"));
            }
            _ => {}
        }
        match s.mode {
            ScenarioMode::Random | ScenarioMode::Pattern => {
                let mut available = 0usize;
                for (i, j) in ib.indices() {
                    let (tau, nu) = lattice.point(i, j);
                    if !self.in_window(tau, nu) {
                        return fail(
                            "scenario.index_box",
                            format!(
                                "index ({i}, {j}) maps to (tau, nu) = ({tau}, {nu}), outside \
                                 tau >= {} and nu in [{}, {})",
                                self.plan.tau_min, self.plan.nu_window[0], self.plan.nu_window[1]
                            ),
                        );
                    }
                    let hit = match (&s.mode, &s.pattern) {
                        (ScenarioMode::Pattern, Some(p)) => p.contains(i, j),
                        (ScenarioMode::Pattern, None) => {
                            return fail("scenario.pattern", "required in pattern mode");
                        }
                        _ => true,
                    };
                    available += hit as usize;
                }
                if available < s.taps {
                    return fail(
                        "scenario.taps",
                        format!("K = {} exceeds the {available} eligible indices", s.taps),
                    );
                }
            }
            ScenarioMode::Explicit => {
                if s.explicit.len() != s.taps {
                    return fail(
                        "scenario.explicit",
                        format!("has {} taps, scenario.taps = {}", s.explicit.len(), s.taps),
                    );
                }
                for (n, t) in s.explicit.iter().enumerate() {
                    if !self.in_window(t.delay(), t.doppler()) {
                        return fail(
                            &format!("scenario.explicit[{n}]"),
                            "position outside the identifiable window",
                        );
                    }
                }
                ltvid_core::ChannelSpec::new(s.explicit.clone(), Some(*lattice))
                    .or_else(|e| fail("scenario.explicit", e.to_string()))?;
            }
        }
        Ok(())
    }

    fn validate_noise(&self) -> Result<()> {
        if self.noise.trials == 0 {
            return fail("noise.trials", "must be at least 1");
        }
        for (n, s) in self.noise.snr_db.iter().enumerate() {
            if !s.is_finite() {
                return fail(&format!("noise.snr_db[{n}]"), "must be finite");
            }
        }
        Ok(())
    }

    fn validate_estimation(&self) -> Result<()> {
        if let Some(k) = self.estimation.order_hint {
            if k == 0 || 2 * k + 1 > self.plan.count {
                return fail(
                    "estimation.order_hint",
                    format!("order {k} needs 1 <= 2K + 1 <= M = {}", self.plan.count),
                );
            }
        }
        if self.estimation.detect_order && self.estimation.order_hint.is_some() {
            return fail("estimation.detect_order", "conflicts with estimation.order_hint");
        }
        if let Some(t) = self.estimation.rank_tol {
            if !(t > 0.0 && t < 1.0) {
                return fail("estimation.rank_tol", format!("must lie in (0, 1), got {t}"));
            }
        }
        Ok(())
    }

    fn validate_density(&self) -> Result<()> {
        let d = &self.density;
        positive("density.alpha", d.alpha)?;
        if d.radii.is_empty() {
            return fail("density.radii", "need at least one radius");
        }
        for (n, &r) in d.radii.iter().enumerate() {
            positive(&format!("density.radii[{n}]"), r)?;
        }
        if d.radii.windows(2).any(|w| w[1] <= w[0]) {
            return fail("density.radii", "must be strictly increasing");
        }
        if d.half_width == 0 {
            return fail("density.half_width", "must be positive");
        }
        if let Some(p) = &d.pattern {
            if d.half_width < p.modulus() {
                return fail(
                    "density.half_width",
                    format!("{} is below the pattern modulus {}", d.half_width, p.modulus()),
                );
            }
        }
        if d.pattern.is_some() && d.points.is_some() {
            return fail("density.points", "give either a pattern or a point file");
        }
        if d.adversarial_n == Some(0) {
            return fail("density.adversarial_n", "must be positive");
        }
        Ok(())
    }

    fn validate_verify(&self) -> Result<()> {
        let v = &self.verify;
        if v.max_support == 0 {
            return fail("verify.max_support", "must be at least 1");
        }
        if v.index_half_width < 0 {
            return fail("verify.index_half_width", "must be nonnegative");
        }
        positive("verify.extent", v.extent)?;
        positive("verify.dt", v.dt)?;
        positive("verify.span", v.span)?;
        if let VerifySignal::Random { components, spread } = v.signal {
            if components == 0 {
                return fail("verify.signal.components", "must be at least 1");
            }
            if !(spread >= 0.0 && spread.is_finite()) {
                return fail("verify.signal.spread", "must be nonnegative");
            }
        }
        Ok(())
    }

    fn validate_thresholds(&self) -> Result<()> {
        let t = &self.thresholds;
        positive("thresholds.tap_rel_err", t.tap_rel_err)?;
        positive("thresholds.ratio_slack", t.ratio_slack)?;
        positive("thresholds.identity_abs_err", t.identity_abs_err)?;
        positive("thresholds.density_rel_err", t.density_rel_err)?;
        if let Some(r) = t.median_rmse_tau {
            positive("thresholds.median_rmse_tau", r)?;
        }
        Ok(())
    }
}
