//! Discrete spreading measures, lattices and uniform Beurling densities.
//!
//! A channel's spreading measure is a finite sum of weighted Diracs on the
//! delay-Doppler plane. Its support may be constrained to a lattice `A Z^2`.
//! Densities are estimated by counting points in translates of the half-open
//! square `[0, r)^2`; periodic residue patterns supply sets whose density is
//! known exactly, which is how the estimators are checked.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative per-coordinate tolerance used when snapping points to a lattice.
pub const SNAP_REL_TOL: f64 = 1e-9;

/// Default translate pitch for density scans, as a fraction of the window side.
pub const DEFAULT_GRID_DIVISIONS: f64 = 64.0;

/// Lattice `Xi = A Z^2` with an invertible generator.
///
/// Row 0 of `A` maps to delay (seconds), row 1 to Doppler (hertz).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[[f64; 2]; 2]", into = "[[f64; 2]; 2]")]
pub struct Lattice {
    generator: [[f64; 2]; 2],
}

impl Lattice {
    pub fn new(generator: [[f64; 2]; 2]) -> Result<Self> {
        if generator.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("lattice generator has non-finite entries"));
        }
        let det = det2(&generator);
        let scale = generator
            .iter()
            .flatten()
            .fold(0.0_f64, |acc, v| acc.max(v.abs()));
        if det == 0.0 || det.abs() <= 1e-14 * scale * scale {
            return Err(Error::SingularLattice { det });
        }
        Ok(Self { generator })
    }

    pub fn identity() -> Self {
        Self {
            generator: [[1.0, 0.0], [0.0, 1.0]],
        }
    }

    pub fn diagonal(delay_step: f64, doppler_step: f64) -> Result<Self> {
        Self::new([[delay_step, 0.0], [0.0, doppler_step]])
    }

    pub fn generator(&self) -> [[f64; 2]; 2] {
        self.generator
    }

    pub fn det(&self) -> f64 {
        det2(&self.generator)
    }

    /// Uniform Beurling density `1 / |det A|`.
    pub fn density(&self) -> f64 {
        1.0 / self.det().abs()
    }

    pub fn point(&self, i: i64, j: i64) -> (f64, f64) {
        let a = &self.generator;
        let (i, j) = (i as f64, j as f64);
        (a[0][0] * i + a[0][1] * j, a[1][0] * i + a[1][1] * j)
    }

    /// Integer coordinates of `(tau, nu)` if it lies on the lattice within
    /// [`SNAP_REL_TOL`].
    pub fn index_of(&self, tau: f64, nu: f64) -> Option<(i64, i64)> {
        if !tau.is_finite() || !nu.is_finite() {
            return None;
        }
        let a = &self.generator;
        let det = self.det();
        let fi = (a[1][1] * tau - a[0][1] * nu) / det;
        let fj = (-a[1][0] * tau + a[0][0] * nu) / det;
        if fi.abs() > 9.0e15 || fj.abs() > 9.0e15 {
            return None;
        }
        let (i, j) = (fi.round() as i64, fj.round() as i64);
        let (pt, pn) = self.point(i, j);
        let tol_t = SNAP_REL_TOL * tau.abs().max(a[0][0].abs() + a[0][1].abs());
        let tol_n = SNAP_REL_TOL * nu.abs().max(a[1][0].abs() + a[1][1].abs());
        ((pt - tau).abs() <= tol_t && (pn - nu).abs() <= tol_n).then_some((i, j))
    }

    /// All lattice points inside the closed box `[t0, t1] x [n0, n1]`,
    /// ordered by lattice index.
    pub fn points_in_box(&self, t0: f64, t1: f64, n0: f64, n1: f64) -> Vec<(f64, f64)> {
        // Bound the index range by mapping the box corners through A^{-1}.
        let a = &self.generator;
        let det = self.det();
        let corners = [(t0, n0), (t0, n1), (t1, n0), (t1, n1)];
        let (mut imin, mut imax, mut jmin, mut jmax) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for (t, n) in corners {
            let fi = (a[1][1] * t - a[0][1] * n) / det;
            let fj = (-a[1][0] * t + a[0][0] * n) / det;
            imin = imin.min(fi);
            imax = imax.max(fi);
            jmin = jmin.min(fj);
            jmax = jmax.max(fj);
        }
        let mut out = Vec::new();
        for i in (imin.floor() as i64 - 1)..=(imax.ceil() as i64 + 1) {
            for j in (jmin.floor() as i64 - 1)..=(jmax.ceil() as i64 + 1) {
                let (t, n) = self.point(i, j);
                if t >= t0 && t <= t1 && n >= n0 && n <= n1 {
                    out.push((t, n));
                }
            }
        }
        out
    }
}

impl TryFrom<[[f64; 2]; 2]> for Lattice {
    type Error = Error;
    fn try_from(g: [[f64; 2]; 2]) -> Result<Self> {
        Lattice::new(g)
    }
}

impl From<Lattice> for [[f64; 2]; 2] {
    fn from(l: Lattice) -> Self {
        l.generator
    }
}

fn det2(a: &[[f64; 2]; 2]) -> f64 {
    a[0][0] * a[1][1] - a[0][1] * a[1][0]
}

fn same_coordinate(x: f64, y: f64) -> bool {
    (x - y).abs() <= SNAP_REL_TOL * x.abs().max(y.abs()).max(f64::MIN_POSITIVE)
}

/// Whether two support points coincide within the snap tolerance.
pub fn same_point(p: (f64, f64), q: (f64, f64)) -> bool {
    same_coordinate(p.0, q.0) && same_coordinate(p.1, q.1)
}

/// One atom `a_k delta_{tau_k, nu_k}` of a spreading measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TapRecord", into = "TapRecord")]
pub struct Tap {
    amplitude: Complex64,
    delay: f64,
    doppler: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct TapRecord {
    a_re: f64,
    a_im: f64,
    tau: f64,
    nu: f64,
}

impl Tap {
    pub fn new(amplitude: Complex64, delay: f64, doppler: f64) -> Result<Self> {
        if amplitude == Complex64::new(0.0, 0.0) {
            return Err(Error::invalid("tap amplitude must be nonzero"));
        }
        if !(amplitude.re.is_finite()
            && amplitude.im.is_finite()
            && delay.is_finite()
            && doppler.is_finite())
        {
            return Err(Error::invalid("tap fields must be finite"));
        }
        Ok(Self {
            amplitude,
            delay,
            doppler,
        })
    }

    pub fn amplitude(&self) -> Complex64 {
        self.amplitude
    }

    /// Delay in seconds.
    pub fn delay(&self) -> f64 {
        self.delay
    }

    /// Doppler shift in hertz.
    pub fn doppler(&self) -> f64 {
        self.doppler
    }

    pub fn position(&self) -> (f64, f64) {
        (self.delay, self.doppler)
    }
}

impl TryFrom<TapRecord> for Tap {
    type Error = Error;
    fn try_from(r: TapRecord) -> Result<Self> {
        Tap::new(Complex64::new(r.a_re, r.a_im), r.tau, r.nu)
    }
}

impl From<Tap> for TapRecord {
    fn from(t: Tap) -> Self {
        TapRecord {
            a_re: t.amplitude.re,
            a_im: t.amplitude.im,
            tau: t.delay,
            nu: t.doppler,
        }
    }
}

/// Finite discrete spreading measure, optionally constrained to a lattice.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ChannelSpec {
    taps: Vec<Tap>,
    lattice: Option<Lattice>,
}

impl ChannelSpec {
    pub fn new(taps: Vec<Tap>, lattice: Option<Lattice>) -> Result<Self> {
        match lattice {
            Some(l) => {
                let mut seen = HashSet::with_capacity(taps.len());
                for t in &taps {
                    let idx = l.index_of(t.delay, t.doppler).ok_or(Error::OffLattice {
                        tau: t.delay,
                        nu: t.doppler,
                    })?;
                    if !seen.insert(idx) {
                        return Err(Error::DuplicateSupport {
                            tau: t.delay,
                            nu: t.doppler,
                        });
                    }
                }
            }
            None => {
                for (i, t) in taps.iter().enumerate() {
                    if taps[..i].iter().any(|s| same_point(s.position(), t.position())) {
                        return Err(Error::DuplicateSupport {
                            tau: t.delay,
                            nu: t.doppler,
                        });
                    }
                }
            }
        }
        Ok(Self { taps, lattice })
    }

    pub fn empty(lattice: Option<Lattice>) -> Self {
        Self {
            taps: Vec::new(),
            lattice,
        }
    }

    pub fn taps(&self) -> &[Tap] {
        &self.taps
    }

    pub fn lattice(&self) -> Option<&Lattice> {
        self.lattice.as_ref()
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    /// Support points `(tau_k, nu_k)` in tap order.
    pub fn support(&self) -> Vec<(f64, f64)> {
        self.taps.iter().map(Tap::position).collect()
    }

    /// `||mu||_2`, the operator-space norm.
    pub fn l2_mass(&self) -> f64 {
        self.taps
            .iter()
            .map(|t| t.amplitude.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Total-variation norm `sum |a_k|`.
    pub fn tv_mass(&self) -> f64 {
        self.taps.iter().map(|t| t.amplitude.norm()).sum()
    }
}

/// Second level of a two-level residue pattern.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OuterPeriod {
    pub modulus: u64,
    pub residues: BTreeSet<u64>,
}

/// Periodic subset of `Z^2` built from diagonal residue classes.
///
/// Single level: the union over `r` in `residues` of `(mZ + r)^2`.
/// Two level: the union over `r` in `residues` and `s` in the outer residues
/// of `(m m' Z + m s + r)^2`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ResiduePatternRecord", into = "ResiduePatternRecord")]
pub struct ResiduePattern {
    modulus: u64,
    residues: BTreeSet<u64>,
    outer: Option<OuterPeriod>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ResiduePatternRecord {
    modulus: u64,
    residues: BTreeSet<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    outer: Option<OuterPeriod>,
}

impl ResiduePattern {
    pub fn new(modulus: u64, residues: impl IntoIterator<Item = u64>) -> Result<Self> {
        let residues: BTreeSet<u64> = residues.into_iter().collect();
        check_residues("pattern", modulus, &residues)?;
        Ok(Self {
            modulus,
            residues,
            outer: None,
        })
    }

    pub fn two_level(
        modulus: u64,
        residues: impl IntoIterator<Item = u64>,
        outer_modulus: u64,
        outer_residues: impl IntoIterator<Item = u64>,
    ) -> Result<Self> {
        let mut p = Self::new(modulus, residues)?;
        let outer_residues: BTreeSet<u64> = outer_residues.into_iter().collect();
        check_residues("outer pattern", outer_modulus, &outer_residues)?;
        if modulus.checked_mul(outer_modulus).is_none() {
            return Err(Error::invalid("pattern period overflows"));
        }
        p.outer = Some(OuterPeriod {
            modulus: outer_modulus,
            residues: outer_residues,
        });
        Ok(p)
    }

    /// The set `U_{r<l} (mZ + r)^2`.
    pub fn leading(modulus: u64, count: u64) -> Result<Self> {
        Self::new(modulus, 0..count)
    }

    /// The two-level set `U_{l<=r<m} U_{s<l'} (m m' Z + m s + r)^2`, which
    /// avoids [`ResiduePattern::leading`]`(m, l)`.
    pub fn complement_of_leading(
        modulus: u64,
        count: u64,
        outer_modulus: u64,
        outer_count: u64,
    ) -> Result<Self> {
        Self::two_level(modulus, count..modulus, outer_modulus, 0..outer_count)
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn residues(&self) -> &BTreeSet<u64> {
        &self.residues
    }

    pub fn outer(&self) -> Option<&OuterPeriod> {
        self.outer.as_ref()
    }

    /// Full period: `m` or `m m'`.
    pub fn period(&self) -> u64 {
        match &self.outer {
            Some(o) => self.modulus * o.modulus,
            None => self.modulus,
        }
    }

    /// Residues modulo [`ResiduePattern::period`] of the diagonal classes.
    pub fn period_residues(&self) -> BTreeSet<u64> {
        match &self.outer {
            None => self.residues.clone(),
            Some(o) => o
                .residues
                .iter()
                .flat_map(|s| self.residues.iter().map(move |r| self.modulus * s + r))
                .collect(),
        }
    }

    pub fn contains(&self, i: i64, j: i64) -> bool {
        let p = self.period() as i64;
        let (ri, rj) = (i.rem_euclid(p), j.rem_euclid(p));
        if ri != rj {
            return false;
        }
        let ri = ri as u64;
        match &self.outer {
            None => self.residues.contains(&ri),
            Some(o) => {
                self.residues.contains(&(ri % self.modulus))
                    && o.residues.contains(&(ri / self.modulus))
            }
        }
    }

    /// Number of pattern points in one period cell `[0, P)^2`, and `P`.
    /// Computed by enumerating the cell.
    pub fn period_count(&self) -> (u64, u64) {
        let p = self.period();
        let count = (0..p as i64)
            .map(|i| (0..p as i64).filter(|&j| self.contains(i, j)).count() as u64)
            .sum();
        (count, p)
    }
}

impl TryFrom<ResiduePatternRecord> for ResiduePattern {
    type Error = Error;
    fn try_from(r: ResiduePatternRecord) -> Result<Self> {
        match r.outer {
            None => ResiduePattern::new(r.modulus, r.residues),
            Some(o) => ResiduePattern::two_level(r.modulus, r.residues, o.modulus, o.residues),
        }
    }
}

impl From<ResiduePattern> for ResiduePatternRecord {
    fn from(p: ResiduePattern) -> Self {
        ResiduePatternRecord {
            modulus: p.modulus,
            residues: p.residues,
            outer: p.outer,
        }
    }
}

fn check_residues(what: &str, modulus: u64, residues: &BTreeSet<u64>) -> Result<()> {
    if modulus == 0 {
        return Err(Error::invalid(format!("{what}: modulus must be positive")));
    }
    if modulus > i64::MAX as u64 {
        return Err(Error::invalid(format!("{what}: modulus too large")));
    }
    if residues.is_empty() {
        return Err(Error::invalid(format!("{what}: residue set is empty")));
    }
    if let Some(&r) = residues.iter().find(|&&r| r >= modulus) {
        return Err(Error::invalid(format!(
            "{what}: residue {r} not in [0, {modulus})"
        )));
    }
    Ok(())
}

/// Per-radius translate counts and last-radius density estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    pub radii: Vec<f64>,
    pub n_minus: Vec<usize>,
    pub n_plus: Vec<usize>,
    pub lower_estimate: f64,
    pub upper_estimate: f64,
}

/// Outcome of the density criterion for the class of operators whose support
/// has upper density at most `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Identifiable,
    NotIdentifiable,
    /// `alpha = 1/2`; no statement either way.
    Boundary,
    /// The lattice is too sparse to host supports of density `alpha`.
    HypothesisViolated,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Verdict::Identifiable => "identifiable",
            Verdict::NotIdentifiable => "not_identifiable",
            Verdict::Boundary => "boundary",
            Verdict::HypothesisViolated => "hypothesis_violated",
        };
        f.write_str(s)
    }
}

/// Min and max number of points in grid-sampled translates of `[0, r)^2`.
///
/// `n_plus` scans translates meeting the inflated bounding box. `n_minus`
/// scans translates clamped to the bounding box: inside it along axes where
/// the box is at least `r` wide, covering it along narrower axes. Translate
/// grids are anchored at the lower-left corner of the bounding box.
pub fn windowed_counts(points: &[(f64, f64)], r: f64, grid_step: f64) -> Result<(usize, usize)> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::invalid(format!("window side must be positive, got {r}")));
    }
    if !(grid_step > 0.0 && grid_step.is_finite()) {
        return Err(Error::invalid(format!(
            "grid step must be positive, got {grid_step}"
        )));
    }
    if points.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
        return Err(Error::invalid("points must be finite"));
    }
    if points.is_empty() {
        return Ok((0, 0));
    }

    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let xs: Vec<f64> = sorted.iter().map(|p| p.0).collect();
    let (xmin, xmax) = (xs[0], xs[xs.len() - 1]);
    let ymin = sorted.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let ymax = sorted.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);

    let outer_u = outer_offsets(xmin, xmax, r, grid_step);
    let outer_v = outer_offsets(ymin, ymax, r, grid_step);
    let inner_u = inner_offsets(xmin, xmax, r, grid_step);
    let inner_v = inner_offsets(ymin, ymax, r, grid_step);

    let strip_ys = |u: f64| -> Vec<f64> {
        let lo = xs.partition_point(|&x| x < u);
        let hi = xs.partition_point(|&x| x < u + r);
        let mut ys: Vec<f64> = sorted[lo..hi].iter().map(|p| p.1).collect();
        ys.sort_by(f64::total_cmp);
        ys
    };
    let count_in = |ys: &[f64], v: f64| -> usize {
        ys.partition_point(|&y| y < v + r) - ys.partition_point(|&y| y < v)
    };

    let mut n_plus = 0;
    for &u in &outer_u {
        let ys = strip_ys(u);
        if ys.len() <= n_plus {
            continue;
        }
        for &v in &outer_v {
            n_plus = n_plus.max(count_in(&ys, v));
        }
    }

    let mut n_minus = usize::MAX;
    for &u in &inner_u {
        let ys = strip_ys(u);
        for &v in &inner_v {
            n_minus = n_minus.min(count_in(&ys, v));
        }
    }

    Ok((n_minus, n_plus))
}

fn outer_offsets(lo: f64, hi: f64, r: f64, step: f64) -> Vec<f64> {
    let back = (r / step).floor() as i64;
    let mut out = Vec::new();
    let mut k = -back;
    loop {
        let u = lo + k as f64 * step;
        if u > hi {
            break;
        }
        if u + r > lo {
            out.push(u);
        }
        k += 1;
    }
    out
}

fn inner_offsets(lo: f64, hi: f64, r: f64, step: f64) -> Vec<f64> {
    let mut out = Vec::new();
    if hi - lo >= r {
        let mut k = 0_i64;
        loop {
            let u = lo + k as f64 * step;
            if u > hi - r {
                break;
            }
            out.push(u);
            k += 1;
        }
    } else {
        let mut k = 0_i64;
        loop {
            let u = lo - k as f64 * step;
            if u + r <= hi {
                break;
            }
            out.push(u);
            k += 1;
        }
    }
    out
}

/// Translate counts for every radius with pitch `r / 64`.
pub fn density_estimates(points: &[(f64, f64)], radii: &[f64]) -> Result<DensityReport> {
    density_estimates_with_divisions(points, radii, DEFAULT_GRID_DIVISIONS)
}

pub fn density_estimates_with_divisions(
    points: &[(f64, f64)],
    radii: &[f64],
    divisions: f64,
) -> Result<DensityReport> {
    if radii.is_empty() {
        return Err(Error::invalid("radii must be nonempty"));
    }
    if radii.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("radii must be strictly increasing"));
    }
    if !(divisions > 0.0 && divisions.is_finite()) {
        return Err(Error::invalid("grid divisions must be positive"));
    }
    let counts = radii
        .par_iter()
        .map(|&r| windowed_counts(points, r, r / divisions))
        .collect::<Result<Vec<_>>>()?;
    let (n_minus, n_plus): (Vec<usize>, Vec<usize>) = counts.into_iter().unzip();
    let r_max = radii[radii.len() - 1];
    let area = r_max * r_max;
    Ok(DensityReport {
        radii: radii.to_vec(),
        lower_estimate: n_minus[n_minus.len() - 1] as f64 / area,
        upper_estimate: n_plus[n_plus.len() - 1] as f64 / area,
        n_minus,
        n_plus,
    })
}

/// Points of `A * Pattern` with integer coordinates in `[-half_width, half_width]^2`,
/// ordered by first then second index.
pub fn residue_pattern_points(
    pattern: &ResiduePattern,
    lattice: &Lattice,
    half_width: u64,
) -> Result<Vec<(f64, f64)>> {
    if half_width < pattern.modulus() {
        return Err(Error::invalid(format!(
            "box half-width {half_width} smaller than pattern modulus {}",
            pattern.modulus()
        )));
    }
    let n = i64::try_from(half_width).map_err(|_| Error::invalid("box too large"))?;
    let p = pattern.period() as i64;
    let mut out = Vec::new();
    for i in -n..=n {
        if !pattern.contains(i, i) {
            continue;
        }
        // First j >= -n with j = i (mod p).
        let mut j = -n + (i - (-n)).rem_euclid(p);
        while j <= n {
            out.push(lattice.point(i, j));
            j += p;
        }
    }
    Ok(out)
}

/// Density of `A * Pattern`: points per period cell over the cell area,
/// times the lattice density.
pub fn exact_pattern_density(pattern: &ResiduePattern, lattice: &Lattice) -> f64 {
    let (count, p) = pattern.period_count();
    count as f64 / (p as f64 * p as f64) * lattice.density()
}

/// Density criterion verdict for supports of upper density at most `alpha`
/// on `lattice`.
pub fn identifiability_verdict(alpha: f64, lattice: &Lattice) -> Result<Verdict> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::invalid(format!("alpha must be positive, got {alpha}")));
    }
    Ok(if lattice.density() < 2.0 * alpha {
        Verdict::HypothesisViolated
    } else if alpha < 0.5 {
        Verdict::Identifiable
    } else if alpha > 0.5 {
        Verdict::NotIdentifiable
    } else {
        Verdict::Boundary
    })
}

/// Disjoint periodic supports approaching density `alpha` from below, as
/// used to show non-identifiability for `alpha > 1/2`.
///
/// Returns `(h, k)` with `h = leading(m, l)` where `l / m` approximates
/// `alpha / d` within `1/n`, and `k = complement_of_leading(m, l, m', l')`.
pub fn adversarial_patterns(
    alpha: f64,
    lattice: &Lattice,
    n: u64,
) -> Result<(ResiduePattern, ResiduePattern)> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::invalid(format!("alpha must be positive, got {alpha}")));
    }
    if n == 0 {
        return Err(Error::invalid("n must be positive"));
    }
    let d = lattice.density();
    if d < 2.0 * alpha {
        return Err(Error::invalid(format!(
            "lattice density {d} below 2 * alpha = {}",
            2.0 * alpha
        )));
    }
    let m = n;
    let l = ((alpha / d) * m as f64).floor() as u64;
    if l == 0 {
        return Err(Error::invalid(format!(
            "n = {n} too small to resolve alpha / d = {}",
            alpha / d
        )));
    }
    let q = l as f64 / m as f64;
    let target = alpha / ((1.0 - q) * d);
    let m_outer = ((n as f64) * (1.0 - q) * d).ceil().max(n as f64) as u64;
    let l_outer = ((target * m_outer as f64).floor() as u64).min(m_outer);
    if l_outer == 0 {
        return Err(Error::invalid(format!(
            "n = {n} too small for the second-level ratio {target}"
        )));
    }
    let h = ResiduePattern::leading(m, l)?;
    let k = ResiduePattern::complement_of_leading(m, l, m_outer, l_outer)?;
    Ok((h, k))
}
