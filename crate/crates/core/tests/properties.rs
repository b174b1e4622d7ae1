use std::collections::BTreeSet;

use ltvid_core::channel::TimeGrid;
use ltvid_core::estimation::{cisoid_parameters, closed_form_samples, simulate_samples};
use ltvid_core::measures::{adversarial_patterns, density_estimates_with_divisions};
use ltvid_core::num_complex::Complex64;
use ltvid_core::*;
use proptest::prelude::*;

fn complex() -> impl Strategy<Value = Complex64> {
    (0.2f64..2.0, -3.2f64..3.2).prop_map(|(r, th)| Complex64::from_polar(r, th))
}

fn pattern() -> impl Strategy<Value = ResiduePattern> {
    (1u64..7)
        .prop_flat_map(|m| (Just(m), prop::collection::btree_set(0..m, 1..=m as usize)))
        .prop_flat_map(|(m, res)| {
            let single = Just(ResiduePattern::new(m, res.clone()).unwrap()).boxed();
            let two = (1u64..5)
                .prop_flat_map(move |mo| {
                    let res = res.clone();
                    prop::collection::btree_set(0..mo, 1..=mo as usize).prop_map(move |ro| {
                        ResiduePattern::two_level(m, res.clone(), mo, ro).unwrap()
                    })
                })
                .boxed();
            prop_oneof![single, two]
        })
}

/// Taps on the lattice `diag(0.25, 0.25)` with delays in `[0, 1.5]` and
/// Dopplers in `[-1.5, 1.5]`.
fn lattice_channel(max: usize) -> impl Strategy<Value = ChannelSpec> {
    let lat = Lattice::diagonal(0.25, 0.25).unwrap();
    prop::collection::btree_map((0i64..=6, -6i64..=6), complex(), 1..=max).prop_map(move |m| {
        let taps = m
            .into_iter()
            .map(|((i, j), a)| {
                let (t, n) = lat.point(i, j);
                Tap::new(a, t, n).unwrap()
            })
            .collect();
        ChannelSpec::new(taps, Some(lat)).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pattern_density_matches_enumeration(p in pattern()) {
        let period = p.period() as i64;
        let mut count = 0u64;
        for i in 0..period {
            for j in 0..period {
                count += p.contains(i, j) as u64;
            }
        }
        let want = count as f64 / (period * period) as f64;
        prop_assert_eq!(exact_pattern_density(&p, &Lattice::identity()), want);
    }

    #[test]
    fn leading_and_complement_are_disjoint(
        m in 1u64..9, l_frac in 0.0f64..1.0, mo in 1u64..6, lo_frac in 0.0f64..1.0,
    ) {
        let l = 1 + ((m - 1) as f64 * l_frac) as u64;
        prop_assume!(l < m);
        let lo = 1 + ((mo - 1) as f64 * lo_frac) as u64;
        let h = ResiduePattern::leading(m, l).unwrap();
        let k = ResiduePattern::complement_of_leading(m, l, mo, lo).unwrap();
        let lat = Lattice::identity();
        let hp: BTreeSet<_> = residue_pattern_points(&h, &lat, 30)
            .unwrap()
            .into_iter()
            .map(|(a, b)| (a as i64, b as i64))
            .collect();
        let kp: BTreeSet<_> = residue_pattern_points(&k, &lat, 30)
            .unwrap()
            .into_iter()
            .map(|(a, b)| (a as i64, b as i64))
            .collect();
        prop_assert!(!kp.is_empty());
        prop_assert!(hp.is_disjoint(&kp));
    }

    #[test]
    fn adversarial_pairs_are_disjoint(alpha in 0.51f64..0.99, n in 2u64..12) {
        let lat = Lattice::identity();
        if let Ok((h, k)) = adversarial_patterns(alpha, &lat, n) {
            let p = (h.period() * k.period()) as i64;
            for i in 0..p {
                prop_assert!(!(h.contains(i, i) && k.contains(i, i)));
            }
        }
    }

    #[test]
    fn response_is_linear(h in lattice_channel(5), s in complex()) {
        let probe = GaussianProbe::new(1.0, 3.0).unwrap();
        let times: Vec<f64> = (0..40).map(|n| n as f64 * 0.15).collect();
        let base = apply_channel(&h, &probe, &times);
        let scaled_taps = h
            .taps()
            .iter()
            .map(|t| Tap::new(t.amplitude() * s, t.delay(), t.doppler()).unwrap())
            .collect();
        let scaled = ChannelSpec::new(scaled_taps, h.lattice().copied()).unwrap();
        let out = apply_channel(&scaled, &probe, &times);
        for (a, b) in base.iter().zip(&out) {
            prop_assert!((a * s - b).norm() <= 1e-14 * (1.0 + b.norm()));
        }
        // Splitting the taps into two channels splits the response.
        let (first, second) = h.taps().split_at(h.len() / 2);
        let p1 = apply_channel(&ChannelSpec::new(first.to_vec(), None).unwrap(), &probe, &times);
        let p2 = apply_channel(&ChannelSpec::new(second.to_vec(), None).unwrap(), &probe, &times);
        for ((a, b), c) in base.iter().zip(&p1).zip(&p2) {
            prop_assert!((a - b - c).norm() <= 1e-14 * (1.0 + a.norm()));
        }
    }

    #[test]
    fn normalized_samples_are_cisoids(h in lattice_channel(4), b in 0.5f64..1.5) {
        let plan = SamplingPlan::new(0.0, 2.0, 24, (-4.0, 3.9)).unwrap();
        let r = simulate_samples(&h, b, &plan).unwrap();
        let y = normalize_samples(&r, b, plan.horizon(), plan.count()).unwrap();
        let params: Vec<_> = h.taps().iter().map(|t| cisoid_parameters(t, b, &plan)).collect();
        let model = CisoidModel::new(
            params.iter().map(|p| p.1).collect(),
            params.iter().map(|p| p.0).collect(),
        )
        .unwrap();
        let synth = model.synthesize(plan.count());
        let scale = synth.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for (a, s) in y.iter().zip(&synth) {
            prop_assert!((a - s).norm() <= 1e-12 * scale);
        }
    }

    #[test]
    fn closed_form_matches_simulation(h in lattice_channel(6), b in 0.5f64..2.0) {
        let plan = SamplingPlan::new(-0.5, 3.0, 20, (-3.0, 3.0)).unwrap();
        let sim = simulate_samples(&h, b, &plan).unwrap();
        let closed = closed_form_samples(&h, b, &plan);
        let scale = sim.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for (a, c) in sim.iter().zip(&closed) {
            prop_assert!((a - c).norm() <= 1e-12 * scale);
        }
    }

    #[test]
    fn backmap_inverts_the_forward_map(h in lattice_channel(5)) {
        let plan = SamplingPlan::new(0.0, 4.0, 32, (-2.0, 5.9)).unwrap();
        let params: Vec<_> = h.taps().iter().map(|t| cisoid_parameters(t, 1.0, &plan)).collect();
        let model = CisoidModel::new(
            params.iter().map(|p| p.1).collect(),
            params.iter().map(|p| p.0).collect(),
        )
        .unwrap();
        let back = backmap(&model, 1.0, &plan).unwrap();
        prop_assert!(back.warnings.is_empty(), "{:?}", back.warnings);
        for (t, e) in h.taps().iter().zip(&back.taps) {
            prop_assert!((t.delay() - e.delay()).abs() < 1e-12);
            prop_assert!((t.doppler() - e.doppler()).abs() < 1e-12);
            prop_assert!((t.amplitude() - e.amplitude()).norm() < 1e-12 * t.amplitude().norm());
        }
    }

    #[test]
    fn pencil_commutes_with_phase_rotation(
        poles in prop::collection::vec((0.5f64..1.0, -3.1f64..3.1), 1..4),
        theta in -3.1f64..3.1,
    ) {
        // Keep the tones well separated in angle.
        let mut args: Vec<f64> = poles.iter().map(|p| p.1).collect();
        args.sort_by(f64::total_cmp);
        prop_assume!(args.windows(2).all(|w| w[1] - w[0] > 0.4));
        prop_assume!(args.len() < 2 || args[0] + 2.0 * std::f64::consts::PI - args[args.len() - 1] > 0.4);
        let z: Vec<Complex64> = poles.iter().map(|&(r, a)| Complex64::from_polar(r, a)).collect();
        let model = CisoidModel::new(z.clone(), vec![Complex64::new(1.0, 0.5); z.len()]).unwrap();
        let y = model.synthesize(24);
        let rot = Complex64::from_polar(1.0, theta);
        let yr: Vec<Complex64> = y.iter().enumerate().map(|(m, v)| v * rot.powi(m as i32 + 1)).collect();
        let k = z.len();
        let a = matrix_pencil(&y, Some(k), 1e-10).unwrap();
        let b = matrix_pencil(&yr, Some(k), 1e-10).unwrap();
        for p in &a.poles {
            let target = p * rot;
            let best = b.poles.iter().map(|q| (q - target).norm()).fold(f64::INFINITY, f64::min);
            prop_assert!(best < 1e-9, "{best}");
        }
    }

    #[test]
    fn pencil_poles_ignore_global_phase(
        poles in prop::collection::vec((0.5f64..1.0, -3.1f64..3.1), 1..4),
        theta in -3.1f64..3.1,
    ) {
        let mut args: Vec<f64> = poles.iter().map(|p| p.1).collect();
        args.sort_by(f64::total_cmp);
        prop_assume!(args.windows(2).all(|w| w[1] - w[0] > 0.4));
        prop_assume!(args.len() < 2 || args[0] + 2.0 * std::f64::consts::PI - args[args.len() - 1] > 0.4);
        let z: Vec<Complex64> = poles.iter().map(|&(r, a)| Complex64::from_polar(r, a)).collect();
        let model = CisoidModel::new(z.clone(), vec![Complex64::new(0.7, -0.2); z.len()]).unwrap();
        let y = model.synthesize(24);
        let rot = Complex64::from_polar(1.0, theta);
        let yr: Vec<Complex64> = y.iter().map(|v| v * rot).collect();
        let a = matrix_pencil(&y, Some(z.len()), 1e-10).unwrap();
        let b = matrix_pencil(&yr, Some(z.len()), 1e-10).unwrap();
        for (pa, aa) in a.poles.iter().zip(&a.amplitudes) {
            let (n, best) = b
                .poles
                .iter()
                .enumerate()
                .map(|(n, q)| (n, (q - pa).norm()))
                .fold((0, f64::INFINITY), |acc, v| if v.1 < acc.1 { v } else { acc });
            prop_assert!(best < 1e-8, "{best}");
            prop_assert!((b.amplitudes[n] - aa * rot).norm() < 1e-8);
        }
    }

    #[test]
    fn noiseless_pipeline_recovers_lattice_channels(h in lattice_channel(6)) {
        let b = 1.0;
        let plan = SamplingPlan::new(0.0, 2.0, 32, (-4.0, 3.9)).unwrap();
        let params: Vec<_> = h.taps().iter().map(|t| cisoid_parameters(t, b, &plan)).collect();
        for (n, (_, z)) in params.iter().enumerate() {
            prop_assert!(z.norm() >= 0.5);
            for (_, w) in &params[..n] {
                prop_assume!((z - w).norm() >= 1e-2);
            }
        }
        let r = simulate_samples(&h, b, &plan).unwrap();
        let opts = IdentifyOptions { order_hint: Some(h.len()), ..IdentifyOptions::default() };
        let res = identify(&r, b, &plan, opts).unwrap().with_matching(h.taps(), 1.0, 1.0).unwrap();
        let m = res.matching.unwrap();
        prop_assert_eq!(m.unmatched(), 0);
        for p in &m.pairs {
            prop_assert!(p.delay_err <= 1e-6 * p.truth.delay().abs().max(1.0));
            prop_assert!(p.doppler_err <= 1e-6 * p.truth.doppler().abs().max(1.0));
            prop_assert!(p.amplitude_err <= 1e-6 * p.truth.amplitude().norm());
        }
    }

    #[test]
    fn verdict_hypothesis_is_scale_invariant(
        alpha in 0.05f64..2.0, c in 0.1f64..10.0, a11 in 0.3f64..2.0, a22 in 0.3f64..2.0,
    ) {
        let lat = Lattice::diagonal(a11, a22).unwrap();
        let s = c.sqrt();
        let scaled = Lattice::diagonal(a11 / s, a22 / s).unwrap();
        let v = identifiability_verdict(alpha, &lat).unwrap();
        let w = identifiability_verdict(c * alpha, &scaled).unwrap();
        prop_assert_eq!(
            v == Verdict::HypothesisViolated,
            w == Verdict::HypothesisViolated
        );
        if (alpha - 0.5).signum() == (c * alpha - 0.5).signum() {
            prop_assert_eq!(v, w);
        }
    }

    #[test]
    fn stft_modulation_shifts_frequency(eta in -1.5f64..1.5, tau in -2.0f64..2.0, nu in -2.0f64..2.0) {
        let grid = TimeGrid::spanning(-12.0, 12.0, 1.0 / 32.0).unwrap();
        let g = GaussianProbe::new(1.0, 0.4).unwrap();
        let x = SampledSignal::from_fn(&grid, |t| g.value(t)).unwrap();
        let xm = SampledSignal::from_fn(&grid, |t| {
            g.value(t) * Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * eta * t)
        })
        .unwrap();
        let lhs = stft_gaussian(&xm, 1.0, TimeFreqPoint::new(tau, nu)).unwrap();
        let rhs = stft_gaussian(&x, 1.0, TimeFreqPoint::new(tau, nu - eta)).unwrap();
        prop_assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn lattice_density_error_decays_like_one_over_r(
        a11 in 0.5f64..2.0, a22 in 0.5f64..2.0, a12 in -1.0f64..1.0,
    ) {
        let lat = Lattice::new([[a11, a12], [0.0, a22]]).unwrap();
        let d = lat.density();
        // Every window of side r holds d (r +/- 2w)^2 points, w the cell diameter.
        let w = a11.hypot(0.0) + a12.hypot(a22);
        let pts = lat.points_in_box(-40.0, 40.0, -40.0, 40.0);
        let radii = [8.0, 16.0];
        let rep = density_estimates_with_divisions(&pts, &radii, 16.0).unwrap();
        for (n, &r) in radii.iter().enumerate() {
            let c = 8.0 * d * w;
            let area = r * r;
            prop_assert!((rep.n_minus[n] as f64 / area - d).abs() <= c / r);
            prop_assert!((rep.n_plus[n] as f64 / area - d).abs() <= c / r);
        }
    }

    #[test]
    fn matching_ignores_input_order(h in lattice_channel(5), shift in 0usize..5) {
        let truth = h.taps().to_vec();
        let mut est: Vec<Tap> = truth
            .iter()
            .map(|t| Tap::new(t.amplitude() * 1.01, t.delay() + 0.01, t.doppler()).unwrap())
            .collect();
        let a = match_taps(&truth, &est, 1.0, 1.0).unwrap();
        let s = shift % est.len();
        est.rotate_left(s);
        let mut rev = truth.clone();
        rev.reverse();
        let b = match_taps(&rev, &est, 1.0, 1.0).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn identity_discrepancy_shrinks_under_refinement() {
    let points: Vec<TimeFreqPoint> = [(-1.7, 0.4), (0.3, -1.9), (1.2, 1.1), (-0.6, -0.8), (1.9, -0.2)]
        .iter()
        .map(|&(t, n)| TimeFreqPoint::new(t, n))
        .collect();
    let g = GaussianProbe::new(1.0, 0.0).unwrap();
    let errs: Vec<f64> = [16.0, 32.0, 64.0]
        .iter()
        .map(|&k| {
            let grid = TimeGrid::spanning(-10.0, 10.0, 1.0 / k).unwrap();
            let x = g.sample(&grid).unwrap();
            verify_stft_bargmann(&x, 1.0, &points).unwrap().max_abs_err
        })
        .collect();
    assert!(errs[1] <= errs[0] / 2.0 && errs[2] <= errs[1] / 2.0, "{errs:?}");
    assert!(errs[2] < 1e-6, "{errs:?}");
}

#[test]
fn identity_holds_for_a_generic_signal() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
    let g = GaussianProbe::new(1.0, 0.0).unwrap();
    let atoms: Vec<(Complex64, f64, f64)> = (0..4)
        .map(|_| {
            (
                Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
                rng.random_range(-1.5..1.5),
                rng.random_range(-1.5..1.5),
            )
        })
        .collect();
    let grid = TimeGrid::spanning(-10.0, 10.0, 1.0 / 64.0).unwrap();
    let x = SampledSignal::from_fn(&grid, |t| {
        atoms.iter().fold(Complex64::new(0.0, 0.0), |acc, &(c, tau, nu)| {
            acc + c * g.real_value(t - tau) * Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * nu * t)
        })
    })
    .unwrap();
    let points: Vec<TimeFreqPoint> = (0..20)
        .map(|_| TimeFreqPoint::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)))
        .collect();
    let rep = verify_stft_bargmann(&x, 1.0, &points).unwrap();
    assert!(rep.max_abs_err <= 1e-5, "{}", rep.max_abs_err);
}

#[test]
fn stft_is_isometric_on_a_dense_grid() {
    // sum |V_g x|^2 d tau d nu over a grid approximates ||x||^2 ||g||^2 = 1.
    let grid = TimeGrid::spanning(-14.0, 14.0, 1.0 / 16.0).unwrap();
    let x = GaussianProbe::new(1.0, 0.3).unwrap().sample(&grid).unwrap();
    let step = 0.25;
    let mut total = 0.0;
    for i in -20..=20 {
        for j in -20..=20 {
            let p = TimeFreqPoint::new(i as f64 * step, j as f64 * step);
            total += stft_gaussian(&x, 1.0, p).unwrap().norm_sqr() * step * step;
        }
    }
    assert!((total - 1.0).abs() < 1e-6, "{total}");
}
