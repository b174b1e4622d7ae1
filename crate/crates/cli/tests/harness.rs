use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command as Process;

use ltvid_cli::config::{ScenarioMode, VerifySignal};
use ltvid_cli::output::{config_hash, Manifest, MANIFEST_NAME};
use ltvid_cli::run::{run_density, run_identify, run_sweep, run_verify};
use ltvid_cli::{execute, Command, ExperimentConfig, HarnessError};
use ltvid_core::{ResiduePattern, Verdict};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn load(name: &str) -> ExperimentConfig {
    ExperimentConfig::load(&fixture(name)).unwrap()
}

fn field_of(err: HarnessError) -> String {
    match err {
        HarnessError::Validation { field, .. } => field,
        other => panic!("expected a validation error, got {other}"),
    }
}

#[test]
fn fixtures_round_trip_through_json() {
    for entry in fs::read_dir(fixture("")).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("cfg") {
            continue;
        }
        let a = ExperimentConfig::load(&path).unwrap();
        let b: ExperimentConfig = serde_json::from_str(&a.to_json().unwrap()).unwrap();
        assert_eq!(a, b, "{}", path.display());
        a.validate().unwrap();
    }
    let d = ExperimentConfig::default();
    let back: ExperimentConfig = serde_json::from_str(&d.to_json().unwrap()).unwrap();
    assert_eq!(d, back);
}

#[test]
fn noiseless_fixture_recovers_every_tap() {
    let cfg = load("noiseless_k4.cfg");
    let rep = run_identify(&cfg, cfg.scenario.seed).unwrap();
    assert!(rep.passed);
    assert_eq!(rep.trials.len(), 1);
    let t = &rep.trials[0];
    assert_eq!(t.truth.len(), 4);
    assert!(t.max_rel_err <= 1e-6, "{}", t.max_rel_err);
}

#[test]
fn explicit_and_pattern_scenarios_identify() {
    for name in ["explicit_k2.cfg", "pattern_m2.cfg", "noiseless_batch.cfg"] {
        let cfg = load(name);
        let rep = run_identify(&cfg, cfg.scenario.seed).unwrap();
        assert!(rep.passed, "{name}: {}", rep.worst_rel_err);
    }
    let cfg = load("pattern_m2.cfg");
    let pattern = cfg.scenario.pattern.clone().unwrap();
    let lat = cfg.validate().unwrap().lattice;
    let rep = run_identify(&cfg, 3).unwrap();
    for tap in &rep.trials[0].truth {
        let (i, j) = lat.index_of(tap.delay(), tap.doppler()).unwrap();
        assert!(pattern.contains(i, j));
    }
}

#[test]
fn too_few_samples_fail_validation() {
    let mut cfg = load("noiseless_k4.cfg");
    cfg.plan.count = 2 * cfg.scenario.taps - 1;
    assert_eq!(field_of(cfg.validate().unwrap_err()), "plan.count");
    assert_eq!(field_of(run_identify(&cfg, 7).unwrap_err()), "plan.count");
}

#[test]
fn validation_names_the_offending_field() {
    let base = load("noiseless_k4.cfg");
    let cases: Vec<(&str, Box<dyn Fn(&mut ExperimentConfig)>)> = vec![
        ("lattice", Box::new(|c| c.lattice = [[1.0, 2.0], [0.5, 1.0]])),
        ("probe.center", Box::new(|c| c.probe.center = 7.5)),
        ("probe.bandwidth", Box::new(|c| c.probe.bandwidth = 0.0)),
        ("plan.nu_window", Box::new(|c| c.plan.nu_window = [-4.0, 4.0])),
        ("scenario.index_box", Box::new(|c| c.scenario.index_box.doppler = [-9, 0])),
        ("scenario.taps", Box::new(|c| {
            c.scenario.index_box.delay = [0, 0];
            c.scenario.index_box.doppler = [0, 2];
        })),
        ("scenario.pattern", Box::new(|c| c.scenario.mode = ScenarioMode::Pattern)),
        ("scenario.explicit", Box::new(|c| c.scenario.mode = ScenarioMode::Explicit)),
        ("noise.trials", Box::new(|c| c.noise.trials = 0)),
        ("density.radii", Box::new(|c| c.density.radii = vec![4.0, 2.0])),
        ("verify.dt", Box::new(|c| c.verify.dt = -1.0)),
        ("estimation.order_hint", Box::new(|c| c.estimation.order_hint = Some(40))),
        ("thresholds.tap_rel_err", Box::new(|c| c.thresholds.tap_rel_err = f64::NAN)),
    ];
    for (field, mutate) in cases {
        let mut cfg = base.clone();
        mutate(&mut cfg);
        assert_eq!(field_of(cfg.validate().unwrap_err()), field);
    }
}

#[test]
fn unknown_fields_are_rejected() {
    let mut v: serde_json::Value = serde_json::from_str(&load("noiseless_k4.cfg").to_json().unwrap()).unwrap();
    v["plan"]["sample_count"] = 5.into();
    assert!(serde_json::from_value::<ExperimentConfig>(v).is_err());
}

#[test]
fn density_reports_verdicts_and_exact_density() {
    let mut cfg = ExperimentConfig {
        lattice: [[1.0, 0.0], [0.0, 1.0]],
        ..ExperimentConfig::default()
    };
    cfg.scenario.index_box.doppler = [-3, 3];
    cfg.density.alpha = 0.4;
    let run = run_density(&cfg).unwrap();
    assert_eq!(run.verdict, Verdict::Identifiable);
    assert_eq!(run.exact_density, Some(1.0));
    assert!(run.passed);

    cfg.density.alpha = 0.5;
    assert_eq!(run_density(&cfg).unwrap().verdict, Verdict::Boundary);

    let run = run_density(&load("pattern_m2.cfg")).unwrap();
    assert_eq!(run.exact_density, Some(0.25));
    assert!(run.relative_error.unwrap() <= 0.05);

    let run = run_density(&load("adversarial.cfg")).unwrap();
    assert_eq!(run.verdict, Verdict::NotIdentifiable);
    let adv = run.adversarial.unwrap();
    assert!(adv.disjoint);
    assert_eq!(adv.h, ResiduePattern::leading(10, 3).unwrap());
}

#[test]
fn density_reads_point_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pts.csv");
    let pts: Vec<(f64, f64)> = (0..30)
        .flat_map(|i| (0..30).map(move |j| (i as f64, j as f64)))
        .collect();
    ltvid_core::io::write_points(fs::File::create(&path).unwrap(), &pts).unwrap();
    let mut cfg = ExperimentConfig::default();
    cfg.density.points = Some(path);
    cfg.density.radii = vec![10.0];
    let run = run_density(&cfg).unwrap();
    assert_eq!(run.points, 900);
    assert_eq!(run.exact_density, None);
    assert_eq!((run.report.n_minus[0], run.report.n_plus[0]), (100, 100));
}

#[test]
fn verify_default_reports_both_checks() {
    let cfg = ExperimentConfig::default();
    let rep = run_verify(&cfg, 7).unwrap();
    assert!(rep.identity.passed, "{}", rep.identity.max_abs_err);
    assert!(rep.identity.max_abs_err <= 1e-6);
    assert_eq!(rep.ratio.pairs.len(), 100);
    // Every ratio is bounded by the total-variation to l2 mass ratio of the difference.
    for p in &rep.ratio.pairs {
        if let (Some(r), Some(b)) = (p.ratio, p.tv_over_l2) {
            assert!(r <= b * (1.0 + 1e-9), "pair {}: {r} > {b}", p.pair);
        }
    }
    assert_eq!(rep.passed, rep.ratio.passed && rep.identity.passed);
    assert_eq!(rep.ratio.passed, rep.ratio.exceeding == 0);
}

#[test]
fn verify_flags_degenerate_inputs() {
    let mut cfg = ExperimentConfig::default();
    cfg.verify.signal = VerifySignal::Zero;
    cfg.verify.pairs = 0;
    let rep = run_verify(&cfg, 1).unwrap();
    assert!(rep.identity.degenerate && rep.ratio.degenerate);
    assert!(rep.passed);
}

#[test]
fn coarse_grid_discrepancy_is_larger_but_finite() {
    let mut cfg = ExperimentConfig::default();
    cfg.verify.pairs = 0;
    let fine = run_verify(&cfg, 3).unwrap().identity.max_abs_err;
    cfg.verify.dt *= 2.0;
    let coarse = run_verify(&cfg, 3).unwrap().identity;
    assert!(coarse.max_abs_err.is_finite());
    assert!(coarse.max_abs_err > fine, "{} vs {fine}", coarse.max_abs_err);
    cfg.thresholds.identity_abs_err = coarse.max_abs_err / 2.0;
    assert!(!run_verify(&cfg, 3).unwrap().identity.passed);
}

#[test]
fn random_signal_identity_is_within_its_budget() {
    let mut cfg = ExperimentConfig::default();
    cfg.verify.pairs = 0;
    cfg.verify.signal = VerifySignal::Random {
        components: 4,
        spread: 1.5,
    };
    cfg.thresholds.identity_abs_err = 1e-5;
    let rep = run_verify(&cfg, 11).unwrap();
    assert!(rep.identity.passed, "{}", rep.identity.max_abs_err);
}

#[test]
fn small_sweep_improves_with_snr() {
    let mut cfg = load("sweep.cfg");
    cfg.noise.trials = 30;
    let rep = run_sweep(&cfg, 5).unwrap();
    assert_eq!(rep.levels.len(), 4);
    assert!(rep.nonincreasing, "{:?}", rep.levels.iter().map(|l| l.median_rmse_tau).collect::<Vec<_>>());
    assert!(rep.levels[3].median_rmse_tau < rep.levels[0].median_rmse_tau);
}

#[test]
fn sweep_requires_noise_levels() {
    let cfg = load("noiseless_k4.cfg");
    assert_eq!(field_of(run_sweep(&cfg, 1).unwrap_err()), "noise.snr_db");
}

#[test]
fn manifest_records_hash_seed_and_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = load("noiseless_k4.cfg");
    let out = execute(Command::Identify, &cfg, Some(99), Some(dir.path())).unwrap();
    assert!(out.passed);
    let manifest: Manifest =
        serde_json::from_slice(&fs::read(dir.path().join(MANIFEST_NAME)).unwrap()).unwrap();
    let mut seeded = cfg.clone();
    seeded.scenario.seed = 99;
    assert_eq!(manifest.seed, 99);
    assert_eq!(manifest.config_sha256, config_hash(&seeded).unwrap());
    assert_eq!(manifest.version, env!("CARGO_PKG_VERSION"));
    assert_eq!(manifest.command, "identify");
    let names: Vec<&str> = manifest.files.keys().map(String::as_str).collect();
    assert_eq!(names, ["identify.json", "identify_taps.csv"]);
}

#[test]
fn error_exit_codes() {
    use ltvid_core::Error as E;
    assert_eq!(HarnessError::validation("x", "y").exit_code(), 2);
    assert_eq!(HarnessError::Core(E::Numerical("x".into())).exit_code(), 3);
    assert_eq!(HarnessError::Core(E::DegeneratePole(0)).exit_code(), 3);
    assert_eq!(HarnessError::Core(E::InvalidParameter("x".into())).exit_code(), 2);
}

fn ltvid(args: &[&str]) -> std::process::Output {
    Process::new(env!("CARGO_BIN_EXE_ltvid")).args(args).output().unwrap()
}

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn cli_same_seed_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture("noiseless_k4.cfg");
    let cfg = cfg.to_str().unwrap();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let o = ltvid(&["identify", "--config", cfg, "--seed", "7", "--out", out.to_str().unwrap(), "--check"]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = tree(&dir.path().join("a"));
    assert_eq!(a.len(), 3);
    assert_eq!(a, tree(&dir.path().join("b")));

    let c = dir.path().join("c");
    ltvid(&["identify", "--config", cfg, "--seed", "8", "--out", c.to_str().unwrap()]);
    assert_ne!(a, tree(&c));
}

#[test]
fn cli_exit_statuses() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();

    let bad = dir.path().join("bad.cfg");
    let mut cfg = load("noiseless_k4.cfg");
    cfg.plan.count = 7;
    fs::write(&bad, cfg.to_json().unwrap()).unwrap();
    let o = ltvid(&["identify", "--config", bad.to_str().unwrap(), "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("plan.count"));
    assert!(!dir.path().join(MANIFEST_NAME).exists());

    let o = ltvid(&["identify", "--config", "/nonexistent.cfg", "--out", out]);
    assert_eq!(o.status.code(), Some(2));

    // Tighten a threshold until it cannot be met.
    let strict = dir.path().join("strict.cfg");
    let mut cfg = load("noiseless_k4.cfg");
    cfg.thresholds.tap_rel_err = 1e-300;
    fs::write(&strict, cfg.to_json().unwrap()).unwrap();
    let o = ltvid(&["identify", "--config", strict.to_str().unwrap(), "--out", out, "--check"]);
    assert_eq!(o.status.code(), Some(1));
    let o = ltvid(&["identify", "--config", strict.to_str().unwrap(), "--out", out]);
    assert_eq!(o.status.code(), Some(0));

    let o = ltvid(&["density", "--out", out, "--check"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
}
