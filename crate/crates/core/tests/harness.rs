use std::fs;
use std::process::Command;

use estim::harness::*;
use estim::Error;
use proptest::prelude::*;

fn small_gauss() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::preset(Preset::GaussVar, Scale::Smoke);
    cfg.apply_set("sequential.n0=500").unwrap();
    cfg.apply_set("sequential.b=500").unwrap();
    cfg.apply_set("sequential.max_iterations=3").unwrap();
    cfg
}

#[test]
fn metrics_examples() {
    let m = metrics(&[vec![1.0, 2.0], vec![1.0, 2.0]], &[1.0, 2.0]).unwrap();
    assert!(m.iter().all(|p| p.bias == 0.0 && p.sd == 0.0 && p.rmse == 0.0));
    let m = metrics(&[vec![0.0], vec![2.0]], &[1.0]).unwrap();
    assert_eq!(m[0].bias, 0.0);
    assert!((m[0].sd - 2f64.sqrt()).abs() < 1e-15);
    assert_eq!(m[0].rmse, 1.0);
    assert!(matches!(metrics(&[vec![0.0]], &[1.0]), Err(Error::DegenerateInput(_))));
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn rmse_decomposes(est in prop::collection::vec(-5.0f64..5.0, 2..50), truth in -5.0f64..5.0) {
        let rows: Vec<Vec<f64>> = est.iter().map(|&v| vec![v]).collect();
        let m = metrics(&rows, &[truth]).unwrap()[0];
        let i = est.len() as f64;
        let rhs = m.bias * m.bias + m.sd * m.sd * (i - 1.0) / i;
        prop_assert!((m.rmse * m.rmse - rhs).abs() < 1e-9 * (1.0 + rhs));
    }

    #[test]
    fn config_round_trips(seed in any::<u64>(), reps in 1usize..50, p in 0usize..6, s in 0usize..3) {
        let scale = [Scale::Smoke, Scale::Small, Scale::Paper][s];
        let mut cfg = ExperimentConfig::preset(Preset::ALL[p], scale);
        cfg.seed = seed;
        cfg.replicates = reps;
        let back = ExperimentConfig::from_json(&cfg.to_json().unwrap()).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.hash(), cfg.hash());
    }
}

#[test]
fn every_preset_validates() {
    for p in Preset::ALL {
        for s in [Scale::Smoke, Scale::Small, Scale::Paper] {
            ExperimentConfig::preset(p, s).validate().unwrap();
        }
        assert_eq!(p.id().parse::<Preset>().unwrap(), p);
    }
}

#[test]
fn config_errors() {
    assert!(matches!("gauss".parse::<Preset>(), Err(Error::Config(_))));
    let mut cfg = small_gauss();
    assert!(matches!(cfg.apply_set("sequential.nope=1"), Err(Error::Config(_))));
    assert!(matches!(cfg.apply_set("replicates=-1"), Err(Error::Config(_))));
    assert!(matches!(cfg.apply_set("no_equals"), Err(Error::Config(_))));
    cfg.apply_set("replicates=0").unwrap();
    assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    let mut cfg = small_gauss();
    cfg.truth = vec![-1.0];
    assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    let mut cfg = small_gauss();
    cfg.apply_set("model.j=30").unwrap();
    assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    let json = small_gauss().to_json().unwrap().replacen("\"seed\"", "\"sead\"", 1);
    assert!(matches!(ExperimentConfig::from_json(&json), Err(Error::Config(_))));
}

#[test]
fn set_changes_the_hash() {
    let a = small_gauss();
    let mut b = a.clone();
    b.apply_set("seed=2").unwrap();
    assert_eq!(b.seed, 2);
    assert_ne!(a.hash(), b.hash());
    b.apply_set("sequential.bounds_rule=\"literal\"").unwrap();
    assert_eq!(b.sequential.bounds_rule, estim::sequential::BoundsRule::PaperLiteral);
}

#[test]
fn run_writes_consistent_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_gauss();
    let bundle = run_to_dir(&cfg, dir.path()).unwrap();
    for f in [CONFIG_FILE, TRACE_FILE, ESTIMATES_FILE, BOOTSTRAP_FILE, TRAIN_FILE, METRICS_FILE, TIMINGS_FILE] {
        let text = fs::read_to_string(dir.path().join(f)).unwrap();
        assert!(text.contains(&bundle.config_hash), "{f} lacks the config hash");
    }
    let loaded = load_bundle(dir.path()).unwrap();
    assert_eq!(loaded.config, cfg);
    assert_eq!(loaded.estimates, bundle.estimates);
    assert_eq!(loaded.traces, bundle.traces);
    assert_eq!(loaded.metrics, metric_table(&loaded.estimates).unwrap());
    assert_eq!(loaded.not_converged, bundle.not_converged);

    // The stop decision of every converged replicate holds on the persisted numbers.
    for line in &loaded.traces {
        if let TraceLine::Iteration { trace, .. } = line {
            let holds = trace
                .theta_hat
                .iter()
                .zip(&trace.bootstrap.median)
                .zip(&trace.bootstrap.sd)
                .all(|((t, m), s)| (t - m).abs() <= cfg.sequential.gamma * s);
            assert_eq!(holds, trace.stopped);
        }
    }
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = small_gauss();
    run_to_dir(&cfg, a.path()).unwrap();
    run_to_dir(&cfg, b.path()).unwrap();
    for f in [METRICS_FILE, TRACE_FILE, ESTIMATES_FILE, BOOTSTRAP_FILE] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

fn data_lines(path: &std::path::Path) -> usize {
    fs::read_to_string(path).unwrap().lines().filter(|l| !l.starts_with('#')).count() - 1
}

#[test]
fn plotdata_row_counts() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = run(&small_gauss()).unwrap();
    emit_plotdata(&bundle, dir.path()).unwrap();
    let mut expected = 0;
    for line in &bundle.traces {
        if let TraceLine::Iteration { trace, .. } = line {
            expected += trace.n + trace.bootstrap.replicates + 2;
        }
    }
    assert_eq!(data_lines(&dir.path().join(BOXPLOT_FILE)), expected);
    let text = fs::read_to_string(dir.path().join(BOXPLOT_FILE)).unwrap();
    for role in ["train", "bootstrap", "fitted", "truth"] {
        assert!(text.contains(&format!(",{role},")));
    }
    assert_eq!(data_lines(&dir.path().join(INTERVALS_FILE)), 5 * bundle.estimates.len());

    let mut empty = bundle.clone();
    empty.estimates.clear();
    empty.train.clear();
    empty.bootstrap.clear();
    let dir = tempfile::tempdir().unwrap();
    emit_plotdata(&empty, dir.path()).unwrap();
    for f in [BOXPLOT_FILE, SCATTER_FILE, INTERVALS_FILE] {
        assert_eq!(data_lines(&dir.path().join(f)), 0, "{f}");
    }
}

#[test]
fn series_presets_run() {
    for p in [Preset::Svol, Preset::Ar1Replication] {
        let cfg = ExperimentConfig::preset(p, Scale::Smoke);
        let b = run(&cfg).unwrap();
        assert!(b.failed.is_empty());
        let rows = cfg.replicates * cfg.model.lengths.len() * cfg.truth.len();
        assert_eq!(b.estimates.len(), rows);
        assert!(b.estimates.iter().all(|e| cfg.model.lengths.contains(&e.stage)));
        assert_eq!(b.estimates.iter().any(|e| e.reference.is_some()), p == Preset::Ar1Replication);
    }
}

#[test]
fn brown_resnick_initial_box_comes_from_the_data() {
    let cfg = ExperimentConfig::preset(Preset::BrownResnick, Scale::Smoke);
    let b = run(&cfg).unwrap();
    assert!(b.failed.is_empty());
    let first = b.traces.iter().find_map(|t| match t {
        TraceLine::Iteration { trace, .. } if trace.iteration == 1 => Some(trace.bounds.clone()),
        _ => None,
    });
    let bounds = first.unwrap();
    assert!((bounds.upper[0] - bounds.lower[0] - 2.0 * cfg.model.offset).abs() < 1e-12);
    assert!((bounds.lower[1] - estim::transforms::logit2(0.1).unwrap()).abs() < 1e-12);
}

fn estim_cli(args: &[&str]) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_estim"))
        .args(args)
        .output()
        .unwrap()
        .status
        .code()
        .unwrap()
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(estim_cli(&["run", "unknown-preset"]), 2);
    assert_eq!(estim_cli(&["run", "gauss-var", "--set", "sequential.bogus=1"]), 2);
    assert_eq!(estim_cli(&["run", "gauss-var", "--bounds-rule", "wide"]), 2);
    let ok = [
        "run",
        "gauss-var",
        "--scale",
        "smoke",
        "--set",
        "sequential.n0=500",
        "--set",
        "sequential.b=500",
        "--set",
        "sequential.max_iterations=3",
        "--out",
        out,
    ];
    assert_eq!(estim_cli(&ok), 0);
    assert!(dir.path().join(METRICS_FILE).exists());
    assert_eq!(estim_cli(&["metrics", out]), 0);
    assert_eq!(estim_cli(&["plotdata", out]), 0);
    assert!(dir.path().join(BOXPLOT_FILE).exists());
    assert_eq!(estim_cli(&["metrics", "/nonexistent/dir"]), 3);
    let strict = [
        "run",
        "gauss-var",
        "--scale",
        "smoke",
        "--set",
        "sequential.max_iterations=1",
        "--set",
        "sequential.gamma=0.01",
        "--require-convergence",
        "--out",
        out,
    ];
    assert_eq!(estim_cli(&strict), 4);
}
