use estim::math::{RngStream, Tensor};
use estim::neural::{NetworkSpec, TrainConfig};
use estim::sequential::*;
use estim::simulators::{GaussianModel, Simulator};
use estim::transforms::ParamTransform;
use estim::{Error, Estimator, Result};
use proptest::prelude::*;

fn summary(theta_hat: &[f64], samples: &[f64]) -> BootstrapSummary {
    let t = Tensor::new(vec![samples.len(), 1], samples.to_vec()).unwrap();
    BootstrapSummary::from_samples(theta_hat, t, 1.0).unwrap()
}

#[test]
fn three_sample_basic_bootstrap() {
    let s = summary(&[1.0], &[0.5, 1.0, 1.5]);
    assert_eq!(s.stats.bias, vec![0.0]);
    let u = update_bounds(&[1.0], &s, BoundsRule::BasicBootstrap).unwrap();
    // Type-7 quantiles of d = {-0.5, 0, 0.5}: 0.025 -> -0.475, 0.975 -> 0.475.
    assert_eq!(u.bounds.lower, vec![1.0 - 0.475]);
    assert_eq!(u.bounds.upper, vec![1.0 + 0.475]);
    assert_eq!(u.widened, vec![false]);
}

#[test]
fn three_sample_literal_rule() {
    let s = summary(&[1.0], &[0.5, 1.0, 1.5]);
    let u = update_bounds(&[1.0], &s, BoundsRule::PaperLiteral).unwrap();
    // 0.05 -> -0.45 is subtracted, 0.975 -> 0.475 is added.
    assert_eq!(u.bounds.lower, vec![1.45]);
    assert_eq!(u.bounds.upper, vec![1.475]);
    assert_eq!(u.widened, vec![false]);
}

#[test]
fn literal_rule_collapse_is_widened() {
    // Samples above θ̂ make d negative, so Q(0.05) + Q(0.975) < 0 and the
    // literal box inverts.
    let s = summary(&[1.0], &[1.6, 1.8, 2.0]);
    let u = update_bounds(&[1.0], &s, BoundsRule::PaperLiteral).unwrap();
    assert_eq!(u.widened, vec![true]);
    assert!(!u.degenerate);
    let width = u.bounds.upper[0] - u.bounds.lower[0];
    assert!((width - 2.0 * s.stats.sd[0]).abs() < 1e-12);
    // bias = -0.8; raw a₁ = 0.2 + 0.98, a₂ = 0.2 - 0.61, midpoint 0.385.
    let mid = 0.5 * (u.bounds.upper[0] + u.bounds.lower[0]);
    assert!((mid - 0.5 * (1.18 - 0.41)).abs() < 1e-12, "{mid}");
    // The basic rule keeps the same inputs ordered.
    let b = update_bounds(&[1.0], &s, BoundsRule::BasicBootstrap).unwrap();
    assert_eq!(b.widened, vec![false]);
}

#[test]
fn identical_samples_give_epsilon_box() {
    let s = summary(&[2.0], &[2.0, 2.0, 2.0, 2.0]);
    for rule in [BoundsRule::BasicBootstrap, BoundsRule::PaperLiteral] {
        let u = update_bounds(&[2.0], &s, rule).unwrap();
        assert!(u.degenerate);
        let w = u.bounds.upper[0] - u.bounds.lower[0];
        assert!((w - MIN_WIDTH).abs() < 1e-12, "{w}");
        assert!(u.bounds.contains(&[2.0]));
    }
}

#[test]
fn symmetric_samples_center_box_on_estimate() {
    let s = summary(&[0.0], &[-2.0, -1.0, 0.0, 1.0, 2.0]);
    let u = update_bounds(&[0.0], &s, BoundsRule::BasicBootstrap).unwrap();
    assert!((u.bounds.lower[0] + u.bounds.upper[0]).abs() < 1e-12);
}

#[test]
fn stop_rule() {
    let s = summary(&[1.0], &[0.0, 1.0, 2.0]);
    assert!(stop_check(&[1.0], &s, 0.3).unwrap().stop);
    let sd = s.stats.sd[0];
    // |bias| = 0.31 S with γ = 0.3 continues.
    let th = 1.0 + 0.31 * sd;
    let d = stop_check(&[th], &s, 0.3).unwrap();
    assert!(!d.stop && d.per_param == vec![false]);
    assert!(stop_check(&[1.0 + 0.29 * sd], &s, 0.3).unwrap().stop);
    let flat = summary(&[3.0], &[3.0, 3.0]);
    assert!(stop_check(&[3.0], &flat, 0.3).unwrap().stop);
    assert!(stop_check(&[1.0], &s, 1.5).is_err());
}

#[test]
fn sample_prior_examples() {
    let eps = 1e-9;
    let b = ParamBounds::from_pairs(&[(0.0, eps)]).unwrap();
    let t = sample_prior(&b, 100, &mut RngStream::new(1, 0)).unwrap();
    assert!(t.data().iter().all(|&v| (0.0..eps).contains(&v)));

    let b = ParamBounds::from_pairs(&[(-2.0, 1.0), (5.0, 6.0)]).unwrap();
    let t = sample_prior(&b, 100_000, &mut RngStream::new(2, 0)).unwrap();
    assert_eq!(t.shape(), &[100_000, 2]);
    let m = t.column(0).iter().sum::<f64>() / 1e5;
    assert!((m + 0.5).abs() < 0.02, "{m}");
    assert!((0..t.rows()).all(|i| b.contains(t.row(i))));

    assert!(matches!(ParamBounds::from_pairs(&[(1.0, 1.0)]), Err(Error::InvalidBounds { .. })));
}

fn records(thetas: &[f64]) -> Vec<Record> {
    thetas
        .iter()
        .enumerate()
        .map(|(i, &t)| Record {
            id: record_id(1, i),
            iteration: 1,
            theta: vec![t],
            x: vec![t],
        })
        .collect()
}

#[test]
fn replay_selection_counts() {
    let b = ParamBounds::from_pairs(&[(0.0, 1.0)]).unwrap();
    let inside = records(&[0.1, 0.5, 0.9]);
    assert!(replay_select(&inside, &b, 1.0, &mut RngStream::new(1, 0)).unwrap().is_empty());

    let mixed: Vec<f64> = (0..150).map(|i| if i < 100 { 2.0 + i as f64 } else { 0.5 }).collect();
    let recs = records(&mixed);
    let all = replay_select(&recs, &b, 1.0, &mut RngStream::new(1, 0)).unwrap();
    assert_eq!(all.len(), 100);
    assert!(all.iter().all(|r| !b.contains(&r.theta)));
    let some = replay_select(&recs, &b, 0.4, &mut RngStream::new(1, 0)).unwrap();
    assert_eq!(some.len(), 40);
    let mut ids: Vec<u64> = some.iter().map(|r| r.id).collect();
    ids.dedup();
    assert_eq!(ids.len(), 40);
    assert!(replay_select(&recs, &b, 1.5, &mut RngStream::new(1, 0)).is_err());
}

#[test]
fn replay_selection_is_uniform() {
    let b = ParamBounds::from_pairs(&[(0.0, 1.0)]).unwrap();
    let recs = records(&(0..10).map(|i| 5.0 + i as f64).collect::<Vec<_>>());
    let mut hits = [0usize; 10];
    for s in 0..4000 {
        for r in replay_select(&recs, &b, 0.3, &mut RngStream::new(s, 0)).unwrap() {
            hits[(r.theta[0] - 5.0) as usize] += 1;
        }
    }
    // Each record is picked with probability 0.3: 1200 ± 4 sd (sd ≈ 29).
    assert!(hits.iter().all(|&h| (h as f64 - 1200.0).abs() < 116.0), "{hits:?}");
}

#[test]
fn merge_rejects_duplicates() {
    let mut set = TrainingSet { records: records(&[1.0, 2.0]) };
    assert!(set.merge(&records(&[3.0])).is_err());
    let mut other = records(&[3.0]);
    other[0].id = record_id(2, 0);
    set.merge(&other).unwrap();
    assert_eq!(set.len(), 3);
}

#[test]
fn growth_rounds_up() {
    assert_eq!(grow(100), 105);
    assert_eq!(grow(2000), 2100);
    assert_eq!(grow(2100), 2205);
    assert_eq!(grow(2205), 2316);
    assert_eq!(grow(1), 2);
}

/// `x_j = θ + 0.05 z_j`: nearly noiseless and learnable by a linear map.
struct Shift;

impl Simulator for Shift {
    fn param_dim(&self) -> usize {
        1
    }
    fn data_shape(&self) -> Vec<usize> {
        vec![5]
    }
    fn transform(&self) -> &ParamTransform {
        static T: std::sync::OnceLock<ParamTransform> = std::sync::OnceLock::new();
        T.get_or_init(|| ParamTransform::PerCoordinate(vec![estim::transforms::Transform::Identity]))
    }
    fn simulate(&self, theta: &[f64], rng: &mut RngStream) -> Result<Vec<f64>> {
        Ok((0..5).map(|_| theta[0] + 0.05 * rng.normal()).collect())
    }
}

#[test]
fn near_noiseless_linear_model_stops_at_first_iteration() {
    let spec = NetworkSpec::mlp(5, &[], 1);
    let cfg = SequentialConfig {
        n0: 2000,
        b: 500,
        train: TrainConfig {
            epochs: 60,
            batch_size: 50,
            ..TrainConfig::default()
        },
        ..SequentialConfig::default()
    };
    let x0 = [0.51, 0.49, 0.5, 0.5, 0.5];
    let run = run_sequential(&Shift, &spec, &x0, &ParamBounds::from_pairs(&[(0.0, 1.0)]).unwrap(), &cfg, 3).unwrap();
    assert_eq!(run.status, RunStatus::Converged);
    assert_eq!(run.traces.len(), 1);
    assert!((run.last().theta_hat[0] - 0.5).abs() < 0.02);
}

fn gauss_x0(seed: u64) -> Vec<f64> {
    let m = GaussianModel::log_variance(20, 1.0);
    m.simulate(&[1.0], &mut RngStream::new(seed, 99)).unwrap()
}

fn gauss_cfg() -> SequentialConfig {
    SequentialConfig {
        n0: 2000,
        b: 1000,
        max_iterations: 10,
        growth: true,
        ..SequentialConfig::default()
    }
}

#[test]
fn gaussian_run_invariants() {
    let sim = GaussianModel::log_variance(20, 1.0);
    let spec = NetworkSpec::mlp(20, &[50], 1);
    let x0 = gauss_x0(1);
    let init = ParamBounds::from_pairs(&[(-2.0, 1.0)]).unwrap();
    let run = run_sequential(&sim, &spec, &x0, &init, &gauss_cfg(), 1).unwrap();
    let mle = (x0.iter().map(|v| (v - 1.0).powi(2)).sum::<f64>() / 20.0).ln();
    let last = run.last();
    eprintln!("iterations {}, theta {:?}, mle {mle}, sd {:?}", run.traces.len(), last.theta_hat, last.bootstrap.sd);
    for (k, t) in run.traces.iter().enumerate() {
        t.bounds.validate().unwrap();
        assert_eq!(t.iteration, k + 1);
        assert_eq!(t.stopped, k + 1 == run.traces.len() && run.status == RunStatus::Converged);
        if k > 0 {
            assert_eq!(t.n, grow(run.traces[k - 1].n));
        }
    }
    if run.status == RunStatus::Converged {
        let d = &run.data.last().unwrap().bootstrap;
        assert!(stop_check(&last.theta_hat, d, 0.3).unwrap().stop);
    }
    // The stored summary is recomputable from the raw samples.
    for (t, d) in run.traces.iter().zip(&run.data) {
        let again = BootstrapSummary::from_samples(&t.theta_hat, d.bootstrap.samples.clone(), 1.0).unwrap();
        assert_eq!(again.stats, t.bootstrap);
    }
    assert_eq!(run.data.last().unwrap().bootstrap.samples.rows(), 1000);
}

#[test]
fn bootstrap_rows_match_direct_estimates() {
    let sim = GaussianModel::log_variance(20, 1.0);
    let spec = NetworkSpec::mlp(20, &[8], 1);
    let mut rng = RngStream::new(2, 0);
    let thetas = sample_prior(&ParamBounds::from_pairs(&[(0.0, 2.0)]).unwrap(), 200, &mut rng).unwrap();
    let set = TrainingSet::simulate(&sim, &thetas, 1, &RngStream::new(2, 1)).unwrap();
    let (x, y) = set.tensors().unwrap();
    let net = estim::neural::train(&spec, &x, &y, &TrainConfig { epochs: 3, ..TrainConfig::default() }).unwrap();
    let root = RngStream::new(5, 5);
    let s = bootstrap_uncertainty(&net, &sim, &[1.0], 50, &root).unwrap();
    for (i, mut r) in replicate_streams(&root, 50).into_iter().enumerate() {
        let x = sim.simulate(&[1.0], &mut r).unwrap();
        assert_eq!(net.estimate(&x).unwrap()[0], s.samples.row(i)[0]);
    }
}

#[test]
fn bootstrap_rejects_out_of_domain_fit() {
    let sim = GaussianModel::moments(20, false);
    let spec = NetworkSpec::mlp(20, &[], 2);
    let net = estim::neural::TrainedNetwork::from_weights(spec.clone(), spec.init_weights(&mut RngStream::new(1, 0)).unwrap()).unwrap();
    // exp(m₂) = 1 is not above m₁² = 4.
    let err = bootstrap_uncertainty(&net, &sim, &[2.0, 0.0], 10, &RngStream::new(1, 0)).unwrap_err();
    assert!(matches!(err, Error::SimulatorDomain(_)));
}

#[test]
fn bootstrap_median_stable_in_b() {
    let sim = GaussianModel::log_variance(20, 1.0);
    let est = LogVarMle;
    let small = bootstrap_uncertainty(&est, &sim, &[1.0], 1000, &RngStream::new(1, 0)).unwrap();
    let large = bootstrap_uncertainty(&est, &sim, &[1.0], 10_000, &RngStream::new(2, 0)).unwrap();
    let tol = 2.0 * small.stats.sd[0] / 1000f64.sqrt();
    assert!((small.stats.median[0] - large.stats.median[0]).abs() < tol);
}

/// Closed-form log-variance estimate with known mean 1.
struct LogVarMle;

impl Estimator for LogVarMle {
    fn output_dim(&self) -> usize {
        1
    }
    fn estimate(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![(x.iter().map(|v| (v - 1.0).powi(2)).sum::<f64>() / x.len() as f64).ln()])
    }
}

#[test]
fn trace_round_trips_through_ndjson() {
    let sim = GaussianModel::log_variance(20, 1.0);
    let spec = NetworkSpec::mlp(20, &[10], 1);
    let cfg = SequentialConfig {
        n0: 300,
        b: 100,
        max_iterations: 2,
        replay: true,
        train: TrainConfig { epochs: 5, ..TrainConfig::default() },
        ..SequentialConfig::default()
    };
    let init = ParamBounds::from_pairs(&[(-2.0, 1.0)]).unwrap();
    let a = run_sequential(&sim, &spec, &gauss_x0(3), &init, &cfg, 9).unwrap();
    let b = run_sequential(&sim, &spec, &gauss_x0(3), &init, &cfg, 9).unwrap();
    assert_eq!(a.traces, b.traces);
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("trace.ndjson");
    write_trace_ndjson(&p, &a.traces).unwrap();
    assert_eq!(read_trace_ndjson(&p).unwrap(), a.traces);
    if a.traces.len() == 2 {
        assert!(a.traces[1].n_replay <= (0.4 * 300.0) as usize);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn updated_bounds_are_valid(
        theta in -5.0f64..5.0,
        samples in prop::collection::vec(-5.0f64..5.0, 2..40),
        literal in any::<bool>(),
    ) {
        let s = summary(&[theta], &samples);
        let rule = if literal { BoundsRule::PaperLiteral } else { BoundsRule::BasicBootstrap };
        let u = update_bounds(&[theta], &s, rule).unwrap();
        prop_assert!(u.bounds.lower[0] < u.bounds.upper[0]);
    }

    #[test]
    fn interval_is_ordered_and_rescales(samples in prop::collection::vec(-5.0f64..5.0, 2..40), r in 1.0f64..5.0) {
        let t = Tensor::new(vec![samples.len(), 1], samples.clone()).unwrap();
        let one = BootstrapSummary::from_samples(&[0.0], t.clone(), 1.0).unwrap();
        let big = BootstrapSummary::from_samples(&[0.0], t, r).unwrap();
        prop_assert!(one.stats.lower[0] <= one.stats.median[0] && one.stats.median[0] <= one.stats.upper[0]);
        prop_assert!(big.stats.lower[0] <= one.stats.lower[0] + 1e-12);
        prop_assert!(big.stats.upper[0] >= one.stats.upper[0] - 1e-12);
        prop_assert!((big.stats.sd[0] - r * one.stats.sd[0]).abs() < 1e-9);
    }
}
