use estim::math::stats::{ks_one_sample, ks_two_sample, mean, sample_sd};
use estim::math::{RngStream, Tensor};
use estim::simulators::*;
use estim::{Error, Estimator};

fn frechet_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        (-1.0 / x).exp()
    }
}

#[test]
fn gp_unit_variance_and_correlation() {
    let grid = Grid2D::square(4);
    let cov = PowExpParams { range: 2.0, shape: 1.0 };
    let s = GpSampler::new(&grid, &cov).unwrap();
    let mut rng = RngStream::new(11, 0);
    let reps = 10_000;
    let draws: Vec<Tensor> = (0..reps).map(|_| s.sample(&mut rng)).collect();
    for site in [0, 5, 15] {
        let v: Vec<f64> = draws.iter().map(|d| d.data()[site]).collect();
        let var = sample_sd(&v).unwrap().powi(2);
        assert!((var - 1.0).abs() < 0.05, "site {site} var {var}");
    }
    // Sites 5 and 6 are one unit apart.
    let a: Vec<f64> = draws.iter().map(|d| d.data()[5]).collect();
    let b: Vec<f64> = draws.iter().map(|d| d.data()[6]).collect();
    let corr = a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>() / reps as f64;
    assert!((corr - (-0.5f64).exp()).abs() < 0.05, "corr {corr}");
}

#[test]
fn gp_tiny_range_gives_independent_sites() {
    let grid = Grid2D::square(3);
    let cov = PowExpParams { range: 1e-3, shape: 1.0 };
    let s = GpSampler::new(&grid, &cov).unwrap();
    let mut rng = RngStream::new(3, 0);
    let draws: Vec<Tensor> = (0..5000).map(|_| s.sample(&mut rng)).collect();
    let corr = draws.iter().map(|d| d.data()[0] * d.data()[1]).sum::<f64>() / 5000.0;
    assert!(corr.abs() < 0.06, "corr {corr}");
}

#[test]
fn gp_rejects_bad_params() {
    let grid = Grid2D::square(3);
    assert!(GpSampler::new(&grid, &PowExpParams { range: 1.0, shape: 2.5 }).is_err());
    assert!(GpSampler::new(&grid, &PowExpParams { range: 0.0, shape: 1.0 }).is_err());
    let bad = Grid2D { nx: 1, ny: 3, spacing: 1.0 };
    assert!(GpSampler::new(&bad, &PowExpParams { range: 1.0, shape: 1.0 }).is_err());
}

fn br_site_samples(p: BrownResnickParams, grid: Grid2D, reps: usize, site: usize, seed: u64) -> Vec<f64> {
    let s = BrownResnickSampler::new(&p, &grid, BrownResnickConfig::default()).unwrap();
    let root = RngStream::new(seed, 0);
    (0..reps)
        .map(|i| {
            let (f, st) = s.sample(&mut root.substream(i as u64));
            assert!(!st.capped);
            f.data()[site]
        })
        .collect()
}

#[test]
fn brown_resnick_frechet_margin() {
    let grid = Grid2D::square(6);
    let p = BrownResnickParams { range: 3.0, smoothness: 1.0 };
    let x = br_site_samples(p, grid, 10_000, 14, 5);
    assert!(x.iter().all(|&v| v > 0.0 && v.is_finite()));
    let (_, pval) = ks_one_sample(&x, frechet_cdf).unwrap();
    assert!(pval > 0.01, "KS p = {pval}");
}

#[test]
fn brown_resnick_max_stable() {
    let grid = Grid2D::square(5);
    let p = BrownResnickParams { range: 2.0, smoothness: 1.5 };
    let single = br_site_samples(p, grid, 4000, 7, 21);
    let pooled = br_site_samples(p, grid, 5 * 4000, 7, 22);
    let maxima: Vec<f64> = pooled
        .chunks(5)
        .map(|c| c.iter().cloned().fold(f64::MIN, f64::max) / 5.0)
        .collect();
    let (_, pval) = ks_two_sample(&single, &maxima).unwrap();
    assert!(pval > 0.01, "KS p = {pval}");
}

/// Mean F-madogram over neighbouring pairs; smaller means stronger dependence.
fn mean_madogram(p: BrownResnickParams, seed: u64) -> f64 {
    let grid = Grid2D::square(4);
    let s = BrownResnickSampler::new(&p, &grid, BrownResnickConfig::default()).unwrap();
    let mut rng = RngStream::new(seed, 0);
    let reps = 1000;
    let fields: Vec<Tensor> = (0..reps).map(|_| s.sample(&mut rng).0).collect();
    let mut total = 0.0;
    let mut count = 0.0;
    for a in 0..grid.sites() {
        for b in (a + 1)..grid.sites() {
            let m: f64 = fields
                .iter()
                .map(|f| (frechet_cdf(f.data()[a]) - frechet_cdf(f.data()[b])).abs())
                .sum::<f64>()
                / (2.0 * reps as f64);
            total += m;
            count += 1.0;
        }
    }
    total / count
}

#[test]
fn brown_resnick_dependence_grows_with_range() {
    let short = mean_madogram(BrownResnickParams { range: 0.5, smoothness: 1.0 }, 1);
    let long = mean_madogram(BrownResnickParams { range: 8.0, smoothness: 1.0 }, 1);
    assert!(long < short, "madogram long {long} vs short {short}");
}

#[test]
fn brown_resnick_guards() {
    let p = BrownResnickParams { range: 6.2, smoothness: 1.0 };
    let big = Grid2D::square(65);
    assert!(matches!(
        BrownResnickSampler::new(&p, &big, BrownResnickConfig::default()),
        Err(Error::GridTooLarge { .. })
    ));
    assert!(BrownResnickParams { range: 1.0, smoothness: 2.1 }.validate().is_err());
    assert!(BrownResnickParams { range: -1.0, smoothness: 1.0 }.validate().is_err());
    // A tiny draw cap stops early and reports it.
    let grid = Grid2D::square(4);
    let cfg = BrownResnickConfig { max_sites: 4096, draws_per_site_cap: 0 };
    let s = BrownResnickSampler::new(&p, &grid, cfg).unwrap();
    let (_, st) = s.sample(&mut RngStream::new(1, 1));
    assert!(st.capped);
}

#[test]
fn brown_resnick_deterministic() {
    let p = BrownResnickParams { range: 6.2, smoothness: 1.0 };
    let grid = Grid2D::square(8);
    let a = sim_brown_resnick(&p, &grid, &mut RngStream::new(9, 2)).unwrap();
    let b = sim_brown_resnick(&p, &grid, &mut RngStream::new(9, 2)).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.shape(), &[8, 8]);
}

#[test]
fn powexp_fit_recovers_range() {
    let grid = Grid2D::square(30);
    let cov = PowExpParams { range: 5.0, shape: 1.0 };
    let s = GpSampler::new(&grid, &cov).unwrap();
    let mut rng = RngStream::new(17, 0);
    let fields: Vec<Tensor> = (0..100).map(|_| s.sample(&mut rng).reshape(vec![30, 30]).unwrap()).collect();
    let fit = fit_powexp(&fields, &grid).unwrap();
    assert!((fit.alpha - 5.0).abs() < 1.0, "alpha {}", fit.alpha);
    assert!(fit.eta > 0.0 && fit.eta <= 2.0);
}

#[test]
fn powexp_fit_constant_field_is_degenerate() {
    let grid = Grid2D::square(5);
    let f = Tensor::new(vec![5, 5], vec![3.0; 25]).unwrap();
    assert!(matches!(fit_powexp(&[f], &grid), Err(Error::DegenerateField)));
}

#[test]
fn powexp_fit_white_noise_has_no_range() {
    let grid = Grid2D::square(20);
    let mut rng = RngStream::new(4, 0);
    let fields: Vec<Tensor> = (0..20).map(|_| rng.draw_normal(400).reshape(vec![20, 20]).unwrap()).collect();
    let fit = fit_powexp(&fields, &grid).unwrap();
    let lag1_corr = fit.params().correlation(1.0);
    assert!(
        fit.alpha <= 0.01 * grid.spacing * 1.0001 || lag1_corr <= 0.01,
        "alpha {} eta {} corr {lag1_corr}",
        fit.alpha,
        fit.eta
    );
}

#[test]
fn normal_scores_handle_ties() {
    let z = normal_scores(&[1.0, 1.0, 5.0]);
    assert_eq!(z[0], z[1]);
    assert!(z[2] > z[0]);
    let s = normal_scores(&[3.0, 1.0, 2.0]);
    assert!(s[1] < 0.0 && s[2].abs() < 1e-12 && s[0] > 0.0);
}

#[test]
fn stationary_moments_do_not_depend_on_length() {
    // Marginal variance at the last time point, T vs 2T.
    let reps = 20_000;
    let at_end = |t: usize, seed: u64| -> f64 {
        let root = RngStream::new(seed, 0);
        let v: Vec<f64> = (0..reps)
            .map(|i| *sim_ar1(0.7, t, &mut root.substream(i)).unwrap().data().last().unwrap())
            .collect();
        sample_sd(&v).unwrap().powi(2)
    };
    let target = 1.0 / (1.0 - 0.49);
    // sd of a sample variance is about var·sqrt(2/n) ≈ 0.02.
    for (t, seed) in [(20, 1), (40, 2)] {
        let v = at_end(t, seed);
        assert!((v - target).abs() < 4.0 * target * (2.0 / reps as f64).sqrt(), "T={t}: {v}");
    }
    let p = SvolParams { rho: 0.8, nu: 6.0, sigma: 0.3 };
    for (t, seed) in [(20, 3), (40, 4)] {
        let root = RngStream::new(seed, 0);
        let h: Vec<f64> = (0..reps)
            .map(|i| *sim_svol_with_latent(&p, t, &mut root.substream(i), false).unwrap().1.data().last().unwrap())
            .collect();
        let v = sample_sd(&h).unwrap().powi(2);
        let target = p.latent_sd().powi(2);
        assert!((v - target).abs() < 4.0 * target * (2.0 / reps as f64).sqrt(), "T={t}: {v}");
        assert!(mean(&h).unwrap().abs() < 4.0 * p.latent_sd() / (reps as f64).sqrt());
    }
}

#[test]
fn models_round_trip_parameters() {
    let g = GaussianModel::log_variance(20, 1.0);
    let x = g.simulate(&[0.0], &mut RngStream::new(1, 0)).unwrap();
    assert_eq!(x.len(), 20);
    let br = BrownResnickModel::new(Grid2D::square(5), true);
    let p = br.params(&[6.2f64.ln(), 0.0]).unwrap();
    assert!((p.range - 6.2).abs() < 1e-12 && (p.smoothness - 1.0).abs() < 1e-12);
    let fields = br.simulate_many(&[1.0, 0.0], &mut [RngStream::new(1, 0), RngStream::new(1, 1)]).unwrap();
    assert_eq!(fields.len(), 2);
    assert_eq!(fields[0], br.simulate(&[1.0, 0.0], &mut RngStream::new(1, 0)).unwrap());
    let sv = SvolModel::new(100, 0.1, true);
    assert!(sv.validate(&[9f64.ln(), 4f64.ln()]).is_ok());
    assert_eq!(sv.simulate_len(&[0.0, 0.0], 37, &mut RngStream::new(2, 0)).unwrap().len(), 37);
    let raw = GaussianModel::moments(20, true);
    // Second moment below the squared mean is outside the model.
    assert!(raw.validate(&[2.0, 3.0]).is_err());
}

#[test]
fn ar1_mle_estimator_on_fisher_scale() {
    let m = Ar1Model::new(20_000);
    let theta = [estim::transforms::fisher(0.9).unwrap()];
    let x = m.simulate(&theta, &mut RngStream::new(5, 0)).unwrap();
    let est = Ar1MleEstimator::default().estimate(&x).unwrap()[0];
    let rho = estim::transforms::Transform::Fisher.invert(est).unwrap();
    assert!((rho - 0.9).abs() < 0.01, "rho {rho}");
}

#[test]
fn dataset_csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    let reps = vec![Tensor::from_vec(vec![0.1, -2.5, 1e-17]), Tensor::from_vec(vec![3.0, 4.0, 5.0])];
    write_dataset_csv(&path, &serde_json::json!({"rho": 0.9}), 42, &reps).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("# params: {\"rho\":0.9}\n# seed: 42\nreplicate,v0,v1,v2\n"));
    let back = read_dataset_csv(&path).unwrap();
    assert_eq!(back[0], reps[0].data());
    assert_eq!(back[1], reps[1].data());

    let series = dir.path().join("s.csv");
    std::fs::write(&series, "x\n1.5\n2\n-3\n").unwrap();
    assert_eq!(read_series_csv(&series).unwrap(), vec![1.5, 2.0, -3.0]);
}
