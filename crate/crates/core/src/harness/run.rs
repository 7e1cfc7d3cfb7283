use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::config::{BuiltModel, ExperimentConfig, SeriesEstimator};
use super::metrics::{metric_table, MetricRow};
use crate::error::{csv_err, Error, Result};
use crate::estimator::Estimator;
use crate::math::{RngStream, Tensor};
use crate::neural::{train, TrainConfig};
use crate::replicate::{estimate_any, ReplicationPlan};
use crate::sequential::{
    run_sequential, sample_prior_where, BootstrapStats, BootstrapSummary, IterationTrace, RunStatus, TrainingSet,
};
use crate::simulators::{ar1_mle, Ar1MleEstimator, SeriesSimulator};
use crate::transforms::Transform;

/// One parameter of one estimate.
///
/// `stage` is the iteration (1-based) for sequential presets and the
/// observed series length for series presets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateRow {
    pub replicate: usize,
    pub stage: usize,
    pub parameter: usize,
    pub theta_hat: f64,
    pub boot_median: f64,
    pub boot_sd: f64,
    pub lower: f64,
    pub upper: f64,
    pub truth: f64,
    /// Closed-form estimate on the unreplicated series (`ar1-replication`).
    pub reference: Option<f64>,
}

/// A training parameter or bootstrap draw. Shared training sets have no
/// replicate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub replicate: Option<usize>,
    pub stage: usize,
    pub parameter: usize,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceLine {
    Iteration {
        config_hash: String,
        replicate: usize,
        trace: IterationTrace,
    },
    Training {
        config_hash: String,
        n: usize,
        train_seed: u64,
        final_loss: f64,
    },
    Series {
        config_hash: String,
        replicate: usize,
        length: usize,
        theta_hat: Vec<f64>,
        plan: ReplicationPlan,
        bootstrap: BootstrapStats,
    },
    /// A replicate that raised an error; its other rows are absent.
    Failure {
        config_hash: String,
        replicate: usize,
        error: String,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub config_hash: String,
    pub total_seconds: f64,
    pub training_seconds: f64,
    pub replicate_seconds: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultBundle {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub estimates: Vec<EstimateRow>,
    pub train: Vec<SampleRow>,
    pub bootstrap: Vec<SampleRow>,
    pub traces: Vec<TraceLine>,
    pub metrics: Vec<MetricRow>,
    /// Replicates that hit the iteration limit without stopping.
    pub not_converged: Vec<usize>,
    /// Replicates that raised an error.
    pub failed: Vec<usize>,
    pub timings: Timings,
}

struct ReplicateOutput {
    estimates: Vec<EstimateRow>,
    train: Vec<SampleRow>,
    bootstrap: Vec<SampleRow>,
    traces: Vec<TraceLine>,
    converged: bool,
    seconds: f64,
}

// Top-level stream roles.
const REPLICATES: u64 = 0;
const SHARED: u64 = 1;

fn stage_rows(
    replicate: usize,
    stage: usize,
    theta_hat: &[f64],
    summary: &BootstrapSummary,
    truth: &[f64],
    reference: Option<&[f64]>,
) -> (Vec<EstimateRow>, Vec<SampleRow>) {
    let s = &summary.stats;
    let est = (0..theta_hat.len())
        .map(|p| EstimateRow {
            replicate,
            stage,
            parameter: p,
            theta_hat: theta_hat[p],
            boot_median: s.median[p],
            boot_sd: s.sd[p],
            lower: s.lower[p],
            upper: s.upper[p],
            truth: truth[p],
            reference: reference.map(|r| r[p]),
        })
        .collect();
    (est, sample_rows(Some(replicate), stage, &summary.samples))
}

fn sample_rows(replicate: Option<usize>, stage: usize, samples: &Tensor) -> Vec<SampleRow> {
    let p = samples.shape()[1];
    let mut out = Vec::with_capacity(samples.data().len());
    for parameter in 0..p {
        for row in samples.data().chunks(p) {
            out.push(SampleRow {
                replicate,
                stage,
                parameter,
                value: row[parameter],
            });
        }
    }
    out
}

fn run_sequential_replicate(cfg: &ExperimentConfig, built: &BuiltModel, hash: &str, i: usize) -> Result<ReplicateOutput> {
    let started = Instant::now();
    let sim = built.simulator();
    let truth = cfg.truth_target()?;
    let rep = RngStream::new(cfg.seed, 0).substream(REPLICATES).substream(i as u64);
    let x0 = sim.simulate(&truth, &mut rep.substream(0))?;
    let init = cfg.initial_bounds(&x0)?;
    let run = run_sequential(sim, &cfg.network, &x0, &init, &cfg.sequential, rep.substream(1).seed())?;
    let mut out = ReplicateOutput {
        estimates: Vec::new(),
        train: Vec::new(),
        bootstrap: Vec::new(),
        traces: Vec::new(),
        converged: run.status == RunStatus::Converged,
        seconds: 0.0,
    };
    for (trace, data) in run.traces.iter().zip(&run.data) {
        let (est, boot) = stage_rows(i, trace.iteration, &trace.theta_hat, &data.bootstrap, &truth, None);
        out.estimates.extend(est);
        out.bootstrap.extend(boot);
        out.train.extend(sample_rows(Some(i), trace.iteration, &data.train_theta));
        out.traces.push(TraceLine::Iteration {
            config_hash: hash.to_string(),
            replicate: i,
            trace: trace.clone(),
        });
    }
    out.seconds = started.elapsed().as_secs_f64();
    Ok(out)
}

fn train_shared(
    cfg: &ExperimentConfig,
    sim: &dyn SeriesSimulator,
    hash: &str,
) -> Result<(Box<dyn Estimator>, Vec<SampleRow>, Option<TraceLine>)> {
    if cfg.model.estimator == SeriesEstimator::Mle {
        return Ok((Box::new(Ar1MleEstimator { transform: Transform::Identity }), Vec::new(), None));
    }
    let shared = RngStream::new(cfg.seed, 0).substream(SHARED);
    let bounds = cfg.initial_bounds(&[])?;
    let n = cfg.sequential.n0;
    let thetas = sample_prior_where(&bounds, n, &mut shared.substream(0), |t| sim.validate(t).is_ok())?;
    let set = TrainingSet::simulate(sim, &thetas, 0, &shared.substream(1))?;
    let (inputs, targets) = set.tensors()?;
    let tcfg = TrainConfig {
        seed: shared.substream(2).seed(),
        ..cfg.sequential.train.clone()
    };
    let net = train(&cfg.network, &inputs, &targets, &tcfg)?;
    let line = TraceLine::Training {
        config_hash: hash.to_string(),
        n,
        train_seed: tcfg.seed,
        final_loss: net.loss_history.last().copied().unwrap_or(f64::NAN),
    };
    Ok((Box::new(net), sample_rows(None, 0, &thetas), Some(line)))
}

fn run_series_replicate(
    cfg: &ExperimentConfig,
    sim: &dyn SeriesSimulator,
    est: &dyn Estimator,
    hash: &str,
    i: usize,
) -> Result<ReplicateOutput> {
    let started = Instant::now();
    let truth = cfg.truth_target()?;
    let rep = RngStream::new(cfg.seed, 0).substream(REPLICATES).substream(i as u64);
    let mut out = ReplicateOutput {
        estimates: Vec::new(),
        train: Vec::new(),
        bootstrap: Vec::new(),
        traces: Vec::new(),
        converged: true,
        seconds: 0.0,
    };
    for &t in &cfg.model.lengths {
        let rng = rep.substream(t as u64);
        let x0 = sim.simulate_len(&truth, t, &mut rng.substream(0))?;
        let se = estimate_any(&x0, est, sim, cfg.model.t_k, cfg.sequential.b, &rng.substream(1), cfg.model.combine)?;
        let reference = if cfg.preset == super::Preset::Ar1Replication {
            Some(vec![ar1_mle(&x0)?])
        } else {
            None
        };
        let (e, b) = stage_rows(i, t, &se.theta_hat, &se.summary, &truth, reference.as_deref());
        out.estimates.extend(e);
        out.bootstrap.extend(b);
        out.traces.push(TraceLine::Series {
            config_hash: hash.to_string(),
            replicate: i,
            length: t,
            theta_hat: se.theta_hat.clone(),
            plan: se.plan,
            bootstrap: se.summary.stats.clone(),
        });
    }
    out.seconds = started.elapsed().as_secs_f64();
    Ok(out)
}

fn failed(hash: &str, i: usize, e: Error) -> ReplicateOutput {
    log::error!("replicate {i} failed: {e}");
    ReplicateOutput {
        estimates: Vec::new(),
        train: Vec::new(),
        bootstrap: Vec::new(),
        traces: vec![TraceLine::Failure {
            config_hash: hash.to_string(),
            replicate: i,
            error: e.to_string(),
        }],
        converged: false,
        seconds: 0.0,
    }
}

/// Runs an experiment in memory. Deterministic given the config.
///
/// A replicate that fails is recorded in `failed` and as a trace line; the
/// remaining replicates still run.
pub fn run(cfg: &ExperimentConfig) -> Result<ResultBundle> {
    cfg.validate()?;
    let started = Instant::now();
    let hash = cfg.hash();
    let built = cfg.build_model()?;
    let mut shared_train = Vec::new();
    let mut traces = Vec::new();
    let mut training_seconds = 0.0;
    let outputs: Vec<ReplicateOutput> = match &built {
        BuiltModel::Plain(_) => (0..cfg.replicates)
            .into_par_iter()
            .map(|i| run_sequential_replicate(cfg, &built, &hash, i).unwrap_or_else(|e| failed(&hash, i, e)))
            .collect(),
        BuiltModel::Series(sim) => {
            let t0 = Instant::now();
            let (est, rows, line) = train_shared(cfg, sim.as_ref(), &hash)?;
            training_seconds = t0.elapsed().as_secs_f64();
            shared_train = rows;
            traces.extend(line);
            (0..cfg.replicates)
                .into_par_iter()
                .map(|i| {
                    run_series_replicate(cfg, sim.as_ref(), est.as_ref(), &hash, i).unwrap_or_else(|e| failed(&hash, i, e))
                })
                .collect()
        }
    };
    let mut bundle = ResultBundle {
        config: cfg.clone(),
        config_hash: hash.clone(),
        estimates: Vec::new(),
        train: shared_train,
        bootstrap: Vec::new(),
        traces,
        metrics: Vec::new(),
        not_converged: Vec::new(),
        failed: Vec::new(),
        timings: Timings {
            config_hash: hash,
            training_seconds,
            ..Timings::default()
        },
    };
    for (i, o) in outputs.into_iter().enumerate() {
        let failure = o.traces.iter().any(|t| matches!(t, TraceLine::Failure { .. }));
        bundle.estimates.extend(o.estimates);
        bundle.train.extend(o.train);
        bundle.bootstrap.extend(o.bootstrap);
        bundle.traces.extend(o.traces);
        bundle.timings.replicate_seconds.push(o.seconds);
        if failure {
            bundle.failed.push(i);
        } else if !o.converged {
            bundle.not_converged.push(i);
        }
    }
    bundle.metrics = metric_table(&bundle.estimates)?;
    bundle.timings.total_seconds = started.elapsed().as_secs_f64();
    Ok(bundle)
}

/// Runs an experiment and writes its files to `dir`.
pub fn run_to_dir(cfg: &ExperimentConfig, dir: impl AsRef<Path>) -> Result<ResultBundle> {
    let bundle = run(cfg)?;
    write_bundle(&bundle, dir)?;
    Ok(bundle)
}

pub const CONFIG_FILE: &str = "config.json";
pub const TRACE_FILE: &str = "trace.ndjson";
pub const ESTIMATES_FILE: &str = "estimates.csv";
pub const BOOTSTRAP_FILE: &str = "bootstrap.csv";
pub const TRAIN_FILE: &str = "train.csv";
pub const METRICS_FILE: &str = "metrics.csv";
pub const TIMINGS_FILE: &str = "timings.json";

#[derive(Serialize, Deserialize)]
struct ConfigEcho {
    config_hash: String,
    config: ExperimentConfig,
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path)?))
}

pub(crate) fn write_csv<T: Serialize>(path: &Path, hash: &str, rows: &[T], header: &[&str]) -> Result<()> {
    let mut out = create(path)?;
    writeln!(out, "# config_hash: {hash}")?;
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a CSV written by [`write_csv`], returning its rows and hash.
pub(crate) fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<(Vec<T>, String)> {
    let mut first = String::new();
    BufReader::new(fs::File::open(path)?).read_line(&mut first)?;
    let hash = first
        .trim_end()
        .strip_prefix("# config_hash: ")
        .ok_or_else(|| Error::Config(format!("{}: missing config hash line", path.display())))?
        .to_string();
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path).map_err(csv_err)?;
    let rows = r.deserialize().collect::<std::result::Result<Vec<T>, _>>().map_err(csv_err)?;
    Ok((rows, hash))
}

const ESTIMATE_HEADER: [&str; 10] = [
    "replicate",
    "stage",
    "parameter",
    "theta_hat",
    "boot_median",
    "boot_sd",
    "lower",
    "upper",
    "truth",
    "reference",
];
const SAMPLE_HEADER: [&str; 4] = ["replicate", "stage", "parameter", "value"];
const METRIC_HEADER: [&str; 7] = ["stage", "parameter", "estimator", "count", "bias", "sd", "rmse"];

pub fn write_metrics(path: &Path, hash: &str, rows: &[MetricRow]) -> Result<()> {
    write_csv(path, hash, rows, &METRIC_HEADER)
}

pub fn write_bundle(bundle: &ResultBundle, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let hash = &bundle.config_hash;
    let path = |f: &str| dir.join(f);

    let echo = ConfigEcho {
        config_hash: hash.clone(),
        config: bundle.config.clone(),
    };
    fs::write(path(CONFIG_FILE), serde_json::to_string_pretty(&echo)? + "\n")?;
    let mut t = create(&path(TRACE_FILE))?;
    for line in &bundle.traces {
        serde_json::to_writer(&mut t, line)?;
        t.write_all(b"\n")?;
    }
    t.flush()?;
    write_csv(&path(ESTIMATES_FILE), hash, &bundle.estimates, &ESTIMATE_HEADER)?;
    write_csv(&path(BOOTSTRAP_FILE), hash, &bundle.bootstrap, &SAMPLE_HEADER)?;
    write_csv(&path(TRAIN_FILE), hash, &bundle.train, &SAMPLE_HEADER)?;
    write_metrics(&path(METRICS_FILE), hash, &bundle.metrics)?;
    fs::write(path(TIMINGS_FILE), serde_json::to_string_pretty(&bundle.timings)? + "\n")?;
    Ok([
        CONFIG_FILE,
        TRACE_FILE,
        ESTIMATES_FILE,
        BOOTSTRAP_FILE,
        TRAIN_FILE,
        METRICS_FILE,
        TIMINGS_FILE,
    ]
    .iter()
    .map(|f| path(f))
    .collect())
}

/// Reads back a directory written by [`write_bundle`].
pub fn load_bundle(dir: impl AsRef<Path>) -> Result<ResultBundle> {
    let dir = dir.as_ref();
    let echo: ConfigEcho = serde_json::from_str(&fs::read_to_string(dir.join(CONFIG_FILE))?)?;
    let hash = echo.config_hash;
    let check = |name: &str, h: String| -> Result<()> {
        if h == hash {
            Ok(())
        } else {
            Err(Error::Config(format!("{name} has config hash {h}, expected {hash}")))
        }
    };
    let (estimates, h) = read_csv(&dir.join(ESTIMATES_FILE))?;
    check(ESTIMATES_FILE, h)?;
    let (bootstrap, h) = read_csv(&dir.join(BOOTSTRAP_FILE))?;
    check(BOOTSTRAP_FILE, h)?;
    let (train, h) = read_csv(&dir.join(TRAIN_FILE))?;
    check(TRAIN_FILE, h)?;
    let (metrics, h) = read_csv(&dir.join(METRICS_FILE))?;
    check(METRICS_FILE, h)?;
    let mut traces = Vec::new();
    for line in fs::read_to_string(dir.join(TRACE_FILE))?.lines().filter(|l| !l.trim().is_empty()) {
        traces.push(serde_json::from_str::<TraceLine>(line)?);
    }
    let timings = match fs::read_to_string(dir.join(TIMINGS_FILE)) {
        Ok(s) => serde_json::from_str(&s)?,
        Err(_) => Timings::default(),
    };
    let (not_converged, failed) = outcomes(&traces);
    Ok(ResultBundle {
        config: echo.config,
        config_hash: hash,
        estimates,
        train,
        bootstrap,
        traces,
        metrics,
        not_converged,
        failed,
        timings,
    })
}

fn outcomes(traces: &[TraceLine]) -> (Vec<usize>, Vec<usize>) {
    let mut last: std::collections::BTreeMap<usize, bool> = Default::default();
    let mut failed = Vec::new();
    for t in traces {
        match t {
            TraceLine::Iteration { replicate, trace, .. } => {
                last.insert(*replicate, trace.stopped);
            }
            TraceLine::Failure { replicate, .. } => failed.push(*replicate),
            _ => {}
        }
    }
    let not_converged = last.into_iter().filter(|&(_, stopped)| !stopped).map(|(r, _)| r).collect();
    (not_converged, failed)
}
