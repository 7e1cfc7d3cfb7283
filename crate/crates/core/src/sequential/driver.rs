use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::bootstrap::{bootstrap_uncertainty, BootstrapStats, BootstrapSummary};
use super::bounds::{sample_prior_where, stop_check, update_bounds, BoundsRule, ParamBounds, StopDecision};
use super::data::{replay_select, Record, TrainingSet};
use crate::error::{Error, Result};
use crate::math::{RngStream, Tensor};
use crate::neural::{train, train_from, NetworkSpec, TrainConfig, TrainedNetwork};
use crate::simulators::Simulator;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SequentialConfig {
    /// Training-set size at the first iteration.
    pub n0: usize,
    /// Bootstrap replicates per iteration.
    pub b: usize,
    pub gamma: f64,
    pub max_iterations: usize,
    /// Grow `N` by 5% (rounded up) after every iteration.
    pub growth: bool,
    /// Carry a fraction of out-of-box samples into later iterations.
    pub replay: bool,
    pub replay_fraction: f64,
    pub bounds_rule: BoundsRule,
    /// Start each fit from the previous weights instead of a fresh init.
    pub warm_start: bool,
    pub train: TrainConfig,
}

impl Default for SequentialConfig {
    fn default() -> Self {
        Self {
            n0: 10_000,
            b: 1000,
            gamma: 0.3,
            max_iterations: 20,
            growth: false,
            replay: false,
            replay_fraction: 0.4,
            bounds_rule: BoundsRule::BasicBootstrap,
            warm_start: false,
            train: TrainConfig::default(),
        }
    }
}

impl SequentialConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n0 == 0 || self.b < 2 || self.max_iterations == 0 {
            return Err(Error::Config("n0 >= 1, b >= 2 and max_iterations >= 1 are required".into()));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::Config(format!("gamma must lie in (0, 1), got {}", self.gamma)));
        }
        if !(0.0..=1.0).contains(&self.replay_fraction) {
            return Err(Error::Config(format!(
                "replay_fraction must lie in [0, 1], got {}",
                self.replay_fraction
            )));
        }
        Ok(())
    }
}

/// `⌈1.05 n⌉` in integer arithmetic.
pub fn grow(n: usize) -> usize {
    (105 * n).div_ceil(100)
}

/// One iteration of the procedure, as persisted in the trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    /// 1-based.
    pub iteration: usize,
    pub bounds: ParamBounds,
    /// Freshly simulated pairs.
    pub n: usize,
    /// Replayed pairs merged into training.
    pub n_replay: usize,
    pub train_seed: u64,
    pub learning_rate: f64,
    pub final_loss: f64,
    pub theta_hat: Vec<f64>,
    pub bootstrap: BootstrapStats,
    pub stop: StopDecision,
    pub stopped: bool,
    /// Box for the next iteration; absent on the last record.
    pub next_bounds: Option<ParamBounds>,
    pub widened: Vec<bool>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Converged,
    NotConverged,
}

/// Raw per-iteration samples kept for plotting and re-checks.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationData {
    /// `θ` rows of the fresh training set.
    pub train_theta: Tensor,
    pub bootstrap: BootstrapSummary,
}

#[derive(Clone, Debug)]
pub struct SequentialRun {
    pub traces: Vec<IterationTrace>,
    pub data: Vec<IterationData>,
    pub status: RunStatus,
    pub network: TrainedNetwork,
    /// Wall-clock seconds per iteration; kept out of the trace so traces
    /// are reproducible byte for byte.
    pub timings: Vec<f64>,
}

impl SequentialRun {
    pub fn last(&self) -> &IterationTrace {
        self.traces.last().expect("a run has at least one iteration")
    }
}

// Stream roles under each iteration's stream.
const PRIOR: u64 = 0;
const SIMULATE: u64 = 1;
const TRAIN: u64 = 2;
const BOOTSTRAP: u64 = 3;
const REPLAY: u64 = 4;

fn fit(
    spec: &NetworkSpec,
    prev: Option<&TrainedNetwork>,
    inputs: &Tensor,
    targets: &Tensor,
    cfg: &TrainConfig,
) -> Result<TrainedNetwork> {
    match prev {
        Some(net) => train_from(spec, net.weights.clone(), inputs, targets, cfg),
        None => train(spec, inputs, targets, cfg),
    }
}

/// Trains, retrying once at a tenth of the learning rate on divergence.
fn fit_with_retry(
    spec: &NetworkSpec,
    prev: Option<&TrainedNetwork>,
    inputs: &Tensor,
    targets: &Tensor,
    cfg: &TrainConfig,
) -> Result<TrainedNetwork> {
    match fit(spec, prev, inputs, targets, cfg) {
        Err(Error::NonFiniteLoss { epoch }) => {
            log::warn!("training diverged at epoch {epoch}; retrying with learning rate / 10");
            let slower = TrainConfig {
                learning_rate: cfg.learning_rate / 10.0,
                ..cfg.clone()
            };
            fit(spec, prev, inputs, targets, &slower)
        }
        other => other,
    }
}

/// Runs the iterative procedure on observed data `x0`, starting from `init`.
///
/// Each iteration samples `N` parameters in the current box, simulates,
/// trains (on fresh pairs plus any replay buffer), estimates `θ̂₀`,
/// bootstraps at `θ̂₀` and either stops or moves the box.
pub fn run_sequential(
    sim: &dyn Simulator,
    spec: &NetworkSpec,
    x0: &[f64],
    init: &ParamBounds,
    cfg: &SequentialConfig,
    seed: u64,
) -> Result<SequentialRun> {
    cfg.validate()?;
    init.validate()?;
    if init.dim() != sim.param_dim() || spec.output_dim != sim.param_dim() {
        return Err(Error::Config(format!(
            "dimension mismatch: bounds {}, simulator {}, network outputs {}",
            init.dim(),
            sim.param_dim(),
            spec.output_dim
        )));
    }
    if x0.len() != spec.input_len() || x0.len() != sim.data_len() {
        return Err(Error::ShapeMismatch {
            expected: sim.data_shape(),
            got: vec![x0.len()],
        });
    }
    let x0 = sim.prepare(x0.to_vec());
    let x0 = x0.as_slice();
    let root = RngStream::new(seed, 0);
    let mut bounds = init.clone();
    let mut n = cfg.n0;
    let mut buffer: Vec<Record> = Vec::new();
    let mut traces = Vec::new();
    let mut data = Vec::new();
    let mut timings = Vec::new();
    let mut network: Option<TrainedNetwork> = None;
    let mut status = RunStatus::NotConverged;

    for iteration in 1..=cfg.max_iterations {
        let started = Instant::now();
        let it_rng = root.substream(iteration as u64);
        let step = || -> Result<(IterationTrace, IterationData, TrainedNetwork, Vec<Record>)> {
            let thetas = sample_prior_where(&bounds, n, &mut it_rng.substream(PRIOR), |t| sim.validate(t).is_ok())?;
            let fresh = TrainingSet::simulate(sim, &thetas, iteration, &it_rng.substream(SIMULATE))?;
            let mut training = fresh.clone();
            let n_replay = if cfg.replay { buffer.len() } else { 0 };
            if cfg.replay {
                training.merge(&buffer)?;
            }
            let (inputs, targets) = training.tensors()?;
            let train_seed = it_rng.substream(TRAIN).seed();
            let tcfg = TrainConfig {
                seed: train_seed,
                ..cfg.train.clone()
            };
            let prev = if cfg.warm_start { network.as_ref() } else { None };
            let net = fit_with_retry(spec, prev, &inputs, &targets, &tcfg)?;
            let theta_hat = net.predict(x0)?;
            let summary = bootstrap_uncertainty(&net, sim, &theta_hat, cfg.b, &it_rng.substream(BOOTSTRAP))?;
            let stop = stop_check(&theta_hat, &summary, cfg.gamma)?;
            let last = stop.stop || iteration == cfg.max_iterations;
            let (next_bounds, widened, replayed) = if last {
                (None, vec![false; theta_hat.len()], Vec::new())
            } else {
                let upd = update_bounds(&theta_hat, &summary, cfg.bounds_rule)?;
                let replayed = if cfg.replay {
                    replay_select(&fresh.records, &upd.bounds, cfg.replay_fraction, &mut it_rng.substream(REPLAY))?
                } else {
                    Vec::new()
                };
                (Some(upd.bounds), upd.widened, replayed)
            };
            let trace = IterationTrace {
                iteration,
                bounds: bounds.clone(),
                n,
                n_replay,
                train_seed,
                learning_rate: net.config.as_ref().map_or(tcfg.learning_rate, |c| c.learning_rate),
                final_loss: net.loss_history.last().copied().unwrap_or(f64::NAN),
                theta_hat,
                bootstrap: summary.stats.clone(),
                stopped: stop.stop,
                stop,
                next_bounds,
                widened,
            };
            let d = IterationData {
                train_theta: thetas,
                bootstrap: summary,
            };
            Ok((trace, d, net, replayed))
        };
        let (trace, d, net, replayed) = step().map_err(|e| e.at_iteration(iteration))?;
        buffer.extend(replayed);
        let done = trace.stopped;
        if let Some(next) = &trace.next_bounds {
            bounds = next.clone();
        }
        traces.push(trace);
        data.push(d);
        network = Some(net);
        timings.push(started.elapsed().as_secs_f64());
        log::info!(
            "iteration {iteration}: theta_hat {:?}, stop {done}",
            traces.last().map(|t| &t.theta_hat)
        );
        if done {
            status = RunStatus::Converged;
            break;
        }
        if cfg.growth {
            n = grow(n);
        }
    }
    Ok(SequentialRun {
        traces,
        data,
        status,
        network: network.expect("at least one iteration ran"),
        timings,
    })
}

/// Writes one JSON object per line.
pub fn write_trace_ndjson(path: impl AsRef<std::path::Path>, traces: &[IterationTrace]) -> Result<()> {
    let mut out = String::new();
    for t in traces {
        out.push_str(&serde_json::to_string(t)?);
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_trace_ndjson(path: impl AsRef<std::path::Path>) -> Result<Vec<IterationTrace>> {
    std::fs::read_to_string(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}
