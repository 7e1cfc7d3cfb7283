use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::network::{NetworkSpec, TrainedNetwork, Workspace};
use crate::error::{Error, Result};
use crate::math::{RngStream, Tensor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Seed for weight initialization and mini-batch shuffling.
    pub seed: u64,
    /// Fresh-seed retrains allowed when an output collapses to a constant.
    pub restarts: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            epochs: 30,
            batch_size: 100,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
            restarts: 3,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::InvalidArgument("adam betas must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

struct Adam {
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    t: i32,
}

impl Adam {
    fn new(weights: &[Tensor]) -> Self {
        let zeros = || weights.iter().map(|w| Tensor::zeros(w.shape().to_vec())).collect();
        Self {
            m: zeros(),
            v: zeros(),
            t: 0,
        }
    }

    fn step(&mut self, cfg: &TrainConfig, weights: &mut [Tensor], grads: &[Tensor]) {
        self.t += 1;
        let bc1 = 1.0 - cfg.beta1.powi(self.t);
        let bc2 = 1.0 - cfg.beta2.powi(self.t);
        for (((w, g), m), v) in weights.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            let (w, g, m, v) = (w.data_mut(), g.data(), m.data_mut(), v.data_mut());
            for i in 0..w.len() {
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                w[i] -= cfg.learning_rate * mhat / (vhat.sqrt() + cfg.epsilon);
            }
        }
    }
}

/// Outputs whose training-set R² falls below this count as collapsed.
pub const COLLAPSE_R2: f64 = 0.05;

/// Per-output R² of `net` on `(inputs, targets)`. Outputs whose targets are
/// constant report 1.
pub fn explained_variance(net: &TrainedNetwork, inputs: &Tensor, targets: &Tensor) -> Result<Vec<f64>> {
    let pred = net.forward(inputs)?;
    let n = targets.rows() as f64;
    Ok((0..targets.row_len())
        .map(|j| {
            let t = targets.column(j);
            let m = t.iter().sum::<f64>() / n;
            let total: f64 = t.iter().map(|v| (v - m).powi(2)).sum();
            if total <= 1e-12 * n {
                return 1.0;
            }
            let resid: f64 = t.iter().zip(pred.column(j)).map(|(a, b)| (a - b).powi(2)).sum();
            1.0 - resid / total
        })
        .collect())
}

fn worst_fit(net: &TrainedNetwork, inputs: &Tensor, targets: &Tensor) -> Result<f64> {
    Ok(explained_variance(net, inputs, targets)?.into_iter().fold(f64::INFINITY, f64::min))
}

/// Fits a freshly initialized network with Adam on shuffled mini-batches.
///
/// `inputs` is `N x input_len` (or `[N, input_shape...]`), `targets` is `N x P`.
/// A fit where some output explains less than [`COLLAPSE_R2`] of its target
/// variance (dead ReLUs) is redone from a derived seed, up to
/// `cfg.restarts` times; the fit with the best worst-output R² is kept and
/// its `config.seed` records the seed used.
pub fn train(spec: &NetworkSpec, inputs: &Tensor, targets: &Tensor, cfg: &TrainConfig) -> Result<TrainedNetwork> {
    let once = |cfg: &TrainConfig| {
        let weights = spec.init_weights(&mut RngStream::new(cfg.seed, 0))?;
        train_from(spec, weights, inputs, targets, cfg)
    };
    let mut best = once(cfg)?;
    if cfg.restarts == 0 {
        return Ok(best);
    }
    let mut best_fit = worst_fit(&best, inputs, targets)?;
    let mut seeds = RngStream::new(cfg.seed, 2);
    for _ in 0..cfg.restarts {
        if best_fit >= COLLAPSE_R2 {
            break;
        }
        let retry = TrainConfig {
            seed: seeds.next_u64(),
            ..cfg.clone()
        };
        log::warn!("network output collapsed (R² {best_fit:.3}); retraining with seed {}", retry.seed);
        let Ok(net) = once(&retry) else { continue };
        let fit = worst_fit(&net, inputs, targets)?;
        if fit > best_fit {
            best = net;
            best_fit = fit;
        }
    }
    Ok(best)
}

/// Like [`train`] but starting from the given weights.
pub fn train_from(
    spec: &NetworkSpec,
    mut weights: Vec<Tensor>,
    inputs: &Tensor,
    targets: &Tensor,
    cfg: &TrainConfig,
) -> Result<TrainedNetwork> {
    cfg.validate()?;
    let n = inputs.rows();
    if n == 0 {
        return Err(Error::EmptySample);
    }
    if inputs.row_len() != spec.input_len() {
        return Err(Error::ShapeMismatch {
            expected: spec.input_shape.clone(),
            got: inputs.shape()[1..].to_vec(),
        });
    }
    let p = spec.output_dim;
    if targets.shape() != [n, p] {
        return Err(Error::ShapeMismatch {
            expected: vec![n, p],
            got: targets.shape().to_vec(),
        });
    }
    let mut ws = Workspace::new(spec)?;
    let mut adam = Adam::new(&weights);
    let mut grads: Vec<Tensor> = weights.iter().map(|w| Tensor::zeros(w.shape().to_vec())).collect();
    let mut shuffle_rng = RngStream::new(cfg.seed, 1);
    let mut order: Vec<usize> = (0..n).collect();
    let batch = cfg.batch_size.min(n);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut g = vec![0.0; p];

    for epoch in 0..cfg.epochs {
        shuffle_rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(batch) {
            for gr in &mut grads {
                gr.data_mut().fill(0.0);
            }
            let scale = 2.0 / (chunk.len() * p) as f64;
            for &i in chunk {
                let pred = ws.forward(&weights, inputs.row(i));
                let mut sq = 0.0;
                for ((gv, pv), tv) in g.iter_mut().zip(pred).zip(targets.row(i)) {
                    let r = pv - tv;
                    sq += r * r;
                    *gv = scale * r;
                }
                epoch_loss += sq / p as f64;
                ws.backward(&weights, &g, &mut grads);
            }
            adam.step(cfg, &mut weights, &grads);
        }
        let mean = epoch_loss / n as f64;
        if !mean.is_finite() || weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFiniteLoss { epoch });
        }
        history.push(mean);
    }
    Ok(TrainedNetwork {
        spec: spec.clone(),
        weights,
        loss_history: history,
        config: Some(cfg.clone()),
    })
}
