use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::Estimator;
use crate::math::stats::{quantile_sorted, sample_sd, sorted_copy};
use crate::math::{RngStream, Tensor};
use crate::simulators::Simulator;

/// Default two-sided interval levels.
pub const INTERVAL: (f64, f64) = (0.025, 0.975);

/// Bootstrap statistics per coordinate, without the raw samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapStats {
    pub replicates: usize,
    pub median: Vec<f64>,
    /// Sample sd times `rescale`.
    pub sd: Vec<f64>,
    /// `θ̂ - median`.
    pub bias: Vec<f64>,
    pub levels: (f64, f64),
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub rescale: f64,
}

/// Network outputs for `B` datasets simulated at the fitted value.
#[derive(Clone, Debug, PartialEq)]
pub struct BootstrapSummary {
    /// `B x P` network outputs.
    pub samples: Tensor,
    pub stats: BootstrapStats,
}

impl BootstrapSummary {
    /// Summarizes `samples` (`B x P`) for the fitted value `theta_hat`.
    ///
    /// The interval is the percentile interval of the samples; `rescale`
    /// multiplies the sd and stretches the interval about the median.
    pub fn from_samples(theta_hat: &[f64], samples: Tensor, rescale: f64) -> Result<Self> {
        if samples.shape().len() != 2 || samples.shape()[1] != theta_hat.len() {
            return Err(Error::ShapeMismatch {
                expected: vec![samples.rows(), theta_hat.len()],
                got: samples.shape().to_vec(),
            });
        }
        let b = samples.rows();
        if b < 2 {
            return Err(Error::InvalidArgument(format!("bootstrap needs B >= 2, got {b}")));
        }
        if !(rescale > 0.0 && rescale.is_finite()) {
            return Err(Error::InvalidArgument(format!("rescale factor must be > 0, got {rescale}")));
        }
        let p = theta_hat.len();
        let mut stats = BootstrapStats {
            replicates: b,
            median: Vec::with_capacity(p),
            sd: Vec::with_capacity(p),
            bias: Vec::with_capacity(p),
            levels: INTERVAL,
            lower: Vec::with_capacity(p),
            upper: Vec::with_capacity(p),
            rescale,
        };
        for (j, &th) in theta_hat.iter().enumerate() {
            let col = samples.column(j);
            let sorted = sorted_copy(&col)?;
            let med = quantile_sorted(&sorted, 0.5);
            stats.median.push(med);
            stats.sd.push(rescale * sample_sd(&col)?);
            stats.bias.push(th - med);
            stats.lower.push(med + rescale * (quantile_sorted(&sorted, INTERVAL.0) - med));
            stats.upper.push(med + rescale * (quantile_sorted(&sorted, INTERVAL.1) - med));
        }
        Ok(Self { samples, stats })
    }

    pub fn dim(&self) -> usize {
        self.stats.median.len()
    }

    pub fn replicates(&self) -> usize {
        self.stats.replicates
    }

    /// Whether `value` lies in the closed interval of coordinate `j`.
    pub fn covers(&self, j: usize, value: f64) -> bool {
        self.stats.lower[j] <= value && value <= self.stats.upper[j]
    }
}

const CHUNK: usize = 64;

/// Streams for `b` bootstrap replicates, independent of evaluation order.
pub fn replicate_streams(rng: &RngStream, b: usize) -> Vec<RngStream> {
    (0..b as u64).map(|i| rng.substream(i)).collect()
}

/// Bootstrap with a caller-provided simulator of `B` datasets.
///
/// `simulate` receives a slice of streams (one per dataset) and must return
/// one flattened dataset per stream. Chunks are simulated in parallel; the
/// output does not depend on the number of threads.
pub fn bootstrap_with<F>(
    est: &dyn Estimator,
    theta_hat: &[f64],
    b: usize,
    rng: &RngStream,
    rescale: f64,
    simulate: F,
) -> Result<BootstrapSummary>
where
    F: Fn(&mut [RngStream]) -> Result<Vec<Vec<f64>>> + Sync,
{
    let mut streams = replicate_streams(rng, b);
    let p = est.output_dim();
    let parts: Vec<Vec<f64>> = streams
        .par_chunks_mut(CHUNK)
        .map(|chunk| -> Result<Vec<f64>> {
            let data = simulate(chunk)?;
            let mut out = Vec::with_capacity(chunk.len() * p);
            for x in &data {
                out.extend(est.estimate(x)?);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let samples = Tensor::new(vec![b, p], parts.concat())?;
    BootstrapSummary::from_samples(theta_hat, samples, rescale)
}

/// Simulates `b` datasets at `theta_hat` and pushes them through `est`.
pub fn bootstrap_uncertainty(
    est: &dyn Estimator,
    sim: &dyn Simulator,
    theta_hat: &[f64],
    b: usize,
    rng: &RngStream,
) -> Result<BootstrapSummary> {
    sim.validate(theta_hat).map_err(|e| match e {
        Error::SimulatorDomain(_) => e,
        other => Error::SimulatorDomain(format!("fitted value {theta_hat:?}: {other}")),
    })?;
    bootstrap_with(est, theta_hat, b, rng, 1.0, |streams| sim.simulate_many(theta_hat, streams))
}
