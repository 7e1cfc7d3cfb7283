//! Estimating series of any length with a network trained at one length.
//!
//! Short series are tiled end to end up to the training length `T_k` (plus
//! a random contiguous block for the remainder); long series are cut into
//! `T_k` chunks whose estimates are averaged.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::Estimator;
use crate::math::stats::median;
use crate::math::RngStream;
use crate::sequential::{bootstrap_with, BootstrapSummary};
use crate::simulators::SeriesSimulator;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplicationPlan {
    /// Observed length.
    pub t: usize,
    /// Training length.
    pub t_k: usize,
    /// Whole copies when `t ≤ t_k`, otherwise 1.
    pub m: usize,
    /// `t_k mod t` when `t ≤ t_k`, otherwise 0.
    pub remainder: usize,
    /// Start of the remainder block inside the series.
    pub offset: usize,
    /// `⌈t / t_k⌉` when `t > t_k`, otherwise 1.
    pub chunks: usize,
}

impl ReplicationPlan {
    pub fn new(t: usize, t_k: usize) -> Result<Self> {
        if t == 0 || t_k == 0 {
            return Err(Error::InvalidArgument(format!("lengths must be >= 1 (T={t}, T_k={t_k})")));
        }
        Ok(if t <= t_k {
            Self {
                t,
                t_k,
                m: t_k / t,
                remainder: t_k % t,
                offset: 0,
                chunks: 1,
            }
        } else {
            Self {
                t,
                t_k,
                m: 1,
                remainder: 0,
                offset: 0,
                chunks: t.div_ceil(t_k),
            }
        })
    }

    /// Factor applied to bootstrap spreads: `sqrt(T_k / T)` for short
    /// series (equal to `sqrt(m)` when the remainder is zero), else 1.
    pub fn rescale(&self) -> f64 {
        if self.t < self.t_k {
            (self.t_k as f64 / self.t as f64).sqrt()
        } else {
            1.0
        }
    }
}

/// `m` copies of `x0` followed by a contiguous block of length `T_k mod T`
/// starting at a uniform offset in `0..=T - r`.
pub fn replicate(x0: &[f64], t_k: usize, rng: &mut RngStream) -> Result<(Vec<f64>, ReplicationPlan)> {
    let t = x0.len();
    if t > t_k {
        return Err(Error::Length { t, t_k });
    }
    let mut plan = ReplicationPlan::new(t, t_k)?;
    let mut out = Vec::with_capacity(t_k);
    for _ in 0..plan.m {
        out.extend_from_slice(x0);
    }
    if plan.remainder > 0 {
        plan.offset = rng.below(t - plan.remainder + 1);
        out.extend_from_slice(&x0[plan.offset..plan.offset + plan.remainder]);
    }
    Ok((out, plan))
}

pub fn rescale_sd(sd: f64, m: usize) -> f64 {
    sd * (m as f64).sqrt()
}

/// How chunk estimates of a long series are merged.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Combine {
    #[default]
    Mean,
    Median,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LongEstimate {
    pub theta: Vec<f64>,
    pub chunk_estimates: Vec<Vec<f64>>,
    pub plan: ReplicationPlan,
}

/// Estimates a series longer than `T_k` chunk by chunk. A short final chunk
/// is replicated up to `T_k` first.
pub fn estimate_long(
    x0: &[f64],
    est: &dyn Estimator,
    t_k: usize,
    rng: &mut RngStream,
    combine: Combine,
) -> Result<LongEstimate> {
    let t = x0.len();
    if t <= t_k {
        return Err(Error::InvalidArgument(format!(
            "estimate_long needs T > T_k (T={t}, T_k={t_k})"
        )));
    }
    let plan = ReplicationPlan::new(t, t_k)?;
    let mut chunk_estimates = Vec::with_capacity(plan.chunks);
    for chunk in x0.chunks(t_k) {
        let e = if chunk.len() == t_k {
            est.estimate(chunk)?
        } else {
            est.estimate(&replicate(chunk, t_k, rng)?.0)?
        };
        chunk_estimates.push(e);
    }
    let p = est.output_dim();
    let theta = (0..p)
        .map(|j| {
            let col: Vec<f64> = chunk_estimates.iter().map(|e| e[j]).collect();
            match combine {
                Combine::Mean => Ok(col.iter().sum::<f64>() / col.len() as f64),
                Combine::Median => median(&col),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LongEstimate {
        theta,
        chunk_estimates,
        plan,
    })
}

/// Point estimate for a series of any length, without uncertainty.
pub fn estimate_series(x0: &[f64], est: &dyn Estimator, t_k: usize, rng: &mut RngStream, combine: Combine) -> Result<Vec<f64>> {
    match x0.len().cmp(&t_k) {
        std::cmp::Ordering::Greater => Ok(estimate_long(x0, est, t_k, rng, combine)?.theta),
        std::cmp::Ordering::Equal => est.estimate(x0),
        std::cmp::Ordering::Less => est.estimate(&replicate(x0, t_k, rng)?.0),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeriesEstimate {
    pub theta_hat: Vec<f64>,
    pub plan: ReplicationPlan,
    /// Bootstrap with spreads already multiplied by `plan.rescale()`.
    pub summary: BootstrapSummary,
}

/// Estimate and bootstrap for an observed series of any length.
///
/// For `T < T_k` bootstrap series are simulated at `θ̂₀` with length `T_k`
/// and their spread is widened by `sqrt(T_k / T)`, so the reported sd
/// refers to a series of the observed length. Otherwise bootstrap series of
/// length `T` go through the same chunking as the data.
pub fn estimate_any(
    x0: &[f64],
    est: &dyn Estimator,
    sim: &dyn SeriesSimulator,
    t_k: usize,
    b: usize,
    rng: &RngStream,
    combine: Combine,
) -> Result<SeriesEstimate> {
    let t = x0.len();
    let mut est_rng = rng.substream(0);
    let (theta_hat, plan) = match t.cmp(&t_k) {
        std::cmp::Ordering::Less => {
            let (xr, plan) = replicate(x0, t_k, &mut est_rng)?;
            (est.estimate(&xr)?, plan)
        }
        std::cmp::Ordering::Equal => (est.estimate(x0)?, ReplicationPlan::new(t, t_k)?),
        std::cmp::Ordering::Greater => {
            let long = estimate_long(x0, est, t_k, &mut est_rng, combine)?;
            (long.theta, long.plan)
        }
    };
    sim.validate(&theta_hat)
        .map_err(|e| Error::SimulatorDomain(format!("fitted value {theta_hat:?}: {e}")))?;
    let boot_rng = rng.substream(1);
    let sim_len = t.max(t_k);
    let simulate = |streams: &mut [RngStream]| -> Result<Vec<Vec<f64>>> {
        streams.iter_mut().map(|r| sim.simulate_len(&theta_hat, sim_len, r)).collect()
    };
    let summary = if sim_len > t_k {
        let long = LongPipeline { est, t_k, combine };
        bootstrap_with(&long, &theta_hat, b, &boot_rng, plan.rescale(), simulate)?
    } else {
        bootstrap_with(est, &theta_hat, b, &boot_rng, plan.rescale(), simulate)?
    };
    Ok(SeriesEstimate {
        theta_hat,
        plan,
        summary,
    })
}

/// Adapts [`estimate_long`] to the [`Estimator`] interface; tail blocks use
/// a stream derived from the data so results do not depend on call order.
struct LongPipeline<'a> {
    est: &'a dyn Estimator,
    t_k: usize,
    combine: Combine,
}

impl Estimator for LongPipeline<'_> {
    fn output_dim(&self) -> usize {
        self.est.output_dim()
    }

    fn estimate(&self, x: &[f64]) -> Result<Vec<f64>> {
        let key = x.iter().fold(0u64, |h, v| h.rotate_left(5) ^ v.to_bits());
        let mut rng = RngStream::new(key, 0);
        Ok(estimate_long(x, self.est, self.t_k, &mut rng, self.combine)?.theta)
    }
}
