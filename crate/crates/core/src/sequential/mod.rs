//! The iterative simulate-train-bootstrap procedure and its building blocks.

mod bootstrap;
mod bounds;
mod data;
mod driver;

pub use bootstrap::{bootstrap_uncertainty, bootstrap_with, replicate_streams, BootstrapStats, BootstrapSummary, INTERVAL};
pub use bounds::{
    sample_prior, sample_prior_where, stop_check, update_bounds, BoundsRule, BoundsUpdate, ParamBounds, StopDecision,
    MIN_WIDTH,
};
pub use data::{record_id, replay_select, Record, TrainingSet};
pub use driver::{
    grow, read_trace_ndjson, run_sequential, write_trace_ndjson, IterationData, IterationTrace, RunStatus,
    SequentialConfig, SequentialRun,
};

use crate::error::Result;
use crate::estimator::Estimator;

/// `θ̂₀` for observed data `x0`, on the transformed scale.
pub fn estimate(est: &dyn Estimator, x0: &[f64]) -> Result<Vec<f64>> {
    est.estimate(x0)
}
