use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bounds::ParamBounds;
use crate::error::{Error, Result};
use crate::math::{RngStream, Tensor};
use crate::simulators::Simulator;

/// One simulated `(θ, x)` pair with its origin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    /// Unique across a run: `iteration << 32 | row`.
    pub id: u64,
    pub iteration: usize,
    pub theta: Vec<f64>,
    pub x: Vec<f64>,
}

pub fn record_id(iteration: usize, row: usize) -> u64 {
    ((iteration as u64) << 32) | row as u64
}

/// Training pairs for one network fit.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingSet {
    pub records: Vec<Record>,
}

impl TrainingSet {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Simulates one dataset per row of `thetas`, row `i` with
    /// `rng.substream(i)`.
    pub fn simulate(sim: &dyn Simulator, thetas: &Tensor, iteration: usize, rng: &RngStream) -> Result<Self> {
        let records = (0..thetas.rows())
            .into_par_iter()
            .map(|i| {
                let theta = thetas.row(i).to_vec();
                let x = sim.simulate(&theta, &mut rng.substream(i as u64))?;
                Ok(Record {
                    id: record_id(iteration, i),
                    iteration,
                    theta,
                    x,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { records })
    }

    /// Appends `other`, refusing records whose id is already present.
    pub fn merge(&mut self, other: &[Record]) -> Result<()> {
        let ids: std::collections::HashSet<u64> = self.records.iter().map(|r| r.id).collect();
        if let Some(dup) = other.iter().find(|r| ids.contains(&r.id)) {
            return Err(Error::InvalidArgument(format!("record {} already in the training set", dup.id)));
        }
        self.records.extend_from_slice(other);
        Ok(())
    }

    /// `(inputs, targets)` tensors of shape `N x len` and `N x P`.
    pub fn tensors(&self) -> Result<(Tensor, Tensor)> {
        let first = self.records.first().ok_or(Error::EmptySample)?;
        let (len, p) = (first.x.len(), first.theta.len());
        let mut xs = Vec::with_capacity(self.len() * len);
        let mut ts = Vec::with_capacity(self.len() * p);
        for r in &self.records {
            if r.x.len() != len || r.theta.len() != p {
                return Err(Error::ShapeMismatch {
                    expected: vec![len, p],
                    got: vec![r.x.len(), r.theta.len()],
                });
            }
            xs.extend_from_slice(&r.x);
            ts.extend_from_slice(&r.theta);
        }
        Ok((Tensor::new(vec![self.len(), len], xs)?, Tensor::new(vec![self.len(), p], ts)?))
    }

    pub fn thetas(&self) -> Tensor {
        let p = self.records.first().map_or(0, |r| r.theta.len());
        let data = self.records.iter().flat_map(|r| r.theta.iter().copied()).collect();
        Tensor::new(vec![self.len(), p], data).expect("consistent parameter rows")
    }
}

/// Uniform subset, of size `⌊fraction · |outside|⌋`, of the records whose
/// `θ` lies outside `bounds` in at least one coordinate. Records keep their
/// original order.
pub fn replay_select(prev: &[Record], bounds: &ParamBounds, fraction: f64, rng: &mut RngStream) -> Result<Vec<Record>> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidArgument(format!("replay fraction must lie in [0, 1], got {fraction}")));
    }
    let outside: Vec<&Record> = prev.iter().filter(|r| !bounds.contains(&r.theta)).collect();
    // The small offset keeps products like 0.29 * 100 from rounding down.
    let k = (fraction * outside.len() as f64 + 1e-9).floor() as usize;
    let mut idx = rng.sample_indices(outside.len(), k);
    idx.sort_unstable();
    Ok(idx.into_iter().map(|i| outside[i].clone()).collect())
}
