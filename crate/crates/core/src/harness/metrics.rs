use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::run::EstimateRow;
use crate::error::{Error, Result};
use crate::math::stats::{mean, sample_sd};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParamMetrics {
    pub bias: f64,
    pub sd: f64,
    pub rmse: f64,
}

/// Bias, sample sd and RMSE per coordinate of `I x P` estimates.
pub fn metrics(estimates: &[Vec<f64>], truth: &[f64]) -> Result<Vec<ParamMetrics>> {
    if estimates.len() < 2 {
        return Err(Error::DegenerateInput(format!(
            "metrics need at least 2 estimates, got {}",
            estimates.len()
        )));
    }
    if let Some(row) = estimates.iter().find(|r| r.len() != truth.len()) {
        return Err(Error::ShapeMismatch {
            expected: vec![truth.len()],
            got: vec![row.len()],
        });
    }
    truth
        .iter()
        .enumerate()
        .map(|(p, &t)| {
            let col: Vec<f64> = estimates.iter().map(|r| r[p]).collect();
            let mse = col.iter().map(|v| (v - t).powi(2)).sum::<f64>() / col.len() as f64;
            Ok(ParamMetrics {
                bias: mean(&col)? - t,
                sd: sample_sd(&col)?,
                rmse: mse.sqrt(),
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub stage: usize,
    pub parameter: usize,
    /// `theta_hat` (network output) or `boot_median`.
    pub estimator: String,
    pub count: usize,
    pub bias: f64,
    pub sd: f64,
    pub rmse: f64,
}

/// Metric table over replicates for every stage.
///
/// A replicate that stopped before stage `s` contributes its last estimate,
/// so the row for the largest stage describes the final estimates. Empty
/// when fewer than two replicates are present.
pub fn metric_table(rows: &[EstimateRow]) -> Result<Vec<MetricRow>> {
    // replicate -> stage -> parameter-ordered rows
    let mut by_rep: BTreeMap<usize, BTreeMap<usize, Vec<&EstimateRow>>> = BTreeMap::new();
    for r in rows {
        by_rep.entry(r.replicate).or_default().entry(r.stage).or_default().push(r);
    }
    if by_rep.len() < 2 {
        return Ok(Vec::new());
    }
    let mut stages: Vec<usize> = rows.iter().map(|r| r.stage).collect();
    stages.sort_unstable();
    stages.dedup();
    let mut out = Vec::new();
    for &s in &stages {
        let picked: Vec<&Vec<&EstimateRow>> = by_rep
            .values()
            .filter_map(|st| st.range(..=s).next_back().map(|(_, v)| v))
            .collect();
        if picked.len() < 2 {
            continue;
        }
        let truth: Vec<f64> = picked[0].iter().map(|r| r.truth).collect();
        type Pick = fn(&EstimateRow) -> f64;
        let kinds: [(&str, Pick); 2] = [("theta_hat", |r| r.theta_hat), ("boot_median", |r| r.boot_median)];
        for (name, get) in kinds {
            let est: Vec<Vec<f64>> = picked.iter().map(|v| v.iter().map(|r| get(r)).collect()).collect();
            for (p, m) in metrics(&est, &truth)?.into_iter().enumerate() {
                out.push(MetricRow {
                    stage: s,
                    parameter: p,
                    estimator: name.to_string(),
                    count: est.len(),
                    bias: m.bias,
                    sd: m.sd,
                    rmse: m.rmse,
                });
            }
        }
    }
    Ok(out)
}
