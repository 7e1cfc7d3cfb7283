use serde::{Deserialize, Serialize};

use super::bootstrap::BootstrapSummary;
use crate::error::{Error, Result};
use crate::math::stats::quantile;
use crate::math::{RngStream, Tensor};

/// Per-coordinate sampling box `(a₁ₚ, a₂ₚ)` on the transformed scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamBounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl ParamBounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let b = Self { lower, upper };
        b.validate()?;
        Ok(b)
    }

    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        Self::new(pairs.iter().map(|p| p.0).collect(), pairs.iter().map(|p| p.1).collect())
    }

    /// Box `center ± half_width` in every coordinate.
    pub fn around(center: &[f64], half_width: f64) -> Result<Self> {
        Self::new(
            center.iter().map(|c| c - half_width).collect(),
            center.iter().map(|c| c + half_width).collect(),
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.lower.len() != self.upper.len() || self.lower.is_empty() {
            return Err(Error::ShapeMismatch {
                expected: vec![self.lower.len()],
                got: vec![self.upper.len()],
            });
        }
        for (&a, &b) in self.lower.iter().zip(&self.upper) {
            if !(a < b) || !a.is_finite() || !b.is_finite() {
                return Err(Error::InvalidBounds { lower: a, upper: b });
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// Half-open membership test, `a₁ ≤ θ < a₂` in every coordinate.
    pub fn contains(&self, theta: &[f64]) -> bool {
        theta
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(&t, (&a, &b))| t >= a && t < b)
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(a, b)| b - a).collect()
    }
}

/// `n x P` matrix of independent uniform draws inside `bounds`.
pub fn sample_prior(bounds: &ParamBounds, n: usize, rng: &mut RngStream) -> Result<Tensor> {
    bounds.validate()?;
    let p = bounds.dim();
    let mut out = Vec::with_capacity(n * p);
    for _ in 0..n {
        for (&a, &b) in bounds.lower.iter().zip(&bounds.upper) {
            out.push(rng.uniform(a, b)?);
        }
    }
    Tensor::new(vec![n, p], out)
}

/// Like [`sample_prior`] but redraws rows rejected by `accept`, for
/// parameterizations whose valid region is not a box.
pub fn sample_prior_where(
    bounds: &ParamBounds,
    n: usize,
    rng: &mut RngStream,
    accept: impl Fn(&[f64]) -> bool,
) -> Result<Tensor> {
    bounds.validate()?;
    let p = bounds.dim();
    let max_tries = 1000usize.max(100 * n);
    let mut out = Vec::with_capacity(n * p);
    let mut row = vec![0.0; p];
    let mut tries = 0;
    while out.len() < n * p {
        tries += 1;
        if tries > max_tries {
            return Err(Error::SimulatorDomain(format!(
                "fewer than {n} valid parameter rows after {max_tries} draws in {bounds:?}"
            )));
        }
        for (r, (&a, &b)) in row.iter_mut().zip(bounds.lower.iter().zip(&bounds.upper)) {
            *r = rng.uniform(a, b)?;
        }
        if accept(&row) {
            out.extend_from_slice(&row);
        }
    }
    Tensor::new(vec![n, p], out)
}

/// How the next sampling box is derived from a bootstrap.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundsRule {
    /// `C ± quantiles of d`, with `C = θ̂ + bias` and `d = θ̂ - θ_b`,
    /// using the 2.5% and 97.5% quantiles.
    #[default]
    #[serde(alias = "basic")]
    BasicBootstrap,
    /// `a₁ = θ̂ + bias - Q₀.₀₅(d)`, `a₂ = θ̂ + bias + Q₀.₉₇₅(d)`.
    #[serde(alias = "literal")]
    PaperLiteral,
}

impl std::str::FromStr for BoundsRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "basic" | "basic_bootstrap" => Ok(BoundsRule::BasicBootstrap),
            "literal" | "paper_literal" => Ok(BoundsRule::PaperLiteral),
            other => Err(Error::Config(format!("unknown bounds rule {other:?} (expected basic or literal)"))),
        }
    }
}

/// Smallest box width used when a bootstrap has no spread.
pub const MIN_WIDTH: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsUpdate {
    pub bounds: ParamBounds,
    /// Coordinates whose raw update had `a₁ ≥ a₂` and were widened.
    pub widened: Vec<bool>,
    /// True when some coordinate had identical bootstrap samples; its box
    /// then has width [`MIN_WIDTH`].
    pub degenerate: bool,
}

/// Next sampling box from the fitted value and its bootstrap.
///
/// When a rule yields `a₁ ≥ a₂` the box is re-centred at the midpoint with
/// width `max(2 S, MIN_WIDTH)`.
pub fn update_bounds(theta_hat: &[f64], summary: &BootstrapSummary, rule: BoundsRule) -> Result<BoundsUpdate> {
    let p = summary.dim();
    if theta_hat.len() != p {
        return Err(Error::ShapeMismatch {
            expected: vec![p],
            got: vec![theta_hat.len()],
        });
    }
    if summary.replicates() < 2 {
        return Err(Error::InvalidArgument("bootstrap needs at least two replicates".into()));
    }
    let (q_lo, q_hi) = match rule {
        BoundsRule::BasicBootstrap => (0.025, 0.975),
        BoundsRule::PaperLiteral => (0.05, 0.975),
    };
    let mut lower = Vec::with_capacity(p);
    let mut upper = Vec::with_capacity(p);
    let mut widened = vec![false; p];
    let mut degenerate = false;
    for j in 0..p {
        let th = theta_hat[j];
        let col = summary.samples.column(j);
        let d: Vec<f64> = col.iter().map(|t| th - t).collect();
        let bias = th - summary.stats.median[j];
        let lo_q = quantile(&d, q_lo)?;
        let hi_q = quantile(&d, q_hi)?;
        let (mut a1, mut a2) = match rule {
            BoundsRule::BasicBootstrap => (th + bias + lo_q, th + bias + hi_q),
            BoundsRule::PaperLiteral => (th + bias - lo_q, th + bias + hi_q),
        };
        if !(a1 < a2) {
            let s = summary.stats.sd[j];
            if s == 0.0 {
                degenerate = true;
            }
            let half = 0.5 * (2.0 * s).max(MIN_WIDTH);
            let mid = 0.5 * (a1 + a2);
            a1 = mid - half;
            a2 = mid + half;
            widened[j] = true;
        }
        lower.push(a1);
        upper.push(a2);
    }
    if degenerate {
        log::warn!("degenerate bootstrap: identical replicates, box width set to {MIN_WIDTH}");
    }
    Ok(BoundsUpdate {
        bounds: ParamBounds::new(lower, upper)?,
        widened,
        degenerate,
    })
}

/// Per-coordinate and overall stopping decision.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StopDecision {
    pub gamma: f64,
    /// `|θ̂ₚ - θ̃ₚ| ≤ γ Sₚ` for each coordinate.
    pub per_param: Vec<bool>,
    pub stop: bool,
}

pub fn stop_check(theta_hat: &[f64], summary: &BootstrapSummary, gamma: f64) -> Result<StopDecision> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidArgument(format!("gamma must lie in (0, 1), got {gamma}")));
    }
    if theta_hat.len() != summary.dim() {
        return Err(Error::ShapeMismatch {
            expected: vec![summary.dim()],
            got: vec![theta_hat.len()],
        });
    }
    let per_param: Vec<bool> = theta_hat
        .iter()
        .zip(summary.stats.median.iter().zip(&summary.stats.sd))
        .map(|(&th, (&med, &sd))| (th - med).abs() <= gamma * sd)
        .collect();
    Ok(StopDecision {
        gamma,
        stop: per_param.iter().all(|&s| s),
        per_param,
    })
}
