//! Invertible reparameterizations. Networks always train on the
//! transformed scale, and sampling boxes live there too.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scalar transform, addressed in configs by its string id.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Transform {
    #[serde(rename = "identity")]
    Identity,
    #[serde(rename = "log")]
    Log,
    /// `log(x / (2 - x))` on `(0, 2)`.
    #[serde(rename = "logit2")]
    Logit2,
    /// `log((1 + x) / (1 - x))` on `(-1, 1)`.
    #[serde(rename = "fisher")]
    Fisher,
    /// `log(x - 2)` on `(2, ∞)`.
    #[serde(rename = "log-shift-2")]
    LogShift2,
}

impl Transform {
    pub const ALL: [Transform; 5] = [
        Transform::Identity,
        Transform::Log,
        Transform::Logit2,
        Transform::Fisher,
        Transform::LogShift2,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Transform::Identity => "identity",
            Transform::Log => "log",
            Transform::Logit2 => "logit2",
            Transform::Fisher => "fisher",
            Transform::LogShift2 => "log-shift-2",
        }
    }

    /// Open interval on which `apply` is defined.
    pub fn domain(self) -> (f64, f64) {
        match self {
            Transform::Identity => (f64::NEG_INFINITY, f64::INFINITY),
            Transform::Log => (0.0, f64::INFINITY),
            Transform::Logit2 => (0.0, 2.0),
            Transform::Fisher => (-1.0, 1.0),
            Transform::LogShift2 => (2.0, f64::INFINITY),
        }
    }

    fn check(self, x: f64, (lo, hi): (f64, f64)) -> Result<()> {
        if x > lo && x < hi || (lo == f64::NEG_INFINITY && hi == f64::INFINITY && x.is_finite()) {
            Ok(())
        } else {
            Err(Error::Domain {
                transform: self.id(),
                value: x,
                lo,
                hi,
            })
        }
    }

    pub fn apply(self, x: f64) -> Result<f64> {
        self.check(x, self.domain())?;
        Ok(match self {
            Transform::Identity => x,
            Transform::Log => x.ln(),
            Transform::Logit2 => logit2_unchecked(x),
            Transform::Fisher => x.ln_1p() - (-x).ln_1p(),
            Transform::LogShift2 => (x - 2.0).ln(),
        })
    }

    pub fn invert(self, y: f64) -> Result<f64> {
        self.check(y, (f64::NEG_INFINITY, f64::INFINITY))?;
        Ok(match self {
            Transform::Identity => y,
            Transform::Log => y.exp(),
            Transform::Logit2 => 2.0 / (1.0 + (-y).exp()),
            Transform::Fisher => (y / 2.0).tanh(),
            Transform::LogShift2 => 2.0 + y.exp(),
        })
    }
}

fn logit2_unchecked(x: f64) -> f64 {
    (x / (2.0 - x)).ln()
}

/// Generalized logit on `(0, 2)`.
pub fn logit2(x: f64) -> Result<f64> {
    Transform::Logit2.apply(x)
}

pub fn fisher(x: f64) -> Result<f64> {
    Transform::Fisher.apply(x)
}

pub fn log_shift2(x: f64) -> Result<f64> {
    Transform::LogShift2.apply(x)
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Transform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Transform::ALL
            .into_iter()
            .find(|t| t.id() == s)
            .ok_or_else(|| Error::Config(format!("unknown transform id {s:?}")))
    }
}

/// `(μ, σ²) -> (m₁, m₂) = (μ, log(μ² + σ²))`.
pub fn moment_map(mu: f64, var: f64) -> Result<(f64, f64)> {
    if !(var > 0.0) || !mu.is_finite() || !var.is_finite() {
        return Err(Error::Domain {
            transform: "moment",
            value: var,
            lo: 0.0,
            hi: f64::INFINITY,
        });
    }
    Ok((mu, (mu * mu + var).ln()))
}

/// Inverse of [`moment_map`]; requires `exp(m₂) > m₁²`.
pub fn moment_unmap(m1: f64, m2: f64) -> Result<(f64, f64)> {
    let second = m2.exp();
    let first_sq = m1 * m1;
    if !(second > first_sq) || !second.is_finite() {
        return Err(Error::InvalidMoments { second, first_sq });
    }
    Ok((m1, second - first_sq))
}

/// How a model's natural parameters map to the network's output vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "transforms", rename_all = "snake_case")]
pub enum ParamTransform {
    /// One scalar transform per coordinate.
    PerCoordinate(Vec<Transform>),
    /// Joint `(μ, σ²) -> (μ, log(μ² + σ²))` map.
    Moment,
    /// `(μ, σ²) -> (μ, μ² + σ²)`, the untransformed second moment.
    RawMoment,
}

impl ParamTransform {
    pub fn dim(&self) -> usize {
        match self {
            ParamTransform::PerCoordinate(ts) => ts.len(),
            ParamTransform::Moment | ParamTransform::RawMoment => 2,
        }
    }

    pub fn apply(&self, natural: &[f64]) -> Result<Vec<f64>> {
        self.check_len(natural)?;
        match self {
            ParamTransform::PerCoordinate(ts) => ts.iter().zip(natural).map(|(t, &x)| t.apply(x)).collect(),
            ParamTransform::Moment => {
                let (a, b) = moment_map(natural[0], natural[1])?;
                Ok(vec![a, b])
            }
            ParamTransform::RawMoment => {
                let (mu, var) = (natural[0], natural[1]);
                moment_map(mu, var)?;
                Ok(vec![mu, mu * mu + var])
            }
        }
    }

    pub fn invert(&self, transformed: &[f64]) -> Result<Vec<f64>> {
        self.check_len(transformed)?;
        match self {
            ParamTransform::PerCoordinate(ts) => ts.iter().zip(transformed).map(|(t, &y)| t.invert(y)).collect(),
            ParamTransform::Moment => {
                let (a, b) = moment_unmap(transformed[0], transformed[1])?;
                Ok(vec![a, b])
            }
            ParamTransform::RawMoment => {
                let (m1, m2) = (transformed[0], transformed[1]);
                if !(m2 > 0.0) {
                    return Err(Error::InvalidMoments {
                        second: m2,
                        first_sq: m1 * m1,
                    });
                }
                let (a, b) = moment_unmap(m1, m2.ln())?;
                Ok(vec![a, b])
            }
        }
    }

    fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::ShapeMismatch {
                expected: vec![self.dim()],
                got: vec![v.len()],
            });
        }
        Ok(())
    }
}
