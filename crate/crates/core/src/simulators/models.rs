use serde::{Deserialize, Serialize};

use super::basic::{ar1_mle, sim_ar1, sim_gaussian_iid, sim_svol, SvolParams};
use super::spatial::{BrownResnickConfig, BrownResnickParams, BrownResnickSampler, Grid2D};
use crate::error::{Error, Result};
use crate::estimator::Estimator;
use crate::math::{RngStream, Tensor};
use crate::transforms::{ParamTransform, Transform};

/// A parametric model simulated on the transformed parameter scale.
///
/// `theta` is always the network's target scale; implementations invert
/// their transform before simulating.
pub trait Simulator: Sync {
    fn param_dim(&self) -> usize;

    /// Shape of one dataset as fed to a network (without batch axis).
    fn data_shape(&self) -> Vec<usize>;

    fn data_len(&self) -> usize {
        self.data_shape().iter().product()
    }

    fn transform(&self) -> &ParamTransform;

    /// Natural-scale parameters for `theta`, or a domain error.
    fn natural(&self, theta: &[f64]) -> Result<Vec<f64>> {
        if theta.len() != self.param_dim() {
            return Err(Error::ShapeMismatch {
                expected: vec![self.param_dim()],
                got: vec![theta.len()],
            });
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::SimulatorDomain(format!("non-finite parameter {theta:?}")));
        }
        self.transform().invert(theta)
    }

    fn validate(&self, theta: &[f64]) -> Result<()> {
        self.natural(theta).map(|_| ())
    }

    fn simulate(&self, theta: &[f64], rng: &mut RngStream) -> Result<Vec<f64>>;

    /// Maps observed data to the representation produced by `simulate`.
    fn prepare(&self, x: Vec<f64>) -> Vec<f64> {
        x
    }

    /// `rngs.len()` datasets at one parameter, one stream per dataset.
    /// Models with expensive per-parameter setup override this.
    fn simulate_many(&self, theta: &[f64], rngs: &mut [RngStream]) -> Result<Vec<Vec<f64>>> {
        rngs.iter_mut().map(|r| self.simulate(theta, r)).collect()
    }
}

/// Time-series models that can be simulated at any length.
pub trait SeriesSimulator: Simulator {
    /// Length used by [`Simulator::simulate`].
    fn length(&self) -> usize;

    fn simulate_len(&self, theta: &[f64], t: usize, rng: &mut RngStream) -> Result<Vec<f64>>;
}

/// I.i.d. Gaussian sample of size `j`.
///
/// With `fixed_mean` set the single natural parameter is `σ²`; otherwise the
/// natural parameters are `(μ, σ²)`. With `sorted` each sample is returned
/// in increasing order, which removes the permutation symmetry a network
/// would otherwise have to learn.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianModel {
    pub j: usize,
    pub fixed_mean: Option<f64>,
    pub transform: ParamTransform,
    pub sorted: bool,
}

impl GaussianModel {
    /// Known mean, log-variance target.
    pub fn log_variance(j: usize, mu: f64) -> Self {
        Self {
            j,
            fixed_mean: Some(mu),
            transform: ParamTransform::PerCoordinate(vec![Transform::Log]),
            sorted: true,
        }
    }

    /// Unknown mean and variance, targets `(μ, log σ²)`.
    pub fn mean_log_variance(j: usize) -> Self {
        Self {
            j,
            fixed_mean: None,
            transform: ParamTransform::PerCoordinate(vec![Transform::Identity, Transform::Log]),
            sorted: true,
        }
    }

    /// Targets `(μ, log(μ² + σ²))`, or the raw second moment when `raw`.
    pub fn moments(j: usize, raw: bool) -> Self {
        Self {
            j,
            fixed_mean: None,
            transform: if raw { ParamTransform::RawMoment } else { ParamTransform::Moment },
            sorted: true,
        }
    }

    fn mean_var(&self, theta: &[f64]) -> Result<(f64, f64)> {
        let nat = self.natural(theta)?;
        let (mu, var) = match self.fixed_mean {
            Some(mu) => (mu, nat[0]),
            None => (nat[0], nat[1]),
        };
        if !(var > 0.0) || !var.is_finite() || !mu.is_finite() {
            return Err(Error::SimulatorDomain(format!("invalid gaussian (mu={mu}, var={var})")));
        }
        Ok((mu, var))
    }
}

impl Simulator for GaussianModel {
    fn param_dim(&self) -> usize {
        self.transform.dim()
    }

    fn data_shape(&self) -> Vec<usize> {
        vec![self.j]
    }

    fn transform(&self) -> &ParamTransform {
        &self.transform
    }

    fn validate(&self, theta: &[f64]) -> Result<()> {
        self.mean_var(theta).map(|_| ())
    }

    fn simulate(&self, theta: &[f64], rng: &mut RngStream) -> Result<Vec<f64>> {
        let (mu, var) = self.mean_var(theta)?;
        Ok(self.prepare(sim_gaussian_iid(mu, var.ln(), self.j, rng)?.into_data()))
    }

    fn prepare(&self, mut x: Vec<f64>) -> Vec<f64> {
        if self.sorted {
            x.sort_by(f64::total_cmp);
        }
        x
    }
}

/// Brown-Resnick field on a grid, targets `(log λ, logit2 ν)`.
///
/// With `log_data` the unit-Fréchet values are returned on the log scale
/// (standard Gumbel margins), which keeps network inputs light-tailed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BrownResnickModel {
    pub grid: Grid2D,
    pub log_data: bool,
    pub config: BrownResnickConfig,
    #[serde(skip, default = "br_transform")]
    transform: ParamTransform,
}

fn br_transform() -> ParamTransform {
    ParamTransform::PerCoordinate(vec![Transform::Log, Transform::Logit2])
}

impl BrownResnickModel {
    pub fn new(grid: Grid2D, log_data: bool) -> Self {
        Self {
            grid,
            log_data,
            config: BrownResnickConfig::default(),
            transform: br_transform(),
        }
    }

    pub fn params(&self, theta: &[f64]) -> Result<BrownResnickParams> {
        let nat = self.natural(theta)?;
        let p = BrownResnickParams {
            range: nat[0],
            smoothness: nat[1],
        };
        p.validate()?;
        Ok(p)
    }

    pub fn sampler(&self, theta: &[f64]) -> Result<BrownResnickSampler> {
        BrownResnickSampler::new(&self.params(theta)?, &self.grid, self.config)
    }

    fn finish(&self, field: Tensor) -> Vec<f64> {
        let mut v = field.into_data();
        if self.log_data {
            for x in &mut v {
                *x = x.ln();
            }
        }
        v
    }
}

impl Simulator for BrownResnickModel {
    fn param_dim(&self) -> usize {
        2
    }

    fn data_shape(&self) -> Vec<usize> {
        vec![self.grid.ny, self.grid.nx]
    }

    fn transform(&self) -> &ParamTransform {
        &self.transform
    }

    fn validate(&self, theta: &[f64]) -> Result<()> {
        self.params(theta).map(|_| ())
    }

    fn simulate(&self, theta: &[f64], rng: &mut RngStream) -> Result<Vec<f64>> {
        Ok(self.finish(self.sampler(theta)?.sample(rng).0))
    }

    fn simulate_many(&self, theta: &[f64], rngs: &mut [RngStream]) -> Result<Vec<Vec<f64>>> {
        let s = self.sampler(theta)?;
        Ok(rngs.iter_mut().map(|r| self.finish(s.sample(r).0)).collect())
    }
}

/// Stochastic-volatility series of length `t`, targets `(f₁(ρ), f₂(ν))`
/// with `σ` held fixed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvolModel {
    pub t: usize,
    pub sigma: f64,
    pub scaled: bool,
    #[serde(skip, default = "svol_transform")]
    transform: ParamTransform,
}

fn svol_transform() -> ParamTransform {
    ParamTransform::PerCoordinate(vec![Transform::Fisher, Transform::LogShift2])
}

impl SvolModel {
    pub fn new(t: usize, sigma: f64, scaled: bool) -> Self {
        Self {
            t,
            sigma,
            scaled,
            transform: svol_transform(),
        }
    }

    pub fn params(&self, theta: &[f64]) -> Result<SvolParams> {
        let nat = self.natural(theta)?;
        let p = SvolParams {
            rho: nat[0],
            nu: nat[1],
            sigma: self.sigma,
        };
        p.validate()?;
        Ok(p)
    }
}

impl Simulator for SvolModel {
    fn param_dim(&self) -> usize {
        2
    }

    fn data_shape(&self) -> Vec<usize> {
        vec![self.t]
    }

    fn transform(&self) -> &ParamTransform {
        &self.transform
    }

    fn validate(&self, theta: &[f64]) -> Result<()> {
        self.params(theta).map(|_| ())
    }

    fn simulate(&self, theta: &[f64], rng: &mut RngStream) -> Result<Vec<f64>> {
        self.simulate_len(theta, self.t, rng)
    }
}

impl SeriesSimulator for SvolModel {
    fn length(&self) -> usize {
        self.t
    }

    fn simulate_len(&self, theta: &[f64], t: usize, rng: &mut RngStream) -> Result<Vec<f64>> {
        Ok(sim_svol(&self.params(theta)?, t, rng, self.scaled)?.into_data())
    }
}

/// Unit-innovation AR(1) series of length `t`, target `f₁(ρ)` by default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ar1Model {
    pub t: usize,
    transform: ParamTransform,
}

impl Ar1Model {
    pub fn new(t: usize) -> Self {
        Self::with_transform(t, Transform::Fisher)
    }

    /// Targets `transform(ρ)`, e.g. [`Transform::Identity`] for raw `ρ`.
    pub fn with_transform(t: usize, transform: Transform) -> Self {
        Self {
            t,
            transform: ParamTransform::PerCoordinate(vec![transform]),
        }
    }
}

impl Simulator for Ar1Model {
    fn param_dim(&self) -> usize {
        1
    }

    fn data_shape(&self) -> Vec<usize> {
        vec![self.t]
    }

    fn transform(&self) -> &ParamTransform {
        &self.transform
    }

    fn simulate(&self, theta: &[f64], rng: &mut RngStream) -> Result<Vec<f64>> {
        self.simulate_len(theta, self.t, rng)
    }
}

impl SeriesSimulator for Ar1Model {
    fn length(&self) -> usize {
        self.t
    }

    fn simulate_len(&self, theta: &[f64], t: usize, rng: &mut RngStream) -> Result<Vec<f64>> {
        let rho = self.natural(theta)?[0];
        Ok(sim_ar1(rho, t, rng)?.into_data())
    }
}

/// Closed-form AR(1) estimator reported as `transform(ρ̂)`, usable wherever
/// a trained network is expected.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ar1MleEstimator {
    pub transform: Transform,
}

impl Default for Ar1MleEstimator {
    fn default() -> Self {
        Self {
            transform: Transform::Fisher,
        }
    }
}

impl Estimator for Ar1MleEstimator {
    fn output_dim(&self) -> usize {
        1
    }

    fn estimate(&self, x: &[f64]) -> Result<Vec<f64>> {
        let bound = 1.0 - 1e-12;
        let rho = ar1_mle(x)?.clamp(-bound, bound);
        Ok(vec![self.transform.apply(rho)?])
    }
}
