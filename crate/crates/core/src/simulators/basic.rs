use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{RngStream, Tensor};

/// I.i.d. `N(μ, exp(log_var))` sample of size `j`.
pub fn sim_gaussian_iid(mu: f64, log_var: f64, j: usize, rng: &mut RngStream) -> Result<Tensor> {
    if j == 0 {
        return Err(Error::InvalidArgument("sample size must be >= 1".into()));
    }
    if !mu.is_finite() || !log_var.is_finite() {
        return Err(Error::SimulatorDomain(format!(
            "gaussian parameters must be finite (mu={mu}, log_var={log_var})"
        )));
    }
    let sd = (0.5 * log_var).exp();
    Ok(Tensor::from_vec((0..j).map(|_| mu + sd * rng.normal()).collect()))
}

fn check_rho(rho: f64) -> Result<()> {
    if rho.abs() < 1.0 {
        Ok(())
    } else {
        Err(Error::NonStationary { rho })
    }
}

/// Stationary AR(1) with unit innovations, started from its stationary law.
pub fn sim_ar1(rho: f64, t: usize, rng: &mut RngStream) -> Result<Tensor> {
    check_rho(rho)?;
    let mut out = Vec::with_capacity(t);
    if t > 0 {
        let mut x = rng.normal() / (1.0 - rho * rho).sqrt();
        out.push(x);
        for _ in 1..t {
            x = rho * x + rng.normal();
            out.push(x);
        }
    }
    Ok(Tensor::from_vec(out))
}

/// Stochastic-volatility parameters: latent AR(1) coefficient, Student-t
/// degrees of freedom and latent innovation sd.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvolParams {
    pub rho: f64,
    pub nu: f64,
    pub sigma: f64,
}

impl SvolParams {
    pub fn validate(&self) -> Result<()> {
        check_rho(self.rho)?;
        if !(self.nu > 2.0) {
            return Err(Error::BadDof { nu: self.nu });
        }
        if !(self.sigma > 0.0) {
            return Err(Error::SimulatorDomain(format!("sigma must be > 0, got {}", self.sigma)));
        }
        Ok(())
    }

    /// Stationary sd of the latent log-variance, `σ / sqrt(1 - ρ²)`.
    pub fn latent_sd(&self) -> f64 {
        self.sigma / (1.0 - self.rho * self.rho).sqrt()
    }
}

/// SVOL observations together with the latent log-variance path.
///
/// `x(t) = exp(h(t)/2) ε(t)` with unit-variance Student-t `ε` and
/// `h(t) = ρ h(t-1) + ξ(t)`, `ξ ~ N(0, σ²)`. When `scaled`, `h` is divided
/// by its stationary sd and `x` by `exp(1/4)`, so both have unit variance
/// and `σ` drops out.
pub fn sim_svol_with_latent(p: &SvolParams, t: usize, rng: &mut RngStream, scaled: bool) -> Result<(Tensor, Tensor)> {
    p.validate()?;
    let h_sd = p.latent_sd();
    let mut h = Vec::with_capacity(t);
    if t > 0 {
        let mut cur = h_sd * rng.normal();
        h.push(cur);
        for _ in 1..t {
            cur = p.rho * cur + p.sigma * rng.normal();
            h.push(cur);
        }
    }
    if scaled {
        for v in &mut h {
            *v /= h_sd;
        }
    }
    let x_scale = if scaled { (-0.25f64).exp() } else { 1.0 };
    let mut x = Vec::with_capacity(t);
    for &hv in &h {
        x.push(x_scale * (0.5 * hv).exp() * rng.student_t_unit_var(p.nu)?);
    }
    Ok((Tensor::from_vec(x), Tensor::from_vec(h)))
}

pub fn sim_svol(p: &SvolParams, t: usize, rng: &mut RngStream, scaled: bool) -> Result<Tensor> {
    sim_svol_with_latent(p, t, rng, scaled).map(|(x, _)| x)
}

/// Conditional least-squares (Gaussian conditional MLE) of the AR(1)
/// coefficient, `Σ x(t) x(t-1) / Σ x(t-1)²`.
pub fn ar1_mle(x: &[f64]) -> Result<f64> {
    if x.len() < 2 {
        return Err(Error::DegenerateInput("AR(1) estimate needs at least two values".into()));
    }
    let num: f64 = x.windows(2).map(|w| w[0] * w[1]).sum();
    let den: f64 = x[..x.len() - 1].iter().map(|v| v * v).sum();
    if den == 0.0 {
        return Err(Error::DegenerateInput("AR(1) estimate on an all-zero series".into()));
    }
    Ok(num / den)
}
