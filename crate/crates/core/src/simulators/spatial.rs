use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{cholesky, lower_mul, RngStream, Tensor};


/// Regular `nx x ny` grid. Sites are ordered row-major (`x` fastest) and
/// fields are returned as `[ny, nx]` tensors.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    pub nx: usize,
    pub ny: usize,
    pub spacing: f64,
}

impl Grid2D {
    pub fn square(n: usize) -> Self {
        Self {
            nx: n,
            ny: n,
            spacing: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 2 || self.ny < 2 || !(self.spacing > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "grid needs nx, ny >= 2 and spacing > 0 (got {self:?})"
            )));
        }
        Ok(())
    }

    pub fn sites(&self) -> usize {
        self.nx * self.ny
    }

    pub fn coords(&self, site: usize) -> (f64, f64) {
        (
            (site % self.nx) as f64 * self.spacing,
            (site / self.nx) as f64 * self.spacing,
        )
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        let dx = (a % self.nx).abs_diff(b % self.nx) as f64;
        let dy = (a / self.nx).abs_diff(b / self.nx) as f64;
        self.spacing * dx.hypot(dy)
    }

    /// Largest distance between two sites.
    pub fn diameter(&self) -> f64 {
        self.spacing * ((self.nx - 1) as f64).hypot((self.ny - 1) as f64)
    }

    /// Distance lookup indexed by `|dx| * ny + |dy|`.
    fn offset_distances(&self) -> Vec<f64> {
        let mut d = Vec::with_capacity(self.nx * self.ny);
        for dx in 0..self.nx {
            for dy in 0..self.ny {
                d.push(self.spacing * (dx as f64).hypot(dy as f64));
            }
        }
        d
    }

    fn offset_index(&self, a: usize, b: usize) -> usize {
        (a % self.nx).abs_diff(b % self.nx) * self.ny + (a / self.nx).abs_diff(b / self.nx)
    }
}

/// Powered-exponential correlation `C(h) = exp(-(h/α)^η)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowExpParams {
    pub range: f64,
    pub shape: f64,
}

impl PowExpParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.range > 0.0) || !(self.shape > 0.0 && self.shape <= 2.0) {
            return Err(Error::SimulatorDomain(format!(
                "powered exponential needs range > 0 and shape in (0, 2] (got {self:?})"
            )));
        }
        Ok(())
    }

    pub fn correlation(&self, h: f64) -> f64 {
        (-(h / self.range).powf(self.shape)).exp()
    }
}

/// Exact zero-mean, unit-variance Gaussian-process sampler on a grid.
pub struct GpSampler {
    chol: Tensor,
}

impl GpSampler {
    pub fn new(grid: &Grid2D, cov: &PowExpParams) -> Result<Self> {
        grid.validate()?;
        cov.validate()?;
        let n = grid.sites();
        let table: Vec<f64> = grid.offset_distances().iter().map(|&h| cov.correlation(h)).collect();
        let mut c = Tensor::zeros(vec![n, n]);
        for i in 0..n {
            for j in 0..=i {
                let v = table[grid.offset_index(i, j)];
                c.set(i, j, v);
                c.set(j, i, v);
            }
        }
        Ok(Self { chol: cholesky(&c)? })
    }

    pub fn sample(&self, rng: &mut RngStream) -> Tensor {
        let n = self.chol.shape()[0];
        let z = rng.draw_normal(n);
        let mut out = vec![0.0; n];
        lower_mul(&self.chol, z.data(), &mut out);
        Tensor::from_vec(out)
    }
}

pub fn sim_gp(grid: &Grid2D, cov: &PowExpParams, rng: &mut RngStream) -> Result<Tensor> {
    let s = GpSampler::new(grid, cov)?;
    s.sample(rng).reshape(vec![grid.ny, grid.nx])
}

/// Brown-Resnick parameters: semivariogram `γ(h) = (h/λ)^ν`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BrownResnickParams {
    pub range: f64,
    pub smoothness: f64,
}

impl BrownResnickParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.range > 0.0 && self.range.is_finite()) || !(self.smoothness > 0.0 && self.smoothness <= 2.0) {
            return Err(Error::SimulatorDomain(format!(
                "Brown-Resnick needs range > 0 and smoothness in (0, 2] (got {self:?})"
            )));
        }
        Ok(())
    }

    pub fn semivariogram(&self, h: f64) -> f64 {
        (h / self.range).powf(self.smoothness)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BrownResnickConfig {
    /// Largest grid (in sites) accepted.
    pub max_sites: usize,
    /// Cap on spectral-function draws per realization, as a multiple of the
    /// number of sites.
    pub draws_per_site_cap: usize,
}

impl Default for BrownResnickConfig {
    fn default() -> Self {
        Self {
            max_sites: 64 * 64,
            draws_per_site_cap: 100,
        }
    }
}

/// Diagnostics of one realization.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BrownResnickStats {
    pub draws: usize,
    /// True when the draw cap stopped the construction early; the field is
    /// then biased low.
    pub capped: bool,
}

/// Exact Brown-Resnick sampler using extremal functions.
///
/// For each site `x_k` in turn, Poisson points `ζ = 1/Γ` above the current
/// value `Z(x_k)` are paired with spectral functions normalized at `x_k`,
/// `Y(s) = exp(ε(s) - ε(x_k) - γ(s - x_k))`, and kept only if they do not
/// exceed `Z` at an earlier site. The Gaussian increments `ε(s) - ε(x_k)`
/// come from a single process anchored at site 0, so one Cholesky factor
/// serves every `k`.
pub struct BrownResnickSampler {
    grid: Grid2D,
    chol: Tensor,
    gamma_table: Vec<f64>,
    config: BrownResnickConfig,
}

impl BrownResnickSampler {
    pub fn new(params: &BrownResnickParams, grid: &Grid2D, config: BrownResnickConfig) -> Result<Self> {
        grid.validate()?;
        params.validate()?;
        let n = grid.sites();
        if n > config.max_sites {
            return Err(Error::GridTooLarge {
                sites: n,
                limit: config.max_sites,
            });
        }
        let gamma_table: Vec<f64> = grid
            .offset_distances()
            .iter()
            .map(|&h| params.semivariogram(h))
            .collect();
        // Cov(ε(s_i), ε(s_j)) for the process pinned to zero at site 0.
        let m = n - 1;
        let mut c = Tensor::zeros(vec![m, m]);
        for i in 1..n {
            let gi = gamma_table[grid.offset_index(i, 0)];
            for j in 1..=i {
                let gj = gamma_table[grid.offset_index(j, 0)];
                let v = gi + gj - gamma_table[grid.offset_index(i, j)];
                c.set(i - 1, j - 1, v);
                c.set(j - 1, i - 1, v);
            }
        }
        Ok(Self {
            grid: *grid,
            chol: cholesky(&c)?,
            gamma_table,
            config,
        })
    }

    /// `ε(s_site) - ε(s_0)` from the standard normals `z`.
    fn increment(&self, site: usize, z: &[f64]) -> f64 {
        if site == 0 {
            return 0.0;
        }
        let m = self.grid.sites() - 1;
        let row = &self.chol.data()[(site - 1) * m..(site - 1) * m + site];
        row.iter().zip(z).map(|(a, b)| a * b).sum()
    }

    /// One realization with unit-Fréchet margins, shaped `[ny, nx]`.
    pub fn sample(&self, rng: &mut RngStream) -> (Tensor, BrownResnickStats) {
        let n = self.grid.sites();
        let cap = self.config.draws_per_site_cap.saturating_mul(n).max(1);
        let mut field = vec![0.0f64; n];
        let mut z = vec![0.0; n - 1];
        let mut y = vec![0.0; n];
        let mut stats = BrownResnickStats::default();
        'sites: for k in 0..n {
            let mut gamma_sum = rng.exp1();
            while 1.0 / gamma_sum > field[k] {
                if stats.draws >= cap {
                    stats.capped = true;
                    break 'sites;
                }
                stats.draws += 1;
                let zeta = 1.0 / gamma_sum;
                for v in z.iter_mut() {
                    *v = rng.normal();
                }
                gamma_sum += rng.exp1();
                // Earlier sites are checked first so rejected draws stop
                // before the full matrix-vector product.
                let anchor = self.increment(k, &z);
                let mut accepted = true;
                for s in 0..n {
                    let g = self.gamma_table[self.grid.offset_index(s, k)];
                    y[s] = zeta * (self.increment(s, &z) - anchor - g).exp();
                    if s < k && y[s] >= field[s] {
                        accepted = false;
                        break;
                    }
                }
                if accepted {
                    for (f, &yv) in field.iter_mut().zip(&y) {
                        if yv > *f {
                            *f = yv;
                        }
                    }
                }
            }
        }
        if stats.capped {
            log::warn!("Brown-Resnick draw cap ({cap}) reached; realization is biased low");
        }
        let t = Tensor::new(vec![self.grid.ny, self.grid.nx], field).expect("grid-sized field");
        (t, stats)
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }
}

pub fn sim_brown_resnick(params: &BrownResnickParams, grid: &Grid2D, rng: &mut RngStream) -> Result<Tensor> {
    let sampler = BrownResnickSampler::new(params, grid, BrownResnickConfig::default())?;
    Ok(sampler.sample(rng).0)
}
