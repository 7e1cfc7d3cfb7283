use serde::{Deserialize, Serialize};

use super::spatial::{Grid2D, PowExpParams};
use crate::error::{Error, Result};
use crate::math::stats::normal_quantile;
use crate::math::Tensor;

/// Least-squares powered-exponential fit to an empirical semivariogram.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowExpFit {
    pub alpha: f64,
    pub eta: f64,
    pub objective: f64,
}

impl PowExpFit {
    pub fn params(&self) -> PowExpParams {
        PowExpParams {
            range: self.alpha,
            shape: self.eta,
        }
    }
}

/// Binned empirical semivariogram: bin centers (mean pair distance),
/// semivariance and pair counts.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalVariogram {
    pub lags: Vec<f64>,
    pub gamma: Vec<f64>,
    pub pairs: Vec<f64>,
}

/// Normal scores of `x` from average ranks, `Φ⁻¹((r - 1/2) / n)`.
pub fn normal_scores(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut out = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        // ranks i+1..=j+1 share their average
        let r = (i + j) as f64 / 2.0 + 1.0;
        let z = normal_quantile((r - 0.5) / n as f64);
        for &k in &idx[i..=j] {
            out[k] = z;
        }
        i = j + 1;
    }
    out
}

/// Empirical semivariogram of rank-Gaussianized fields. Bins have the grid
/// spacing as width and stop at half the grid diagonal.
pub fn empirical_variogram(fields: &[Tensor], grid: &Grid2D) -> Result<EmpiricalVariogram> {
    grid.validate()?;
    if fields.is_empty() {
        return Err(Error::EmptySample);
    }
    let (nx, ny) = (grid.nx, grid.ny);
    let max_lag = 0.5 * grid.diameter();
    let nbins = (max_lag / grid.spacing).floor() as usize + 1;
    let mut sums = vec![0.0; nbins];
    let mut counts = vec![0.0; nbins];
    let mut dist_sums = vec![0.0; nbins];
    for f in fields {
        if f.len() != grid.sites() {
            return Err(Error::ShapeMismatch {
                expected: vec![ny, nx],
                got: f.shape().to_vec(),
            });
        }
    }
    // Ranks are pooled over all replicates: the margins are shared, and
    // per-field standardization would bias the sill of correlated fields.
    let pooled: Vec<f64> = fields.iter().flat_map(|f| f.data().iter().copied()).collect();
    let first = pooled[0];
    if pooled.iter().all(|&v| v == first) {
        return Err(Error::DegenerateField);
    }
    let scores = normal_scores(&pooled);
    for z in scores.chunks(grid.sites()) {
        // Offsets with dx > 0, or dx == 0 and dy > 0, visit each pair once.
        for dx in 0..nx as isize {
            let dy_start = if dx == 0 { 1 } else { -(ny as isize) + 1 };
            for dy in dy_start..ny as isize {
                let h = grid.spacing * (dx as f64).hypot(dy as f64);
                if h > max_lag {
                    continue;
                }
                let bin = (h / grid.spacing).round() as usize;
                if bin >= nbins {
                    continue;
                }
                let mut s = 0.0;
                let mut c = 0usize;
                for y in 0..ny as isize {
                    let y2 = y + dy;
                    if y2 < 0 || y2 >= ny as isize {
                        continue;
                    }
                    for x in 0..(nx as isize - dx) {
                        let a = z[(y as usize) * nx + x as usize];
                        let b = z[(y2 as usize) * nx + (x + dx) as usize];
                        s += (a - b) * (a - b);
                        c += 1;
                    }
                }
                sums[bin] += 0.5 * s;
                counts[bin] += c as f64;
                dist_sums[bin] += h * c as f64;
            }
        }
    }
    let mut v = EmpiricalVariogram {
        lags: Vec::new(),
        gamma: Vec::new(),
        pairs: Vec::new(),
    };
    for b in 0..nbins {
        if counts[b] > 0.0 {
            v.lags.push(dist_sums[b] / counts[b]);
            v.gamma.push(sums[b] / counts[b]);
            v.pairs.push(counts[b]);
        }
    }
    if v.lags.len() < 2 {
        return Err(Error::DegenerateInput("variogram needs at least two distinct distances".into()));
    }
    Ok(v)
}

fn objective(v: &EmpiricalVariogram, log_alpha: f64, eta: f64) -> f64 {
    let alpha = log_alpha.exp();
    let total: f64 = v.pairs.iter().sum();
    v.lags
        .iter()
        .zip(&v.gamma)
        .zip(&v.pairs)
        .map(|((&h, &g), &w)| {
            let model = 1.0 - (-(h / alpha).powf(eta)).exp();
            w * (g - model).powi(2)
        })
        .sum::<f64>()
        / total
}

const ETA_MIN: f64 = 0.05;

/// Fits `(α, η)` of the powered-exponential model to replicate fields on
/// `grid` by weighted least squares on the semivariogram of their normal
/// scores. `α` is searched on `[0.01 spacing, diameter]`, `η` on `(0, 2]`.
pub fn fit_powexp(fields: &[Tensor], grid: &Grid2D) -> Result<PowExpFit> {
    let v = empirical_variogram(fields, grid)?;
    let lo = (0.01 * grid.spacing).ln();
    let hi = grid.diameter().ln();
    let clamp = |la: f64, e: f64| (la.clamp(lo, hi), e.clamp(ETA_MIN, 2.0));

    let mut best = (lo, 1.0, f64::INFINITY);
    let (na, ne) = (80, 40);
    for i in 0..=na {
        let la = lo + (hi - lo) * i as f64 / na as f64;
        for j in 0..ne {
            let e = ETA_MIN + (2.0 - ETA_MIN) * j as f64 / (ne - 1) as f64;
            let f = objective(&v, la, e);
            if f < best.2 {
                best = (la, e, f);
            }
        }
    }
    // Compass search from the best grid point.
    let (mut sa, mut se) = ((hi - lo) / na as f64, (2.0 - ETA_MIN) / (ne - 1) as f64);
    while sa > 1e-9 || se > 1e-9 {
        let mut improved = false;
        for (da, de) in [(sa, 0.0), (-sa, 0.0), (0.0, se), (0.0, -se)] {
            let (la, e) = clamp(best.0 + da, best.1 + de);
            let f = objective(&v, la, e);
            if f < best.2 {
                best = (la, e, f);
                improved = true;
            }
        }
        if !improved {
            sa *= 0.5;
            se *= 0.5;
        }
    }
    Ok(PowExpFit {
        alpha: best.0.exp(),
        eta: best.1,
        objective: best.2,
    })
}
