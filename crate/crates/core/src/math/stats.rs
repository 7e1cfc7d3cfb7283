use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Linear-interpolation quantile on `(n-1)·α` of an unsorted sample.
pub fn quantile(samples: &[f64], alpha: f64) -> Result<f64> {
    let sorted = sorted_copy(samples)?;
    Ok(quantile_sorted(&sorted, alpha))
}

pub(crate) fn sorted_copy(samples: &[f64]) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    if let Some(v) = samples.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite sample value {v}")));
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(s)
}

/// Quantile of an already sorted, nonempty sample.
pub fn quantile_sorted(sorted: &[f64], alpha: f64) -> f64 {
    let n = sorted.len();
    let alpha = alpha.clamp(0.0, 1.0);
    let h = (n - 1) as f64 * alpha;
    let lo = h.floor() as usize;
    if lo + 1 >= n {
        return sorted[n - 1];
    }
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
}

pub fn median(samples: &[f64]) -> Result<f64> {
    quantile(samples, 0.5)
}

pub fn mean(samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    Ok(samples.iter().sum::<f64>() / samples.len() as f64)
}

/// Sample standard deviation (denominator `n - 1`); zero for a singleton.
pub fn sample_sd(samples: &[f64]) -> Result<f64> {
    let m = mean(samples)?;
    if samples.len() < 2 {
        return Ok(0.0);
    }
    let ss: f64 = samples.iter().map(|v| (v - m).powi(2)).sum();
    Ok((ss / (samples.len() - 1) as f64).sqrt())
}

/// Lag-1 sample autocorrelation.
pub fn autocorr1(x: &[f64]) -> f64 {
    let n = x.len();
    let m = x.iter().sum::<f64>() / n as f64;
    let den: f64 = x.iter().map(|v| (v - m).powi(2)).sum();
    let num: f64 = x.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum();
    num / den
}

/// Median, sample sd and a set of quantiles of one coordinate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSummary {
    pub median: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
    /// Keyed by `α` printed with full precision.
    pub quantiles: BTreeMap<String, f64>,
}

impl SampleSummary {
    pub fn from_samples(samples: &[f64], alphas: &[f64]) -> Result<Self> {
        let sorted = sorted_copy(samples)?;
        let quantiles = alphas
            .iter()
            .map(|&a| (a.to_string(), quantile_sorted(&sorted, a)))
            .collect();
        Ok(Self {
            median: quantile_sorted(&sorted, 0.5),
            sd: sample_sd(samples)?,
            min: sorted[0],
            max: sorted[sorted.len() - 1],
            quantiles,
        })
    }

    pub fn quantile(&self, alpha: f64) -> Option<f64> {
        self.quantiles.get(&alpha.to_string()).copied()
    }
}

/// Standard normal quantile (Acklam's approximation plus one Halley step).
pub fn normal_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let plow = 0.02425;
    let x = if p < plow {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - plow {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    let e = normal_cdf(x) - p;
    let u = e * (2.0 * std::f64::consts::PI).sqrt() * (x * x / 2.0).exp();
    x - u / (1.0 + x * u / 2.0)
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Asymptotic Kolmogorov survival function `P(K > x)`.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * x * x).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// One-sample Kolmogorov-Smirnov test. Returns `(D, p)`.
pub fn ks_one_sample(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<(f64, f64)> {
    let s = sorted_copy(samples)?;
    let n = s.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in s.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    let sqrt_n = n.sqrt();
    let p = kolmogorov_sf((sqrt_n + 0.12 + 0.11 / sqrt_n) * d);
    Ok((d, p))
}

/// Two-sample Kolmogorov-Smirnov test. Returns `(D, p)`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    let sa = sorted_copy(a)?;
    let sb = sorted_copy(b)?;
    let (na, nb) = (sa.len(), sb.len());
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < na && j < nb {
        let x = sa[i].min(sb[j]);
        while i < na && sa[i] <= x {
            i += 1;
        }
        while j < nb && sb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na as f64 - j as f64 / nb as f64).abs());
    }
    let ne = (na * nb) as f64 / (na + nb) as f64;
    let sqrt_n = ne.sqrt();
    let p = kolmogorov_sf((sqrt_n + 0.12 + 0.11 / sqrt_n) * d);
    Ok((d, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn quantile_examples() {
        let s = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile(&s, 0.5).unwrap(), 3.0);
        assert_eq!(quantile(&[7.0], 0.975).unwrap(), 7.0);
        assert!((quantile(&s, 0.975).unwrap() - 4.9).abs() < 1e-12);
        assert!(matches!(quantile(&[], 0.5), Err(Error::EmptySample)));
    }

    #[test]
    fn sd_matches_two_pass() {
        let s = [2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0];
        // Two-pass: mean 5, sum of squares 32, n-1 = 7.
        assert!((sample_sd(&s).unwrap() - (32.0f64 / 7.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn normal_quantile_inverts_cdf() {
        for p in [1e-6, 0.01, 0.025, 0.3, 0.5, 0.8, 0.975, 0.999] {
            let x = normal_quantile(p);
            assert!((normal_cdf(x) - p).abs() < 1e-7 * p.max(1e-2), "p={p}");
        }
        assert!((normal_quantile(0.975) - 1.959964).abs() < 1e-5);
    }

    #[test]
    fn ks_detects_shift() {
        let u: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        let (_, p) = ks_one_sample(&u, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!(p > 0.99);
        let shifted: Vec<f64> = u.iter().map(|x| x * 0.8).collect();
        let (_, p) = ks_one_sample(&shifted, |x| x.clamp(0.0, 1.0)).unwrap();
        assert!(p < 1e-6);
        let (_, p) = ks_two_sample(&u, &shifted).unwrap();
        assert!(p < 1e-6);
    }

    proptest! {
        #[test]
        fn quantile_endpoints_and_monotone(
            s in proptest::collection::vec(-1e6f64..1e6, 1..200),
            a in 0.0f64..1.0,
            b in 0.0f64..1.0,
        ) {
            let min = s.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert_eq!(quantile(&s, 0.0).unwrap(), min);
            prop_assert_eq!(quantile(&s, 1.0).unwrap(), max);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(quantile(&s, lo).unwrap() <= quantile(&s, hi).unwrap());
            let summary = SampleSummary::from_samples(&s, &[lo, hi]).unwrap();
            prop_assert!(summary.min <= summary.median && summary.median <= summary.max);
        }

        #[test]
        fn sd_matches_brute_force(s in proptest::collection::vec(-1e3f64..1e3, 2..1000)) {
            let n = s.len() as f64;
            let m = s.iter().sum::<f64>() / n;
            let brute = (s.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0)).sqrt();
            let got = sample_sd(&s).unwrap();
            prop_assert!((got - brute).abs() <= 1e-9 * (1.0 + brute));
        }
    }
}
