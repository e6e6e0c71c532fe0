//! Fixed-length inputs for the classifiers: the quantile descriptor and the
//! vector of test statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normality::shapiro_wilk;

/// Checks the size and finiteness of a sample.
pub fn check_sample(x: &[f64], min: usize) -> Result<()> {
    if x.len() < min {
        return Err(Error::SampleTooSmall { n: x.len(), min });
    }
    if let Some(index) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    Ok(())
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample standard deviation with the `n - 1` denominator.
pub fn sd(x: &[f64]) -> f64 {
    let m = mean(x);
    let ss: f64 = x.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (x.len() as f64 - 1.0)).sqrt()
}

fn mean_sd_checked(x: &[f64]) -> Result<(f64, f64)> {
    let m = mean(x);
    let s = sd(x);
    if !(s > 0.0) || x.iter().all(|&v| v == x[0]) {
        return Err(Error::ConstantSample);
    }
    Ok((m, s))
}

/// `z_i = (x_i - mean) / sd`.
pub fn standardize(x: &[f64]) -> Result<Vec<f64>> {
    check_sample(x, 3)?;
    let (m, s) = mean_sd_checked(x)?;
    Ok(x.iter().map(|v| (v - m) / s).collect())
}

pub(crate) fn sorted(x: &[f64]) -> Vec<f64> {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

fn check_probability(p: f64) -> Result<()> {
    if p > 0.0 && p <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidProbability(p))
    }
}

/// Quantile on an already sorted slice.
fn quantile_sorted(z: &[f64], p: f64) -> f64 {
    let n = z.len();
    let j = ((p * n as f64 - 1e-9).ceil() as usize).clamp(1, n);
    z[j - 1]
}

/// Smallest element whose empirical CDF value reaches `p`.
pub fn empirical_quantile(z: &[f64], p: f64) -> Result<f64> {
    check_probability(p)?;
    if z.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(quantile_sorted(&sorted(z), p))
}

fn median_sorted(v: &[f64]) -> f64 {
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Quantiles of the standardized sample followed by summary statistics of
/// the raw sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Descriptor {
    pub quantiles: Vec<f64>,
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
    pub median: f64,
}

impl Descriptor {
    /// Flat layout: quantiles, then n, mean, sd, min, max, median.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.quantiles.clone();
        v.extend_from_slice(&[self.n as f64, self.mean, self.sd, self.min, self.max, self.median]);
        v
    }

    /// CSV column names matching [`Descriptor::to_vec`].
    pub fn header(q: f64) -> Result<Vec<String>> {
        let mut h: Vec<String> = quantile_grid(q)?.iter().map(|p| format!("h_{p}")).collect();
        h.extend(["n", "mean", "sd", "min", "max", "median"].map(String::from));
        Ok(h)
    }
}

/// Probabilities `q, 2q, ...` ending exactly at 1.
pub fn quantile_grid(q: f64) -> Result<Vec<f64>> {
    check_probability(q)?;
    let count = (1.0 / q - 1e-9).ceil().max(1.0) as usize;
    Ok((1..=count).map(|k| if k == count { 1.0 } else { (k as f64 * q).min(1.0) }).collect())
}

/// Length of the descriptor for granularity `q`.
pub fn descriptor_dim(q: f64) -> Result<usize> {
    Ok(quantile_grid(q)?.len() + 6)
}

pub fn descriptor(x: &[f64], q: f64) -> Result<Descriptor> {
    check_sample(x, 3)?;
    let grid = quantile_grid(q)?;
    if grid.len() > 10 * x.len() {
        return Err(Error::InvalidProbability(q));
    }
    let (m, s) = mean_sd_checked(x)?;
    let xs = sorted(x);
    let z: Vec<f64> = xs.iter().map(|v| (v - m) / s).collect();
    Ok(Descriptor {
        quantiles: grid.iter().map(|&p| quantile_sorted(&z, p)).collect(),
        n: x.len(),
        mean: m,
        sd: s,
        min: xs[0],
        max: xs[xs.len() - 1],
        median: median_sorted(&xs),
    })
}

/// Central moments `(m2, m3, m4)` with the `1/n` normalization.
fn central_moments(x: &[f64]) -> (f64, f64, f64) {
    let m = mean(x);
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in x {
        let d = v - m;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let n = x.len() as f64;
    (m2 / n, m3 / n, m4 / n)
}

/// `m3 / m2^(3/2)`.
pub fn skewness(x: &[f64]) -> Result<f64> {
    check_sample(x, 3)?;
    mean_sd_checked(x)?;
    let (m2, m3, _) = central_moments(x);
    Ok(m3 / m2.powf(1.5))
}

/// `m4 / m2^2`, not excess.
pub fn kurtosis(x: &[f64]) -> Result<f64> {
    check_sample(x, 3)?;
    mean_sd_checked(x)?;
    let (m2, _, m4) = central_moments(x);
    Ok(m4 / (m2 * m2))
}

/// Lin-Mudholkar statistic: Fisher transform of the correlation between each
/// observation and the cube root of the leave-one-out variance.
pub fn lin_mudholkar(x: &[f64]) -> Result<f64> {
    check_sample(x, 4)?;
    let (m, _) = mean_sd_checked(x)?;
    let n = x.len() as f64;
    let c: Vec<f64> = x.iter().map(|v| v - m).collect();
    let total: f64 = c.iter().sum();
    let total_sq: f64 = c.iter().map(|v| v * v).sum();
    let h: Vec<f64> = c
        .iter()
        .map(|v| {
            let s = total - v;
            let t = (total_sq - v * v - s * s / (n - 1.0)) / n;
            t.cbrt()
        })
        .collect();
    let hbar = h.iter().sum::<f64>() / n;
    let (mut sxh, mut sxx, mut shh) = (0.0, 0.0, 0.0);
    for (xi, hi) in c.iter().zip(&h) {
        let dh = hi - hbar;
        sxh += xi * dh;
        sxx += xi * xi;
        shh += dh * dh;
    }
    if sxx <= 0.0 || shh <= 0.0 {
        return Err(Error::DegenerateCorrelation);
    }
    let r = (sxh / (sxx * shh).sqrt()).clamp(-1.0, 1.0);
    Ok(r.atanh())
}

/// Vasicek entropy statistic with window `m`.
pub fn vasicek(x: &[f64], m: usize) -> Result<f64> {
    check_sample(x, 3)?;
    let n = x.len();
    if m == 0 || 2 * m >= n {
        return Err(Error::InvalidWindow { m, n });
    }
    let (_, s) = mean_sd_checked(x)?;
    let xs = sorted(x);
    let mut log_sum = 0.0;
    for i in 0..n {
        let hi = xs[(i + m).min(n - 1)];
        let lo = xs[i.saturating_sub(m)];
        let gap = hi - lo;
        if gap <= 0.0 {
            return Err(Error::ZeroSpacing);
        }
        log_sum += gap.ln();
    }
    Ok(n as f64 / (2.0 * m as f64 * s) * (log_sum / n as f64).exp())
}

/// `[skew, kurt, W, Z_p, K_3, K_5, n]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatVector {
    pub skew: f64,
    pub kurt: f64,
    pub w: f64,
    pub zp: f64,
    pub k3: f64,
    pub k5: f64,
    pub n: usize,
}

impl StatVector {
    pub const DIM: usize = 7;

    pub fn to_vec(&self) -> Vec<f64> {
        vec![self.skew, self.kurt, self.w, self.zp, self.k3, self.k5, self.n as f64]
    }
}

pub fn sbnn_features(x: &[f64]) -> Result<StatVector> {
    check_sample(x, 11)?;
    Ok(StatVector {
        skew: skewness(x)?,
        kurt: kurtosis(x)?,
        w: shapiro_wilk(x)?.statistic,
        zp: lin_mudholkar(x)?,
        k3: vasicek(x, 3)?,
        k5: vasicek(x, 5)?,
        n: x.len(),
    })
}

/// How a sample is turned into a network input.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureMap {
    Descriptor { q: f64 },
    Statistics,
}

impl FeatureMap {
    pub fn dim(&self) -> Result<usize> {
        match *self {
            FeatureMap::Descriptor { q } => descriptor_dim(q),
            FeatureMap::Statistics => Ok(StatVector::DIM),
        }
    }

    /// Smallest sample the map accepts.
    pub fn min_size(&self) -> usize {
        match self {
            FeatureMap::Descriptor { .. } => 3,
            FeatureMap::Statistics => 11,
        }
    }

    pub fn extract(&self, x: &[f64]) -> Result<Vec<f64>> {
        match *self {
            FeatureMap::Descriptor { q } => descriptor(x, q).map(|d| d.to_vec()),
            FeatureMap::Statistics => sbnn_features(x).map(|s| s.to_vec()),
        }
    }
}
