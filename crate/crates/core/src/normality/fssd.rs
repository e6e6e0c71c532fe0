//! Finite-set Stein discrepancy against the Gaussian fitted to the sample.
//!
//! With score `s(x) = (mean - x) / sd^2`, Gaussian kernel of width `σ` and
//! locations `v_1..v_m`, the witness feature is
//! `ξ(x, v) = [s(x) - (x - v)/σ^2] exp(-(x - v)^2 / (2σ^2))` and the statistic
//! is the U-statistic `1/(n(n-1)) Σ_{i≠j} (1/m) Σ_l ξ(x_i, v_l) ξ(x_j, v_l)`.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Method, TestResult};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::features::{check_sample, mean, sd};
use crate::rng::RandomStream;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    /// Median of `|x_i - x_j|` over pairs.
    Median,
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FssdConfig {
    /// Number of witness locations.
    pub m: usize,
    pub bandwidth: Bandwidth,
    /// Parametric-bootstrap draws for the p-value.
    pub null_sims: usize,
}

impl Default for FssdConfig {
    fn default() -> Self {
        FssdConfig { m: 10, bandwidth: Bandwidth::Median, null_sims: 200 }
    }
}

impl FssdConfig {
    fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::InvalidParameter("FSSD needs at least one location".into()));
        }
        if let Bandwidth::Fixed(b) = self.bandwidth {
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::ZeroBandwidth);
            }
        }
        Ok(())
    }
}

fn standard_normal(rng: &mut RandomStream) -> f64 {
    StandardNormal.sample(rng)
}

fn median_abs_difference(x: &[f64]) -> f64 {
    let n = x.len();
    let mut d = Vec::with_capacity(n * (n - 1) / 2);
    for i in 1..n {
        for j in 0..i {
            d.push((x[i] - x[j]).abs());
        }
    }
    let k = d.len();
    let (_, &mut upper, _) = d.select_nth_unstable_by(k / 2, f64::total_cmp);
    if k % 2 == 1 {
        upper
    } else {
        let lower = d[..k / 2].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

/// Statistic for the model `N(mu, var)` with given locations and bandwidth.
pub fn fssd_u_statistic(x: &[f64], mu: f64, var: f64, locations: &[f64], width: f64) -> f64 {
    let n = x.len() as f64;
    let w2 = width * width;
    let mut total = 0.0;
    for &v in locations {
        let (mut s, mut s2) = (0.0, 0.0);
        for &xi in x {
            let d = xi - v;
            let xi_v = ((mu - xi) / var - d / w2) * (-d * d / (2.0 * w2)).exp();
            s += xi_v;
            s2 += xi_v * xi_v;
        }
        total += s * s - s2;
    }
    total / (locations.len() as f64 * n * (n - 1.0))
}

pub fn fssd_statistic(x: &[f64], cfg: &FssdConfig, rng: &mut RandomStream) -> Result<f64> {
    check_sample(x, 2)?;
    cfg.validate()?;
    let mu = mean(x);
    let s = sd(x);
    if !(s > 0.0) {
        return Err(Error::ConstantSample);
    }
    let locations: Vec<f64> = (0..cfg.m).map(|_| mu + s * standard_normal(rng)).collect();
    let width = match cfg.bandwidth {
        Bandwidth::Median => median_abs_difference(x),
        Bandwidth::Fixed(b) => b,
    };
    if !(width > 0.0) {
        return Err(Error::ZeroBandwidth);
    }
    Ok(fssd_u_statistic(x, mu, s * s, &locations, width))
}

/// Statistic plus a parametric-bootstrap p-value: `null_sims` samples from the
/// fitted Gaussian are put through the whole pipeline (refit, new locations,
/// new bandwidth).
pub fn fssd_test(x: &[f64], cfg: &FssdConfig, rng: &mut RandomStream) -> Result<TestResult> {
    if cfg.null_sims < 100 {
        return Err(Error::InvalidParameter(format!("FSSD needs at least 100 null draws, got {}", cfg.null_sims)));
    }
    let observed = fssd_statistic(x, cfg, rng)?;
    let (mu, s, n) = (mean(x), sd(x), x.len());
    let seed = rng.next_seed();
    let sims = Exec::default().try_map(cfg.null_sims, |b| {
        let mut r = RandomStream::derive(seed, b as u64);
        let y: Vec<f64> = (0..n).map(|_| mu + s * standard_normal(&mut r)).collect();
        fssd_statistic(&y, cfg, &mut r)
    })?;
    let exceed = sims.iter().filter(|&&t| t >= observed).count();
    let p = (1.0 + exceed as f64) / (1.0 + cfg.null_sims as f64);
    Ok(TestResult::new(Method::FSSD, observed, p))
}
