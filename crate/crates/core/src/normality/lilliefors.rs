//! Lilliefors (Kolmogorov-Smirnov with estimated mean and variance).
//!
//! p-values come from a Monte Carlo null table: the statistic of `sims`
//! standard normal samples of the same size. Tables are kept in memory for the
//! life of the process and, when a cache directory is configured (field
//! `cache_dir` or the `NORMNET_CACHE_DIR` variable), on disk as little-endian
//! `f64` files named `lf_n{n}_s{sims}_seed{seed}[_literal].bin`.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Method, TestResult};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::features::{check_sample, standardize};
use crate::rng::RandomStream;
use crate::special::normal_cdf;

pub const DEFAULT_LF_SEED: u64 = 0x11_11EF_0125;

/// How the distance between the EDF and `Φ` is measured.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdfConvention {
    /// `max(D+, D-)`, using both one-sided limits of the EDF at each point.
    Classical,
    /// `max |F_n(z_i) - Φ(z_i)|` over sample points only.
    Literal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LillieforsConfig {
    pub convention: EdfConvention,
    pub sims: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
}

impl Default for LillieforsConfig {
    fn default() -> Self {
        LillieforsConfig { convention: EdfConvention::Classical, sims: 10_000, seed: DEFAULT_LF_SEED, cache_dir: None }
    }
}

/// Statistic of an already standardized and sorted sample.
fn statistic_sorted(z: &[f64], convention: EdfConvention) -> f64 {
    let n = z.len();
    let nf = n as f64;
    let mut d: f64 = 0.0;
    match convention {
        EdfConvention::Classical => {
            for (i, &zi) in z.iter().enumerate() {
                let phi = normal_cdf(zi);
                d = d.max((i as f64 + 1.0) / nf - phi).max(phi - i as f64 / nf);
            }
        }
        EdfConvention::Literal => {
            let mut i = 0;
            while i < n {
                // F_n counts every tied value.
                let mut j = i;
                while j + 1 < n && z[j + 1] == z[i] {
                    j += 1;
                }
                let edf = (j as f64 + 1.0) / nf;
                d = d.max((edf - normal_cdf(z[i])).abs());
                i = j + 1;
            }
        }
    }
    d
}

pub fn lilliefors_statistic(x: &[f64], convention: EdfConvention) -> Result<f64> {
    check_sample(x, 4)?;
    let mut z = standardize(x)?;
    z.sort_by(f64::total_cmp);
    Ok(statistic_sorted(&z, convention))
}

/// Sorted null statistics for one sample size.
#[derive(Clone, Debug, PartialEq)]
pub struct NullTable {
    pub n: usize,
    pub seed: u64,
    pub stats: Vec<f64>,
}

impl NullTable {
    pub fn simulate(n: usize, sims: usize, seed: u64, convention: EdfConvention, exec: Exec) -> Result<NullTable> {
        if n < 4 {
            return Err(Error::SampleTooSmall { n, min: 4 });
        }
        if sims == 0 {
            return Err(Error::InvalidParameter("null table needs at least one simulation".into()));
        }
        let mut stats = exec.try_map(sims, |i| {
            let mut rng = RandomStream::derive(seed, i as u64);
            let x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            lilliefors_statistic(&x, convention)
        })?;
        stats.sort_by(f64::total_cmp);
        Ok(NullTable { n, seed, stats })
    }

    /// `(1 + #{null >= d}) / (1 + sims)`.
    pub fn p_value(&self, d: f64) -> f64 {
        let below = self.stats.partition_point(|&s| s < d);
        let at_least = self.stats.len() - below;
        (1.0 + at_least as f64) / (1.0 + self.stats.len() as f64)
    }

    fn file_name(n: usize, sims: usize, seed: u64, convention: EdfConvention) -> String {
        let suffix = match convention {
            EdfConvention::Classical => "",
            EdfConvention::Literal => "_literal",
        };
        format!("lf_n{n}_s{sims}_seed{seed}{suffix}.bin")
    }

    fn read(path: &Path, n: usize, seed: u64, sims: usize) -> Result<NullTable> {
        let bytes = fs::read(path)?;
        if bytes.len() != 8 * sims {
            return Err(Error::MalformedFile { path: path.to_path_buf(), message: format!("expected {sims} values") });
        }
        let stats: Vec<f64> =
            bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8"))).collect();
        if !stats.windows(2).all(|w| w[0] <= w[1]) || stats.iter().any(|v| !v.is_finite()) {
            return Err(Error::MalformedFile { path: path.to_path_buf(), message: "values not sorted".into() });
        }
        Ok(NullTable { n, seed, stats })
    }

    fn write(&self, path: &Path) -> Result<()> {
        let mut bytes = Vec::with_capacity(8 * self.stats.len());
        for v in &self.stats {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, bytes)?;
        fs::rename(tmp, path)?;
        Ok(())
    }
}

type Key = (usize, usize, u64, EdfConvention);

fn memory_cache() -> &'static Mutex<HashMap<Key, Arc<NullTable>>> {
    static CACHE: OnceLock<Mutex<HashMap<Key, Arc<NullTable>>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// Null table for size `n`, from memory, disk, or a fresh simulation.
pub fn lilliefors_null(n: usize, cfg: &LillieforsConfig) -> Result<Arc<NullTable>> {
    let key = (n, cfg.sims, cfg.seed, cfg.convention);
    if let Some(t) = memory_cache().lock().expect("cache lock").get(&key) {
        return Ok(t.clone());
    }
    let dir = cfg.cache_dir.clone().or_else(|| std::env::var_os("NORMNET_CACHE_DIR").map(PathBuf::from));
    let path = dir.as_ref().map(|d| d.join(NullTable::file_name(n, cfg.sims, cfg.seed, cfg.convention)));

    let from_disk = path.as_ref().filter(|p| p.exists()).and_then(|p| match NullTable::read(p, n, cfg.seed, cfg.sims) {
        Ok(t) => Some(t),
        Err(e) => {
            log::warn!("ignoring unreadable null table {}: {e}", p.display());
            None
        }
    });
    let table = match from_disk {
        Some(t) => t,
        None => {
            log::debug!("simulating Lilliefors null for n = {n} ({} draws)", cfg.sims);
            let t = NullTable::simulate(n, cfg.sims, cfg.seed, cfg.convention, Exec::default())?;
            if let (Some(d), Some(p)) = (dir.as_ref(), path.as_ref()) {
                if let Err(e) = fs::create_dir_all(d).map_err(Error::from).and_then(|_| t.write(p)) {
                    log::warn!("could not cache null table at {}: {e}", p.display());
                }
            }
            t
        }
    };
    let table = Arc::new(table);
    memory_cache().lock().expect("cache lock").entry(key).or_insert_with(|| table.clone());
    Ok(table)
}

pub fn lilliefors_with(x: &[f64], cfg: &LillieforsConfig) -> Result<TestResult> {
    let d = lilliefors_statistic(x, cfg.convention)?;
    let null = lilliefors_null(x.len(), cfg)?;
    Ok(TestResult::new(Method::LF, d, null.p_value(d)))
}

/// Classical statistic with the default null table.
pub fn lilliefors(x: &[f64]) -> Result<TestResult> {
    lilliefors_with(x, &LillieforsConfig::default())
}
