//! Classical and kernel tests of normality.

mod anderson;
mod fssd;
mod jarque_bera;
mod lilliefors;
mod shapiro;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use anderson::{ad_modified, ad_p_value, anderson_darling, cramer_von_mises};
pub use fssd::{fssd_statistic, fssd_test, fssd_u_statistic, Bandwidth, FssdConfig};
pub use jarque_bera::{jarque_bera, jarque_bera_from_moments};
pub use lilliefors::{
    lilliefors, lilliefors_null, lilliefors_statistic, lilliefors_with, EdfConvention, LillieforsConfig,
    NullTable, DEFAULT_LF_SEED,
};
pub use shapiro::{shapiro_wilk, sw_coefficients};

use crate::error::{Error, Result};
use crate::rng::{mix_seed, RandomStream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    SW,
    LF,
    AD,
    CVM,
    JB,
    AJB,
    FSSD,
}

impl Method {
    /// The tests that produce p-values, in reporting order.
    pub const WITH_P_VALUES: [Method; 6] = [Method::SW, Method::LF, Method::AD, Method::JB, Method::AJB, Method::FSSD];

    pub fn name(&self) -> &'static str {
        match self {
            Method::SW => "SW",
            Method::LF => "LF",
            Method::AD => "AD",
            Method::CVM => "CVM",
            Method::JB => "JB",
            Method::AJB => "AJB",
            Method::FSSD => "FSSD",
        }
    }
}

impl Method {
    /// Smallest sample the test accepts.
    pub fn min_size(&self) -> usize {
        match self {
            Method::SW => 3,
            Method::LF | Method::AD | Method::CVM => 4,
            Method::JB | Method::AJB => 7,
            Method::FSSD => 2,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "SW" => Ok(Method::SW),
            "LF" => Ok(Method::LF),
            "AD" => Ok(Method::AD),
            "CVM" => Ok(Method::CVM),
            "JB" => Ok(Method::JB),
            "AJB" => Ok(Method::AJB),
            "FSSD" => Ok(Method::FSSD),
            _ => Err(Error::InvalidParameter(format!("unknown test `{s}`"))),
        }
    }
}

/// Statistic and p-value of one test on one sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub method: Method,
    pub statistic: f64,
    pub p_value: f64,
}

impl TestResult {
    pub(crate) fn new(method: Method, statistic: f64, p_value: f64) -> Self {
        TestResult { method, statistic, p_value: p_value.clamp(0.0, 1.0) }
    }

    /// Decision at level `alpha`: reject iff `p < alpha`.
    pub fn decide(self, alpha: f64) -> TestOutcome {
        TestOutcome {
            method: self.method,
            statistic: self.statistic,
            p_value: self.p_value,
            alpha,
            reject: self.p_value < alpha,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub method: Method,
    pub statistic: f64,
    pub p_value: f64,
    pub alpha: f64,
    pub reject: bool,
}

/// Shared configuration for running any test by name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestSuite {
    pub lilliefors: LillieforsConfig,
    pub fssd: FssdConfig,
    /// Seeds the FSSD locations and bootstrap for each sample.
    pub seed: u64,
}

impl Default for TestSuite {
    fn default() -> Self {
        TestSuite { lilliefors: LillieforsConfig::default(), fssd: FssdConfig::default(), seed: 0 }
    }
}

const FSSD_STREAM: u64 = 0xF55D;

impl TestSuite {
    /// Runs `method` on `x`. `index` selects the random substream for FSSD so
    /// each sample of a batch gets its own reproducible draws.
    pub fn run(&self, method: Method, x: &[f64], index: u64) -> Result<TestResult> {
        match method {
            Method::SW => shapiro_wilk(x),
            Method::LF => lilliefors_with(x, &self.lilliefors),
            Method::AD => anderson_darling(x),
            Method::JB => jarque_bera(x, false),
            Method::AJB => jarque_bera(x, true),
            Method::FSSD => {
                let mut rng = RandomStream::derive(mix_seed(self.seed, FSSD_STREAM), index);
                fssd_test(x, &self.fssd, &mut rng)
            }
            Method::CVM => Err(Error::InvalidParameter("the Cramér-von Mises statistic has no p-value here".into())),
        }
    }
}
