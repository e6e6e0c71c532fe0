//! Sampleable one-dimensional laws: named families and the Pearson system.

mod pearson;

use std::fmt;
use std::str::FromStr;

use rand::distr::Open01;
use rand::Rng;
use rand_distr::{Beta, Distribution, Exp1, Gamma, Gumbel, LogNormal, StandardNormal, StudentT, Weibull};
use serde::{Deserialize, Serialize};

pub use pearson::{pearson_feasible, pearson_from_moments, PearsonSpec, PearsonType};
use pearson::PearsonKernel;

use crate::error::{Error, Result};
use crate::rng::RandomStream;

/// A distribution that can be sampled.
///
/// Two-parameter families take their parameters in the order of the field
/// names: `Gamma(shape, scale)`, `Lognormal(mu, sigma)` on the log scale and
/// `Weibull(scale, shape)`.
#[derive(Clone, Debug, PartialEq)]
pub enum DistributionSpec {
    Normal { mu: f64, sigma: f64 },
    StudentT { df: f64 },
    Logistic { loc: f64, scale: f64 },
    Laplace { loc: f64, scale: f64 },
    /// CDF `exp(-exp(-(x - loc) / scale))`.
    Gumbel { loc: f64, scale: f64 },
    Exponential { mean: f64 },
    Gamma { shape: f64, scale: f64 },
    Lognormal { mu: f64, sigma: f64 },
    Weibull { scale: f64, shape: f64 },
    Uniform { a: f64, b: f64 },
    Beta { alpha: f64, beta: f64 },
    Pearson(PearsonSpec),
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")))
    }
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be finite, got {v}")))
    }
}

impl DistributionSpec {
    /// Family name used in serialized form.
    pub fn family(&self) -> &'static str {
        match self {
            DistributionSpec::Normal { .. } => "normal",
            DistributionSpec::StudentT { .. } => "t",
            DistributionSpec::Logistic { .. } => "logistic",
            DistributionSpec::Laplace { .. } => "laplace",
            DistributionSpec::Gumbel { .. } => "gumbel",
            DistributionSpec::Exponential { .. } => "exponential",
            DistributionSpec::Gamma { .. } => "gamma",
            DistributionSpec::Lognormal { .. } => "lognormal",
            DistributionSpec::Weibull { .. } => "weibull",
            DistributionSpec::Uniform { .. } => "uniform",
            DistributionSpec::Beta { .. } => "beta",
            DistributionSpec::Pearson(_) => "pearson",
        }
    }

    /// Parameters in serialized order. For Pearson specs these are `[a, b0, b1, b2]`.
    pub fn params(&self) -> Vec<f64> {
        match *self {
            DistributionSpec::Normal { mu, sigma } => vec![mu, sigma],
            DistributionSpec::StudentT { df } => vec![df],
            DistributionSpec::Logistic { loc, scale }
            | DistributionSpec::Laplace { loc, scale }
            | DistributionSpec::Gumbel { loc, scale } => vec![loc, scale],
            DistributionSpec::Exponential { mean } => vec![mean],
            DistributionSpec::Gamma { shape, scale } => vec![shape, scale],
            DistributionSpec::Lognormal { mu, sigma } => vec![mu, sigma],
            DistributionSpec::Weibull { scale, shape } => vec![scale, shape],
            DistributionSpec::Uniform { a, b } => vec![a, b],
            DistributionSpec::Beta { alpha, beta } => vec![alpha, beta],
            DistributionSpec::Pearson(ref p) => vec![p.a, p.b0, p.b1, p.b2],
        }
    }

    /// Builds a named family from its serialized form.
    pub fn from_family(family: &str, params: &[f64]) -> Result<Self> {
        let want = |k: usize| -> Result<()> {
            if params.len() == k {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{family} takes {k} parameters, got {}", params.len())))
            }
        };
        let spec = match family {
            "normal" => {
                want(2)?;
                DistributionSpec::Normal { mu: params[0], sigma: params[1] }
            }
            "t" => {
                want(1)?;
                DistributionSpec::StudentT { df: params[0] }
            }
            "logistic" => {
                want(2)?;
                DistributionSpec::Logistic { loc: params[0], scale: params[1] }
            }
            "laplace" => {
                want(2)?;
                DistributionSpec::Laplace { loc: params[0], scale: params[1] }
            }
            "gumbel" => {
                want(2)?;
                DistributionSpec::Gumbel { loc: params[0], scale: params[1] }
            }
            "exponential" => {
                want(1)?;
                DistributionSpec::Exponential { mean: params[0] }
            }
            "gamma" => {
                want(2)?;
                DistributionSpec::Gamma { shape: params[0], scale: params[1] }
            }
            "lognormal" => {
                want(2)?;
                DistributionSpec::Lognormal { mu: params[0], sigma: params[1] }
            }
            "weibull" => {
                want(2)?;
                DistributionSpec::Weibull { scale: params[0], shape: params[1] }
            }
            "uniform" => {
                want(2)?;
                DistributionSpec::Uniform { a: params[0], b: params[1] }
            }
            "beta" => {
                want(2)?;
                DistributionSpec::Beta { alpha: params[0], beta: params[1] }
            }
            "pearson" => {
                return Err(Error::InvalidParameter("pearson specs are built from moments".into()))
            }
            other => return Err(Error::InvalidParameter(format!("unknown family `{other}`"))),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn pearson(mean: f64, sd: f64, skew: f64, kurt: f64) -> Result<Self> {
        pearson_from_moments(mean, sd, skew, kurt).map(DistributionSpec::Pearson)
    }

    /// True iff this spec describes a normal law.
    pub fn is_normal(&self) -> bool {
        match self {
            DistributionSpec::Normal { .. } => true,
            DistributionSpec::Pearson(p) => p.pearson_type == PearsonType::Normal,
            _ => false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            DistributionSpec::Normal { mu, sigma } | DistributionSpec::Lognormal { mu, sigma } => {
                finite("mu", mu)?;
                positive("sigma", sigma)
            }
            DistributionSpec::StudentT { df } => positive("df", df),
            DistributionSpec::Logistic { loc, scale }
            | DistributionSpec::Laplace { loc, scale }
            | DistributionSpec::Gumbel { loc, scale } => {
                finite("loc", loc)?;
                positive("scale", scale)
            }
            DistributionSpec::Exponential { mean } => positive("mean", mean),
            DistributionSpec::Gamma { shape, scale } | DistributionSpec::Weibull { scale, shape } => {
                positive("shape", shape)?;
                positive("scale", scale)
            }
            DistributionSpec::Uniform { a, b } => {
                finite("a", a)?;
                finite("b", b)?;
                if b > a {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!("uniform needs b > a, got [{a}, {b}]")))
                }
            }
            DistributionSpec::Beta { alpha, beta } => {
                positive("alpha", alpha)?;
                positive("beta", beta)
            }
            DistributionSpec::Pearson(ref p) => pearson_from_moments(p.mean, p.sd, p.skew, p.kurt).map(|_| ()),
        }
    }

    /// Prepares a reusable sampler.
    pub fn sampler(&self) -> Result<Sampler> {
        self.validate()?;
        let (kernel, loc, scale) = match *self {
            DistributionSpec::Normal { mu, sigma } => (Kernel::StandardNormal, mu, sigma),
            DistributionSpec::StudentT { df } => (Kernel::StudentT(StudentT::new(df).map_err(param)?), 0.0, 1.0),
            DistributionSpec::Logistic { loc, scale } => (Kernel::Logistic, loc, scale),
            DistributionSpec::Laplace { loc, scale } => (Kernel::Laplace, loc, scale),
            DistributionSpec::Gumbel { loc, scale } => (Kernel::Gumbel(Gumbel::new(0.0, 1.0).map_err(param)?), loc, scale),
            DistributionSpec::Exponential { mean } => (Kernel::Exp, 0.0, mean),
            DistributionSpec::Gamma { shape, scale } => (Kernel::Gamma(Gamma::new(shape, 1.0).map_err(param)?), 0.0, scale),
            DistributionSpec::Lognormal { mu, sigma } => {
                (Kernel::LogNormal(LogNormal::new(mu, sigma).map_err(param)?), 0.0, 1.0)
            }
            DistributionSpec::Weibull { scale, shape } => {
                (Kernel::Weibull(Weibull::new(1.0, shape).map_err(param)?), 0.0, scale)
            }
            DistributionSpec::Uniform { a, b } => (Kernel::Open01, a, b - a),
            DistributionSpec::Beta { alpha, beta } => (Kernel::Beta(Beta::new(alpha, beta).map_err(param)?), 0.0, 1.0),
            DistributionSpec::Pearson(ref p) => {
                let (k, loc, scale) = p.kernel()?;
                (Kernel::Pearson(k), loc, scale)
            }
        };
        Ok(Sampler { kernel, loc, scale })
    }

    /// `n` independent draws.
    pub fn sample(&self, n: usize, rng: &mut RandomStream) -> Result<Vec<f64>> {
        if n == 0 {
            return Err(Error::InvalidParameter("sample size must be at least 1".into()));
        }
        let sampler = self.sampler()?;
        Ok((0..n).map(|_| sampler.draw(rng)).collect())
    }

    /// Closed support of the law (endpoints may be infinite).
    pub fn support(&self) -> Result<(f64, f64)> {
        Ok(self.sampler()?.support())
    }
}

/// Free-function form of [`DistributionSpec::sample`].
pub fn sample(spec: &DistributionSpec, n: usize, rng: &mut RandomStream) -> Result<Vec<f64>> {
    spec.sample(n, rng)
}

fn param<E: fmt::Display>(e: E) -> Error {
    Error::InvalidParameter(e.to_string())
}

#[derive(Clone, Debug)]
enum Kernel {
    StandardNormal,
    StudentT(StudentT<f64>),
    Logistic,
    Laplace,
    Gumbel(Gumbel<f64>),
    Exp,
    Gamma(Gamma<f64>),
    LogNormal(LogNormal<f64>),
    Weibull(Weibull<f64>),
    Open01,
    Beta(Beta<f64>),
    Pearson(PearsonKernel),
}

/// A prepared sampler: `loc + scale * kernel`.
#[derive(Clone, Debug)]
pub struct Sampler {
    kernel: Kernel,
    loc: f64,
    scale: f64,
}

impl Sampler {
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z = match &self.kernel {
            Kernel::StandardNormal => rng.sample(StandardNormal),
            Kernel::StudentT(d) => d.sample(rng),
            Kernel::Logistic => {
                let u: f64 = rng.sample(Open01);
                (u / (1.0 - u)).ln()
            }
            Kernel::Laplace => {
                let u: f64 = rng.sample::<f64, _>(Open01) - 0.5;
                -u.signum() * (1.0 - 2.0 * u.abs()).ln()
            }
            Kernel::Gumbel(d) => d.sample(rng),
            Kernel::Exp => rng.sample(Exp1),
            Kernel::Gamma(d) => d.sample(rng),
            Kernel::LogNormal(d) => d.sample(rng),
            Kernel::Weibull(d) => d.sample(rng),
            Kernel::Open01 => rng.sample(Open01),
            Kernel::Beta(d) => d.sample(rng),
            Kernel::Pearson(k) => k.draw(rng),
        };
        self.loc + self.scale * z
    }

    pub fn support(&self) -> (f64, f64) {
        let (lo, hi) = match &self.kernel {
            Kernel::StandardNormal | Kernel::StudentT(_) | Kernel::Logistic | Kernel::Laplace | Kernel::Gumbel(_) => {
                (f64::NEG_INFINITY, f64::INFINITY)
            }
            Kernel::Exp | Kernel::Gamma(_) | Kernel::LogNormal(_) | Kernel::Weibull(_) => (0.0, f64::INFINITY),
            Kernel::Open01 | Kernel::Beta(_) => (0.0, 1.0),
            Kernel::Pearson(k) => k.support(),
        };
        let map = |z: f64| if z == 0.0 { self.loc } else { self.loc + self.scale * z };
        let (a, b) = (map(lo), map(hi));
        if a <= b {
            (a, b)
        } else {
            (b, a)
        }
    }
}

impl Distribution<f64> for Sampler {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.draw(rng)
    }
}

#[derive(Serialize, Deserialize)]
struct SpecRepr {
    family: String,
    params: Vec<f64>,
    /// `[mean, sd, skew, kurt]` for Pearson specs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    moments: Option<[f64; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pearson_type: Option<PearsonType>,
}

impl Serialize for DistributionSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let (moments, pearson_type) = match self {
            DistributionSpec::Pearson(p) => (Some([p.mean, p.sd, p.skew, p.kurt]), Some(p.pearson_type)),
            _ => (None, None),
        };
        SpecRepr { family: self.family().to_string(), params: self.params(), moments, pearson_type }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for DistributionSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = SpecRepr::deserialize(d)?;
        if repr.family == "pearson" {
            let [mean, sd, skew, kurt] =
                repr.moments.ok_or_else(|| D::Error::custom("pearson spec without moments"))?;
            DistributionSpec::pearson(mean, sd, skew, kurt).map_err(D::Error::custom)
        } else {
            DistributionSpec::from_family(&repr.family, &repr.params).map_err(D::Error::custom)
        }
    }
}

/// The four groups of alternative distributions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Group {
    G1,
    G2,
    G3,
    G4,
}

impl Group {
    pub const ALL: [Group; 4] = [Group::G1, Group::G2, Group::G3, Group::G4];
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Group::G1 => "G1",
            Group::G2 => "G2",
            Group::G3 => "G3",
            Group::G4 => "G4",
        };
        f.write_str(s)
    }
}

impl FromStr for Group {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "G1" | "1" => Ok(Group::G1),
            "G2" | "2" => Ok(Group::G2),
            "G3" | "3" => Ok(Group::G3),
            "G4" | "4" => Ok(Group::G4),
            _ => Err(Error::InvalidParameter(format!("unknown group `{s}`"))),
        }
    }
}

/// The alternatives making up each group.
///
/// G1: symmetric with unbounded support. G2: Gumbel. G3: positive support.
/// G4: support on (0, 1).
pub fn group_distributions(group: Group) -> Vec<DistributionSpec> {
    use DistributionSpec::*;
    match group {
        Group::G1 => vec![
            StudentT { df: 1.0 },
            StudentT { df: 3.0 },
            Logistic { loc: 0.0, scale: 1.0 },
            Laplace { loc: 0.0, scale: 1.0 },
        ],
        Group::G2 => vec![
            Gumbel { loc: 0.0, scale: 1.0 },
            Gumbel { loc: 0.0, scale: 2.0 },
            Gumbel { loc: 0.0, scale: 0.5 },
        ],
        Group::G3 => vec![
            Exponential { mean: 1.0 },
            Gamma { shape: 1.0, scale: 2.0 },
            Gamma { shape: 1.0, scale: 0.5 },
            Lognormal { mu: 0.0, sigma: 1.0 },
            Lognormal { mu: 0.0, sigma: 2.0 },
            Lognormal { mu: 0.0, sigma: 0.5 },
            Weibull { scale: 1.0, shape: 0.5 },
            Weibull { scale: 1.0, shape: 2.0 },
        ],
        Group::G4 => vec![
            Uniform { a: 0.0, b: 1.0 },
            Beta { alpha: 2.0, beta: 2.0 },
            Beta { alpha: 0.5, beta: 0.5 },
            Beta { alpha: 3.0, beta: 1.5 },
            Beta { alpha: 2.0, beta: 1.0 },
        ],
    }
}
