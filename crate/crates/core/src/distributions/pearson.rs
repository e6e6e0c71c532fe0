//! The Pearson system parameterized by mean, standard deviation, skewness and
//! kurtosis.
//!
//! The density solves `f'(x)/f(x) = (x - a) / (b0 + b1 x + b2 x^2)` with `x`
//! measured from the mean. Sampling goes through the standardized variable
//! `z = (x - mean) / sd` and a closed-form family wherever one exists.

use std::f64::consts::FRAC_PI_2;

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which member of the system a moment combination resolves to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PearsonType {
    /// Skewness 0 and kurtosis 3.
    Normal,
    /// Beta on a finite interval (real roots of opposite sign).
    I,
    /// Symmetric Beta.
    II,
    /// Gamma (b2 = 0).
    III,
    /// Complex roots, no closed-form family.
    IV,
    /// Inverse gamma (double root).
    V,
    /// Beta prime (real roots of equal sign).
    VI,
    /// Scaled Student t.
    VII,
}

/// A Pearson law pinned down by its first four moments.
#[derive(Clone, Debug, PartialEq)]
pub struct PearsonSpec {
    pub mean: f64,
    pub sd: f64,
    pub skew: f64,
    pub kurt: f64,
    pub a: f64,
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub pearson_type: PearsonType,
}

/// True iff some distribution has this skewness and kurtosis.
pub fn pearson_feasible(skew: f64, kurt: f64) -> bool {
    kurt > skew * skew + 1.0
}

/// Standardized coefficients `(w0, w1, w2)` with
/// `f'(z)/f(z) = -(z + w1) / (w0 + w1 z + w2 z^2)`.
fn standard_coefficients(skew: f64, kurt: f64) -> (f64, f64, f64) {
    let s2 = skew * skew;
    let d = 10.0 * kurt - 12.0 * s2 - 18.0;
    ((4.0 * kurt - 3.0 * s2) / d, skew * (kurt + 3.0) / d, (2.0 * kurt - 3.0 * s2 - 6.0) / d)
}

fn near_zero(value: f64, magnitude: f64) -> bool {
    value.abs() <= 1e-12 * magnitude.max(1.0)
}

pub fn pearson_from_moments(mean: f64, sd: f64, skew: f64, kurt: f64) -> Result<PearsonSpec> {
    if !(mean.is_finite() && sd.is_finite() && skew.is_finite() && kurt.is_finite()) {
        return Err(Error::InvalidParameter("Pearson moments must be finite".into()));
    }
    if sd <= 0.0 {
        return Err(Error::InvalidParameter(format!("Pearson sd must be positive, got {sd}")));
    }
    if !pearson_feasible(skew, kurt) {
        return Err(Error::InfeasibleMoments { skew, kurt });
    }
    let s2 = skew * skew;
    if near_zero(10.0 * kurt - 12.0 * s2 - 18.0, 10.0 * kurt + 12.0 * s2 + 18.0) {
        return Err(Error::DegenerateDenominator { skew, kurt });
    }

    let m2 = sd * sd;
    let m3 = skew * sd * m2;
    let m4 = kurt * m2 * m2;
    let c = 10.0 * m4 * m2 - 12.0 * m3 * m3 - 18.0 * m2 * m2 * m2;
    let b1 = -m3 * (m4 + 3.0 * m2 * m2) / c;
    let b0 = -m2 * (4.0 * m2 * m4 - 3.0 * m3 * m3) / c;
    let b2 = -(2.0 * m2 * m4 - 3.0 * m3 * m3 - 6.0 * m2 * m2 * m2) / c;

    Ok(PearsonSpec { mean, sd, skew, kurt, a: b1, b0, b1, b2, pearson_type: classify(skew, kurt) })
}

fn classify(skew: f64, kurt: f64) -> PearsonType {
    let s2 = skew * skew;
    if skew == 0.0 {
        return if kurt == 3.0 {
            PearsonType::Normal
        } else if kurt < 3.0 {
            PearsonType::II
        } else {
            PearsonType::VII
        };
    }
    let line = 2.0 * kurt - 3.0 * s2 - 6.0;
    if near_zero(line, 2.0 * kurt + 3.0 * s2 + 6.0) {
        return PearsonType::III;
    }
    if line < 0.0 {
        return PearsonType::I;
    }
    let (w0, w1, w2) = standard_coefficients(skew, kurt);
    let kappa = w1 * w1 / (4.0 * w0 * w2);
    if (kappa - 1.0).abs() <= 1e-9 {
        PearsonType::V
    } else if kappa < 1.0 {
        PearsonType::IV
    } else {
        PearsonType::VI
    }
}

/// Standard variate drawn by a prepared Pearson sampler, before the affine
/// map to the target location and scale.
#[derive(Clone, Debug)]
pub(crate) enum PearsonKernel {
    Normal,
    Beta(Beta<f64>),
    Gamma(Gamma<f64>),
    StudentT(StudentT<f64>),
    BetaPrime(Gamma<f64>, Gamma<f64>),
    InverseGamma(Gamma<f64>),
    TypeIv(Box<TypeIvTable>),
}

impl PearsonKernel {
    pub(crate) fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            PearsonKernel::Normal => rng.sample(rand_distr::StandardNormal),
            PearsonKernel::Beta(d) => d.sample(rng),
            PearsonKernel::Gamma(d) => d.sample(rng),
            PearsonKernel::StudentT(d) => d.sample(rng),
            PearsonKernel::BetaPrime(g1, g2) => g1.sample(rng) / g2.sample(rng),
            PearsonKernel::InverseGamma(g) => 1.0 / g.sample(rng),
            PearsonKernel::TypeIv(t) => t.draw(rng),
        }
    }

    /// Support of the standard variate.
    pub(crate) fn support(&self) -> (f64, f64) {
        match self {
            PearsonKernel::Normal | PearsonKernel::StudentT(_) | PearsonKernel::TypeIv(_) => {
                (f64::NEG_INFINITY, f64::INFINITY)
            }
            PearsonKernel::Beta(_) => (0.0, 1.0),
            PearsonKernel::Gamma(_) | PearsonKernel::BetaPrime(..) | PearsonKernel::InverseGamma(_) => {
                (0.0, f64::INFINITY)
            }
        }
    }
}

fn bad(what: &str, value: f64) -> Error {
    Error::InvalidParameter(format!("Pearson {what} parameter {value} is out of range"))
}

impl PearsonSpec {
    /// Builds the standard kernel and the affine map `(loc, scale)` such that
    /// `loc + scale * kernel` has the target moments.
    pub(crate) fn kernel(&self) -> Result<(PearsonKernel, f64, f64)> {
        let (s, k) = (self.skew, self.kurt);
        let (mean, sd) = (self.mean, self.sd);
        match self.pearson_type {
            PearsonType::Normal => Ok((PearsonKernel::Normal, mean, sd)),
            PearsonType::I | PearsonType::II => {
                let s2 = s * s;
                let r = 6.0 * (k - s2 - 1.0) / (6.0 + 3.0 * s2 - 2.0 * k);
                let root = (s2 * (r + 2.0).powi(2) + 16.0 * (r + 1.0)).sqrt();
                let alpha = 0.5 * r * (1.0 - (r + 2.0) * s / root);
                let beta = 0.5 * r * (1.0 + (r + 2.0) * s / root);
                let width = 0.5 * root;
                let lower = -width * alpha / (alpha + beta);
                let d = Beta::new(alpha, beta).map_err(|_| bad("beta", alpha.min(beta)))?;
                Ok((PearsonKernel::Beta(d), mean + sd * lower, sd * width))
            }
            PearsonType::III => {
                let shape = 4.0 / (s * s);
                let theta = 0.5 * s.abs();
                let sign = s.signum();
                let d = Gamma::new(shape, 1.0).map_err(|_| bad("gamma", shape))?;
                Ok((PearsonKernel::Gamma(d), mean - sign * sd * shape * theta, sign * sd * theta))
            }
            PearsonType::VII => {
                let nu = 4.0 + 6.0 / (k - 3.0);
                let d = StudentT::new(nu).map_err(|_| bad("t", nu))?;
                Ok((PearsonKernel::StudentT(d), mean, sd * ((nu - 2.0) / nu).sqrt()))
            }
            PearsonType::V => {
                let (_, w1, w2) = standard_coefficients(s, k);
                let r = -w1 / (2.0 * w2);
                let c = -(r + w1) / w2;
                let shape = 1.0 / w2 - 1.0;
                let d = Gamma::new(shape, 1.0).map_err(|_| bad("inverse gamma", shape))?;
                Ok((PearsonKernel::InverseGamma(d), mean + sd * r, sd * c))
            }
            PearsonType::VI => {
                let (w0, w1, w2) = standard_coefficients(s, k);
                let disc = (w1 * w1 - 4.0 * w0 * w2).sqrt();
                let (lo, hi) = ((-w1 - disc) / (2.0 * w2), (-w1 + disc) / (2.0 * w2));
                let e_lo = -(lo + w1) / (w2 * (lo - hi));
                let e_hi = -(hi + w1) / (w2 * (hi - lo));
                let tail = -(e_lo + e_hi) - 1.0;
                let span = hi - lo;
                // The integrable side is the one whose near-root exponent exceeds -1.
                let (near, edge, dir) = if e_hi + 1.0 > 0.0 { (e_hi, hi, 1.0) } else { (e_lo, lo, -1.0) };
                let g1 = Gamma::new(near + 1.0, 1.0).map_err(|_| bad("beta prime", near + 1.0))?;
                let g2 = Gamma::new(tail, 1.0).map_err(|_| bad("beta prime", tail))?;
                Ok((PearsonKernel::BetaPrime(g1, g2), mean + sd * edge, dir * sd * span))
            }
            PearsonType::IV => {
                let (w0, w1, w2) = standard_coefficients(s, k);
                let shift = w1 / (2.0 * w2);
                let alpha = (w0 / w2 - shift * shift).sqrt();
                let m = 1.0 / (2.0 * w2);
                let delta = w1 * (2.0 * w2 - 1.0) / (2.0 * w2);
                let nu = delta / (w2 * alpha);
                let table = TypeIvTable::new(2.0 * m - 2.0, nu)?;
                Ok((PearsonKernel::TypeIv(Box::new(table)), mean + sd * (-shift), sd * alpha))
            }
        }
    }
}

const IV_INTERVALS: usize = 512;
const IV_LOG_CUTOFF: f64 = 45.0;

/// Inverse-CDF sampler for `tan(theta)` where `theta` on `(-pi/2, pi/2)` has
/// density proportional to `cos(theta)^p * exp(-nu * theta)`.
#[derive(Clone, Debug)]
pub(crate) struct TypeIvTable {
    p: f64,
    nu: f64,
    log_peak: f64,
    edges: Vec<f64>,
    /// Normalized cumulative mass at each edge.
    cdf: Vec<f64>,
    total: f64,
}

impl TypeIvTable {
    fn new(p: f64, nu: f64) -> Result<Self> {
        if !(p > 0.0 && p.is_finite() && nu.is_finite()) {
            return Err(bad("type IV", p));
        }
        let mode = (-nu / p).atan();
        let mut table = TypeIvTable { p, nu, log_peak: 0.0, edges: Vec::new(), cdf: Vec::new(), total: 0.0 };
        table.log_peak = table.log_density(mode);

        let lo = table.cutoff(mode, -FRAC_PI_2);
        let hi = table.cutoff(mode, FRAC_PI_2);
        let step = (hi - lo) / IV_INTERVALS as f64;
        table.edges = (0..=IV_INTERVALS).map(|i| lo + step * i as f64).collect();
        table.edges[IV_INTERVALS] = hi;

        let mut cum = Vec::with_capacity(IV_INTERVALS + 1);
        cum.push(0.0);
        let mut acc = 0.0;
        for w in table.edges.windows(2) {
            acc += table.adaptive_integral(w[0], w[1]);
            cum.push(acc);
        }
        table.total = acc;
        table.cdf = cum.into_iter().map(|c| c / acc).collect();
        Ok(table)
    }

    fn log_density(&self, theta: f64) -> f64 {
        self.p * theta.cos().ln() - self.nu * theta
    }

    /// Density scaled to 1 at the mode.
    fn density(&self, theta: f64) -> f64 {
        (self.log_density(theta) - self.log_peak).exp()
    }

    /// Point between the mode and `end` where the density has fallen by the cutoff.
    fn cutoff(&self, mode: f64, end: f64) -> f64 {
        let (mut inside, mut outside) = (mode, end);
        for _ in 0..200 {
            let mid = 0.5 * (inside + outside);
            if mid == inside || mid == outside {
                break;
            }
            let drop = self.log_peak - self.log_density(mid);
            if drop.is_finite() && drop < IV_LOG_CUTOFF {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        inside
    }

    fn adaptive_integral(&self, a: f64, b: f64) -> f64 {
        let (fa, fb) = (self.density(a), self.density(b));
        let m = 0.5 * (a + b);
        let fm = self.density(m);
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        self.simpson_step(a, b, fa, fm, fb, whole, 1e-15, 40)
    }

    #[allow(clippy::too_many_arguments)]
    fn simpson_step(&self, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, eps: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (self.density(lm), self.density(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let diff = left + right - whole;
        if depth == 0 || diff.abs() <= 15.0 * eps {
            return left + right + diff / 15.0;
        }
        self.simpson_step(a, m, fa, flm, fm, left, 0.5 * eps, depth - 1)
            + self.simpson_step(m, b, fm, frm, fb, right, 0.5 * eps, depth - 1)
    }

    /// Unnormalized mass on `[a, b]` by composite Simpson; `b - a` is at most
    /// one table interval.
    fn partial(&self, a: f64, b: f64) -> f64 {
        const PANELS: usize = 8;
        let h = (b - a) / PANELS as f64;
        let mut sum = self.density(a) + self.density(b);
        for i in 1..PANELS {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            sum += w * self.density(a + h * i as f64);
        }
        sum * h / 3.0
    }

    /// Angle whose normalized CDF equals `u`.
    fn invert(&self, u: f64) -> f64 {
        let i = self.cdf.partition_point(|&c| c <= u).clamp(1, IV_INTERVALS) - 1;
        let (a, b) = (self.edges[i], self.edges[i + 1]);
        let target = (u - self.cdf[i]) * self.total;
        let mass = (self.cdf[i + 1] - self.cdf[i]) * self.total;
        if mass <= 0.0 {
            return a;
        }
        let (mut lo, mut hi) = (a, b);
        let mut theta = a + (b - a) * (target / mass).clamp(0.0, 1.0);
        for _ in 0..60 {
            let f = self.partial(a, theta) - target;
            if f > 0.0 {
                hi = theta;
            } else {
                lo = theta;
            }
            let g = self.density(theta);
            let mut next = if g > 0.0 { theta - f / g } else { 0.5 * (lo + hi) };
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            let done = (next - theta).abs() <= 1e-13;
            theta = next;
            if done {
                break;
            }
        }
        theta
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        self.invert(u).tan()
    }
}
