//! Standard normal and chi-square distribution functions.
//!
//! `Φ` is evaluated through the complementary error function
//! (`Φ(t) = erfc(-t/√2)/2`) from `libm`, a port of the FreeBSD/musl
//! implementation accurate to about one ulp, so tail probabilities keep their
//! relative accuracy down to the underflow limit. The quantile starts from the
//! `statrs` inverse and is polished with Newton steps against that `Φ`.

use libm::erfc;
use statrs::function::erf::erfc_inv;

/// Standard normal CDF.
pub fn normal_cdf(t: f64) -> f64 {
    0.5 * erfc(-t / std::f64::consts::SQRT_2)
}

/// Standard normal survival function `1 - Φ(t)`, accurate in the upper tail.
pub fn normal_sf(t: f64) -> f64 {
    normal_cdf(-t)
}

/// Switch to the series well before `Φ` becomes subnormal.
const LOG_TAIL_SWITCH: f64 = -30.0;

/// `ln Φ(t)`, finite for every finite `t`.
///
/// Far in the lower tail the asymptotic (Mills ratio) series is used, since
/// `Φ` itself underflows.
pub fn ln_normal_cdf(t: f64) -> f64 {
    if t >= LOG_TAIL_SWITCH {
        return normal_cdf(t).ln();
    }
    let r = 1.0 / (t * t);
    let series = 1.0 - r * (1.0 - r * (3.0 - r * (15.0 - r * 105.0)));
    -0.5 * t * t - (-t).ln() - 0.5 * (2.0 * std::f64::consts::PI).ln() + series.ln()
}

/// Standard normal quantile `Φ⁻¹(p)`.
pub fn normal_quantile(p: f64) -> f64 {
    let mut t = -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p);
    if !t.is_finite() {
        return t;
    }
    for _ in 0..2 {
        let (err, dens) = if t < 0.0 { (normal_cdf(t) - p, normal_pdf(t)) } else { ((1.0 - p) - normal_sf(t), normal_pdf(t)) };
        if dens > 0.0 {
            t -= err / dens;
        }
    }
    t
}

/// Standard normal density.
pub fn normal_pdf(t: f64) -> f64 {
    (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Survival function of the chi-square distribution with two degrees of freedom.
pub fn chi2_2_sf(x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else {
        (-0.5 * x).exp()
    }
}
