//! Anderson-Darling and Cramér-von Mises statistics for normality with
//! estimated mean and variance.

use super::{Method, TestResult};
use crate::error::Result;
use crate::features::{check_sample, standardize};
use crate::special::{ln_normal_cdf, normal_cdf};

fn sorted_z(x: &[f64]) -> Result<Vec<f64>> {
    check_sample(x, 4)?;
    let mut z = standardize(x)?;
    z.sort_by(f64::total_cmp);
    Ok(z)
}

/// `A = -n - (1/n) Σ (2i - 1) [ln Φ(z_(i)) + ln(1 - Φ(z_(n-i+1)))]`.
fn ad_sorted(z: &[f64]) -> f64 {
    let n = z.len();
    let nf = n as f64;
    let mut s = 0.0;
    for i in 0..n {
        let w = 2.0 * i as f64 + 1.0;
        // ln(1 - Φ(t)) = ln Φ(-t), exact in the upper tail.
        s += w * (ln_normal_cdf(z[i]) + ln_normal_cdf(-z[n - 1 - i]));
    }
    -nf - s / nf
}

/// Small-sample modification `A (1 + 0.75/n + 2.25/n^2)`.
pub fn ad_modified(a: f64, n: usize) -> f64 {
    let nf = n as f64;
    a * (1.0 + 0.75 / nf + 2.25 / (nf * nf))
}

/// Stephens' piecewise approximation for the case of estimated mean and
/// variance, applied to the modified statistic.
pub fn ad_p_value(modified: f64) -> f64 {
    let a = modified;
    let p = if a < 0.2 {
        1.0 - (-13.436 + 101.14 * a - 223.73 * a * a).exp()
    } else if a < 0.34 {
        1.0 - (-8.318 + 42.796 * a - 59.938 * a * a).exp()
    } else if a < 0.6 {
        (0.9177 - 4.279 * a - 1.38 * a * a).exp()
    } else if a <= 13.0 {
        (1.2937 - 5.709 * a + 0.0186 * a * a).exp()
    } else {
        0.0
    };
    p.clamp(0.0, 1.0)
}

pub fn anderson_darling(x: &[f64]) -> Result<TestResult> {
    let z = sorted_z(x)?;
    let a = ad_sorted(&z);
    Ok(TestResult::new(Method::AD, a, ad_p_value(ad_modified(a, z.len()))))
}

fn cvm_sorted(z: &[f64]) -> f64 {
    let nf = z.len() as f64;
    let s: f64 = z.iter().enumerate().map(|(i, &zi)| (normal_cdf(zi) - (2.0 * i as f64 + 1.0) / (2.0 * nf)).powi(2)).sum();
    s + 1.0 / (12.0 * nf)
}

/// `Σ (Φ(z_(i)) - (2i - 1)/(2n))^2 + 1/(12n)`. Statistic only.
pub fn cramer_von_mises(x: &[f64]) -> Result<f64> {
    Ok(cvm_sorted(&sorted_z(x)?))
}
