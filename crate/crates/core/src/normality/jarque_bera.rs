//! Jarque-Bera and its finite-sample adjustment with exact moments of the
//! sample skewness and kurtosis under normality.

use super::{Method, TestResult};
use crate::error::Result;
use crate::features::{check_sample, kurtosis, skewness};
use crate::special::chi2_2_sf;

/// Statistic from precomputed moments. The adjusted form standardizes each
/// moment by its exact null mean and variance:
/// `skew^2 / c1 + (kurt - c2)^2 / c3`.
pub fn jarque_bera_from_moments(n: usize, skew: f64, kurt: f64, adjusted: bool) -> f64 {
    let nf = n as f64;
    if adjusted {
        let c1 = 6.0 * (nf - 2.0) / ((nf + 1.0) * (nf + 3.0));
        let c2 = 3.0 * (nf - 1.0) / (nf + 1.0);
        let c3 = 24.0 * nf * (nf - 2.0) * (nf - 3.0) / ((nf + 1.0).powi(2) * (nf + 3.0) * (nf + 5.0));
        skew * skew / c1 + (kurt - c2).powi(2) / c3
    } else {
        nf * (skew * skew / 6.0 + (kurt - 3.0).powi(2) / 24.0)
    }
}

/// p-value from the chi-square distribution with two degrees of freedom.
pub fn jarque_bera(x: &[f64], adjusted: bool) -> Result<TestResult> {
    check_sample(x, 7)?;
    let j = jarque_bera_from_moments(x.len(), skewness(x)?, kurtosis(x)?, adjusted);
    let method = if adjusted { Method::AJB } else { Method::JB };
    Ok(TestResult::new(method, j, chi2_2_sf(j)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_values() {
        assert!((jarque_bera_from_moments(3, 0.0, 1.5, false) - 0.28125).abs() < 1e-15);
        assert_eq!(jarque_bera_from_moments(40, 0.0, 3.0, false), 0.0);
    }

    #[test]
    fn adjusted_approaches_original() {
        let (n, s, k) = (1_000_000, 0.01, 3.02);
        let j = jarque_bera_from_moments(n, s, k, false);
        let a = jarque_bera_from_moments(n, s, k, true);
        assert!(((a - j) / j).abs() < 1e-3, "{a} vs {j}");
    }

    #[test]
    fn p_value_is_chi2_2() {
        let x = [0.2, -1.1, 0.4, 2.9, 0.0, -0.3, 0.7, 1.5];
        let r = jarque_bera(&x, false).unwrap();
        assert!((r.p_value - (-r.statistic / 2.0).exp()).abs() < 1e-15);
    }
}
