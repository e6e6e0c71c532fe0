//! Shapiro-Wilk W with Royston's coefficient and p-value approximations
//! (algorithm AS R94), valid for 3 <= n <= 5000.

use super::{Method, TestResult};
use crate::error::{Error, Result};
use crate::features::{check_sample, sorted};
use crate::special::{normal_quantile, normal_sf};

const C1: [f64; 6] = [0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056];
const C2: [f64; 6] = [0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633];
const C3: [f64; 4] = [0.5440, -0.39978, 0.025054, -6.714e-4];
const C4: [f64; 4] = [1.3822, -0.77857, 0.062767, -0.0020322];
const C5: [f64; 4] = [-1.5861, -0.31082, -0.083751, 0.0038915];
const C6: [f64; 3] = [-0.4803, -0.082676, 0.0030302];
const G: [f64; 2] = [-2.273, 0.459];
/// p-value reported when W is far below the small-sample bound.
const SMALL: f64 = 1e-19;

/// `c[0] + c[1] x + c[2] x^2 + ...`
fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ci| acc * x + ci)
}

/// Upper-half coefficients `a_n, a_(n-1), ...` (length `n / 2`, positive).
/// The lower half is their negation.
pub fn sw_coefficients(n: usize) -> Vec<f64> {
    let half = n / 2;
    if n == 3 {
        return vec![std::f64::consts::FRAC_1_SQRT_2];
    }
    let an = n as f64;
    let m: Vec<f64> = (0..half).map(|i| -normal_quantile((i as f64 + 1.0 - 0.375) / (an + 0.25))).collect();
    let summ2 = 2.0 * m.iter().map(|v| v * v).sum::<f64>();
    let ssumm2 = summ2.sqrt();
    let rsn = 1.0 / an.sqrt();
    let a1 = poly(&C1, rsn) + m[0] / ssumm2;

    let mut a = vec![0.0; half];
    let first_free;
    let fac;
    if n > 5 {
        let a2 = poly(&C2, rsn) + m[1] / ssumm2;
        fac = ((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1]) / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2)).sqrt();
        a[1] = a2;
        first_free = 2;
    } else {
        fac = ((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1)).sqrt();
        first_free = 1;
    }
    a[0] = a1;
    for i in first_free..half {
        a[i] = m[i] / fac;
    }
    a
}

pub fn shapiro_wilk(x: &[f64]) -> Result<TestResult> {
    check_sample(x, 3)?;
    let n = x.len();
    if n > 5000 {
        return Err(Error::SampleTooLarge { n, max: 5000 });
    }
    let xs = sorted(x);
    let range = xs[n - 1] - xs[0];
    if !(range > 0.0) {
        return Err(Error::ConstantSample);
    }
    let a = sw_coefficients(n);

    // Work on range-scaled values to keep the sums well conditioned.
    let mean = xs.iter().map(|v| v / range).sum::<f64>() / n as f64;
    let ss: f64 = xs.iter().map(|v| (v / range - mean).powi(2)).sum();
    let lin: f64 = a.iter().enumerate().map(|(i, ai)| ai * (xs[n - 1 - i] - xs[i]) / range).sum();
    let w = (lin * lin / ss).min(1.0);

    let an = n as f64;
    if n == 3 {
        if w < 0.75 {
            return Ok(TestResult::new(Method::SW, 0.75, 0.0));
        }
        let p = 1.0 - 6.0 / std::f64::consts::PI * w.sqrt().acos();
        return Ok(TestResult::new(Method::SW, w, p));
    }
    let y = (1.0 - w).ln();
    let p = if n <= 11 {
        let gamma = poly(&G, an);
        if y >= gamma {
            SMALL
        } else {
            let yt = -(gamma - y).ln();
            let m = poly(&C3, an);
            let s = poly(&C4, an).exp();
            normal_sf((yt - m) / s)
        }
    } else {
        let xx = an.ln();
        let m = poly(&C5, xx);
        let s = poly(&C6, xx).exp();
        normal_sf((y - m) / s)
    };
    Ok(TestResult::new(Method::SW, w, p))
}
