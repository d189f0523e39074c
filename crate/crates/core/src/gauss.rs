//! Scalar normal-distribution helpers.

use libm::erfc;
use std::f64::consts::{PI, SQRT_2};

pub(crate) fn pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    (-0.5 * z * z).exp() / (sd * (2.0 * PI).sqrt())
}

pub(crate) fn log_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * z * z - sd.ln() - 0.5 * (2.0 * PI).ln()
}

/// Standard normal CDF, accurate in both tails.
pub(crate) fn std_cdf(z: f64) -> f64 {
    if z == f64::INFINITY {
        1.0
    } else if z == f64::NEG_INFINITY {
        0.0
    } else {
        0.5 * erfc(-z / SQRT_2)
    }
}

/// P(lo < X < hi) for X ~ N(mean, sd²); either bound may be infinite.
pub(crate) fn interval_prob(lo: f64, hi: f64, mean: f64, sd: f64) -> f64 {
    let zl = (lo - mean) / sd;
    let zh = (hi - mean) / sd;
    // Use the upper tail when both bounds sit above the mean to avoid cancellation.
    if zl > 0.0 {
        std_cdf(-zl) - std_cdf(-zh)
    } else {
        std_cdf(zh) - std_cdf(zl)
    }
}

pub(crate) fn log_sum_exp(values: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.into_iter().collect();
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}
