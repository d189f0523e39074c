//! Scalar quantities shared by the bounds: binary entropy, Δ(r), entropy
//! power and the normalized entropy power θ(Ω, F). All logarithms are natural.

use std::f64::consts::{E, PI};

use crate::distribution::{DistributionSpec, EntropyPower};
use crate::error::{Error, Result};

/// Binary entropy `H(p)` in nats, with `H(0) = H(1) = 0`.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!("binary entropy needs p in [0,1], got {p}")));
    }
    Ok(xlogx_neg(p) + xlogx_neg(1.0 - p))
}

fn xlogx_neg(p: f64) -> f64 {
    if p == 0.0 {
        0.0
    } else {
        -p * p.ln()
    }
}

/// `Δ(r) = (1 - r)^(1 - 1/r)` on `(0, 1)`, with `Δ(1) = 1`.
pub fn delta(r: f64) -> Result<f64> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::invalid(format!("delta needs r in (0,1], got {r}")));
    }
    Ok(log_delta(r).exp())
}

/// `ln Δ(r) = -((1 - r)/r) ln(1 - r)`; no domain check.
pub(crate) fn log_delta(r: f64) -> f64 {
    if r >= 1.0 {
        0.0
    } else {
        -((1.0 - r) / r) * (-r).ln_1p()
    }
}

/// Entropy power `N(F) = exp(2 h(F)) / (2πe)`.
pub fn entropy_power(f: &DistributionSpec) -> EntropyPower {
    match f.differential_entropy() {
        Some(h) => EntropyPower::Density((2.0 * h).exp() / (2.0 * PI * E)),
        None => EntropyPower::NoDensity,
    }
}

/// Normalized entropy power `θ(Ω, F) = N(F) / (σ² + (1 - Ω) μ²)`; zero when
/// `F` has no density.
pub fn theta(omega: f64, f: &DistributionSpec) -> Result<f64> {
    if !(omega > 0.0 && omega < 1.0) {
        return Err(Error::invalid(format!("sparsity rate must lie in (0,1), got {omega}")));
    }
    let power = match entropy_power(f) {
        EntropyPower::Density(p) => p,
        EntropyPower::NoDensity => return Ok(0.0),
    };
    let mean = f.mean();
    Ok(power / (f.variance() + (1.0 - omega) * mean * mean))
}
