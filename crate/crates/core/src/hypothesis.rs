//! Scalar two-hypothesis test behind the thresholding estimator.
//!
//! Under `Z = 0` the statistic is `W ~ N(0, Ω E[U²])`; under `Z = 1` it is
//! `W + √ρ U` with `U ~ F`. The Bayes region
//! `T* = {x : Ω f₁(x) > (1 - Ω) f₀(x)}` minimizes the misclassification
//! probability, whose minimum is `ε(ρ, Ω, F)`.

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Normal};

use crate::distribution::{seeded_rng, DistributionKind, DistributionSpec};
use crate::error::{Error, Result};
use crate::gauss;
use crate::quadrature::{integrate, Tolerance};

/// Initial number of scan points for the log-likelihood-ratio sign search.
pub const SCAN_POINTS: usize = 10_000;
/// Half-width of the scan window in combined standard deviations.
pub const SCAN_SIGMAS: f64 = 8.0;
/// Number of times the scan window may double.
pub const MAX_WIDENINGS: usize = 3;
/// Boundary refinement width.
pub const BOUNDARY_TOL: f64 = 1e-10;

const DENSITY_TOL: Tolerance = Tolerance { abs: 1e-13, rel: 1e-11, max_segments: 2000 };
const PROB_TOL: Tolerance = Tolerance { abs: 1e-11, rel: 1e-11, max_segments: 2000 };

/// Finite union of disjoint open intervals, sorted, ends possibly infinite.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdSet {
    intervals: Vec<(f64, f64)>,
}

impl ThresholdSet {
    pub fn new(intervals: Vec<(f64, f64)>) -> Result<Self> {
        for &(lo, hi) in &intervals {
            if !(lo < hi) || lo.is_nan() || hi.is_nan() {
                return Err(Error::invalid(format!("threshold interval ({lo}, {hi}) is empty")));
            }
        }
        for pair in intervals.windows(2) {
            if pair[0].1 > pair[1].0 {
                return Err(Error::invalid("threshold intervals must be sorted and disjoint"));
            }
        }
        Ok(Self { intervals })
    }

    pub fn empty() -> Self {
        Self { intervals: Vec::new() }
    }

    pub fn everything() -> Self {
        Self { intervals: vec![(f64::NEG_INFINITY, f64::INFINITY)] }
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn contains(&self, x: f64) -> bool {
        self.intervals.iter().any(|&(lo, hi)| lo < x && x < hi)
    }

    /// Finite interval endpoints in increasing order.
    pub fn boundaries(&self) -> Vec<f64> {
        self.intervals
            .iter()
            .flat_map(|&(lo, hi)| [lo, hi])
            .filter(|b| b.is_finite())
            .collect()
    }

    /// The same set with finite boundary `index` moved by `shift`.
    pub fn perturbed(&self, index: usize, shift: f64) -> Result<Self> {
        let mut count = 0;
        let mut intervals = self.intervals.clone();
        'search: for interval in intervals.iter_mut() {
            for end in [&mut interval.0, &mut interval.1] {
                if end.is_finite() {
                    if count == index {
                        *end += shift;
                        break 'search;
                    }
                    count += 1;
                }
            }
        }
        if count != index || index >= self.boundaries().len() {
            return Err(Error::invalid(format!("threshold set has only {count} finite boundaries")));
        }
        Self::new(intervals)
    }
}

/// Two-component model `X | Z=0 ~ W`, `X | Z=1 ~ W + √ρ U`.
#[derive(Debug, Clone)]
pub struct MixtureModel {
    rho: f64,
    omega: f64,
    f: DistributionSpec,
    null_variance: f64,
}

impl MixtureModel {
    pub fn new(rho: f64, omega: f64, f: DistributionSpec) -> Result<Self> {
        if !(rho >= 0.0) || !rho.is_finite() {
            return Err(Error::invalid(format!("rate must be finite and nonnegative, got {rho}")));
        }
        if !(omega > 0.0 && omega < 1.0) {
            return Err(Error::invalid(format!("prior must lie in (0,1), got {omega}")));
        }
        let null_variance = omega * f.second_moment();
        if !(null_variance > 0.0) {
            return Err(Error::invalid("null variance must be positive"));
        }
        Ok(Self { rho, omega, f, null_variance })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn law(&self) -> &DistributionSpec {
        &self.f
    }

    /// Ω E[U²].
    pub fn null_variance(&self) -> f64 {
        self.null_variance
    }

    fn null_sd(&self) -> f64 {
        self.null_variance.sqrt()
    }

    fn scale(&self) -> f64 {
        self.rho.sqrt()
    }

    /// Mean and standard deviation of `X | Z=1`.
    pub fn alt_moments(&self) -> (f64, f64) {
        let mean = self.scale() * self.f.mean();
        let var = self.null_variance + self.rho * self.f.variance();
        (mean, var.sqrt())
    }

    pub fn null_density(&self, x: f64) -> f64 {
        gauss::pdf(x, 0.0, self.null_sd())
    }

    pub fn alt_density(&self, x: f64) -> Result<f64> {
        Ok(self.alt_log_density(x)?.exp())
    }

    fn null_log_density(&self, x: f64) -> f64 {
        gauss::log_pdf(x, 0.0, self.null_sd())
    }

    fn alt_log_density(&self, x: f64) -> Result<f64> {
        if self.rho == 0.0 {
            return Ok(self.null_log_density(x));
        }
        let s0 = self.null_sd();
        let c = self.scale();
        match self.f.kind() {
            DistributionKind::Gaussian { .. } => {
                let (m1, s1) = self.alt_moments();
                Ok(gauss::log_pdf(x, m1, s1))
            }
            DistributionKind::Discrete { support, weights } => Ok(gauss::log_sum_exp(
                support
                    .iter()
                    .zip(weights)
                    .filter(|(_, &w)| w > 0.0)
                    .map(|(&s, &w)| w.ln() + gauss::log_pdf(x, c * s, s0)),
            )),
            DistributionKind::Custom(law) => {
                // Only u with |x - √ρ u| < 40 s₀ contribute.
                let reach = 40.0 * s0 / c;
                let (lo, hi) = self.custom_window();
                let lo = lo.max(x / c - reach);
                let hi = hi.min(x / c + reach);
                if lo >= hi {
                    return Ok(f64::NEG_INFINITY);
                }
                let integrand = |u: f64| (law.density)(u) * gauss::pdf(x, c * u, s0);
                let value = integrate_split(integrand, lo, hi, law.mean, DENSITY_TOL)?;
                Ok(value.max(0.0).ln())
            }
        }
    }

    /// Effective integration range of a custom law.
    fn custom_window(&self) -> (f64, f64) {
        let DistributionKind::Custom(law) = self.f.kind() else {
            unreachable!("custom_window on non-custom law")
        };
        let sd = law.variance.sqrt();
        (law.support.0.max(law.mean - 40.0 * sd), law.support.1.min(law.mean + 40.0 * sd))
    }

    /// `ln(Ω f₁(x)) - ln((1 - Ω) f₀(x))`; positive values favour `Z = 1`.
    pub fn log_likelihood_ratio(&self, x: f64) -> Result<f64> {
        Ok(self.omega.ln() + self.alt_log_density(x)?
            - (1.0 - self.omega).ln()
            - self.null_log_density(x))
    }

    /// The Bayes acceptance region `T*`, ties assigned to `Z = 0`.
    pub fn optimal_threshold_set(&self) -> Result<ThresholdSet> {
        let (m1, s1) = self.alt_moments();
        let s0 = self.null_sd();
        let mut lo = (-SCAN_SIGMAS * s0).min(m1 - SCAN_SIGMAS * s1);
        let mut hi = (SCAN_SIGMAS * s0).max(m1 + SCAN_SIGMAS * s1);

        let mut widenings = 0;
        loop {
            let (set, near_edge) = self.scan_window(lo, hi)?;
            if !near_edge || widenings == MAX_WIDENINGS {
                return Ok(set);
            }
            let center = 0.5 * (lo + hi);
            let half = hi - lo;
            lo = center - half;
            hi = center + half;
            widenings += 1;
        }
    }

    /// Scan `[lo, hi]`; the flag reports a boundary in the outer tenth.
    fn scan_window(&self, lo: f64, hi: f64) -> Result<(ThresholdSet, bool)> {
        let step = (hi - lo) / SCAN_POINTS as f64;
        let accept = |x: f64| -> Result<bool> {
            let v = self.log_likelihood_ratio(x)?;
            if v.is_nan() {
                return Err(Error::invalid(format!("log-likelihood ratio undefined at x = {x}")));
            }
            Ok(v > 0.0)
        };

        let mut states = Vec::with_capacity(SCAN_POINTS + 1);
        for i in 0..=SCAN_POINTS {
            states.push(accept(lo + step * i as f64)?);
        }

        let mut boundaries = Vec::new();
        for i in 0..SCAN_POINTS {
            if states[i] != states[i + 1] {
                let (mut a, mut b) = (lo + step * i as f64, lo + step * (i + 1) as f64);
                let left = states[i];
                while b - a > BOUNDARY_TOL {
                    let mid = 0.5 * (a + b);
                    if mid <= a || mid >= b {
                        break;
                    }
                    if accept(mid)? == left {
                        a = mid;
                    } else {
                        b = mid;
                    }
                }
                boundaries.push(0.5 * (a + b));
            }
        }

        let margin = 0.1 * (hi - lo);
        let near_edge = boundaries.iter().any(|&b| b < lo + margin || b > hi - margin);

        let mut intervals = Vec::new();
        let mut open = if states[0] { Some(f64::NEG_INFINITY) } else { None };
        for &b in &boundaries {
            match open.take() {
                Some(start) => intervals.push((start, b)),
                None => open = Some(b),
            }
        }
        if let Some(start) = open {
            intervals.push((start, f64::INFINITY));
        }
        Ok((ThresholdSet::new(intervals)?, near_edge))
    }

    /// P(X ∈ T | Z = 0).
    pub fn null_mass(&self, t: &ThresholdSet) -> f64 {
        let s0 = self.null_sd();
        let mass: f64 = t.intervals().iter().map(|&(lo, hi)| gauss::interval_prob(lo, hi, 0.0, s0)).sum();
        mass.clamp(0.0, 1.0)
    }

    /// P(X ∈ T | Z = 1).
    pub fn alt_mass(&self, t: &ThresholdSet) -> Result<f64> {
        if self.rho == 0.0 {
            return Ok(self.null_mass(t));
        }
        if t.is_empty() {
            return Ok(0.0);
        }
        if t.intervals() == [(f64::NEG_INFINITY, f64::INFINITY)] {
            return Ok(1.0);
        }
        let s0 = self.null_sd();
        let c = self.scale();
        let mass_at = |mean: f64, sd: f64| -> f64 {
            t.intervals().iter().map(|&(lo, hi)| gauss::interval_prob(lo, hi, mean, sd)).sum()
        };
        match self.f.kind() {
            DistributionKind::Gaussian { .. } => {
                let (m1, s1) = self.alt_moments();
                Ok(mass_at(m1, s1))
            }
            DistributionKind::Discrete { support, weights } => {
                Ok(support.iter().zip(weights).map(|(&s, &w)| w * mass_at(c * s, s0)).sum())
            }
            DistributionKind::Custom(law) => {
                let (lo, hi) = self.custom_window();
                let mass = integrate_split(|u| (law.density)(u) * mass_at(c * u, s0), lo, hi, law.mean, PROB_TOL)?;
                Ok(mass.clamp(0.0, 1.0))
            }
        }
    }

    /// Misclassification probability of the test `1(x ∈ T)`.
    pub fn error_probability(&self, t: &ThresholdSet) -> Result<f64> {
        let false_alarm = self.null_mass(t);
        let miss = 1.0 - self.alt_mass(t)?;
        Ok((1.0 - self.omega) * false_alarm + self.omega * miss.max(0.0))
    }

    /// `ε(ρ, Ω, F)`: error probability of the Bayes region.
    pub fn epsilon(&self) -> Result<f64> {
        let t = self.optimal_threshold_set()?;
        self.error_probability(&t)
    }

    /// Simulated error rate of `T` from `draws` samples of `(Z, X)`, with its
    /// standard error.
    pub fn monte_carlo_error(&self, t: &ThresholdSet, draws: usize, seed: u64) -> (f64, f64) {
        let mut rng = seeded_rng(seed);
        let errors = simulate_errors(self, t, draws, &mut rng);
        let p = errors as f64 / draws as f64;
        (p, (p * (1.0 - p) / draws as f64).sqrt())
    }
}

fn simulate_errors<R: RngCore>(model: &MixtureModel, t: &ThresholdSet, draws: usize, rng: &mut R) -> usize {
    let noise = Normal::new(0.0, model.null_sd()).expect("positive null variance");
    let c = model.scale();
    let mut errors = 0;
    for _ in 0..draws {
        let z = rng.random::<f64>() < model.omega;
        let mut x = noise.sample(rng);
        if z {
            x += c * model.f.draw(rng);
        }
        if t.contains(x) != z {
            errors += 1;
        }
    }
    errors
}

fn integrate_split<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, split: f64, tol: Tolerance) -> Result<f64> {
    if lo < split && split < hi {
        Ok(integrate(&f, lo, split, tol)?.value + integrate(&f, split, hi, tol)?.value)
    } else {
        Ok(integrate(f, lo, hi, tol)?.value)
    }
}
