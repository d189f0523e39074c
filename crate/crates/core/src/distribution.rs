//! The law `F` of the nonzero coefficients and the sparsity configuration.

use std::f64::consts::{E, PI};
use std::fmt;
use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;

use crate::error::{Error, Result};

/// Generator used for every seeded draw in the crate.
pub type SeededRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub type DensityFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type SamplerFn = Arc<dyn Fn(&mut dyn RngCore) -> f64 + Send + Sync>;

/// A user-supplied law with a density. The differential entropy is supplied,
/// never estimated.
#[derive(Clone)]
pub struct CustomLaw {
    pub name: String,
    pub mean: f64,
    pub variance: f64,
    /// Differential entropy in nats.
    pub entropy: f64,
    /// Closed interval outside which the density vanishes; ends may be infinite.
    pub support: (f64, f64),
    pub density: DensityFn,
    pub sampler: SamplerFn,
}

impl fmt::Debug for CustomLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomLaw")
            .field("name", &self.name)
            .field("mean", &self.mean)
            .field("variance", &self.variance)
            .field("entropy", &self.entropy)
            .field("support", &self.support)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub enum DistributionKind {
    Gaussian { mean: f64, variance: f64 },
    Discrete { support: Vec<f64>, weights: Vec<f64> },
    Custom(CustomLaw),
}

/// Distribution `F` of the nonzero entries of the sparse representation.
///
/// Construction validates that `F` puts no mass at zero and has a finite
/// second moment.
#[derive(Debug, Clone)]
pub struct DistributionSpec {
    kind: DistributionKind,
}

/// Entropy power of `F`; laws without a density have none.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EntropyPower {
    Density(f64),
    NoDensity,
}

impl EntropyPower {
    /// Numeric value, 0 when there is no density.
    pub fn value(self) -> f64 {
        match self {
            EntropyPower::Density(v) => v,
            EntropyPower::NoDensity => 0.0,
        }
    }

    pub fn has_density(self) -> bool {
        matches!(self, EntropyPower::Density(_))
    }
}

impl DistributionSpec {
    pub fn gaussian(mean: f64, variance: f64) -> Result<Self> {
        if !mean.is_finite() || !variance.is_finite() || variance <= 0.0 {
            return Err(Error::invalid(format!(
                "gaussian needs finite mean and positive variance, got mean={mean}, variance={variance}"
            )));
        }
        Ok(Self { kind: DistributionKind::Gaussian { mean, variance } })
    }

    pub fn discrete(support: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if support.is_empty() || support.len() != weights.len() {
            return Err(Error::invalid("discrete law needs matching, non-empty support and weights"));
        }
        if support.iter().any(|&s| s == 0.0 || !s.is_finite()) {
            return Err(Error::invalid("discrete support must be finite and exclude 0"));
        }
        if weights.iter().any(|&w| !(w >= 0.0)) {
            return Err(Error::invalid("discrete weights must be nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("discrete weights sum to {total}, expected 1")));
        }
        Ok(Self { kind: DistributionKind::Discrete { support, weights } })
    }

    pub fn custom(law: CustomLaw) -> Result<Self> {
        if !law.mean.is_finite() || !law.variance.is_finite() || law.variance <= 0.0 {
            return Err(Error::invalid("custom law needs finite mean and positive finite variance"));
        }
        if !law.entropy.is_finite() {
            return Err(Error::invalid("custom law needs a finite differential entropy"));
        }
        if !(law.support.0 < law.support.1) {
            return Err(Error::invalid("custom law support must be a nonempty interval"));
        }
        // Entropy power cannot exceed the variance.
        let power = (2.0 * law.entropy).exp() / (2.0 * PI * E);
        if power > law.variance * (1.0 + 1e-9) {
            return Err(Error::invalid(format!(
                "entropy {} is inconsistent with variance {} (entropy power exceeds variance)",
                law.entropy, law.variance
            )));
        }
        Ok(Self { kind: DistributionKind::Custom(law) })
    }

    /// Uniform law on `[lo, hi]`.
    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::invalid(format!("uniform needs finite lo < hi, got [{lo}, {hi}]")));
        }
        let width = hi - lo;
        Self::custom(CustomLaw {
            name: format!("uniform({lo}, {hi})"),
            mean: 0.5 * (lo + hi),
            variance: width * width / 12.0,
            entropy: width.ln(),
            support: (lo, hi),
            density: Arc::new(move |x| if (lo..=hi).contains(&x) { 1.0 / width } else { 0.0 }),
            sampler: Arc::new(move |rng| lo + width * rng.random::<f64>()),
        })
    }

    pub fn laplace(location: f64, scale: f64) -> Result<Self> {
        if !(scale > 0.0) || !location.is_finite() || !scale.is_finite() {
            return Err(Error::invalid(format!("laplace needs positive scale, got {scale}")));
        }
        Self::custom(CustomLaw {
            name: format!("laplace({location}, {scale})"),
            mean: location,
            variance: 2.0 * scale * scale,
            entropy: 1.0 + (2.0 * scale).ln(),
            support: (f64::NEG_INFINITY, f64::INFINITY),
            density: Arc::new(move |x| (-(x - location).abs() / scale).exp() / (2.0 * scale)),
            sampler: Arc::new(move |rng| {
                let u: f64 = rng.random::<f64>() - 0.5;
                location - scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
            }),
        })
    }

    pub fn kind(&self) -> &DistributionKind {
        &self.kind
    }

    pub fn has_density(&self) -> bool {
        !matches!(self.kind, DistributionKind::Discrete { .. })
    }

    pub fn mean(&self) -> f64 {
        match &self.kind {
            DistributionKind::Gaussian { mean, .. } => *mean,
            DistributionKind::Discrete { support, weights } => {
                support.iter().zip(weights).map(|(s, w)| s * w).sum()
            }
            DistributionKind::Custom(law) => law.mean,
        }
    }

    pub fn variance(&self) -> f64 {
        match &self.kind {
            DistributionKind::Gaussian { variance, .. } => *variance,
            DistributionKind::Discrete { support, weights } => {
                let m = self.mean();
                support.iter().zip(weights).map(|(s, w)| w * (s - m) * (s - m)).sum()
            }
            DistributionKind::Custom(law) => law.variance,
        }
    }

    /// E[U²] = σ² + μ².
    pub fn second_moment(&self) -> f64 {
        let m = self.mean();
        self.variance() + m * m
    }

    /// Differential entropy in nats, `None` for laws without a density.
    pub fn differential_entropy(&self) -> Option<f64> {
        match &self.kind {
            DistributionKind::Gaussian { variance, .. } => {
                Some(0.5 * (2.0 * PI * E * variance).ln())
            }
            DistributionKind::Discrete { .. } => None,
            DistributionKind::Custom(law) => Some(law.entropy),
        }
    }

    /// Density of `F` at `x`, `None` for discrete laws.
    pub fn density(&self, x: f64) -> Option<f64> {
        match &self.kind {
            DistributionKind::Gaussian { mean, variance } => {
                Some(crate::gauss::pdf(x, *mean, variance.sqrt()))
            }
            DistributionKind::Discrete { .. } => None,
            DistributionKind::Custom(law) => Some((law.density)(x)),
        }
    }

    pub fn describe(&self) -> String {
        match &self.kind {
            DistributionKind::Gaussian { mean, variance } => format!("gaussian({mean}, {variance})"),
            DistributionKind::Discrete { support, weights } => {
                format!("discrete({support:?}, {weights:?})")
            }
            DistributionKind::Custom(law) => law.name.clone(),
        }
    }

    /// One draw from `F`.
    pub fn draw<R: RngCore>(&self, rng: &mut R) -> f64 {
        match &self.kind {
            DistributionKind::Gaussian { mean, variance } => {
                let normal = Normal::new(*mean, variance.sqrt()).expect("validated variance");
                normal.sample(rng)
            }
            DistributionKind::Discrete { support, weights } => {
                let index = WeightedIndex::new(weights).expect("validated weights");
                support[index.sample(rng)]
            }
            DistributionKind::Custom(law) => (law.sampler)(rng),
        }
    }

    /// `count` i.i.d. draws, reproducible for a given seed.
    pub fn sample(&self, count: usize, seed: u64) -> Vec<f64> {
        let mut rng = seeded_rng(seed);
        self.sample_with(count, &mut rng)
    }

    pub fn sample_with<R: RngCore>(&self, count: usize, rng: &mut R) -> Vec<f64> {
        match &self.kind {
            DistributionKind::Gaussian { mean, variance } => {
                let normal = Normal::new(*mean, variance.sqrt()).expect("validated variance");
                (0..count).map(|_| normal.sample(rng)).collect()
            }
            DistributionKind::Discrete { support, weights } => {
                let index = WeightedIndex::new(weights).expect("validated weights");
                (0..count).map(|_| support[index.sample(rng)]).collect()
            }
            DistributionKind::Custom(_) => (0..count).map(|_| self.draw(rng)).collect(),
        }
    }
}

/// Sparsity rate Ω with the derived support size `k = ⌊Ω n⌋`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparsityConfig {
    omega: f64,
    n: usize,
    k: usize,
}

impl SparsityConfig {
    pub fn new(omega: f64, n: usize) -> Result<Self> {
        if !(omega > 0.0 && omega < 1.0) {
            return Err(Error::invalid(format!("sparsity rate must lie in (0,1), got {omega}")));
        }
        if n == 0 {
            return Err(Error::invalid("vector length must be positive"));
        }
        // The 1e-9 slack keeps products such as 0.29 * 100 from flooring to 28.
        let k = (omega * n as f64 + 1e-9).floor() as usize;
        if k == 0 {
            return Err(Error::invalid(format!("floor({omega} * {n}) = 0: support would be empty")));
        }
        Ok(Self { omega, n, k })
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }
}
