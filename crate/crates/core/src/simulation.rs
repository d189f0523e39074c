//! Monte Carlo harness: random sparse sources, Gaussian sampling matrices,
//! the thresholding estimator and the one-sample exhaustive decoder for
//! discrete alphabets.
//!
//! Every trial draws its source from stream 0 and its sampling matrix from
//! stream 1 of a ChaCha generator keyed by the trial seed, so the two are
//! independent and each is reproducible on its own.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample as sample_indices;
use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distribution::{seeded_rng, DistributionSpec, SeededRng, SparsityConfig};
use crate::error::{Error, Result};
use crate::hypothesis::{MixtureModel, ThresholdSet};
use crate::linalg::{gaussian_matrix, haar_orthogonal};

/// Largest candidate count the one-sample decoder will enumerate.
pub const ENUMERATION_LIMIT: f64 = 1e7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisKind {
    Haar,
    Identity,
}

impl FromStr for BasisKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "haar" => Ok(BasisKind::Haar),
            "identity" => Ok(BasisKind::Identity),
            other => Err(Error::Config(format!("unknown basis '{other}'; expected haar or identity"))),
        }
    }
}

impl fmt::Display for BasisKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BasisKind::Haar => "haar",
            BasisKind::Identity => "identity",
        })
    }
}

/// Sparsifying basis `B`; the identity is kept implicit.
#[derive(Debug, Clone, PartialEq)]
pub enum Basis {
    Identity(usize),
    Orthogonal(DMatrix<f64>),
}

impl Basis {
    pub fn dim(&self) -> usize {
        match self {
            Basis::Identity(n) => *n,
            Basis::Orthogonal(b) => b.nrows(),
        }
    }

    /// `B v`.
    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        match self {
            Basis::Identity(_) => v.clone(),
            Basis::Orthogonal(b) => b * v,
        }
    }

    /// `Bᵀ v`.
    pub fn apply_transpose(&self, v: &DVector<f64>) -> DVector<f64> {
        match self {
            Basis::Identity(_) => v.clone(),
            Basis::Orthogonal(b) => b.tr_mul(v),
        }
    }
}

/// One draw of the random source `X = B U`.
#[derive(Debug, Clone)]
pub struct SourceInstance {
    pub n: usize,
    /// Sorted support of `u`.
    pub support: Vec<usize>,
    pub u: DVector<f64>,
    pub basis: Basis,
    pub x: DVector<f64>,
}

/// Sampling matrix and noiseless samples `y = A x`.
#[derive(Debug, Clone)]
pub struct SampleSet {
    pub a: DMatrix<f64>,
    pub y: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    pub distortion_count: usize,
    pub normalized_distortion: f64,
    /// Whether `d > α k`.
    pub exceeded: bool,
}

/// Aggregate over a batch of trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub rho: f64,
    pub omega: f64,
    pub alpha: f64,
    pub trials: usize,
    pub seed: u64,
    pub basis: BasisKind,
    /// Analytic `ε` at `ρ = m/n`.
    pub epsilon: f64,
    pub mean_normalized_distortion: f64,
    pub sd_normalized_distortion: f64,
    /// Fraction of trials with `d > α k`.
    pub error_rate: f64,
    #[serde(skip)]
    pub results: Vec<TrialResult>,
}

/// `|s ∪ ŝ| - |s ∩ ŝ|`.
pub fn hamming_distortion(s: &[usize], s_hat: &[usize]) -> usize {
    let a: BTreeSet<usize> = s.iter().copied().collect();
    let b: BTreeSet<usize> = s_hat.iter().copied().collect();
    a.symmetric_difference(&b).count()
}

/// Number of sampling rows `⌈ρ n⌉`.
pub fn sample_count(rho: f64, n: usize) -> Result<usize> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::invalid(format!("sampling rate must lie in (0,1], got {rho}")));
    }
    Ok((rho * n as f64 - 1e-9).ceil().max(1.0) as usize)
}

fn stream_rng(seed: u64, stream: u64) -> SeededRng {
    let mut rng = seeded_rng(seed);
    rng.set_stream(stream);
    rng
}

fn draw_nonzero<R: RngCore>(f: &DistributionSpec, rng: &mut R) -> f64 {
    loop {
        let v = f.draw(rng);
        if v != 0.0 {
            return v;
        }
    }
}

/// Uniform support of size `k`, i.i.d. `F` coefficients and the requested basis.
pub fn gen_instance(config: &SparsityConfig, f: &DistributionSpec, basis: BasisKind, seed: u64) -> SourceInstance {
    let mut rng = stream_rng(seed, 0);
    let n = config.n();
    let mut support = sample_indices(&mut rng, n, config.k()).into_vec();
    support.sort_unstable();
    let mut u = DVector::zeros(n);
    for &i in &support {
        u[i] = draw_nonzero(f, &mut rng);
    }
    let basis = match basis {
        BasisKind::Identity => Basis::Identity(n),
        BasisKind::Haar => Basis::Orthogonal(haar_orthogonal(n, &mut rng)),
    };
    let x = basis.apply(&u);
    SourceInstance { n, support, u, basis, x }
}

/// `m × n` matrix with i.i.d. `N(0, 1/n)` entries.
pub fn gen_sampling_matrix(m: usize, n: usize, seed: u64) -> Result<DMatrix<f64>> {
    if m == 0 || n == 0 {
        return Err(Error::invalid("sampling matrix dimensions must be positive"));
    }
    let mut rng = stream_rng(seed, 1);
    Ok(gaussian_matrix(m, n, 1.0 / (n as f64).sqrt(), &mut rng))
}

pub fn take_samples(instance: &SourceInstance, a: DMatrix<f64>) -> Result<SampleSet> {
    if a.ncols() != instance.n {
        return Err(Error::invalid(format!("matrix has {} columns, source has length {}", a.ncols(), instance.n)));
    }
    let y = &a * &instance.x;
    Ok(SampleSet { a, y })
}

/// Back-projection `û = (1/√ρ) Bᵀ Aᵀ y` with `ρ = m/n`. The scaling puts
/// `û_i` on the scale of the scalar test: `N(0, Ω E[U²])` off the support
/// and `W + √ρ U_i` on it.
pub fn back_projection(samples: &SampleSet, basis: &Basis) -> DVector<f64> {
    let (m, n) = samples.a.shape();
    let rho = m as f64 / n as f64;
    let v = samples.a.tr_mul(&samples.y) / rho.sqrt();
    basis.apply_transpose(&v)
}

/// `{i : û_i ∈ T*}`.
pub fn thresholding_estimate(samples: &SampleSet, basis: &Basis, t_star: &ThresholdSet) -> Vec<usize> {
    if t_star.is_empty() {
        return Vec::new();
    }
    back_projection(samples, basis)
        .iter()
        .enumerate()
        .filter(|(_, &v)| t_star.contains(v))
        .map(|(i, _)| i)
        .collect()
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub config: SparsityConfig,
    pub law: DistributionSpec,
    pub rho: f64,
    pub alpha: f64,
    pub basis: BasisKind,
}

/// Optimal acceptance region at `ρ = m/n` with its Bayes error.
pub fn design_test(spec: &ExperimentSpec) -> Result<(usize, ThresholdSet, f64)> {
    let n = spec.config.n();
    let m = sample_count(spec.rho, n)?;
    let model = MixtureModel::new(m as f64 / n as f64, spec.config.omega(), spec.law.clone())?;
    let t_star = model.optimal_threshold_set()?;
    let eps = model.error_probability(&t_star)?;
    Ok((m, t_star, eps))
}

/// One trial with the given seed.
pub fn run_trial(spec: &ExperimentSpec, m: usize, t_star: &ThresholdSet, trial: usize, seed: u64) -> Result<TrialResult> {
    let instance = gen_instance(&spec.config, &spec.law, spec.basis, seed);
    let a = gen_sampling_matrix(m, spec.config.n(), seed)?;
    let samples = take_samples(&instance, a)?;
    let estimate = thresholding_estimate(&samples, &instance.basis, t_star);
    let d = hamming_distortion(&instance.support, &estimate);
    Ok(TrialResult {
        trial,
        seed,
        distortion_count: d,
        normalized_distortion: d as f64 / spec.config.n() as f64,
        exceeded: d as f64 > spec.alpha * spec.config.k() as f64,
    })
}

/// `trials` independent trials with seeds `seed + i`, run in parallel and
/// aggregated in trial order.
pub fn run_experiment(spec: &ExperimentSpec, trials: usize, seed: u64) -> Result<ExperimentSummary> {
    if trials == 0 {
        return Err(Error::invalid("at least one trial is required"));
    }
    if !(0.0..=1.0).contains(&spec.alpha) {
        return Err(Error::invalid(format!("distortion must lie in [0,1], got {}", spec.alpha)));
    }
    let (m, t_star, epsilon) = design_test(spec)?;
    let results: Vec<TrialResult> = (0..trials)
        .into_par_iter()
        .map(|i| run_trial(spec, m, &t_star, i, seed.wrapping_add(i as u64)))
        .collect::<Result<_>>()?;

    let count = results.len() as f64;
    let mean = results.iter().map(|r| r.normalized_distortion).sum::<f64>() / count;
    let sd = if results.len() > 1 {
        (results.iter().map(|r| (r.normalized_distortion - mean).powi(2)).sum::<f64>() / (count - 1.0)).sqrt()
    } else {
        0.0
    };
    let error_rate = results.iter().filter(|r| r.exceeded).count() as f64 / count;
    Ok(ExperimentSummary {
        n: spec.config.n(),
        m,
        k: spec.config.k(),
        rho: spec.rho,
        omega: spec.config.omega(),
        alpha: spec.alpha,
        trials,
        seed,
        basis: spec.basis,
        epsilon,
        mean_normalized_distortion: mean,
        sd_normalized_distortion: sd,
        error_rate,
        results,
    })
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Recover `u` from a single sample `y = a B u` by enumerating every
/// support of size `k` (lexicographically) and every alphabet assignment
/// (odometer order, last position fastest).
///
/// `tolerance` defaults to `1e-9 |y|`.
pub fn discrete_one_sample_recover(
    y: f64,
    a: &[f64],
    basis: &Basis,
    k: usize,
    alphabet: &[f64],
    tolerance: Option<f64>,
) -> Result<DVector<f64>> {
    let n = a.len();
    if basis.dim() != n {
        return Err(Error::invalid(format!("basis dimension {} does not match row length {n}", basis.dim())));
    }
    if k == 0 || k > n {
        return Err(Error::invalid(format!("support size must lie in 1..={n}, got {k}")));
    }
    if alphabet.is_empty() || alphabet.contains(&0.0) {
        return Err(Error::invalid("alphabet must be nonempty and exclude 0"));
    }
    let count = binomial(n, k) * (alphabet.len() as f64).powi(k as i32);
    if count > ENUMERATION_LIMIT {
        return Err(Error::EnumerationGuard { count, limit: ENUMERATION_LIMIT });
    }
    let tolerance = tolerance.unwrap_or(1e-9 * y.abs());
    // Effective row c = Bᵀ aᵀ, so that y = c · u.
    let c = basis.apply_transpose(&DVector::from_column_slice(a));

    let mut found: Option<(Vec<usize>, Vec<usize>)> = None;
    let mut matches = 0usize;
    let mut support: Vec<usize> = (0..k).collect();
    let mut digits = vec![0usize; k];
    loop {
        digits.iter_mut().for_each(|d| *d = 0);
        loop {
            let value: f64 = support.iter().zip(&digits).map(|(&i, &d)| c[i] * alphabet[d]).sum();
            if (value - y).abs() <= tolerance {
                matches += 1;
                if found.is_none() {
                    found = Some((support.clone(), digits.clone()));
                }
            }
            if !advance_odometer(&mut digits, alphabet.len()) {
                break;
            }
        }
        if !advance_combination(&mut support, n) {
            break;
        }
    }
    match (matches, found) {
        (1, Some((support, digits))) => {
            let mut u = DVector::zeros(n);
            for (&i, &d) in support.iter().zip(&digits) {
                u[i] = alphabet[d];
            }
            Ok(u)
        }
        (0, _) => Err(Error::NoMatch { tolerance }),
        (count, _) => Err(Error::MultipleMatches { count, tolerance }),
    }
}

fn advance_odometer(digits: &mut [usize], base: usize) -> bool {
    for d in digits.iter_mut().rev() {
        *d += 1;
        if *d < base {
            return true;
        }
        *d = 0;
    }
    false
}

fn advance_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    for i in (0..k).rev() {
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Outcome counts of a batch of one-sample recoveries.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DemoSummary {
    pub trials: usize,
    pub exact: usize,
    pub wrong: usize,
    pub no_match: usize,
    pub multiple_matches: usize,
}

/// One seeded instance of the one-sample problem and its recovery.
#[derive(Debug)]
pub struct DemoTrial {
    pub truth: DVector<f64>,
    pub recovered: Result<DVector<f64>>,
}

pub fn discrete_demo_trial(config: &SparsityConfig, alphabet: &[f64], basis: BasisKind, seed: u64) -> Result<DemoTrial> {
    let weights = vec![1.0 / alphabet.len() as f64; alphabet.len()];
    let law = DistributionSpec::discrete(alphabet.to_vec(), weights)?;
    let instance = gen_instance(config, &law, basis, seed);
    let a = gen_sampling_matrix(1, config.n(), seed)?;
    let y = (&a * &instance.x)[0];
    let recovered = discrete_one_sample_recover(y, a.as_slice(), &instance.basis, config.k(), alphabet, None);
    Ok(DemoTrial { truth: instance.u, recovered })
}

/// `trials` recoveries with seeds `seed + i`.
pub fn discrete_demo(config: &SparsityConfig, alphabet: &[f64], basis: BasisKind, trials: usize, seed: u64) -> Result<DemoSummary> {
    let outcomes: Vec<DemoTrial> = (0..trials)
        .into_par_iter()
        .map(|i| discrete_demo_trial(config, alphabet, basis, seed.wrapping_add(i as u64)))
        .collect::<Result<_>>()?;
    let mut summary = DemoSummary { trials, ..Default::default() };
    for t in outcomes {
        match t.recovered {
            Ok(u) if u == t.truth => summary.exact += 1,
            Ok(_) => summary.wrong += 1,
            Err(Error::NoMatch { .. }) => summary.no_match += 1,
            Err(Error::MultipleMatches { .. }) => summary.multiple_matches += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hamming_examples() {
        assert_eq!(hamming_distortion(&[1, 2, 3], &[1, 2, 3]), 0);
        assert_eq!(hamming_distortion(&[1, 2], &[3, 4]), 4);
        assert_eq!(hamming_distortion(&[1, 2, 3], &[2, 3, 4]), 2);
    }

    proptest! {
        #[test]
        fn hamming_is_a_metric(
            a in proptest::collection::btree_set(0usize..30, 0..15),
            b in proptest::collection::btree_set(0usize..30, 0..15),
            c in proptest::collection::btree_set(0usize..30, 0..15),
        ) {
            let (a, b, c): (Vec<_>, Vec<_>, Vec<_>) =
                (a.into_iter().collect(), b.into_iter().collect(), c.into_iter().collect());
            prop_assert_eq!(hamming_distortion(&a, &b), hamming_distortion(&b, &a));
            prop_assert_eq!(hamming_distortion(&a, &a), 0);
            if a != b {
                prop_assert!(hamming_distortion(&a, &b) > 0);
            }
            prop_assert!(hamming_distortion(&a, &c) <= hamming_distortion(&a, &b) + hamming_distortion(&b, &c));
            prop_assert!(hamming_distortion(&a, &b) <= a.len() + b.len());
        }
    }

    #[test]
    fn instance_invariants() {
        let cfg = SparsityConfig::new(0.35, 40).unwrap();
        let f = DistributionSpec::gaussian(0.0, 1.0).unwrap();
        for basis in [BasisKind::Identity, BasisKind::Haar] {
            let inst = gen_instance(&cfg, &f, basis, 11);
            assert_eq!(inst.support.len(), cfg.k());
            for i in 0..inst.n {
                assert_eq!(inst.u[i] != 0.0, inst.support.contains(&i));
            }
            assert!((inst.basis.apply(&inst.u) - &inst.x).amax() < 1e-10);
            if let Basis::Orthogonal(b) = &inst.basis {
                let gram = b.transpose() * b;
                assert!((gram - DMatrix::<f64>::identity(40, 40)).amax() < 1e-10);
            }
        }
    }

    #[test]
    fn instances_repeat_per_seed() {
        let cfg = SparsityConfig::new(0.3, 30).unwrap();
        let f = DistributionSpec::gaussian(0.0, 1.0).unwrap();
        let a = gen_instance(&cfg, &f, BasisKind::Haar, 5);
        let b = gen_instance(&cfg, &f, BasisKind::Haar, 5);
        assert_eq!(a.support, b.support);
        assert_eq!(a.x, b.x);
        assert_eq!(gen_sampling_matrix(4, 30, 5).unwrap(), gen_sampling_matrix(4, 30, 5).unwrap());
        assert_ne!(gen_sampling_matrix(4, 30, 5).unwrap(), gen_sampling_matrix(4, 30, 6).unwrap());
    }

    #[test]
    fn samples_match_instance() {
        let cfg = SparsityConfig::new(0.35, 50).unwrap();
        let f = DistributionSpec::gaussian(0.0, 1.0).unwrap();
        let inst = gen_instance(&cfg, &f, BasisKind::Haar, 3);
        let a = gen_sampling_matrix(20, 50, 3).unwrap();
        let s = take_samples(&inst, a.clone()).unwrap();
        assert!((&a * &inst.x - &s.y).amax() < 1e-10);
        assert!(take_samples(&inst, gen_sampling_matrix(20, 49, 3).unwrap()).is_err());
    }

    #[test]
    fn degenerate_threshold_sets() {
        let cfg = SparsityConfig::new(0.35, 60).unwrap();
        let f = DistributionSpec::gaussian(0.0, 1.0).unwrap();
        let inst = gen_instance(&cfg, &f, BasisKind::Identity, 1);
        let s = take_samples(&inst, gen_sampling_matrix(18, 60, 1).unwrap()).unwrap();
        assert!(thresholding_estimate(&s, &inst.basis, &ThresholdSet::empty()).is_empty());
        assert_eq!(thresholding_estimate(&s, &inst.basis, &ThresholdSet::everything()), (0..60).collect::<Vec<_>>());
    }

    #[test]
    fn single_trial_aggregate() {
        let spec = ExperimentSpec {
            config: SparsityConfig::new(0.35, 200).unwrap(),
            law: DistributionSpec::gaussian(0.0, 1.0).unwrap(),
            rho: 0.3,
            alpha: 0.3,
            basis: BasisKind::Identity,
        };
        let summary = run_experiment(&spec, 1, 42).unwrap();
        let (m, t_star, _) = design_test(&spec).unwrap();
        let single = run_trial(&spec, m, &t_star, 0, 42).unwrap();
        assert_eq!(summary.results, vec![single]);
        assert_eq!(summary.mean_normalized_distortion, single.normalized_distortion);
        assert_eq!(summary.sd_normalized_distortion, 0.0);
        assert!(run_experiment(&spec, 0, 42).is_err());
    }

    #[test]
    fn combination_order_is_lexicographic() {
        let mut c = vec![0, 1];
        let mut seen = vec![c.clone()];
        while advance_combination(&mut c, 4) {
            seen.push(c.clone());
        }
        assert_eq!(seen, vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]);
        let mut d = vec![0, 0];
        let mut count = 1;
        while advance_odometer(&mut d, 3) {
            count += 1;
        }
        assert_eq!(count, 9);
    }

    #[test]
    fn one_sample_recovery_small() {
        let cfg = SparsityConfig::new(1.0 / 3.0, 12).unwrap();
        let trial = discrete_demo_trial(&cfg, &[-1.0, 1.0], BasisKind::Haar, 9).unwrap();
        assert_eq!(trial.recovered.unwrap(), trial.truth);
    }

    #[test]
    fn full_support_search() {
        let a = [0.3, -1.7, 2.9];
        let u = [1.0, -1.0, -1.0];
        let y: f64 = a.iter().zip(&u).map(|(a, u)| a * u).sum();
        let got = discrete_one_sample_recover(y, &a, &Basis::Identity(3), 3, &[-1.0, 1.0], None).unwrap();
        assert_eq!(got.as_slice(), &u);
    }

    #[test]
    fn decoder_errors() {
        let a = [0.3, -1.7, 2.9, 0.4];
        let basis = Basis::Identity(4);
        assert!(matches!(
            discrete_one_sample_recover(1e6, &a, &basis, 2, &[-1.0, 1.0], None),
            Err(Error::NoMatch { .. })
        ));
        // Two candidates share the value 1.0 when the row repeats an entry.
        assert!(matches!(
            discrete_one_sample_recover(1.0, &[1.0, 1.0, 5.0], &Basis::Identity(3), 1, &[1.0, 2.0], None),
            Err(Error::MultipleMatches { count: 2, .. })
        ));
        let wide = vec![1.0; 40];
        assert!(matches!(
            discrete_one_sample_recover(1.0, &wide, &Basis::Identity(40), 20, &[-1.0, 1.0], None),
            Err(Error::EnumerationGuard { .. })
        ));
        assert!(discrete_one_sample_recover(1.0, &a, &basis, 2, &[0.0, 1.0], None).is_err());
    }
}
