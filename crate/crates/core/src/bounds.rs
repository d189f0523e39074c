//! Sampling-rate-distortion bounds and figure tables.
//!
//! * general source: `ρ(α) = Ω` for universal matrices, `(1 - α) Ω` for
//!   basis-specific ones, and `0` at `α = 1`;
//! * lower bound for the random source: the largest `ρ < Ω` at which the
//!   per-coordinate information bound falls below `H(Ω) - H(αΩ)`;
//! * upper bound for the random source: the smallest `ρ` at which the
//!   thresholding error `ε(ρ, Ω, F)` drops below `αΩ`, capped at `Ω`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distribution::DistributionSpec;
use crate::error::{Error, Result};
use crate::freeprob::mutual_info_bound;
use crate::hypothesis::MixtureModel;
use crate::math::{binary_entropy, log_delta, theta};

/// Provenance of a rate-distortion point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointKind {
    GeneralUniversal,
    GeneralBasisSpecific,
    LowerBound,
    UpperBound,
    Empirical,
}

/// A `(ρ, α)` pair. `mu` carries the family parameter for the Gaussian
/// example curves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateDistortionPoint {
    pub alpha: f64,
    pub rho: f64,
    pub kind: PointKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
}

impl RateDistortionPoint {
    pub fn new(alpha: f64, rho: f64, kind: PointKind) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) || !(0.0..=1.0).contains(&rho) {
            return Err(Error::invalid(format!("point (rho={rho}, alpha={alpha}) outside [0,1]²")));
        }
        Ok(Self { alpha, rho, kind, mu: None })
    }
}

/// Grid and tolerance knobs for the bound searches.
#[derive(Debug, Clone, Copy)]
pub struct BoundsConfig {
    /// Scan points on `(0, Ω)` for the lower bound.
    pub lower_grid: usize,
    /// Scan points on `(0, Ω]` for the upper bound; each costs one `ε`.
    pub upper_grid: usize,
    /// Bisection width for both bounds.
    pub tolerance: f64,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        Self { lower_grid: 10_000, upper_grid: 64, tolerance: 1e-8 }
    }
}

fn check_inputs(alpha: f64, omega: f64) -> Result<()> {
    if !(omega > 0.0 && omega < 1.0) {
        return Err(Error::invalid(format!("sparsity rate must lie in (0,1), got {omega}")));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(format!("distortion must lie in [0,1], got {alpha}")));
    }
    Ok(())
}

/// Rate needed for the general (arbitrary-signal) source.
pub fn general_source_rate(omega: f64, alpha: f64, universal: bool) -> Result<f64> {
    check_inputs(alpha, omega)?;
    if alpha >= 1.0 {
        return Ok(0.0);
    }
    Ok(if universal { omega } else { (1.0 - alpha) * omega })
}

/// `H(Ω) - H(αΩ)`, the per-coordinate information the estimator must gain.
pub fn distortion_entropy_gap(alpha: f64, omega: f64) -> Result<f64> {
    Ok(binary_entropy(omega)? - binary_entropy(alpha * omega)?)
}

/// True when the lower bound rules out `(ρ, α)`: `ρ < Ω` and the
/// information bound is strictly below `H(Ω) - H(αΩ)`.
pub fn lb_excludes(rho: f64, alpha: f64, omega: f64, f: &DistributionSpec) -> Result<bool> {
    check_inputs(alpha, omega)?;
    if !(rho > 0.0) || rho >= 1.0 {
        return Err(Error::invalid(format!("rate must lie in (0,1), got {rho}")));
    }
    if rho >= omega {
        return Ok(false);
    }
    // An infinite bound (θ = 0) never satisfies the strict inequality.
    let info = mutual_info_bound(rho, omega, f)?;
    Ok(info < distortion_entropy_gap(alpha, omega)?)
}

/// Right-hand side of the plateau condition: `Δ(Ω) exp(-(2/Ω)[H(Ω) - H(αΩ)])`.
pub fn corollary_threshold(alpha: f64, omega: f64) -> Result<f64> {
    check_inputs(alpha, omega)?;
    let gap = distortion_entropy_gap(alpha, omega)?;
    Ok((log_delta(omega) - 2.0 / omega * gap).exp())
}

/// True when `θ(Ω, F)` exceeds the plateau threshold, in which case the
/// lower bound equals `Ω`.
pub fn corollary_holds(alpha: f64, omega: f64, f: &DistributionSpec) -> Result<bool> {
    Ok(theta(omega, f)? > corollary_threshold(alpha, omega)?)
}

/// Supremum of the excluded rates, `0` if none is excluded.
pub fn lower_bound_rate(alpha: f64, omega: f64, f: &DistributionSpec, cfg: &BoundsConfig) -> Result<f64> {
    check_inputs(alpha, omega)?;
    if alpha >= 1.0 {
        return Ok(0.0);
    }
    if corollary_holds(alpha, omega, f)? {
        return Ok(omega);
    }
    lower_bound_rate_scan(alpha, omega, f, cfg)
}

/// Grid-and-bisection evaluation of the lower bound, without the plateau
/// short cut.
pub fn lower_bound_rate_scan(
    alpha: f64,
    omega: f64,
    f: &DistributionSpec,
    cfg: &BoundsConfig,
) -> Result<f64> {
    check_inputs(alpha, omega)?;
    if alpha >= 1.0 || theta(omega, f)? == 0.0 {
        return Ok(0.0);
    }
    let n = cfg.lower_grid.max(2);
    let grid = |i: usize| omega * i as f64 / n as f64;
    let mut last = None;
    for i in 1..n {
        if lb_excludes(grid(i), alpha, omega, f)? {
            last = Some(i);
        }
    }
    let Some(j) = last else {
        return Ok(0.0);
    };
    let (mut inside, mut outside) = (grid(j), grid(j + 1));
    while outside - inside > cfg.tolerance {
        let mid = 0.5 * (inside + outside);
        if lb_excludes(mid, alpha, omega, f)? {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    Ok(inside)
}

/// Upper bound with diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UpperBound {
    pub rate: f64,
    /// Whether `ε` was nonincreasing on the scan grid; otherwise the rate is
    /// the smallest qualifying grid point.
    pub monotone: bool,
}

/// Smallest rate at which thresholding meets the distortion, capped at `Ω`.
pub fn upper_bound_rate(alpha: f64, omega: f64, f: &DistributionSpec, cfg: &BoundsConfig) -> Result<f64> {
    Ok(upper_bound(alpha, omega, f, cfg)?.rate)
}

pub fn upper_bound(alpha: f64, omega: f64, f: &DistributionSpec, cfg: &BoundsConfig) -> Result<UpperBound> {
    check_inputs(alpha, omega)?;
    if alpha >= 1.0 {
        return Ok(UpperBound { rate: 0.0, monotone: true });
    }
    let target = alpha * omega;
    let eps_at = |rho: f64| -> Result<f64> { MixtureModel::new(rho, omega, f.clone())?.epsilon() };

    // At ρ = 0 both hypotheses coincide.
    let eps_zero = omega.min(1.0 - omega);
    if eps_zero < target {
        return Ok(UpperBound { rate: 0.0, monotone: true });
    }

    let n = cfg.upper_grid.max(1);
    let rates: Vec<f64> = (1..=n).map(|j| omega * j as f64 / n as f64).collect();
    let eps: Vec<f64> = rates.par_iter().map(|&r| eps_at(r)).collect::<Result<_>>()?;

    let monotone = std::iter::once(eps_zero)
        .chain(eps.iter().copied())
        .collect::<Vec<_>>()
        .windows(2)
        .all(|w| w[1] <= w[0] + 1e-12);

    let Some(j) = eps.iter().position(|&e| e < target) else {
        return Ok(UpperBound { rate: omega, monotone });
    };
    if !monotone {
        return Ok(UpperBound { rate: rates[j].min(omega), monotone });
    }
    let (mut fails, mut meets) = (if j == 0 { 0.0 } else { rates[j - 1] }, rates[j]);
    while meets - fails > cfg.tolerance {
        let mid = 0.5 * (fails + meets);
        if eps_at(mid)? < target {
            meets = mid;
        } else {
            fails = mid;
        }
    }
    Ok(UpperBound { rate: meets.min(omega), monotone })
}

/// The Gaussian example family `N(μ, 1 - μ²)`; `|μ| = 1` degenerates to a
/// point mass at `μ`.
pub fn gaussian_family(mu: f64) -> Result<DistributionSpec> {
    if !(-1.0..=1.0).contains(&mu) {
        return Err(Error::invalid(format!("family parameter must lie in [-1,1], got {mu}")));
    }
    let variance = 1.0 - mu * mu;
    if variance <= 0.0 {
        DistributionSpec::discrete(vec![mu], vec![1.0])
    } else {
        DistributionSpec::gaussian(mu, variance)
    }
}

/// Largest `μ` in `[0, 1]` for which the lower bound of the Gaussian family
/// still sits on the `Ω` plateau, found by bisection.
pub fn plateau_departure_mu(alpha: f64, omega: f64, cfg: &BoundsConfig, tol: f64) -> Result<f64> {
    let on_plateau = |mu: f64| -> Result<bool> {
        Ok(lower_bound_rate(alpha, omega, &gaussian_family(mu)?, cfg)? >= omega)
    };
    if !on_plateau(0.0)? {
        return Ok(0.0);
    }
    if on_plateau(1.0)? {
        return Ok(1.0);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if on_plateau(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// The three figure tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    /// Normalized general-source rate against distortion.
    GeneralSource,
    /// Gaussian example, `α = 0.3`.
    ModerateDistortion,
    /// Gaussian example, `α = 0.95`.
    HighDistortion,
}

impl Figure {
    pub fn from_id(id: u32) -> Result<Self> {
        match id {
            1 => Ok(Figure::GeneralSource),
            2 => Ok(Figure::ModerateDistortion),
            3 => Ok(Figure::HighDistortion),
            other => Err(Error::invalid(format!("unknown figure id {other}; expected 1, 2 or 3"))),
        }
    }

    pub fn id(self) -> u32 {
        match self {
            Figure::GeneralSource => 1,
            Figure::ModerateDistortion => 2,
            Figure::HighDistortion => 3,
        }
    }

    pub fn columns(self) -> [&'static str; 3] {
        match self {
            Figure::GeneralSource => ["alpha", "universal", "basis_specific"],
            _ => ["mu", "lower", "upper"],
        }
    }

    /// Distortion of the Gaussian example curves.
    pub fn alpha(self) -> Option<f64> {
        match self {
            Figure::GeneralSource => None,
            Figure::ModerateDistortion => Some(0.3),
            Figure::HighDistortion => Some(0.95),
        }
    }
}

/// Sparsity rate used by every figure.
pub const FIGURE_OMEGA: f64 = 0.35;

/// Uniform grid of `points` values over `[0, 1]`, endpoints included.
pub fn unit_grid(points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..points).map(|i| i as f64 / (points - 1) as f64).collect(),
    }
}

/// Default abscissae of a figure: `α ∈ [0, 1)` for figure 1, where the
/// general-source curves are flat, and `μ ∈ [0, 1]` otherwise.
pub fn figure_grid(figure: Figure, points: usize) -> Vec<f64> {
    match figure {
        Figure::GeneralSource => (0..points).map(|i| i as f64 / points as f64).collect(),
        _ => unit_grid(points),
    }
}

/// Points of one figure over `grid` (α for figure 1, μ otherwise).
pub fn figure_curve(figure: Figure, omega: f64, grid: &[f64], cfg: &BoundsConfig) -> Result<Vec<RateDistortionPoint>> {
    match figure {
        Figure::GeneralSource => {
            let mut points = Vec::with_capacity(2 * grid.len());
            for &alpha in grid {
                points.push(RateDistortionPoint::new(
                    alpha,
                    general_source_rate(omega, alpha, true)?,
                    PointKind::GeneralUniversal,
                )?);
                points.push(RateDistortionPoint::new(
                    alpha,
                    general_source_rate(omega, alpha, false)?,
                    PointKind::GeneralBasisSpecific,
                )?);
            }
            Ok(points)
        }
        _ => {
            let alpha = figure.alpha().expect("gaussian figures fix alpha");
            let rows: Vec<[RateDistortionPoint; 2]> = grid
                .par_iter()
                .map(|&mu| -> Result<[RateDistortionPoint; 2]> {
                    let f = gaussian_family(mu)?;
                    let lower = lower_bound_rate(alpha, omega, &f, cfg)?;
                    let upper = upper_bound_rate(alpha, omega, &f, cfg)?;
                    let mut lo = RateDistortionPoint::new(alpha, lower, PointKind::LowerBound)?;
                    let mut up = RateDistortionPoint::new(alpha, upper, PointKind::UpperBound)?;
                    lo.mu = Some(mu);
                    up.mu = Some(mu);
                    Ok([lo, up])
                })
                .collect::<Result<_>>()?;
            Ok(rows.into_iter().flatten().collect())
        }
    }
}

/// Rows `[x, first, second]` normalized by `Ω`, in the column order of
/// [`Figure::columns`].
pub fn figure_table(figure: Figure, omega: f64, points: &[RateDistortionPoint]) -> Vec<[f64; 3]> {
    points
        .chunks(2)
        .map(|pair| {
            let x = match figure {
                Figure::GeneralSource => pair[0].alpha,
                _ => pair[0].mu.unwrap_or(f64::NAN),
            };
            [x, pair[0].rho / omega, pair[1].rho / omega]
        })
        .collect()
}
