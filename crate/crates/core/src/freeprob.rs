//! Spectral measures, Stieltjes and R-transforms, compression by a free
//! projection, Marčenko–Pastur log-potentials, and empirical spectra of the
//! projected sampling matrices.
//!
//! Conventions: `S_μ(z) = ∫ dμ(x) / (x - z)` and
//! `R_μ(z) = S_μ⁻¹(-z) - 1/z`. The log-potential is
//! `G_μ = exp(∫ ln x dμ(x))`, the limit of `|M|^{1/m}` for matrices with
//! limiting spectrum `μ`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::seq::index::sample as sample_indices;
use serde::Serialize;

use crate::distribution::{seeded_rng, DensityFn, DistributionSpec};
use crate::error::{Error, Result};
use crate::linalg::{gaussian_matrix, haar_orthogonal, symmetric_eigenvalues};
use crate::math::{log_delta, theta};
use crate::quadrature::{integrate, integrate_arcsine, Tolerance};

const MEASURE_TOL: Tolerance = Tolerance { abs: 1e-13, rel: 1e-11, max_segments: 4000 };
// ln x against a density with a 1/√x edge at zero converges more slowly.
const LOG_TOL: Tolerance = Tolerance { abs: 1e-12, rel: 1e-9, max_segments: 4000 };
const ATOM_EPS: f64 = 1e-14;

#[derive(Clone)]
enum Density {
    Analytic(DensityFn),
    /// Piecewise-linear interpolation of `(x, y)` nodes on a uniform grid.
    Tabulated { xs: Vec<f64>, ys: Vec<f64> },
}

#[derive(Clone)]
struct ContinuousPart {
    lo: f64,
    hi: f64,
    density: Density,
}

impl ContinuousPart {
    fn eval(&self, x: f64) -> f64 {
        if x < self.lo || x > self.hi {
            return 0.0;
        }
        match &self.density {
            Density::Analytic(f) => f(x),
            Density::Tabulated { xs, ys } => {
                let h = xs[1] - xs[0];
                let i = (((x - xs[0]) / h).floor() as usize).min(xs.len() - 2);
                let t = (x - xs[i]) / h;
                ys[i] * (1.0 - t) + ys[i + 1] * t
            }
        }
    }

    fn integrate_tol<G: Fn(f64) -> f64>(&self, g: G, upto: f64, tol: Tolerance) -> Result<f64> {
        let hi = self.hi.min(upto);
        if hi <= self.lo {
            return Ok(0.0);
        }
        match &self.density {
            Density::Analytic(f) => {
                Ok(integrate_arcsine(|x| g(x) * f(x), self.lo, hi, tol)?.value)
            }
            Density::Tabulated { xs, .. } => {
                let mut total = 0.0;
                for w in xs.windows(2) {
                    let (a, b) = (w[0], w[1].min(hi));
                    if b <= a {
                        break;
                    }
                    total += integrate(|x| g(x) * self.eval(x), a, b, tol)?.value;
                }
                Ok(total)
            }
        }
    }

    fn integrate<G: Fn(f64) -> f64>(&self, g: G, upto: f64) -> Result<f64> {
        self.integrate_tol(g, upto, MEASURE_TOL)
    }

    fn scaled(&self, c: f64) -> ContinuousPart {
        let (lo, hi) = if c > 0.0 { (c * self.lo, c * self.hi) } else { (c * self.hi, c * self.lo) };
        let density = match &self.density {
            Density::Analytic(f) => {
                let f = f.clone();
                Density::Analytic(Arc::new(move |x| f(x / c) / c.abs()))
            }
            Density::Tabulated { xs, ys } => {
                let mut pairs: Vec<(f64, f64)> =
                    xs.iter().zip(ys).map(|(x, y)| (c * x, y / c.abs())).collect();
                pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
                Density::Tabulated {
                    xs: pairs.iter().map(|p| p.0).collect(),
                    ys: pairs.iter().map(|p| p.1).collect(),
                }
            }
        };
        ContinuousPart { lo, hi, density }
    }

    fn reweighted(&self, w: f64) -> ContinuousPart {
        let density = match &self.density {
            Density::Analytic(f) => {
                let f = f.clone();
                Density::Analytic(Arc::new(move |x| w * f(x)))
            }
            Density::Tabulated { xs, ys } => {
                Density::Tabulated { xs: xs.clone(), ys: ys.iter().map(|y| w * y).collect() }
            }
        };
        ContinuousPart { lo: self.lo, hi: self.hi, density }
    }
}

/// Closed-form family a measure belongs to, when known.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    /// `scale ×` Marčenko–Pastur law of aspect ratio `ratio ≤ 1` (mean `scale`).
    MarchenkoPastur { ratio: f64, scale: f64 },
    /// Free Poisson law with R-transform `rate·jump / (1 - jump·z)`.
    FreePoisson { rate: f64, jump: f64 },
}

/// Probability measure on ℝ made of point atoms plus absolutely continuous
/// parts on compact intervals.
#[derive(Clone)]
pub struct SpectralMeasure {
    atoms: Vec<(f64, f64)>,
    parts: Vec<ContinuousPart>,
    family: Option<Family>,
}

impl fmt::Debug for SpectralMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralMeasure")
            .field("atoms", &self.atoms)
            .field("support", &self.support())
            .field("family", &self.family)
            .finish()
    }
}

impl SpectralMeasure {
    pub fn point_mass(location: f64) -> Self {
        Self { atoms: vec![(location, 1.0)], parts: Vec::new(), family: None }
    }

    /// Finite atomic measure; weights must be nonnegative and sum to one.
    pub fn atomic(atoms: Vec<(f64, f64)>) -> Result<Self> {
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if atoms.iter().any(|a| a.1 < 0.0) || (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("atom weights must be nonnegative and sum to 1"));
        }
        Ok(Self { atoms, parts: Vec::new(), family: None })
    }

    /// Marčenko–Pastur law of ratio `r ∈ (0, 1]`: density
    /// `√((x-a)(b-x)) / (2π r x)` on `[(1-√r)², (1+√r)²]`.
    pub fn marchenko_pastur(r: f64) -> Result<Self> {
        if !(r > 0.0 && r <= 1.0) {
            return Err(Error::invalid(format!("Marchenko-Pastur ratio must lie in (0,1], got {r}")));
        }
        let a = (1.0 - r.sqrt()).powi(2);
        let b = (1.0 + r.sqrt()).powi(2);
        let density: DensityFn = Arc::new(move |x: f64| {
            let q = (x - a) * (b - x);
            if q <= 0.0 || x <= 0.0 {
                0.0
            } else {
                q.sqrt() / (2.0 * PI * r * x)
            }
        });
        Ok(Self {
            atoms: Vec::new(),
            parts: vec![ContinuousPart { lo: a, hi: b, density: Density::Analytic(density) }],
            family: Some(Family::MarchenkoPastur { ratio: r, scale: 1.0 }),
        })
    }

    /// Free Poisson law of the given rate and jump size.
    pub fn free_poisson(rate: f64, jump: f64) -> Result<Self> {
        if !(rate > 0.0) || !(jump > 0.0) || !rate.is_finite() || !jump.is_finite() {
            return Err(Error::invalid(format!("free Poisson needs positive rate and jump, got ({rate}, {jump})")));
        }
        let a = jump * (1.0 - rate.sqrt()).powi(2);
        let b = jump * (1.0 + rate.sqrt()).powi(2);
        let density: DensityFn = Arc::new(move |x: f64| {
            let q = (x - a) * (b - x);
            if q <= 0.0 || x <= 0.0 {
                0.0
            } else {
                q.sqrt() / (2.0 * PI * jump * x)
            }
        });
        let atoms = if rate < 1.0 { vec![(0.0, 1.0 - rate)] } else { Vec::new() };
        Ok(Self {
            atoms,
            parts: vec![ContinuousPart { lo: a, hi: b, density: Density::Analytic(density) }],
            family: Some(Family::FreePoisson { rate, jump }),
        })
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn family(&self) -> Option<Family> {
        self.family
    }

    /// Intervals carrying the continuous part.
    pub fn support(&self) -> Vec<(f64, f64)> {
        self.parts.iter().map(|p| (p.lo, p.hi)).collect()
    }

    /// Smallest interval containing every atom and continuous part.
    pub fn hull(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &(x, w) in &self.atoms {
            if w > 0.0 {
                lo = lo.min(x);
                hi = hi.max(x);
            }
        }
        for p in &self.parts {
            lo = lo.min(p.lo);
            hi = hi.max(p.hi);
        }
        (lo, hi)
    }

    /// Density of the continuous part at `x`.
    pub fn density(&self, x: f64) -> f64 {
        self.parts.iter().map(|p| p.eval(x)).sum()
    }

    /// Weight at exactly zero.
    pub fn zero_atom(&self) -> f64 {
        self.atoms.iter().filter(|a| a.0 == 0.0).map(|a| a.1).sum()
    }

    /// `∫ g dμ`.
    pub fn integrate<G: Fn(f64) -> f64>(&self, g: G) -> Result<f64> {
        let mut total: f64 = self.atoms.iter().map(|&(x, w)| w * g(x)).sum();
        for p in &self.parts {
            total += p.integrate(&g, f64::INFINITY)?;
        }
        Ok(total)
    }

    pub fn total_mass(&self) -> Result<f64> {
        self.integrate(|_| 1.0)
    }

    pub fn mean(&self) -> Result<f64> {
        self.integrate(|x| x)
    }

    /// `μ((-∞, x])`.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        let mut total: f64 = self.atoms.iter().filter(|a| a.0 <= x).map(|a| a.1).sum();
        for p in &self.parts {
            total += p.integrate(|_| 1.0, x)?;
        }
        Ok(total.clamp(0.0, 1.0))
    }

    /// `keep · μ + (1 - keep) δ₀`.
    pub fn add_zero_atom(&self, keep: f64) -> Result<Self> {
        if !(keep > 0.0 && keep <= 1.0) {
            return Err(Error::invalid(format!("keep fraction must lie in (0,1], got {keep}")));
        }
        if keep == 1.0 {
            return Ok(self.clone());
        }
        let mut atoms: Vec<(f64, f64)> = self.atoms.iter().map(|&(x, w)| (x, keep * w)).collect();
        match atoms.iter_mut().find(|a| a.0 == 0.0) {
            Some(zero) => zero.1 += 1.0 - keep,
            None => atoms.insert(0, (0.0, 1.0 - keep)),
        }
        let family = match self.family {
            Some(Family::MarchenkoPastur { ratio, scale }) if (keep - ratio).abs() < 1e-15 => {
                Some(Family::FreePoisson { rate: ratio, jump: scale })
            }
            _ => None,
        };
        Ok(Self { atoms, parts: self.parts.iter().map(|p| p.reweighted(keep)).collect(), family })
    }

    /// Remove the atom at zero and renormalize.
    pub fn without_zero_atom(&self) -> Result<Self> {
        let z = self.zero_atom();
        if z >= 1.0 - ATOM_EPS {
            return Err(Error::invalid("measure is concentrated at zero"));
        }
        let w = 1.0 / (1.0 - z);
        let atoms = self.atoms.iter().filter(|a| a.0 != 0.0).map(|&(x, a)| (x, w * a)).collect();
        let family = match self.family {
            Some(Family::FreePoisson { rate, jump }) if rate <= 1.0 => {
                Some(Family::MarchenkoPastur { ratio: rate, scale: jump })
            }
            other => other,
        };
        Ok(Self { atoms, parts: self.parts.iter().map(|p| p.reweighted(w)).collect(), family })
    }

    /// Push-forward under `x ↦ c x`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::invalid(format!("scale factor must be positive, got {c}")));
        }
        let family = self.family.map(|f| match f {
            Family::MarchenkoPastur { ratio, scale } => Family::MarchenkoPastur { ratio, scale: scale * c },
            Family::FreePoisson { rate, jump } => Family::FreePoisson { rate, jump: jump * c },
        });
        Ok(Self {
            atoms: self.atoms.iter().map(|&(x, w)| (c * x, w)).collect(),
            parts: self.parts.iter().map(|p| p.scaled(c)).collect(),
            family,
        })
    }

    /// Stieltjes transform at a point of the upper half-plane (or a real
    /// point outside the support).
    pub fn stieltjes(&self, z: Complex64) -> Result<Complex64> {
        if z.im == 0.0 {
            return Ok(Complex64::new(self.stieltjes_real(z.re)?, 0.0));
        }
        if z.im < 0.0 {
            return Err(Error::invalid("Stieltjes transform is evaluated on Im z > 0"));
        }
        let mut total = Complex64::new(0.0, 0.0);
        for &(x, w) in &self.atoms {
            total += w / (Complex64::new(x, 0.0) - z);
        }
        for p in &self.parts {
            let (zr, zi) = (z.re, z.im);
            let re = p.integrate(|x| (x - zr) / ((x - zr).powi(2) + zi * zi), f64::INFINITY)?;
            let im = p.integrate(|x| zi / ((x - zr).powi(2) + zi * zi), f64::INFINITY)?;
            total += Complex64::new(re, im);
        }
        Ok(total)
    }

    /// Stieltjes transform at a real point outside the support hull.
    pub fn stieltjes_real(&self, w: f64) -> Result<f64> {
        let (lo, hi) = self.hull();
        if w >= lo && w <= hi {
            return Err(Error::invalid(format!(
                "real Stieltjes argument {w} lies inside the support hull [{lo}, {hi}]"
            )));
        }
        let mut total: f64 = self.atoms.iter().map(|&(x, a)| a / (x - w)).sum();
        for p in &self.parts {
            total += p.integrate(|x| 1.0 / (x - w), f64::INFINITY)?;
        }
        Ok(total)
    }

    /// `R(z) = S⁻¹(-z) - 1/z` for small real `z ≠ 0`, inverting `S` on the
    /// real branch that continues `w = ∞` (right of the hull for `z > 0`,
    /// left of it for `z < 0`).
    pub fn r_transform(&self, z: f64) -> Result<f64> {
        if z == 0.0 || !z.is_finite() {
            return Err(Error::invalid(format!("R-transform needs finite z != 0, got {z}")));
        }
        let target = -z;
        let (lo, hi) = self.hull();
        let span = (hi - lo).max(1.0);
        // S is increasing on each real component outside the hull; start the
        // bracket a little away from the edge and only move closer if needed.
        let mut gap = 1e-6 * span;
        while gap > 1e-14 * span {
            let edge = if z > 0.0 { hi + gap } else { lo - gap };
            let s = self.stieltjes_real(edge)?;
            if (z > 0.0 && s <= target) || (z < 0.0 && s >= target) {
                break;
            }
            gap *= 1e-2;
        }
        let (mut a, mut b) = if z > 0.0 {
            (hi + gap, hi + span + 2.0 / z)
        } else {
            (lo - span - 2.0 / z.abs(), lo - gap)
        };
        let s_a = self.stieltjes_real(a)?;
        let mut s_b = self.stieltjes_real(b)?;
        if z > 0.0 {
            if s_a > target {
                return Err(Error::Inversion { target, lo: a, hi: b });
            }
            let mut expansions = 0;
            while s_b < target {
                b = hi + 2.0 * (b - hi);
                s_b = self.stieltjes_real(b)?;
                expansions += 1;
                if expansions > 60 {
                    return Err(Error::Inversion { target, lo: a, hi: b });
                }
            }
        } else {
            if s_b < target {
                return Err(Error::Inversion { target, lo: a, hi: b });
            }
            let mut expansions = 0;
            let mut s_a = s_a;
            while s_a > target {
                a = lo - 2.0 * (lo - a);
                s_a = self.stieltjes_real(a)?;
                expansions += 1;
                if expansions > 60 {
                    return Err(Error::Inversion { target, lo: a, hi: b });
                }
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if self.stieltjes_real(mid)? < target {
                a = mid;
            } else {
                b = mid;
            }
        }
        Ok(0.5 * (a + b) - 1.0 / z)
    }

    /// `exp(∫ ln x dμ)`; zero when the measure has an atom at zero.
    pub fn log_potential(&self) -> Result<f64> {
        if self.atoms.iter().any(|a| a.0 <= 0.0 && a.1 > ATOM_EPS) || self.zero_atom() > 0.0 {
            if self.atoms.iter().any(|a| a.0 < 0.0 && a.1 > 0.0) {
                return Err(Error::invalid("log-potential needs a measure on [0, ∞)"));
            }
            return Ok(0.0);
        }
        if self.parts.iter().any(|p| p.lo < 0.0) {
            return Err(Error::invalid("log-potential needs a measure on [0, ∞)"));
        }
        let mut log_sum: f64 = self.atoms.iter().filter(|a| a.1 > 0.0).map(|&(x, w)| w * x.ln()).sum();
        for p in &self.parts {
            log_sum += p.integrate_tol(|x| if x > 0.0 { x.ln() } else { 0.0 }, f64::INFINITY, LOG_TOL)?;
        }
        if !log_sum.is_finite() {
            return Err(Error::Quadrature { achieved: f64::INFINITY, requested: MEASURE_TOL.abs });
        }
        Ok(log_sum.exp())
    }
}

/// Marčenko–Pastur law of ratio `r`, the limit spectrum of `A Aᵀ` for an
/// `m × n` matrix with i.i.d. `N(0, 1/n)` entries and `m/n → r`.
pub fn mp_law(r: f64) -> Result<SpectralMeasure> {
    SpectralMeasure::marchenko_pastur(r)
}

/// Spectral limit of `Bᵀ_S M B_S` (on the `k`-side, normalized trace) for a
/// free projection of trace `Ω`: the measure whose R-transform is
/// `R_μ(Ω z)`.
///
/// Free Poisson inputs map to free Poisson outputs in closed form. Any
/// other input is compressed numerically through the subordination
/// equation `w = z + (1 - Ω) / G_μ(w)`, `G_ν(z) = G_μ(w) / Ω`, and tabulated.
pub fn compress(mu: &SpectralMeasure, omega: f64) -> Result<SpectralMeasure> {
    if !(omega > 0.0 && omega <= 1.0) {
        return Err(Error::invalid(format!("projection trace must lie in (0,1], got {omega}")));
    }
    if omega == 1.0 {
        return Ok(mu.clone());
    }
    match mu.family {
        Some(Family::FreePoisson { rate, jump }) => SpectralMeasure::free_poisson(rate / omega, jump * omega),
        Some(Family::MarchenkoPastur { ratio: 1.0, scale }) => {
            SpectralMeasure::free_poisson(1.0 / omega, scale * omega)
        }
        _ => compress_numeric(mu, omega, 801),
    }
}

fn compress_numeric(mu: &SpectralMeasure, omega: f64, nodes: usize) -> Result<SpectralMeasure> {
    // An atom of weight p survives with weight 1 - (1 - p)/Ω.
    let atoms: Vec<(f64, f64)> = mu
        .atoms
        .iter()
        .map(|&(x, p)| (x, 1.0 - (1.0 - p) / omega))
        .filter(|a| a.1 > ATOM_EPS)
        .collect();
    let atom_mass: f64 = atoms.iter().map(|a| a.1).sum();
    let continuous_mass = 1.0 - atom_mass;
    if continuous_mass <= ATOM_EPS {
        return SpectralMeasure::atomic(atoms);
    }

    let (lo, hi) = mu.hull();
    let width = hi - lo;
    let eta = 1e-3 * width;
    let cauchy = |w: Complex64| -> Result<Complex64> { Ok(-mu.stieltjes(w)?) };

    let xs: Vec<f64> = (0..nodes).map(|i| lo + width * i as f64 / (nodes - 1) as f64).collect();
    let mut ys = Vec::with_capacity(nodes);
    let mut w = Complex64::new(xs[0], 1.0 + width);
    for &x in &xs {
        let z = Complex64::new(x, eta);
        let mut converged = false;
        for _ in 0..20_000 {
            let next = z + (1.0 - omega) / cauchy(w)?;
            let step = (next - w).norm();
            w = next;
            if step < 1e-11 * (1.0 + w.norm()) {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Inversion { target: x, lo, hi });
        }
        let mut g = cauchy(w)? / omega;
        for &(c, q) in &atoms {
            g -= q / (z - c);
        }
        ys.push((-g.im / PI).max(0.0));
    }

    // Trim empty tails and renormalize the trapezoid mass.
    let peak = ys.iter().copied().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..nodes).filter(|&i| ys[i] > 1e-8 * peak).collect();
    let (first, last) = (keep[0].saturating_sub(1), (keep[keep.len() - 1] + 1).min(nodes - 1));
    let xs = xs[first..=last].to_vec();
    let mut ys = ys[first..=last].to_vec();
    let h = xs[1] - xs[0];
    let raw: f64 = ys.windows(2).map(|p| 0.5 * h * (p[0] + p[1])).sum();
    for y in ys.iter_mut() {
        *y *= continuous_mass / raw;
    }
    Ok(SpectralMeasure {
        atoms,
        parts: vec![ContinuousPart { lo: xs[0], hi: xs[xs.len() - 1], density: Density::Tabulated { xs, ys } }],
        family: None,
    })
}

/// Convert a `k`-side limit to the `m`-side by rank accounting:
/// `(1 - Ω/ρ) δ₀ + (Ω/ρ) ν̃`. For `ρ < Ω` the negative zero weight cancels
/// part of `ν̃`'s zero atom, leaving the `min(m, k)` nonzero eigenvalues.
pub fn m_side(nu_tilde: &SpectralMeasure, rho: f64, omega: f64) -> Result<SpectralMeasure> {
    if !(rho > 0.0) || !(omega > 0.0) {
        return Err(Error::invalid("rates must be positive"));
    }
    let ratio = omega / rho;
    let mut atoms: Vec<(f64, f64)> = nu_tilde.atoms.iter().map(|&(x, w)| (x, ratio * w)).collect();
    match atoms.iter_mut().find(|a| a.0 == 0.0) {
        Some(zero) => zero.1 += 1.0 - ratio,
        None => atoms.insert(0, (0.0, 1.0 - ratio)),
    }
    if atoms.iter().any(|a| a.1 < -1e-12) {
        return Err(Error::invalid("rank accounting produced a negative atom"));
    }
    atoms.retain(|a| a.1 > ATOM_EPS);
    let family = match nu_tilde.family {
        Some(Family::FreePoisson { rate, jump }) if (rate - rho / omega).abs() < 1e-12 && rate <= 1.0 => {
            Some(Family::MarchenkoPastur { ratio: rate, scale: jump })
        }
        _ => None,
    };
    Ok(SpectralMeasure {
        atoms,
        parts: nu_tilde.parts.iter().map(|p| p.reweighted(ratio)).collect(),
        family,
    })
}

/// Limit of the (unscaled) `m × m` spectrum of `A B_S B_Sᵀ Aᵀ` for any
/// `ρ ∈ (0, 1]`; when `ρ > Ω` it carries a zero atom of weight `1 - Ω/ρ`.
pub fn projected_spectrum_limit(rho: f64, omega: f64) -> Result<SpectralMeasure> {
    if !(omega > 0.0 && omega < 1.0) {
        return Err(Error::invalid(format!("sparsity rate must lie in (0,1), got {omega}")));
    }
    let mu_tilde = mp_law(rho)?.add_zero_atom(rho)?;
    m_side(&compress(&mu_tilde, omega)?, rho, omega)
}

/// Limiting spectra of `A Aᵀ` and of `(1/Ω) A B_S B_Sᵀ Aᵀ` with their
/// log-potentials.
#[derive(Debug, Clone)]
pub struct SpectralLimitPair {
    pub mu: SpectralMeasure,
    pub nu: SpectralMeasure,
    pub g_mu: f64,
    pub g_nu: f64,
}

/// Build the pair for a Marčenko–Pastur `A Aᵀ` limit of ratio `ρ ≤ Ω`.
pub fn spectral_limits(rho: f64, omega: f64) -> Result<SpectralLimitPair> {
    if !(rho > 0.0 && rho <= omega && omega < 1.0) {
        return Err(Error::invalid(format!("need 0 < rho <= omega < 1, got rho={rho}, omega={omega}")));
    }
    let mu = mp_law(rho)?;
    let mu_tilde = mu.add_zero_atom(rho)?;
    let nu_tilde = compress(&mu_tilde, omega)?;
    let nu = m_side(&nu_tilde, rho, omega)?.scaled(1.0 / omega)?;
    let g_mu = mu.log_potential()?;
    let g_nu = nu.log_potential()?;
    Ok(SpectralLimitPair { mu, nu, g_mu, g_nu })
}

/// Per-coordinate bound on `(1/n) I(A X; S | B)`:
/// `(ρ/2) ln( Δ(ρ) / (θ Δ(ρ/Ω)) )`, infinite when `θ = 0`.
pub fn mutual_info_bound(rho: f64, omega: f64, f: &DistributionSpec) -> Result<f64> {
    if !(rho > 0.0 && rho <= omega) {
        return Err(Error::invalid(format!("need 0 < rho <= omega, got rho={rho}, omega={omega}")));
    }
    let t = theta(omega, f)?;
    if t == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(0.5 * rho * (log_delta(rho) - log_delta(rho / omega) - t.ln()))
}

/// Eigenvalues of one random matrix, ascending.
#[derive(Debug, Clone, Serialize)]
pub struct EmpiricalSpectrum {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub eigenvalues: Vec<f64>,
    /// Set when `ρ > Ω`, where the `m`-side carries extra zero eigenvalues.
    pub rho_exceeds_omega: bool,
}

fn sample_rows(n: usize, rho: f64) -> Result<usize> {
    if n < 1 || !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::invalid(format!("need n >= 1 and rho in (0,1], got n={n}, rho={rho}")));
    }
    Ok((rho * n as f64 - 1e-9).ceil().max(1.0) as usize)
}

/// Spectrum of `A Aᵀ` with `A` an `⌈ρn⌉ × n` matrix of i.i.d. `N(0, 1/n)`.
pub fn empirical_gram_spectrum(n: usize, rho: f64, seed: u64) -> Result<EmpiricalSpectrum> {
    let m = sample_rows(n, rho)?;
    let mut rng = seeded_rng(seed);
    let a = gaussian_matrix(m, n, 1.0 / (n as f64).sqrt(), &mut rng);
    let gram = &a * a.transpose();
    Ok(EmpiricalSpectrum { n, m, k: n, eigenvalues: symmetric_eigenvalues(gram)?, rho_exceeds_omega: false })
}

/// Spectrum of `A B_S B_Sᵀ Aᵀ` for Gaussian `A`, a uniformly drawn support
/// `S` of size `⌊Ωn⌋` and a Haar-distributed basis `B`.
pub fn empirical_projected_spectrum(n: usize, rho: f64, omega: f64, seed: u64) -> Result<EmpiricalSpectrum> {
    if n < 100 {
        return Err(Error::invalid(format!("projected spectrum needs n >= 100, got {n}")));
    }
    if n > crate::linalg::EIGEN_CAP {
        return Err(Error::SizeCap { size: n, cap: crate::linalg::EIGEN_CAP });
    }
    let m = sample_rows(n, rho)?;
    let k = crate::distribution::SparsityConfig::new(omega, n)?.k();
    let mut rng = seeded_rng(seed);
    let a = gaussian_matrix(m, n, 1.0 / (n as f64).sqrt(), &mut rng);
    let mut support: Vec<usize> = sample_indices(&mut rng, n, k).into_vec();
    support.sort_unstable();
    let basis = haar_orthogonal(n, &mut rng);
    let b_s = DMatrix::from_fn(n, k, |i, j| basis[(i, support[j])]);
    let projected = &a * b_s;
    let gram = &projected * projected.transpose();
    Ok(EmpiricalSpectrum {
        n,
        m,
        k,
        eigenvalues: symmetric_eigenvalues(gram)?,
        rho_exceeds_omega: rho > omega,
    })
}

/// Kolmogorov–Smirnov distance between sorted samples and a CDF. The left
/// limit `F(x-)` is taken at the next float below each sample so atoms in
/// the reference law are handled.
pub fn ks_distance<F: Fn(f64) -> Result<f64>>(sorted: &[f64], cdf: F) -> Result<f64> {
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let (at, below) = (cdf(x)?, cdf(x.next_down())?);
        d = d.max((i as f64 + 1.0) / n - at).max(below - i as f64 / n);
    }
    Ok(d)
}

/// `exp(mean ln λ)` over the strictly positive eigenvalues.
pub fn empirical_log_potential(eigenvalues: &[f64], floor: f64) -> f64 {
    let positive: Vec<f64> = eigenvalues.iter().copied().filter(|&x| x > floor).collect();
    (positive.iter().map(|x| x.ln()).sum::<f64>() / positive.len() as f64).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::delta;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    /// Closed-form Marčenko–Pastur Stieltjes transform via the free Poisson
    /// quadratic `z g² + (λ - 1 - z) g + 1 = 0` for `g = -S_fp`.
    fn mp_stieltjes_closed(r: f64, z: Complex64) -> Complex64 {
        let b = Complex64::new(r - 1.0, 0.0) - z;
        let disc = (b * b - 4.0 * z).sqrt();
        let roots = [(-b + disc) / (2.0 * z), (-b - disc) / (2.0 * z)];
        // g_fp is the Cauchy transform: Im g < 0 on the upper half plane.
        let g_fp = if roots[0].im < 0.0 { roots[0] } else { roots[1] };
        let g_mp = (g_fp - (1.0 - r) / z) / r;
        -g_mp
    }

    #[test]
    fn mp_mass_and_mean() {
        for r in [0.1, 0.35, 0.7, 1.0] {
            let mp = mp_law(r).unwrap();
            assert!(close(mp.total_mass().unwrap(), 1.0, 1e-10), "r={r}");
            assert!(close(mp.mean().unwrap(), 1.0, 1e-10), "r={r}");
        }
        let mp1 = mp_law(1.0).unwrap();
        assert_eq!(mp1.support(), vec![(0.0, 4.0)]);
        assert!(close(mp1.density(1.0), 3f64.sqrt() / (2.0 * PI), 1e-15));
        assert!(mp_law(1.5).is_err());
    }

    #[test]
    fn zero_atom_mixing() {
        let mp = mp_law(0.3).unwrap();
        let same = mp.add_zero_atom(1.0).unwrap();
        assert_eq!(same.atoms(), mp.atoms());
        let tilde = mp.add_zero_atom(0.3).unwrap();
        assert!(close(tilde.zero_atom(), 0.7, 1e-15));
        assert!(close(tilde.total_mass().unwrap(), 1.0, 1e-10));
        assert_eq!(tilde.family(), Some(Family::FreePoisson { rate: 0.3, jump: 1.0 }));
    }

    #[test]
    fn stieltjes_point_mass() {
        let d = SpectralMeasure::point_mass(1.0);
        let z = Complex64::new(0.3, 0.7);
        let s = d.stieltjes(z).unwrap();
        assert!((s - 1.0 / (1.0 - z)).norm() < 1e-15);
    }

    #[test]
    fn stieltjes_matches_mp_closed_form() {
        let mp = mp_law(0.35).unwrap();
        for i in 0..20 {
            let z = Complex64::new(-1.0 + 0.25 * i as f64, 0.05 + 0.1 * (i % 4) as f64);
            let s = mp.stieltjes(z).unwrap();
            let exact = mp_stieltjes_closed(0.35, z);
            assert!(s.im > 0.0);
            assert!((s - exact).norm() < 1e-8, "z={z}: {s} vs {exact}");
        }
    }

    #[test]
    fn stieltjes_large_argument() {
        let mp = mp_law(0.5).unwrap();
        let z = Complex64::new(0.0, 1e4);
        let s = mp.stieltjes(z).unwrap();
        assert!((s + 1.0 / z).norm() < 2.0 / z.norm_sqr());
    }

    #[test]
    fn stieltjes_rejects_support_points() {
        let mp = mp_law(0.5).unwrap();
        assert!(mp.stieltjes(Complex64::new(1.0, 0.0)).is_err());
        assert!(mp.stieltjes(Complex64::new(1.0, -0.1)).is_err());
    }

    #[test]
    fn r_transform_of_point_mass_is_constant() {
        let d = SpectralMeasure::point_mass(2.5);
        for z in [-0.2, -0.05, 0.05, 0.2] {
            assert!(close(d.r_transform(z).unwrap(), 2.5, 1e-10));
        }
    }

    #[test]
    fn r_transform_of_free_poisson() {
        let rho = 0.35;
        let tilde = mp_law(rho).unwrap().add_zero_atom(rho).unwrap();
        for z in [-0.2, -0.1, -0.05, 0.05, 0.1, 0.2] {
            let r = tilde.r_transform(z).unwrap();
            assert!(close(r, rho / (1.0 - z), 1e-9), "z={z}: {r}");
        }
    }

    #[test]
    fn compress_free_poisson_closed_form() {
        let tilde = mp_law(0.2).unwrap().add_zero_atom(0.2).unwrap();
        let nu = compress(&tilde, 0.5).unwrap();
        assert_eq!(nu.family(), Some(Family::FreePoisson { rate: 0.4, jump: 0.5 }));
        assert!(close(nu.zero_atom(), 1.0 - 0.4, 1e-15));
        assert!(close(nu.total_mass().unwrap(), 1.0, 1e-10));
        for z in [-0.15, -0.1, 0.05, 0.1, 0.15] {
            assert!(close(nu.r_transform(z).unwrap(), 0.2 / (1.0 - 0.5 * z), 1e-9));
        }
        let same = compress(&tilde, 1.0).unwrap();
        assert_eq!(same.atoms(), tilde.atoms());
    }

    #[test]
    fn numeric_compression_tracks_closed_form() {
        // Strip the family tag so the subordination path is used.
        let tilde = mp_law(0.2).unwrap().add_zero_atom(0.2).unwrap();
        let untagged = SpectralMeasure { family: None, ..tilde.clone() };
        let numeric = compress(&untagged, 0.5).unwrap();
        let exact = compress(&tilde, 0.5).unwrap();
        assert!(close(numeric.zero_atom(), exact.zero_atom(), 1e-12));
        assert!(close(numeric.total_mass().unwrap(), 1.0, 1e-8));
        for z in [-0.1, 0.05, 0.1] {
            let (a, b) = (numeric.r_transform(z).unwrap(), exact.r_transform(z).unwrap());
            assert!(close(a, b, 1e-2), "z={z}: {a} vs {b}");
        }
    }

    #[test]
    fn log_potential_examples() {
        assert!(close(SpectralMeasure::point_mass(3.0).log_potential().unwrap(), 3.0, 1e-15));
        for r in [0.1, 0.35, 0.7, 1.0] {
            let g = mp_law(r).unwrap().log_potential().unwrap();
            let closed = (-1.0f64).exp() * delta(r).unwrap();
            assert!(((g - closed) / closed).abs() < 1e-6, "r={r}: {g} vs {closed}");
        }
        let with_zero = mp_law(0.5).unwrap().add_zero_atom(0.5).unwrap();
        assert_eq!(with_zero.log_potential().unwrap(), 0.0);
    }

    #[test]
    fn spectral_limit_pair_matches_closed_forms() {
        let pair = spectral_limits(0.2, 0.35).unwrap();
        let e = (-1.0f64).exp();
        assert!(close(pair.g_mu, e * delta(0.2).unwrap(), 1e-7));
        assert!(close(pair.g_nu, e * delta(0.2 / 0.35).unwrap(), 1e-7));
        assert!(close(pair.nu.total_mass().unwrap(), 1.0, 1e-8));
        assert!(close(pair.nu.zero_atom(), 0.0, 1e-12));
    }

    #[test]
    fn m_side_flags_negative_weights() {
        // A measure without the matching zero atom cannot be rank-converted.
        assert!(m_side(&mp_law(0.5).unwrap(), 0.2, 0.5).is_err());
    }

    #[test]
    fn mutual_info_examples() {
        let g = DistributionSpec::gaussian(0.0, 1.0).unwrap();
        let at_omega = mutual_info_bound(0.35, 0.35, &g).unwrap();
        assert!(close(at_omega, 0.175 * delta(0.35).unwrap().ln(), 1e-14));
        // (0.1) ln(Δ(0.2)/Δ(0.2/0.35)) by direct powf evaluation
        let d = |r: f64| (1.0 - r).powf(1.0 - 1.0 / r);
        let expected = 0.1 * (d(0.2) / d(0.2 / 0.35)).ln();
        assert!(close(mutual_info_bound(0.2, 0.35, &g).unwrap(), expected, 1e-14));
        assert!(close(expected, 0.025_74, 1e-4));
        let signs = DistributionSpec::discrete(vec![-1.0, 1.0], vec![0.5, 0.5]).unwrap();
        assert_eq!(mutual_info_bound(0.2, 0.35, &signs).unwrap(), f64::INFINITY);
    }

    #[test]
    fn projected_spectrum_rank_and_sign() {
        let spec = empirical_projected_spectrum(500, 0.2, 0.5, 3).unwrap();
        assert_eq!((spec.m, spec.k), (100, 250));
        assert!(spec.eigenvalues.iter().all(|&x| x > -1e-10));
        let rank = spec.eigenvalues.iter().filter(|&&x| x > 1e-8).count();
        assert_eq!(rank, 100);

        let wide = empirical_projected_spectrum(200, 0.6, 0.3, 4).unwrap();
        assert!(wide.rho_exceeds_omega);
        let rank = wide.eigenvalues.iter().filter(|&&x| x > 1e-8).count();
        assert_eq!(rank, wide.k.min(wide.m));
        assert!(empirical_projected_spectrum(50, 0.2, 0.5, 1).is_err());
    }
}
