//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits nonzero if any criterion fails.

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};

use sparsebound::bounds::{
    figure_curve, figure_grid, figure_table, gaussian_family, lower_bound_rate, plateau_departure_mu,
    upper_bound_rate, BoundsConfig, Figure,
};
use sparsebound::cli;
use sparsebound::freeprob::{
    compress, empirical_gram_spectrum, empirical_log_potential, empirical_projected_spectrum, ks_distance, mp_law,
    projected_spectrum_limit,
};
use sparsebound::io::{DistributionChoice, ExperimentConfig};
use sparsebound::simulation::{discrete_demo, run_experiment, BasisKind, ExperimentSpec};
use sparsebound::{DistributionSpec, MixtureModel, SparsityConfig};

type Outcome = Result<String, String>;

fn entropy(p: f64) -> f64 {
    -p * p.ln() - (1.0 - p) * (1.0 - p).ln()
}

fn delta(r: f64) -> f64 {
    if r == 1.0 {
        1.0
    } else {
        (1.0 - r).powf(1.0 - 1.0 / r)
    }
}

fn within_budget(start: Instant, budget: Duration) -> Result<(), String> {
    let spent = start.elapsed();
    if spent > budget {
        Err(format!("took {spent:.2?}, budget {budget:?}"))
    } else {
        Ok(())
    }
}

fn check(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn figure_one() -> Outcome {
    let start = Instant::now();
    let grid = figure_grid(Figure::GeneralSource, 100);
    let curve = figure_curve(Figure::GeneralSource, 0.35, &grid, &BoundsConfig::default()).map_err(|e| e.to_string())?;
    let table = figure_table(Figure::GeneralSource, 0.35, &curve);
    check(table.len() == 100, format!("{} rows", table.len()))?;
    let mut worst: f64 = 0.0;
    for row in &table {
        worst = worst.max((row[1] - 1.0).abs()).max((row[2] - (1.0 - row[0])).abs());
    }
    check(worst <= 1e-12, format!("max deviation {worst:e}"))?;
    within_budget(start, Duration::from_secs(1))?;
    Ok(format!("100 rows, max deviation {worst:.1e}, {:.2?}", start.elapsed()))
}

fn corollary_boundary() -> Outcome {
    let start = Instant::now();
    let (alpha, omega) = (0.3, 0.35);
    let cfg = BoundsConfig::default();
    let computed = plateau_departure_mu(alpha, omega, &cfg, 1e-10).map_err(|e| e.to_string())?;
    // θ(Ω, N(μ, 1-μ²)) = (1-μ²)/(1-Ωμ²) equals the corollary threshold c at
    // μ² = (1-c)/(1-Ωc).
    let c = delta(omega) * (-(2.0 / omega) * (entropy(omega) - entropy(alpha * omega))).exp();
    let root = ((1.0 - c) / (1.0 - omega * c)).sqrt();
    let f_below = gaussian_family(computed - 1e-3).unwrap();
    let f_above = gaussian_family(computed + 1e-3).unwrap();
    let below = lower_bound_rate(alpha, omega, &f_below, &cfg).map_err(|e| e.to_string())?;
    let above = lower_bound_rate(alpha, omega, &f_above, &cfg).map_err(|e| e.to_string())?;
    check(below == omega && above < omega, format!("plateau check: {below} / {above}"))?;
    check((computed - 0.83).abs() <= 0.03, format!("mu* = {computed} vs 0.83"))?;
    check((computed - root).abs() <= 1e-6, format!("mu* = {computed} vs independent root {root}"))?;
    within_budget(start, Duration::from_secs(5))?;
    Ok(format!("mu* = {computed:.6}, independent root {root:.6}, {:.2?}", start.elapsed()))
}

/// Independent Monte Carlo of the scalar test with the region plugged in.
fn scalar_test_oracle(rho: f64, omega: f64, region: &[(f64, f64)], draws: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, omega.sqrt()).unwrap();
    let signal = Normal::new(0.0, 1.0).unwrap();
    let inside = |x: f64| region.iter().any(|&(a, b)| a < x && x < b);
    let mut errors = 0usize;
    for _ in 0..draws {
        let alt = rng.random::<f64>() < omega;
        let mut x: f64 = noise.sample(&mut rng);
        if alt {
            x += rho.sqrt() * signal.sample(&mut rng);
        }
        if inside(x) != alt {
            errors += 1;
        }
    }
    let p = errors as f64 / draws as f64;
    (p, (p * (1.0 - p) / draws as f64).sqrt())
}

fn thresholding_convergence() -> Outcome {
    let start = Instant::now();
    let (rho, omega) = (0.30, 0.35);
    let law = DistributionSpec::gaussian(0.0, 1.0).unwrap();
    let model = MixtureModel::new(rho, omega, law.clone()).map_err(|e| e.to_string())?;
    let region = model.optimal_threshold_set().map_err(|e| e.to_string())?;
    let eps = model.error_probability(&region).map_err(|e| e.to_string())?;
    let (mc, se) = scalar_test_oracle(rho, omega, region.intervals(), 1_000_000, 2024);
    check((eps - mc).abs() <= 3.0 * se, format!("epsilon {eps} vs Monte Carlo {mc} ± {se}"))?;

    let spec = ExperimentSpec {
        config: SparsityConfig::new(omega, 2000).unwrap(),
        law,
        rho,
        alpha: 0.3,
        basis: BasisKind::Identity,
    };
    let summary = run_experiment(&spec, 50, 7).map_err(|e| e.to_string())?;
    let gap = (summary.mean_normalized_distortion - eps).abs();
    check(gap <= 0.02, format!("mean d/n {} vs epsilon {eps}", summary.mean_normalized_distortion))?;
    within_budget(start, Duration::from_secs(120))?;
    Ok(format!(
        "epsilon {eps:.5}, Monte Carlo {mc:.5} ± {se:.5}, mean d/n {:.5} over 50 trials, {:.2?}",
        summary.mean_normalized_distortion,
        start.elapsed()
    ))
}

fn one_sample_recovery() -> Outcome {
    let start = Instant::now();
    let cfg = SparsityConfig::new(4.0 / 12.0, 12).unwrap();
    check(cfg.k() == 4, "k != 4")?;
    let summary = discrete_demo(&cfg, &[-1.0, 1.0], BasisKind::Haar, 100, 1).map_err(|e| e.to_string())?;
    check(
        summary.exact == 100 && summary.multiple_matches == 0,
        format!("{summary:?}"),
    )?;
    within_budget(start, Duration::from_secs(30))?;
    Ok(format!("{}/100 exact, {} multiple matches, {:.2?}", summary.exact, summary.multiple_matches, start.elapsed()))
}

fn free_probability() -> Outcome {
    let start = Instant::now();
    let e = (-1.0f64).exp();
    // (a) log-potential of Marčenko–Pastur laws.
    let mut worst_a: f64 = 0.0;
    for r in [0.1, 0.35, 0.7, 1.0] {
        let g = mp_law(r).and_then(|m| m.log_potential()).map_err(|e| e.to_string())?;
        worst_a = worst_a.max((g / (e * delta(r)) - 1.0).abs());
    }
    check(worst_a < 1e-6, format!("(a) relative error {worst_a:e}"))?;

    // (b) compression identity, both sides by numeric inversion.
    let (rho, omega) = (0.2, 0.5);
    let mu_tilde = mp_law(rho).and_then(|m| m.add_zero_atom(rho)).map_err(|e| e.to_string())?;
    let nu_tilde = compress(&mu_tilde, omega).map_err(|e| e.to_string())?;
    let mut worst_b: f64 = 0.0;
    for z in [-0.1, -0.05, 0.05, 0.1, 0.15] {
        let lhs = nu_tilde.r_transform(z).map_err(|e| e.to_string())?;
        let rhs = mu_tilde.r_transform(omega * z).map_err(|e| e.to_string())?;
        worst_b = worst_b.max((lhs - rhs).abs());
    }
    check(worst_b < 1e-3, format!("(b) max gap {worst_b:e}"))?;

    // (c) projected spectrum against the limit, which must coincide with
    // Ω·MP(ρ/Ω) built directly.
    let limit = projected_spectrum_limit(rho, omega).map_err(|e| e.to_string())?;
    let direct = mp_law(rho / omega).and_then(|m| m.scaled(omega)).map_err(|e| e.to_string())?;
    for x in [0.05, 0.2, 0.5, 1.0] {
        let (a, b) = (limit.cdf(x).unwrap(), direct.cdf(x).unwrap());
        check((a - b).abs() < 1e-8, format!("(c) limit CDF mismatch at {x}: {a} vs {b}"))?;
    }
    let spectrum = empirical_projected_spectrum(1000, rho, omega, 11).map_err(|e| e.to_string())?;
    let ks = ks_distance(&spectrum.eigenvalues, |x| limit.cdf(x)).map_err(|e| e.to_string())?;
    check(ks < 0.05, format!("(c) KS {ks}"))?;

    // (d) determinant limit of A Aᵀ.
    let mut worst_d: f64 = 0.0;
    for (i, r) in [0.2, 0.35, 0.7].into_iter().enumerate() {
        let gram = empirical_gram_spectrum(1000, r, 100 + i as u64).map_err(|e| e.to_string())?;
        let g = empirical_log_potential(&gram.eigenvalues, 0.0);
        worst_d = worst_d.max((g / (e * delta(r)) - 1.0).abs());
    }
    check(worst_d < 0.05, format!("(d) relative error {worst_d}"))?;
    within_budget(start, Duration::from_secs(120))?;
    Ok(format!(
        "(a) {worst_a:.1e} (b) {worst_b:.1e} (c) KS {ks:.4} (d) {:.2}%, {:.2?}",
        100.0 * worst_d,
        start.elapsed()
    ))
}

fn bound_ordering() -> Outcome {
    let start = Instant::now();
    let omega = 0.35;
    let cfg = BoundsConfig::default();
    let mut worst = f64::NEG_INFINITY;
    let mut count = 0;
    for i in 0..20 {
        let alpha = 0.05 * i as f64;
        for j in 0..10 {
            let mu = j as f64 / 9.0;
            let f = gaussian_family(mu).unwrap();
            let lower = lower_bound_rate(alpha, omega, &f, &cfg).map_err(|e| e.to_string())?;
            let upper = upper_bound_rate(alpha, omega, &f, &cfg).map_err(|e| e.to_string())?;
            check(lower <= upper + 1e-6, format!("alpha={alpha} mu={mu}: lower {lower} > upper {upper}"))?;
            worst = worst.max(lower - upper);
            count += 1;
        }
    }
    let upper = upper_bound_rate(0.95, omega, &gaussian_family(0.95).unwrap(), &cfg).map_err(|e| e.to_string())?;
    check(upper < omega, format!("upper bound at (0.95, 0.95) is {upper}"))?;
    within_budget(start, Duration::from_secs(60))?;
    Ok(format!(
        "{count} points, max(lower - upper) = {worst:.2e}, upper(0.95, 0.95) = {upper:.4}, {:.2?}",
        start.elapsed()
    ))
}

fn test_optimality() -> Outcome {
    let start = Instant::now();
    let laws = vec![
        DistributionSpec::gaussian(0.0, 1.0).unwrap(),
        gaussian_family(0.8).unwrap(),
        gaussian_family(0.95).unwrap(),
        DistributionSpec::discrete(vec![-1.0, 1.0], vec![0.5, 0.5]).unwrap(),
        DistributionSpec::discrete(vec![-1.0, 2.0], vec![0.3, 0.7]).unwrap(),
        DistributionSpec::uniform(0.5, 1.5).unwrap(),
        DistributionSpec::laplace(0.0, 1.0).unwrap(),
    ];
    let settings = [(0.1, 0.35), (0.3, 0.35), (0.5, 0.2), (0.05, 0.6)];
    let mut models = 0;
    let mut perturbations = 0;
    for law in &laws {
        for &(rho, omega) in &settings {
            let model = MixtureModel::new(rho, omega, law.clone()).map_err(|e| e.to_string())?;
            let t = model.optimal_threshold_set().map_err(|e| e.to_string())?;
            let base = model.error_probability(&t).map_err(|e| e.to_string())?;
            check(
                (0.0..=omega.min(1.0 - omega)).contains(&base),
                format!("epsilon {base} out of range for {}", law.describe()),
            )?;
            for index in 0..t.boundaries().len() {
                for shift in [-1e-3, 1e-3] {
                    let Ok(moved) = t.perturbed(index, shift) else { continue };
                    let err = model.error_probability(&moved).map_err(|e| e.to_string())?;
                    check(
                        err >= base - 1e-12,
                        format!("{} rho={rho} omega={omega}: boundary {index} {shift:+} gives {err} < {base}", law.describe()),
                    )?;
                    perturbations += 1;
                }
            }
            models += 1;
        }
    }
    check(models >= 20, format!("only {models} models"))?;
    within_budget(start, Duration::from_secs(60))?;
    Ok(format!("{models} models, {perturbations} perturbations, {:.2?}", start.elapsed()))
}

fn read_data_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "manifest.txt")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let roots = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut sink = Vec::new();
    let mut sim_dirs = Vec::new();
    let mut spec_dirs = Vec::new();
    for root in &roots {
        let config = ExperimentConfig {
            n: 600,
            trials: 8,
            seed: Some(99),
            basis: BasisKind::Haar,
            distribution: DistributionChoice::Gaussian { mean: 0.0, variance: 1.0 },
            output: Some(root.path().to_path_buf()),
            ..ExperimentConfig::default()
        };
        sim_dirs.push(cli::simulate(&config, &mut sink, false).map_err(|e| e.to_string())?);
        let spectrum_config = ExperimentConfig { n: 500, rho: 0.2, omega: 0.5, ..config };
        spec_dirs.push(cli::spectrum(&spectrum_config, 101, &mut sink, false).map_err(|e| e.to_string())?);
    }
    let mut compared = 0;
    for dirs in [&sim_dirs, &spec_dirs] {
        let (a, b) = (read_data_files(&dirs[0]), read_data_files(&dirs[1]));
        check(!a.is_empty() && a == b, format!("outputs differ between {} and {}", dirs[0].display(), dirs[1].display()))?;
        compared += a.len();
    }
    Ok(format!("{compared} files byte-identical across two runs"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("figure 1 general-source curves", figure_one),
        ("corollary boundary mu*", corollary_boundary),
        ("thresholding distortion converges to epsilon", thresholding_convergence),
        ("one-sample discrete recovery", one_sample_recovery),
        ("free-probability identities", free_probability),
        ("lower bound <= upper bound", bound_ordering),
        ("Bayes region optimality", test_optimality),
        ("seeded outputs are byte-identical", determinism),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(detail) => {
                failures += 1;
                println!("FAIL {} {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failures} failed", criteria.len() - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
