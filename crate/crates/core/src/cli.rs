//! Command-line front end. `main` only parses arguments and maps errors to
//! exit codes; everything else lives here so it can be tested in-process.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::bounds::{
    corollary_holds, figure_curve, figure_grid, figure_table, general_source_rate, lower_bound_rate, upper_bound,
    BoundsConfig, Figure, FIGURE_OMEGA,
};
use crate::distribution::SparsityConfig;
use crate::error::{Error, Result};
use crate::freeprob::{empirical_projected_spectrum, ks_distance, projected_spectrum_limit, EmpiricalSpectrum};
use crate::hypothesis::MixtureModel;
use crate::io::{csv_bytes, json_bytes, output_root, DistributionChoice, ExperimentConfig, RunWriter};
use crate::math::theta;
use crate::simulation::{discrete_demo, discrete_demo_trial, run_experiment, BasisKind, ExperimentSpec};

pub const TRIALS_HEADER: [&str; 5] = ["trial", "seed", "distortion_count", "normalized_distortion", "exceeded"];
pub const EIGENVALUES_HEADER: [&str; 2] = ["index", "eigenvalue"];
pub const REFERENCE_CDF_HEADER: [&str; 3] = ["x", "empirical_cdf", "limit_cdf"];

#[derive(Debug, Parser)]
#[command(name = "sparsebound", version, about = "Sampling-rate-distortion bounds for sparse support recovery")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Flat key = value config file; flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// 64-bit seed, required by stochastic commands.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output root; runs go to <root>/<command>-<run id>.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub trials: Option<usize>,
    /// Print machine-readable JSON instead of text.
    #[arg(long, global = true)]
    pub json: bool,
}

#[derive(Debug, Args, Default)]
pub struct ModelArgs {
    #[arg(long)]
    pub omega: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    /// e.g. gaussian(0,1), family(0.8), discrete(-1:0.5,1:0.5), uniform(-1,1), laplace(0,1)
    #[arg(long = "dist", value_name = "LAW")]
    pub distribution: Option<DistributionChoice>,
    #[arg(long)]
    pub basis: Option<BasisKind>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Lower and upper bounds, θ and the general-source rates.
    Bounds(ModelArgs),
    /// Bayes error ε of the scalar test, with an optional Monte Carlo check.
    Epsilon {
        #[command(flatten)]
        model: ModelArgs,
        /// Monte Carlo draws for the cross-check (needs --seed).
        #[arg(long)]
        mc_draws: Option<usize>,
    },
    /// Thresholding-estimator trials.
    Simulate(ModelArgs),
    /// Eigenvalues of A B_S B_Sᵀ Aᵀ against their limit.
    Spectrum {
        #[command(flatten)]
        model: ModelArgs,
        /// Points in the reference CDF table.
        #[arg(long, default_value_t = 201)]
        points: usize,
    },
    /// Data table for one of the three rate-distortion figures.
    Figure {
        #[arg(long)]
        id: u32,
        /// Grid size (default 100 for figure 1, 101 otherwise).
        #[arg(long)]
        points: Option<usize>,
    },
    /// Exact recovery of a discrete-valued source from one sample.
    DiscreteDemo {
        #[arg(long, default_value_t = 12)]
        n: usize,
        #[arg(long, default_value_t = 4)]
        k: usize,
        /// Comma-separated nonzero alphabet.
        #[arg(long, default_value = "-1,1", allow_hyphen_values = true)]
        alphabet: String,
        #[arg(long, default_value = "haar")]
        basis: BasisKind,
    },
}

impl ModelArgs {
    fn apply(&self, config: &mut ExperimentConfig) {
        if let Some(v) = self.omega {
            config.omega = v;
        }
        if let Some(v) = self.alpha {
            config.alpha = v;
        }
        if let Some(v) = self.rho {
            config.rho = v;
        }
        if let Some(v) = self.n {
            config.n = v;
        }
        if let Some(v) = &self.distribution {
            config.distribution = v.clone();
        }
        if let Some(v) = self.basis {
            config.basis = v;
        }
    }
}

fn resolve(common: &CommonArgs, model: &ModelArgs) -> Result<ExperimentConfig> {
    let mut config = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    model.apply(&mut config);
    if let Some(seed) = common.seed {
        config.seed = Some(seed);
    }
    if let Some(trials) = common.trials {
        config.trials = trials;
    }
    if let Some(out) = &common.out {
        config.output = Some(out.clone());
    }
    config.validate()?;
    Ok(config)
}

fn require_seed(config: &ExperimentConfig, command: &str) -> Result<u64> {
    config
        .seed
        .ok_or_else(|| Error::Config(format!("{command} is stochastic: pass --seed N (or seed = N in the config)")))
}

/// Output root when the user asked for files explicitly (flag, config key or
/// environment); `None` for print-only commands otherwise.
fn explicit_root(config: &ExperimentConfig) -> Option<PathBuf> {
    config
        .output
        .clone()
        .or_else(|| std::env::var_os(crate::io::OUTPUT_ROOT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
}

fn emit<T: Serialize>(out: &mut dyn Write, json: bool, value: &T, text: &[(&str, String)]) -> Result<()> {
    if json {
        out.write_all(&json_bytes(value)?)?;
    } else {
        let width = text.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        for (k, v) in text {
            writeln!(out, "{k:width$}  {v}")?;
        }
    }
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct BoundsReport {
    pub omega: f64,
    pub alpha: f64,
    pub distribution: String,
    pub theta: f64,
    pub corollary_holds: bool,
    pub lower_bound_rate: f64,
    pub upper_bound_rate: f64,
    pub upper_bound_monotone: bool,
    pub universal_rate: f64,
    pub basis_specific_rate: f64,
}

pub fn bounds_report(config: &ExperimentConfig) -> Result<BoundsReport> {
    let f = config.distribution.to_spec()?;
    let cfg = BoundsConfig::default();
    let upper = upper_bound(config.alpha, config.omega, &f, &cfg)?;
    Ok(BoundsReport {
        omega: config.omega,
        alpha: config.alpha,
        distribution: config.distribution.to_string(),
        theta: theta(config.omega, &f)?,
        corollary_holds: corollary_holds(config.alpha, config.omega, &f)?,
        lower_bound_rate: lower_bound_rate(config.alpha, config.omega, &f, &cfg)?,
        upper_bound_rate: upper.rate,
        upper_bound_monotone: upper.monotone,
        universal_rate: general_source_rate(config.omega, config.alpha, true)?,
        basis_specific_rate: general_source_rate(config.omega, config.alpha, false)?,
    })
}

#[derive(Debug, Serialize)]
pub struct EpsilonReport {
    pub rho: f64,
    pub omega: f64,
    pub distribution: String,
    pub epsilon: f64,
    pub acceptance_region: Vec<(f64, f64)>,
    pub monte_carlo: Option<MonteCarloCheck>,
}

#[derive(Debug, Serialize)]
pub struct MonteCarloCheck {
    pub draws: usize,
    pub seed: u64,
    pub estimate: f64,
    pub standard_error: f64,
}

pub fn epsilon_report(config: &ExperimentConfig, mc_draws: Option<usize>) -> Result<EpsilonReport> {
    let model = MixtureModel::new(config.rho, config.omega, config.distribution.to_spec()?)?;
    let t_star = model.optimal_threshold_set()?;
    let epsilon = model.error_probability(&t_star)?;
    let monte_carlo = match mc_draws {
        Some(draws) => {
            let seed = require_seed(config, "the Monte Carlo check")?;
            let (estimate, standard_error) = model.monte_carlo_error(&t_star, draws, seed);
            Some(MonteCarloCheck { draws, seed, estimate, standard_error })
        }
        None => None,
    };
    Ok(EpsilonReport {
        rho: config.rho,
        omega: config.omega,
        distribution: config.distribution.to_string(),
        epsilon,
        acceptance_region: t_star.intervals().to_vec(),
        monte_carlo,
    })
}

fn format_region(region: &[(f64, f64)]) -> String {
    if region.is_empty() {
        return "empty".into();
    }
    region.iter().map(|(a, b)| format!("({a:.6}, {b:.6})")).collect::<Vec<_>>().join(" ∪ ")
}

/// Run `simulate` and return its run directory.
pub fn simulate(config: &ExperimentConfig, out: &mut dyn Write, json: bool) -> Result<PathBuf> {
    let seed = require_seed(config, "simulate")?;
    let spec = ExperimentSpec {
        config: SparsityConfig::new(config.omega, config.n)?,
        law: config.distribution.to_spec()?,
        rho: config.rho,
        alpha: config.alpha,
        basis: config.basis,
    };
    let summary = run_experiment(&spec, config.trials, seed)?;
    let mut params = config.pairs();
    params.retain(|(k, _)| *k != "output");
    let mut run = RunWriter::create(&output_root(config.output.as_deref()), "simulate", &params)?;
    run.write("config.txt", config_echo(config).as_bytes())?;
    run.write("trials.csv", &csv_bytes(&TRIALS_HEADER, &summary.results)?)?;
    run.write("summary.json", &json_bytes(&summary)?)?;
    let dir = run.finish()?;
    emit(
        out,
        json,
        &summary,
        &[
            ("n", summary.n.to_string()),
            ("m", summary.m.to_string()),
            ("k", summary.k.to_string()),
            ("trials", summary.trials.to_string()),
            ("epsilon", summary.epsilon.to_string()),
            ("mean_normalized_distortion", summary.mean_normalized_distortion.to_string()),
            ("sd_normalized_distortion", summary.sd_normalized_distortion.to_string()),
            ("error_rate", summary.error_rate.to_string()),
            ("run_dir", dir.display().to_string()),
        ],
    )?;
    Ok(dir)
}

fn config_echo(config: &ExperimentConfig) -> String {
    let mut echo = config.clone();
    echo.output = None;
    echo.to_text()
}

#[derive(Debug, Serialize)]
pub struct SpectrumSummary {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub rho: f64,
    pub omega: f64,
    pub seed: u64,
    pub rho_exceeds_omega: bool,
    pub ks_distance: f64,
}

/// KS distance between an empirical projected spectrum and its limit;
/// numerically zero eigenvalues are snapped to zero so the limit's atom
/// lines up.
pub fn spectrum_ks(spectrum: &EmpiricalSpectrum, rho: f64, omega: f64) -> Result<f64> {
    let limit = projected_spectrum_limit(rho, omega)?;
    let scale = spectrum.eigenvalues.last().copied().unwrap_or(1.0).abs().max(1.0);
    let snapped: Vec<f64> =
        spectrum.eigenvalues.iter().map(|&x| if x.abs() < 1e-9 * scale { 0.0 } else { x }).collect();
    ks_distance(&snapped, |x| limit.cdf(x))
}

pub fn spectrum(config: &ExperimentConfig, points: usize, out: &mut dyn Write, json: bool) -> Result<PathBuf> {
    let seed = require_seed(config, "spectrum")?;
    let spectrum = empirical_projected_spectrum(config.n, config.rho, config.omega, seed)?;
    let limit = projected_spectrum_limit(config.rho, config.omega)?;
    let ks = spectrum_ks(&spectrum, config.rho, config.omega)?;

    let eig_rows: Vec<(usize, f64)> = spectrum.eigenvalues.iter().copied().enumerate().collect();
    let (lo, hi) = limit.hull();
    let lo = lo.min(spectrum.eigenvalues[0]);
    let hi = hi.max(*spectrum.eigenvalues.last().expect("nonempty spectrum"));
    let m = spectrum.eigenvalues.len() as f64;
    let points = points.max(2);
    let mut cdf_rows = Vec::with_capacity(points);
    for i in 0..points {
        let x = lo + (hi - lo) * i as f64 / (points - 1) as f64;
        let empirical = spectrum.eigenvalues.partition_point(|&e| e <= x) as f64 / m;
        cdf_rows.push((x, empirical, limit.cdf(x)?));
    }
    let summary = SpectrumSummary {
        n: spectrum.n,
        m: spectrum.m,
        k: spectrum.k,
        rho: config.rho,
        omega: config.omega,
        seed,
        rho_exceeds_omega: spectrum.rho_exceeds_omega,
        ks_distance: ks,
    };
    let params = vec![
        ("n", config.n.to_string()),
        ("rho", config.rho.to_string()),
        ("omega", config.omega.to_string()),
        ("seed", seed.to_string()),
        ("points", points.to_string()),
    ];
    let mut run = RunWriter::create(&output_root(config.output.as_deref()), "spectrum", &params)?;
    run.write("eigenvalues.csv", &csv_bytes(&EIGENVALUES_HEADER, &eig_rows)?)?;
    run.write("reference_cdf.csv", &csv_bytes(&REFERENCE_CDF_HEADER, &cdf_rows)?)?;
    run.write("summary.json", &json_bytes(&summary)?)?;
    let dir = run.finish()?;
    emit(
        out,
        json,
        &summary,
        &[
            ("n", summary.n.to_string()),
            ("m", summary.m.to_string()),
            ("k", summary.k.to_string()),
            ("rho_exceeds_omega", summary.rho_exceeds_omega.to_string()),
            ("ks_distance", summary.ks_distance.to_string()),
            ("run_dir", dir.display().to_string()),
        ],
    )?;
    Ok(dir)
}

/// Write one figure table as CSV and return its path.
pub fn figure(id: u32, points: Option<usize>, root: &Path, out: &mut dyn Write) -> Result<PathBuf> {
    let figure = Figure::from_id(id)?;
    let points = points.unwrap_or(if figure == Figure::GeneralSource { 100 } else { 101 });
    if points < 2 {
        return Err(Error::Config("a figure needs at least 2 grid points".into()));
    }
    let grid = figure_grid(figure, points);
    let curve = figure_curve(figure, FIGURE_OMEGA, &grid, &BoundsConfig::default())?;
    let table = figure_table(figure, FIGURE_OMEGA, &curve);
    let name = format!("figure{id}.csv");
    let params = vec![("id", id.to_string()), ("points", points.to_string())];
    let mut run = RunWriter::create(root, "figure", &params)?;
    let path = run.write(&name, &csv_bytes(&figure.columns(), &table)?)?;
    run.finish()?;
    writeln!(out, "{}", path.display())?;
    Ok(path)
}

fn parse_alphabet(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| Error::Config(format!("alphabet entry '{}' is not a number", v.trim()))))
        .collect()
}

#[derive(Debug, Serialize)]
struct DemoReport {
    n: usize,
    k: usize,
    alphabet: Vec<f64>,
    seed: u64,
    truth: Vec<f64>,
    recovered: Option<Vec<f64>>,
    success: bool,
    error: Option<String>,
}

pub fn discrete_demo_cmd(
    config: &ExperimentConfig,
    n: usize,
    k: usize,
    alphabet: &str,
    basis: BasisKind,
    trials: Option<usize>,
    out: &mut dyn Write,
    json: bool,
) -> Result<()> {
    let seed = require_seed(config, "discrete-demo")?;
    let alphabet = parse_alphabet(alphabet)?;
    if k == 0 || k > n {
        return Err(Error::Config(format!("k must lie in 1..={n}, got {k}")));
    }
    let sparsity = SparsityConfig::new(k as f64 / n as f64, n)?;
    if sparsity.k() != k {
        return Err(Error::Config(format!("cannot represent k={k} at n={n}")));
    }
    let root = explicit_root(config);
    let params = vec![
        ("n", n.to_string()),
        ("k", k.to_string()),
        ("alphabet", format!("{alphabet:?}")),
        ("basis", basis.to_string()),
        ("seed", seed.to_string()),
        ("trials", trials.unwrap_or(1).to_string()),
    ];
    match trials {
        Some(t) if t > 1 => {
            let summary = discrete_demo(&sparsity, &alphabet, basis, t, seed)?;
            emit(
                out,
                json,
                &summary,
                &[
                    ("trials", summary.trials.to_string()),
                    ("exact", summary.exact.to_string()),
                    ("wrong", summary.wrong.to_string()),
                    ("no_match", summary.no_match.to_string()),
                    ("multiple_matches", summary.multiple_matches.to_string()),
                ],
            )?;
            if let Some(root) = root {
                let mut run = RunWriter::create(&root, "discrete-demo", &params)?;
                run.write("summary.json", &json_bytes(&summary)?)?;
                run.finish()?;
            }
        }
        _ => {
            let trial = discrete_demo_trial(&sparsity, &alphabet, basis, seed)?;
            let truth: Vec<f64> = trial.truth.iter().copied().collect();
            let (recovered, error) = match trial.recovered {
                Ok(u) => (Some(u.iter().copied().collect::<Vec<f64>>()), None),
                Err(e @ (Error::NoMatch { .. } | Error::MultipleMatches { .. })) => (None, Some(e.to_string())),
                Err(e) => return Err(e),
            };
            let success = recovered.as_ref() == Some(&truth);
            let report = DemoReport { n, k, alphabet, seed, truth, recovered, success, error };
            emit(
                out,
                json,
                &report,
                &[
                    ("truth", format!("{:?}", report.truth)),
                    (
                        "recovered",
                        report.recovered.as_ref().map_or_else(|| "none".into(), |u| format!("{u:?}")),
                    ),
                    ("success", report.success.to_string()),
                    ("error", report.error.clone().unwrap_or_else(|| "none".into())),
                ],
            )?;
            if let Some(root) = root {
                let mut run = RunWriter::create(&root, "discrete-demo", &params)?;
                run.write("report.json", &json_bytes(&report)?)?;
                run.finish()?;
            }
        }
    }
    Ok(())
}

/// Execute a parsed command line, writing human output to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let common = &cli.common;
    match &cli.command {
        Command::Bounds(model) => {
            let config = resolve(common, model)?;
            let report = bounds_report(&config)?;
            emit(
                out,
                common.json,
                &report,
                &[
                    ("omega", report.omega.to_string()),
                    ("alpha", report.alpha.to_string()),
                    ("distribution", report.distribution.clone()),
                    ("theta", report.theta.to_string()),
                    ("corollary_holds", report.corollary_holds.to_string()),
                    ("lower_bound_rate", report.lower_bound_rate.to_string()),
                    ("upper_bound_rate", report.upper_bound_rate.to_string()),
                    ("universal_rate", report.universal_rate.to_string()),
                    ("basis_specific_rate", report.basis_specific_rate.to_string()),
                ],
            )?;
            if let Some(root) = explicit_root(&config) {
                let params = vec![
                    ("omega", config.omega.to_string()),
                    ("alpha", config.alpha.to_string()),
                    ("distribution", config.distribution.to_string()),
                ];
                let mut run = RunWriter::create(&root, "bounds", &params)?;
                run.write("report.json", &json_bytes(&report)?)?;
                run.finish()?;
            }
        }
        Command::Epsilon { model, mc_draws } => {
            let config = resolve(common, model)?;
            let report = epsilon_report(&config, *mc_draws)?;
            let mut text = vec![
                ("rho", report.rho.to_string()),
                ("omega", report.omega.to_string()),
                ("distribution", report.distribution.clone()),
                ("epsilon", report.epsilon.to_string()),
                ("acceptance_region", format_region(&report.acceptance_region)),
            ];
            if let Some(mc) = &report.monte_carlo {
                text.push(("monte_carlo", format!("{} ± {} ({} draws)", mc.estimate, mc.standard_error, mc.draws)));
            }
            emit(out, common.json, &report, &text)?;
            if let Some(root) = explicit_root(&config) {
                let params = vec![
                    ("rho", config.rho.to_string()),
                    ("omega", config.omega.to_string()),
                    ("distribution", config.distribution.to_string()),
                    ("mc_draws", format!("{mc_draws:?}")),
                    ("seed", format!("{:?}", config.seed)),
                ];
                let mut run = RunWriter::create(&root, "epsilon", &params)?;
                run.write("report.json", &json_bytes(&report)?)?;
                run.finish()?;
            }
        }
        Command::Simulate(model) => {
            let config = resolve(common, model)?;
            simulate(&config, out, common.json)?;
        }
        Command::Spectrum { model, points } => {
            let config = resolve(common, model)?;
            spectrum(&config, *points, out, common.json)?;
        }
        Command::Figure { id, points } => {
            let config = resolve(common, &ModelArgs::default())?;
            figure(*id, *points, &output_root(config.output.as_deref()), out)?;
        }
        Command::DiscreteDemo { n, k, alphabet, basis } => {
            let config = resolve(common, &ModelArgs::default())?;
            discrete_demo_cmd(&config, *n, *k, alphabet, *basis, common.trials, out, common.json)?;
        }
    }
    Ok(())
}

/// Process exit code for an error: 2 for numerical failures, 1 otherwise.
pub fn exit_code(err: &Error) -> u8 {
    if err.is_numeric() {
        2
    } else {
        1
    }
}
