//! Experiment configuration, result files and run manifests.
//!
//! Configs are flat `key = value` text, one pair per line, `#` starting a
//! comment line. Results are CSV tables and JSON summaries written
//! atomically (temp file, then rename) into one directory per run, together
//! with a plain-text manifest listing the SHA-256 of every file.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::bounds::gaussian_family;
use crate::distribution::DistributionSpec;
use crate::error::{Error, Result};
use crate::simulation::BasisKind;

/// Environment variable overriding the default output root.
pub const OUTPUT_ROOT_ENV: &str = "SPARSEBOUND_OUTPUT_ROOT";
/// Output root used when nothing else is given.
pub const DEFAULT_OUTPUT_ROOT: &str = "runs";
pub const MANIFEST_FILE: &str = "manifest.txt";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Law of the nonzero coefficients as written in configs and on the command
/// line, e.g. `gaussian(0, 1)` or `discrete(-1:0.5, 1:0.5)`.
#[derive(Debug, Clone, PartialEq)]
pub enum DistributionChoice {
    Gaussian { mean: f64, variance: f64 },
    /// `N(μ, 1 - μ²)`.
    Family { mu: f64 },
    Discrete { support: Vec<f64>, weights: Vec<f64> },
    Uniform { lo: f64, hi: f64 },
    Laplace { location: f64, scale: f64 },
}

impl DistributionChoice {
    pub fn to_spec(&self) -> Result<DistributionSpec> {
        match self {
            DistributionChoice::Gaussian { mean, variance } => DistributionSpec::gaussian(*mean, *variance),
            DistributionChoice::Family { mu } => gaussian_family(*mu),
            DistributionChoice::Discrete { support, weights } => {
                DistributionSpec::discrete(support.clone(), weights.clone())
            }
            DistributionChoice::Uniform { lo, hi } => DistributionSpec::uniform(*lo, *hi),
            DistributionChoice::Laplace { location, scale } => DistributionSpec::laplace(*location, *scale),
        }
    }
}

impl fmt::Display for DistributionChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DistributionChoice::Gaussian { mean, variance } => write!(f, "gaussian({mean}, {variance})"),
            DistributionChoice::Family { mu } => write!(f, "family({mu})"),
            DistributionChoice::Discrete { support, weights } => {
                let atoms: Vec<String> = support.iter().zip(weights).map(|(s, w)| format!("{s}:{w}")).collect();
                write!(f, "discrete({})", atoms.join(", "))
            }
            DistributionChoice::Uniform { lo, hi } => write!(f, "uniform({lo}, {hi})"),
            DistributionChoice::Laplace { location, scale } => write!(f, "laplace({location}, {scale})"),
        }
    }
}

fn parse_number(s: &str, what: &str) -> Result<f64> {
    let v: f64 = s.trim().parse().map_err(|_| Error::Config(format!("{what}: '{}' is not a number", s.trim())))?;
    if !v.is_finite() {
        return Err(Error::Config(format!("{what}: value must be finite")));
    }
    Ok(v)
}

impl FromStr for DistributionChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, rest) = s
            .split_once('(')
            .ok_or_else(|| Error::Config(format!("distribution '{s}' must look like name(arguments)")))?;
        let args = rest
            .strip_suffix(')')
            .ok_or_else(|| Error::Config(format!("distribution '{s}' is missing a closing parenthesis")))?;
        let name = name.trim();
        let args: Vec<&str> = args.split(',').map(str::trim).filter(|a| !a.is_empty()).collect();
        let numbers = |expected: usize| -> Result<Vec<f64>> {
            if args.len() != expected {
                return Err(Error::Config(format!("{name} takes {expected} argument(s), got {}", args.len())));
            }
            args.iter().map(|a| parse_number(a, name)).collect()
        };
        let choice = match name {
            "gaussian" => {
                let v = numbers(2)?;
                DistributionChoice::Gaussian { mean: v[0], variance: v[1] }
            }
            "family" => DistributionChoice::Family { mu: numbers(1)?[0] },
            "uniform" => {
                let v = numbers(2)?;
                DistributionChoice::Uniform { lo: v[0], hi: v[1] }
            }
            "laplace" => {
                let v = numbers(2)?;
                DistributionChoice::Laplace { location: v[0], scale: v[1] }
            }
            "discrete" => {
                let mut support = Vec::new();
                let mut weights = Vec::new();
                for atom in &args {
                    let (value, weight) = atom
                        .split_once(':')
                        .ok_or_else(|| Error::Config(format!("discrete atom '{atom}' must be value:weight")))?;
                    support.push(parse_number(value, "discrete value")?);
                    weights.push(parse_number(weight, "discrete weight")?);
                }
                DistributionChoice::Discrete { support, weights }
            }
            other => {
                return Err(Error::Config(format!(
                    "unknown distribution '{other}'; expected gaussian, family, discrete, uniform or laplace"
                )))
            }
        };
        choice.to_spec().map_err(|e| Error::Config(format!("distribution '{s}': {e}")))?;
        Ok(choice)
    }
}

/// Everything a run needs, readable from and writable to flat text.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub omega: f64,
    pub alpha: f64,
    pub rho: f64,
    pub n: usize,
    pub trials: usize,
    pub seed: Option<u64>,
    pub distribution: DistributionChoice,
    pub basis: BasisKind,
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            omega: 0.35,
            alpha: 0.3,
            rho: 0.3,
            n: 1000,
            trials: 20,
            seed: None,
            distribution: DistributionChoice::Gaussian { mean: 0.0, variance: 1.0 },
            basis: BasisKind::Identity,
            output: None,
        }
    }
}

const CONFIG_KEYS: [&str; 9] = ["omega", "alpha", "rho", "n", "trials", "seed", "distribution", "basis", "output"];

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0 && self.omega < 1.0) {
            return Err(Error::Config(format!("omega must lie in (0,1), got {}", self.omega)));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha must lie in [0,1], got {}", self.alpha)));
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(Error::Config(format!("rho must lie in (0,1], got {}", self.rho)));
        }
        if self.n == 0 {
            return Err(Error::Config("n must be positive".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be positive".into()));
        }
        Ok(())
    }

    /// Parse flat text; keys not listed are taken from the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = Self::default();
        let mut seen: Vec<String> = Vec::new();
        for (number, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", number + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if !CONFIG_KEYS.contains(&key) {
                return Err(Error::Config(format!("line {}: unknown key '{key}'", number + 1)));
            }
            if seen.iter().any(|k| k == key) {
                return Err(Error::Config(format!("line {}: duplicate key '{key}'", number + 1)));
            }
            seen.push(key.to_string());
            let int = |v: &str| -> Result<u64> {
                v.parse().map_err(|_| Error::Config(format!("line {}: {key} must be a nonnegative integer", number + 1)))
            };
            match key {
                "omega" => config.omega = parse_number(value, key)?,
                "alpha" => config.alpha = parse_number(value, key)?,
                "rho" => config.rho = parse_number(value, key)?,
                "n" => config.n = int(value)? as usize,
                "trials" => config.trials = int(value)? as usize,
                "seed" => config.seed = Some(int(value)?),
                "distribution" => config.distribution = value.parse()?,
                "basis" => config.basis = value.parse()?,
                "output" => config.output = Some(PathBuf::from(value)),
                _ => unreachable!("key checked above"),
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Flat text with every set key, in a fixed order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (key, value) in self.pairs() {
            out.push_str(&format!("{key} = {value}\n"));
        }
        out
    }

    pub fn pairs(&self) -> Vec<(&'static str, String)> {
        let mut pairs = vec![
            ("omega", self.omega.to_string()),
            ("alpha", self.alpha.to_string()),
            ("rho", self.rho.to_string()),
            ("n", self.n.to_string()),
            ("trials", self.trials.to_string()),
        ];
        if let Some(seed) = self.seed {
            pairs.push(("seed", seed.to_string()));
        }
        pairs.push(("distribution", self.distribution.to_string()));
        pairs.push(("basis", self.basis.to_string()));
        if let Some(out) = &self.output {
            pairs.push(("output", out.display().to_string()));
        }
        pairs
    }
}

/// Root directory for run outputs: the explicit choice, else the
/// environment override, else `runs`.
pub fn output_root(explicit: Option<&Path>) -> PathBuf {
    if let Some(path) = explicit {
        return path.to_path_buf();
    }
    match std::env::var_os(OUTPUT_ROOT_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => PathBuf::from(DEFAULT_OUTPUT_ROOT),
    }
}

/// Stable identifier derived from the command and its parameters.
pub fn run_id(command: &str, params: &[(&str, String)]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(command.as_bytes());
    for (k, v) in params {
        hasher.update(format!("\n{k}={v}").as_bytes());
    }
    hex::encode(hasher.finalize())[..16].to_string()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Write `bytes` to a sibling temp file, then rename it over `path`.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::invalid(format!("{} has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

/// CSV bytes with a fixed header row.
pub fn csv_bytes<R: Serialize>(header: &[&str], rows: &[R]) -> Result<Vec<u8>> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    writer.write_record(header)?;
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    writer.into_inner().map_err(|e| Error::Io(e.into_error()))
}

pub fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResultManifest {
    pub run_id: String,
    pub command: String,
    pub timestamp: String,
    pub version: String,
    pub config: Vec<(String, String)>,
    pub files: Vec<ManifestEntry>,
}

/// UTC timestamp, taken from `SOURCE_DATE_EPOCH` when set.
pub fn timestamp() -> String {
    let fixed = std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|s| s.trim().parse::<i64>().ok());
    let time = fixed
        .and_then(|secs| chrono::DateTime::from_timestamp(secs, 0))
        .unwrap_or_else(chrono::Utc::now);
    time.to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

impl ResultManifest {
    pub fn to_text(&self) -> String {
        let mut out = String::from("# sparsebound run manifest\n");
        out.push_str(&format!("run_id = {}\n", self.run_id));
        out.push_str(&format!("command = {}\n", self.command));
        out.push_str(&format!("timestamp = {}\n", self.timestamp));
        out.push_str(&format!("version = {}\n", self.version));
        for (k, v) in &self.config {
            out.push_str(&format!("config.{k} = {v}\n"));
        }
        for f in &self.files {
            out.push_str(&format!("file = {} {} {}\n", f.sha256, f.bytes, f.name));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut manifest = ResultManifest {
            run_id: String::new(),
            command: String::new(),
            timestamp: String::new(),
            version: String::new(),
            config: Vec::new(),
            files: Vec::new(),
        };
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (key, value) =
                line.split_once(" = ").ok_or_else(|| Error::Config(format!("bad manifest line '{line}'")))?;
            match key {
                "run_id" => manifest.run_id = value.to_string(),
                "command" => manifest.command = value.to_string(),
                "timestamp" => manifest.timestamp = value.to_string(),
                "version" => manifest.version = value.to_string(),
                "file" => {
                    let mut parts = value.splitn(3, ' ');
                    let (Some(sha), Some(bytes), Some(name)) = (parts.next(), parts.next(), parts.next()) else {
                        return Err(Error::Config(format!("bad manifest file line '{line}'")));
                    };
                    let bytes = bytes.parse().map_err(|_| Error::Config(format!("bad byte count in '{line}'")))?;
                    manifest.files.push(ManifestEntry { name: name.to_string(), sha256: sha.to_string(), bytes });
                }
                other => match other.strip_prefix("config.") {
                    Some(k) => manifest.config.push((k.to_string(), value.to_string())),
                    None => return Err(Error::Config(format!("unknown manifest key '{other}'"))),
                },
            }
        }
        Ok(manifest)
    }
}

/// A run directory being filled: files are written atomically and recorded
/// for the manifest.
#[derive(Debug)]
pub struct RunWriter {
    dir: PathBuf,
    command: String,
    run_id: String,
    config: Vec<(String, String)>,
    files: Vec<ManifestEntry>,
}

impl RunWriter {
    /// Directory `<root>/<command>-<run id>`.
    pub fn create(root: &Path, command: &str, params: &[(&str, String)]) -> Result<Self> {
        let id = run_id(command, params);
        let dir = root.join(format!("{command}-{id}"));
        fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            command: command.to_string(),
            run_id: id,
            config: params.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
            files: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        atomic_write(&path, bytes)?;
        self.files.retain(|f| f.name != name);
        self.files.push(ManifestEntry { name: name.to_string(), sha256: sha256_hex(bytes), bytes: bytes.len() as u64 });
        Ok(path)
    }

    /// Write the manifest and return the run directory.
    pub fn finish(self) -> Result<PathBuf> {
        let manifest = ResultManifest {
            run_id: self.run_id,
            command: self.command,
            timestamp: timestamp(),
            version: VERSION.to_string(),
            config: self.config,
            files: self.files,
        };
        atomic_write(&self.dir.join(MANIFEST_FILE), manifest.to_text().as_bytes())?;
        Ok(self.dir)
    }
}

/// Check that every file listed in a run directory's manifest exists with
/// the recorded size and checksum.
pub fn verify_manifest(dir: &Path) -> Result<ResultManifest> {
    let text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
    let manifest = ResultManifest::parse(&text)?;
    for entry in &manifest.files {
        let bytes = fs::read(dir.join(&entry.name))?;
        if bytes.len() as u64 != entry.bytes || sha256_hex(&bytes) != entry.sha256 {
            return Err(Error::Config(format!("checksum mismatch for {}", entry.name)));
        }
    }
    Ok(manifest)
}
