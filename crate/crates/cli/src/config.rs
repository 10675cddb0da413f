//! Run configuration: market-calibration defaults, a `key = value` config
//! file layer and command-line overrides, in that precedence order.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use reinopt::simulate::{Measure, SimConfig};
use reinopt::{BenchmarkSpec, MarketParams, ProductSpec};

/// Configuration errors surfaced with the offending key.
#[derive(Debug)]
pub enum ConfigError {
    UnknownKey(String),
    Parse { key: String, value: String },
    Invariant(String),
    Io(String),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::UnknownKey(k) => write!(f, "unknown configuration key `{k}`"),
            ConfigError::Parse { key, value } => {
                write!(f, "cannot parse value `{value}` for key `{key}`")
            }
            ConfigError::Invariant(msg) => write!(f, "{msg}"),
            ConfigError::Io(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Optional overrides collected from the command line.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub rate: Option<f64>,
    pub mu1: Option<f64>,
    pub mu2: Option<f64>,
    pub sigma1: Option<f64>,
    pub sigma2: Option<f64>,
    pub rho: Option<f64>,
    pub v0: Option<f64>,
    pub horizon: Option<f64>,
    pub guarantee: Option<f64>,
    pub epsilon: Option<f64>,
    pub crra: Option<f64>,
    pub pi_b: Option<f64>,
    pub paths: Option<usize>,
    pub steps: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

/// Fully resolved run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub market: MarketParams,
    pub product: ProductSpec,
    pub benchmark: BenchmarkSpec,
    pub sim: SimConfig,
    pub out: Option<PathBuf>,
}

/// Market-calibration defaults (rates and vols per year, currency units of
/// the client endowment).
#[derive(Debug, Clone)]
struct Raw {
    rate: f64,
    mu1: f64,
    mu2: f64,
    sigma1: f64,
    sigma2: f64,
    rho: f64,
    v0: f64,
    horizon: f64,
    guarantee: f64,
    epsilon: f64,
    crra: f64,
    pi_b: f64,
    paths: usize,
    steps: usize,
    seed: u64,
    out: Option<PathBuf>,
}

impl Default for Raw {
    fn default() -> Self {
        Raw {
            rate: 0.0102,
            mu1: 0.1752,
            mu2: 0.1237,
            sigma1: 0.2366,
            sigma2: 0.2198,
            rho: 0.8012,
            v0: 100.0,
            horizon: 10.0,
            guarantee: 100.0,
            epsilon: 0.005,
            crra: -9.0,
            pi_b: 0.2947,
            paths: 1_000_000,
            steps: 100,
            seed: 42,
            out: None,
        }
    }
}

fn parse_number<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.trim().parse().map_err(|_| ConfigError::Parse {
        key: key.to_string(),
        value: value.to_string(),
    })
}

impl Raw {
    fn apply(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "r" => self.rate = parse_number(key, value)?,
            "mu1" => self.mu1 = parse_number(key, value)?,
            "mu2" => self.mu2 = parse_number(key, value)?,
            "sigma1" => self.sigma1 = parse_number(key, value)?,
            "sigma2" => self.sigma2 = parse_number(key, value)?,
            "rho" => self.rho = parse_number(key, value)?,
            "v0" => self.v0 = parse_number(key, value)?,
            "T" => self.horizon = parse_number(key, value)?,
            "G" => self.guarantee = parse_number(key, value)?,
            "epsilon" => self.epsilon = parse_number(key, value)?,
            "b" => self.crra = parse_number(key, value)?,
            "pi-b" | "pi_b" => self.pi_b = parse_number(key, value)?,
            "paths" => self.paths = parse_number(key, value)?,
            "steps" => self.steps = parse_number(key, value)?,
            "seed" => self.seed = parse_number(key, value)?,
            "out" => self.out = Some(PathBuf::from(value.trim())),
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }
}

/// Parses a `key = value` config file; `#` starts a comment, blank lines are
/// ignored.
fn parse_file(path: &Path) -> Result<BTreeMap<String, String>, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Io(format!("cannot read {}: {e}", path.display())))?;
    let mut map = BTreeMap::new();
    for (lineno, raw_line) in text.lines().enumerate() {
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            ConfigError::Io(format!(
                "{}:{}: expected `key = value`, got `{line}`",
                path.display(),
                lineno + 1
            ))
        })?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

/// Resolves the configuration: defaults, then the optional file, then the
/// explicit command-line overrides.
pub fn resolve(file: Option<&Path>, over: &Overrides) -> Result<RunConfig, ConfigError> {
    let mut raw = Raw::default();
    if let Some(path) = file {
        for (key, value) in parse_file(path)? {
            raw.apply(&key, &value)?;
        }
    }
    macro_rules! set {
        ($field:ident) => {
            if let Some(v) = over.$field {
                raw.$field = v;
            }
        };
    }
    set!(mu1);
    set!(mu2);
    set!(sigma1);
    set!(sigma2);
    set!(rho);
    set!(v0);
    set!(epsilon);
    set!(pi_b);
    set!(paths);
    set!(steps);
    set!(seed);
    if let Some(v) = over.rate {
        raw.rate = v;
    }
    if let Some(v) = over.horizon {
        raw.horizon = v;
    }
    if let Some(v) = over.guarantee {
        raw.guarantee = v;
    }
    if let Some(v) = over.crra {
        raw.crra = v;
    }
    if let Some(p) = &over.out {
        raw.out = Some(p.clone());
    }

    let market = MarketParams::new(raw.rate, raw.mu1, raw.mu2, raw.sigma1, raw.sigma2, raw.rho)
        .map_err(|e| ConfigError::Invariant(e.to_string()))?;
    let product = ProductSpec::new(raw.v0, raw.horizon, raw.guarantee, raw.epsilon, raw.crra)
        .map_err(|e| ConfigError::Invariant(e.to_string()))?;
    let benchmark =
        BenchmarkSpec::new(raw.pi_b).map_err(|e| ConfigError::Invariant(e.to_string()))?;
    let sim = SimConfig::new(raw.paths, raw.steps, raw.seed, Measure::RealWorld)
        .map_err(|e| ConfigError::Invariant(e.to_string()))?;
    Ok(RunConfig {
        market,
        product,
        benchmark,
        sim,
        out: raw.out,
    })
}
