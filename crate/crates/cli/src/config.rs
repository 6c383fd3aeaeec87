//! Flat `key = value` run configuration.
//!
//! Grid axes (`T`, `jmax`, `theta`, `sigma_u2`, `sigma_v2`) accept
//! comma-separated lists and expand as a Cartesian product.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use midas_me::estimator::SearchConfig;
use midas_me::montecarlo::Scenario;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("invalid `{field}`: {message}")]
    Invalid { field: &'static str, message: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Simulate,
    Diagnose,
    Fit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub t: Vec<usize>,
    pub jmax: Vec<usize>,
    pub theta: Vec<f64>,
    pub sigma_u2: Vec<f64>,
    pub sigma_v2: Vec<f64>,
    pub sigma_eps2: f64,
    pub p: usize,
    pub m: usize,
    pub reps: usize,
    pub seed: Option<u64>,
    pub search: SearchConfig,
    pub out_dir: PathBuf,
    /// `None` uses every available core.
    pub threads: Option<usize>,
    pub low_csv: Option<PathBuf>,
    pub high_csv: Option<PathBuf>,
    /// Sample size of the coverage experiment in diagnose mode.
    pub coverage_t: usize,
}

const KEYS: &[&str] = &[
    "mode", "T", "jmax", "theta", "sigma_u2", "sigma_v2", "sigma_eps2", "p", "m", "reps", "seed", "theta_lo", "theta_hi",
    "gss_iters", "out_dir", "threads", "low_csv", "high_csv", "coverage_T",
];

struct Entry {
    line: usize,
    value: String,
}

struct Raw {
    path: String,
    entries: BTreeMap<&'static str, Entry>,
}

impl Raw {
    fn parse_error(&self, line: usize, message: String) -> ConfigError {
        ConfigError::Parse {
            path: self.path.clone(),
            line,
            message,
        }
    }

    fn scalar<T: std::str::FromStr>(&self, key: &'static str) -> Result<Option<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse()
                .map(Some)
                .map_err(|err| self.parse_error(e.line, format!("`{key}`: cannot parse `{}`: {err}", e.value))),
        }
    }

    fn list<T: std::str::FromStr>(&self, key: &'static str) -> Result<Option<Vec<T>>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        let Some(e) = self.entries.get(key) else {
            return Ok(None);
        };
        e.value
            .split(',')
            .map(str::trim)
            .map(|item| {
                if item.is_empty() {
                    return Err(self.parse_error(e.line, format!("`{key}`: empty list item")));
                }
                item.parse()
                    .map_err(|err| self.parse_error(e.line, format!("`{key}`: cannot parse `{item}`: {err}")))
            })
            .collect::<Result<Vec<T>, _>>()
            .map(Some)
    }

    fn string(&self, key: &'static str) -> Option<String> {
        self.entries.get(key).map(|e| e.value.clone())
    }
}

fn tokenize(text: &str, path: &str) -> Result<Raw, ConfigError> {
    let mut raw = Raw {
        path: path.to_string(),
        entries: BTreeMap::new(),
    };
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(raw.parse_error(lineno, format!("expected `key = value`, found `{content}`")));
        };
        let key = key.trim();
        let value = value.trim();
        let Some(&known) = KEYS.iter().find(|k| **k == key) else {
            return Err(raw.parse_error(lineno, format!("unknown key `{key}`")));
        };
        if value.is_empty() {
            return Err(raw.parse_error(lineno, format!("`{key}` has no value")));
        }
        if let Some(prev) = raw.entries.get(known) {
            return Err(raw.parse_error(lineno, format!("`{key}` already set on line {}", prev.line)));
        }
        raw.entries.insert(
            known,
            Entry {
                line: lineno,
                value: value.to_string(),
            },
        );
    }
    Ok(raw)
}

fn invalid(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        message: message.into(),
    }
}

fn required<T>(v: Option<T>, field: &'static str) -> Result<T, ConfigError> {
    v.ok_or_else(|| invalid(field, "required but missing"))
}

/// Parse and validate a configuration; `path` only labels error messages.
pub fn parse_config(text: &str, path: &str) -> Result<RunConfig, ConfigError> {
    let raw = tokenize(text, path)?;
    let mode = match raw.string("mode").as_deref() {
        None | Some("simulate") => Mode::Simulate,
        Some("diagnose") => Mode::Diagnose,
        Some("fit") => Mode::Fit,
        Some(other) => return Err(invalid("mode", format!("expected simulate, diagnose or fit, got `{other}`"))),
    };
    let defaults = SearchConfig::default();
    let search = SearchConfig {
        theta_lo: raw.scalar("theta_lo")?.unwrap_or(defaults.theta_lo),
        theta_hi: raw.scalar("theta_hi")?.unwrap_or(defaults.theta_hi),
        iterations: raw.scalar("gss_iters")?.unwrap_or(defaults.iterations),
    };
    let cfg = RunConfig {
        mode,
        t: raw.list("T")?.unwrap_or_default(),
        jmax: raw.list("jmax")?.unwrap_or_default(),
        theta: raw.list("theta")?.unwrap_or_default(),
        sigma_u2: raw.list("sigma_u2")?.unwrap_or_else(|| vec![0.0]),
        sigma_v2: raw.list("sigma_v2")?.unwrap_or_else(|| vec![0.0]),
        sigma_eps2: raw.scalar("sigma_eps2")?.unwrap_or(1.0),
        p: raw.scalar("p")?.unwrap_or(2),
        m: raw.scalar("m")?.unwrap_or(3),
        reps: raw.scalar("reps")?.unwrap_or(1000),
        seed: raw.scalar("seed")?,
        search,
        out_dir: raw.string("out_dir").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("out")),
        threads: raw.scalar("threads")?,
        low_csv: raw.string("low_csv").map(PathBuf::from),
        high_csv: raw.string("high_csv").map(PathBuf::from),
        coverage_t: raw.scalar("coverage_T")?.unwrap_or(2000),
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Read and parse a configuration file.
pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text, &path.display().to_string())
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.reps == 0 {
            return Err(invalid("reps", "must be at least 1"));
        }
        if self.m == 0 {
            return Err(invalid("m", "must be at least 1"));
        }
        if self.threads == Some(0) {
            return Err(invalid("threads", "must be at least 1"));
        }
        self.search
            .validate()
            .map_err(|e| invalid("theta_lo", e.to_string()))?;
        if !(self.sigma_eps2 >= 0.0 && self.sigma_eps2.is_finite()) {
            return Err(invalid("sigma_eps2", "must be a finite non-negative number"));
        }
        for (field, values) in [("sigma_u2", &self.sigma_u2), ("sigma_v2", &self.sigma_v2)] {
            if values.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                return Err(invalid(field, "variances must be finite and non-negative"));
            }
        }
        if self.jmax.iter().any(|&j| j == 0) {
            return Err(invalid("jmax", "must be at least 1"));
        }
        match self.mode {
            Mode::Simulate | Mode::Diagnose => {
                required(self.seed, "seed")?;
                for (field, empty) in [
                    ("T", self.t.is_empty()),
                    ("jmax", self.jmax.is_empty()),
                    ("theta", self.theta.is_empty()),
                ] {
                    if empty {
                        return Err(invalid(field, "required in simulate and diagnose modes"));
                    }
                }
                if self.theta.iter().any(|t| !(*t > 0.0)) {
                    return Err(invalid("theta", "must be positive"));
                }
                if self.t.iter().any(|&t| t == 0) {
                    return Err(invalid("T", "must be at least 1"));
                }
            }
            Mode::Fit => {
                required(self.low_csv.as_ref(), "low_csv")?;
                required(self.high_csv.as_ref(), "high_csv")?;
                if self.jmax.len() != 1 {
                    return Err(invalid("jmax", "fit mode takes exactly one value"));
                }
                if self.sigma_u2.len() != 1 || self.sigma_v2.len() != 1 {
                    return Err(invalid("sigma_u2", "fit mode takes one value for each variance"));
                }
            }
        }
        Ok(())
    }

    /// Grid scenarios ordered by `sigma_u2`, `sigma_v2`, `jmax`, `theta`, then `T`.
    pub fn scenarios(&self) -> Vec<Scenario> {
        let seed = self.seed.unwrap_or(0);
        let mut out = Vec::new();
        for &su in &self.sigma_u2 {
            for &sv in &self.sigma_v2 {
                for &jmax in &self.jmax {
                    for &theta in &self.theta {
                        for &t in &self.t {
                            let mut sc = Scenario::new(t, jmax, theta, su, sv).with_reps(self.reps).with_seed(seed);
                            sc.p = self.p;
                            sc.m = self.m;
                            sc.sigma_eps2 = self.sigma_eps2;
                            sc.search = self.search;
                            out.push(sc);
                        }
                    }
                }
            }
        }
        out
    }
}
