//! Flat key-value experiment configuration.
//!
//! Config files are plain text, one `key = value` per line, `#` comments.
//! Every run resolves its defaults into a complete map and writes it back
//! out as the manifest, so a manifest re-run sees exactly the same
//! configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

/// Experiment families the harness knows how to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    PoissonCase1,
    PoissonCase2,
    PoissonInverse1d,
    PoissonInverse2d,
    BurgersSweep,
    RbfRecover,
    RbfInverse,
}

impl Kind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Kind::PoissonCase1 => "poisson_case1",
            Kind::PoissonCase2 => "poisson_case2",
            Kind::PoissonInverse1d => "poisson_inverse_1d",
            Kind::PoissonInverse2d => "poisson_inverse_2d",
            Kind::BurgersSweep => "burgers_sweep",
            Kind::RbfRecover => "rbf_recover",
            Kind::RbfInverse => "rbf_inverse",
        }
    }

    pub const ALL: [Kind; 7] = [
        Kind::PoissonCase1,
        Kind::PoissonCase2,
        Kind::PoissonInverse1d,
        Kind::PoissonInverse2d,
        Kind::BurgersSweep,
        Kind::RbfRecover,
        Kind::RbfInverse,
    ];
}

impl FromStr for Kind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        Kind::ALL
            .iter()
            .copied()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| ConfigError::new(format!("unknown experiment kind '{s}'")))
    }
}

#[derive(Debug, thiserror::Error)]
#[error("config error: {msg}")]
pub struct ConfigError {
    pub msg: String,
}

impl ConfigError {
    pub fn new(msg: impl Into<String>) -> Self {
        ConfigError { msg: msg.into() }
    }
}

/// Ordered key-value map with typed accessors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Config {
    map: BTreeMap<String, String>,
}

impl Config {
    pub fn new() -> Self {
        Config::default()
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut map = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                ConfigError::new(format!("line {}: expected 'key = value'", lineno + 1))
            })?;
            map.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Config { map })
    }

    pub fn set(&mut self, key: &str, value: impl fmt::Display) {
        self.map.insert(key.to_string(), value.to_string());
    }

    pub fn contains(&self, key: &str) -> bool {
        self.map.contains_key(key)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(|s| s.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str, ConfigError> {
        self.get(key)
            .ok_or_else(|| ConfigError::new(format!("missing required key '{key}'")))
    }

    pub fn kind(&self) -> Result<Kind, ConfigError> {
        self.require("kind")?.parse()
    }

    fn parse_value<T: FromStr>(&self, key: &str, raw: &str) -> Result<T, ConfigError> {
        raw.parse()
            .map_err(|_| ConfigError::new(format!("key '{key}': cannot parse '{raw}'")))
    }

    pub fn f64(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.get(key) {
            Some(raw) => self.parse_value(key, raw),
            None => Ok(default),
        }
    }

    pub fn usize(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        match self.get(key) {
            Some(raw) => self.parse_value(key, raw),
            None => Ok(default),
        }
    }

    pub fn u64(&self, key: &str, default: u64) -> Result<u64, ConfigError> {
        match self.get(key) {
            Some(raw) => self.parse_value(key, raw),
            None => Ok(default),
        }
    }

    pub fn bool(&self, key: &str, default: bool) -> Result<bool, ConfigError> {
        match self.get(key) {
            Some("true") | Some("1") => Ok(true),
            Some("false") | Some("0") => Ok(false),
            Some(other) => Err(ConfigError::new(format!(
                "key '{key}': expected true/false, got '{other}'"
            ))),
            None => Ok(default),
        }
    }

    pub fn str_or<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.get(key).unwrap_or(default)
    }

    /// Record a resolved default so the manifest is complete.
    pub fn resolve_f64(&mut self, key: &str, default: f64) -> Result<f64, ConfigError> {
        let v = self.f64(key, default)?;
        self.set(key, v);
        Ok(v)
    }

    pub fn resolve_usize(&mut self, key: &str, default: usize) -> Result<usize, ConfigError> {
        let v = self.usize(key, default)?;
        self.set(key, v);
        Ok(v)
    }

    pub fn resolve_u64(&mut self, key: &str, default: u64) -> Result<u64, ConfigError> {
        let v = self.u64(key, default)?;
        self.set(key, v);
        Ok(v)
    }

    pub fn resolve_str(&mut self, key: &str, default: &str) -> String {
        let v = self.str_or(key, default).to_string();
        self.set(key, &v);
        v
    }

    pub fn resolve_bool(&mut self, key: &str, default: bool) -> Result<bool, ConfigError> {
        let v = self.bool(key, default)?;
        self.set(key, v);
        Ok(v)
    }

    /// Canonical text form: sorted `key = value` lines.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.map {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(v);
            out.push('\n');
        }
        out
    }
}

impl fmt::Display for Config {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}
