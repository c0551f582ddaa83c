//! Flat `key = value` run configuration.
//!
//! Values are layered: schema defaults, then the config file, then
//! `KEY=VALUE` arguments, then the dedicated flags.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("{origin}: expected key=value, got {line:?}")]
    Syntax { origin: String, line: String },
    #[error("{origin}: unknown key {key:?} for `{command}` (known keys: {known})")]
    UnknownKey {
        origin: String,
        key: String,
        command: String,
        known: String,
    },
    #[error("invalid value {value:?} for key {key:?}: {reason}")]
    Value { key: String, value: String, reason: String },
}

pub struct Key {
    pub name: &'static str,
    pub default: &'static str,
}

const fn key(name: &'static str, default: &'static str) -> Key {
    Key { name, default }
}

const COMMON: &[Key] = &[key("seed", "1"), key("jobs", "0"), key("out", "out")];

const MCMC: &[Key] = &[
    key("n_iter", "15000"),
    key("n_burn", "5000"),
    key("thin", "1"),
    key("dl_grid_points", "1000"),
    key("dl_order", "blocked"),
    key("target_a", "1"),
    key("target_b", "1"),
    key("tune_draws", "2000"),
];

const SIMULATE: &[Key] = &[key("n", "60"), key("p", "50"), key("rho", "0.5"), key("reps", "20")];

const TUNE: &[Key] = &[
    key("data", ""),
    key("response", "y"),
    key("family", "normal"),
    key("grid", ""),
    key("draws", "2000"),
    key("target_a", "1"),
    key("target_b", "1"),
];

const FIT_SELECT: &[Key] = &[
    key("data", ""),
    key("response", "y"),
    key("method", "DL_hyper"),
    key("hyper", ""),
    key("max_size", "30"),
];

const EVALUATE: &[Key] = &[key("ordering", ""), key("truth", "")];

const REPRODUCE: &[Key] = &[
    key("table", "t1"),
    key("reps", "20"),
    key("n", "60"),
    key("p", ""),
    key("rho", "0.5,0.9"),
    key("methods", ""),
];

/// Keys accepted by `command`, with their defaults.
pub fn schema(command: &str) -> Vec<&'static Key> {
    let own: &'static [Key] = match command {
        "simulate" => SIMULATE,
        "tune" => TUNE,
        "fit-select" => FIT_SELECT,
        "evaluate" => EVALUATE,
        "reproduce" => REPRODUCE,
        _ => &[],
    };
    let mcmc = matches!(command, "fit-select" | "reproduce");
    COMMON
        .iter()
        .chain(own)
        .chain(MCMC.iter().filter(|_| mcmc))
        .collect()
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: String,
    values: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn new(command: &str) -> Self {
        let values = schema(command)
            .into_iter()
            .map(|k| (k.name.to_string(), k.default.to_string()))
            .collect();
        Self {
            command: command.to_string(),
            values,
        }
    }

    pub fn set(&mut self, key: &str, value: &str, origin: &str) -> Result<(), ConfigError> {
        if !self.values.contains_key(key) {
            let known: Vec<&str> = schema(&self.command).iter().map(|k| k.name).collect();
            return Err(ConfigError::UnknownKey {
                origin: origin.to_string(),
                key: key.to_string(),
                command: self.command.clone(),
                known: known.join(", "),
            });
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn load_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let origin = format!("{}:{}", path.display(), i + 1);
            self.apply_pair(line, &origin)?;
        }
        Ok(())
    }

    pub fn apply_pair(&mut self, pair: &str, origin: &str) -> Result<(), ConfigError> {
        let (k, v) = pair.split_once('=').ok_or_else(|| ConfigError::Syntax {
            origin: origin.to_string(),
            line: pair.to_string(),
        })?;
        self.set(k.trim(), v.trim(), origin)
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or("")
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        let value = self.raw(key);
        value.parse().map_err(|e: T::Err| ConfigError::Value {
            key: key.to_string(),
            value: value.to_string(),
            reason: e.to_string(),
        })
    }

    /// `None` for an empty value.
    pub fn optional<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        if self.raw(key).is_empty() {
            Ok(None)
        } else {
            self.get(key).map(Some)
        }
    }

    /// Comma-separated list; empty value gives an empty list.
    pub fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key)
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse().map_err(|e: T::Err| ConfigError::Value {
                    key: key.to_string(),
                    value: s.to_string(),
                    reason: e.to_string(),
                })
            })
            .collect()
    }

    pub fn required(&self, key: &str) -> Result<&str, ConfigError> {
        match self.raw(key) {
            "" => Err(ConfigError::Value {
                key: key.to_string(),
                value: String::new(),
                reason: "a value is required".into(),
            }),
            v => Ok(v),
        }
    }

    /// Manifest text: command, version and every resolved key.
    pub fn manifest(&self) -> String {
        let mut out = String::new();
        writeln!(out, "command={}", self.command).unwrap();
        writeln!(out, "version={}", env!("CARGO_PKG_VERSION")).unwrap();
        for (k, v) in &self.values {
            writeln!(out, "{k}={v}").unwrap();
        }
        out
    }
}
