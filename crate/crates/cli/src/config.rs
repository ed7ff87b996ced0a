//! Flat `key = value` configuration merged with command-line flags.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::CliError;

/// Every key the runner understands, in any subcommand.
pub const KNOWN_KEYS: &[&str] = &[
    "p", "R", "quadrant", "n", "samples", "seed", "stream", "threads", "g", "h", "a", "f", "m",
    "intervals", "blocks", "r", "radii", "x-min", "x-max", "points", "n0", "weights", "growth",
    "abs-tol", "rel-tol", "tail-tol", "max-subdivisions", "mode", "out",
];

/// Resolved parameters. Defaults are written back on first use so the
/// final map is the complete configuration of the run.
#[derive(Debug, Clone, Default)]
pub struct Params {
    values: BTreeMap<String, String>,
}

impl Params {
    /// Loads `path` (if any) and lays `flags` over it.
    pub fn resolve(path: Option<&Path>, flags: Vec<(&str, Option<String>)>) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Config(format!("cannot read config file {}: {e}", path.display()))
            })?;
            values = parse_config(&text)?;
        }
        for (key, value) in flags {
            if let Some(v) = value {
                values.insert(key.to_string(), v);
            }
        }
        Ok(Self { values })
    }

    pub fn has(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// Value of `key`, or `default` (recorded) when absent.
    pub fn get_or<T>(&mut self, key: &str, default: &str) -> Result<T, CliError>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        if !self.values.contains_key(key) {
            self.values.insert(key.to_string(), default.to_string());
        }
        self.get(key)
    }

    /// Required value of `key`.
    pub fn get<T>(&self, key: &str) -> Result<T, CliError>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        let raw = self
            .values
            .get(key)
            .ok_or_else(|| CliError::Config(format!("missing required parameter `{key}`")))?;
        raw.trim()
            .parse()
            .map_err(|e| CliError::Config(format!("invalid value `{raw}` for `{key}`: {e}")))
    }

    /// Comma-separated list.
    pub fn list<T>(&self, key: &str) -> Result<Vec<T>, CliError>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        let raw = self
            .values
            .get(key)
            .ok_or_else(|| CliError::Config(format!("missing required parameter `{key}`")))?;
        raw.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse().map_err(|e| CliError::Config(format!("invalid entry `{s}` in `{key}`: {e}")))
            })
            .collect()
    }

    pub fn list_or<T>(&mut self, key: &str, default: &str) -> Result<Vec<T>, CliError>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        if !self.values.contains_key(key) {
            self.values.insert(key.to_string(), default.to_string());
        }
        self.list(key)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::Value::Object(
            self.values.iter().map(|(k, v)| (k.clone(), serde_json::Value::String(v.clone()))).collect(),
        )
    }
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut values = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = match line.find('#') {
            Some(i) => &line[..i],
            None => line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::Config(format!("config line {}: expected key = value", lineno + 1))
        })?;
        let key = key.trim();
        if !KNOWN_KEYS.contains(&key) {
            return Err(CliError::Config(format!("config line {}: unknown key `{key}`", lineno + 1)));
        }
        values.insert(key.to_string(), value.trim().to_string());
    }
    Ok(values)
}
