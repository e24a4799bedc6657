//! Flat key-value configuration.
//!
//! Files are TOML restricted to dotted scalar keys (`tokenizer.lowercase =
//! false`); nested tables are flattened back into dotted keys on load.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};

/// Environment variable that overrides any configured seed.
pub const SEED_ENV: &str = "REFLECT_SEED";

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    values: BTreeMap<String, toml::Value>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let mut values = BTreeMap::new();
        flatten("", &table, &mut values)?;
        Ok(Config { values })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: impl Into<toml::Value>) {
        self.values.insert(key.to_string(), value.into());
    }

    pub fn contains(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(String::as_str)
    }

    pub fn bool(&self, key: &str, default: bool) -> Result<bool> {
        match self.values.get(key) {
            None => Ok(default),
            Some(toml::Value::Boolean(b)) => Ok(*b),
            Some(v) => Err(type_error(key, "bool", v)),
        }
    }

    pub fn usize(&self, key: &str, default: usize) -> Result<usize> {
        match self.values.get(key) {
            None => Ok(default),
            Some(toml::Value::Integer(i)) if *i >= 0 => Ok(*i as usize),
            Some(v) => Err(type_error(key, "non-negative integer", v)),
        }
    }

    pub fn opt_usize(&self, key: &str) -> Result<Option<usize>> {
        if self.contains(key) {
            self.usize(key, 0).map(Some)
        } else {
            Ok(None)
        }
    }

    pub fn u64(&self, key: &str, default: u64) -> Result<u64> {
        self.usize(key, default as usize).map(|v| v as u64)
    }

    pub fn f64(&self, key: &str, default: f64) -> Result<f64> {
        match self.values.get(key) {
            None => Ok(default),
            Some(toml::Value::Float(f)) => Ok(*f),
            Some(toml::Value::Integer(i)) => Ok(*i as f64),
            Some(v) => Err(type_error(key, "number", v)),
        }
    }

    pub fn str(&self, key: &str) -> Result<Option<&str>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(toml::Value::String(s)) => Ok(Some(s)),
            Some(v) => Err(type_error(key, "string", v)),
        }
    }

    /// The run seed: `REFLECT_SEED` when set, else `key`, else `default`.
    pub fn seed(&self, key: &str, default: u64) -> Result<u64> {
        if let Ok(raw) = std::env::var(SEED_ENV) {
            return raw.trim().parse().map_err(|_| {
                Error::Config(format!("{SEED_ENV}={raw:?} is not an unsigned integer"))
            });
        }
        self.u64(key, default)
    }
}

fn type_error(key: &str, expected: &str, got: &toml::Value) -> Error {
    Error::Config(format!("`{key}` must be a {expected}, got {got}"))
}

fn flatten(
    prefix: &str,
    table: &toml::Table,
    out: &mut BTreeMap<String, toml::Value>,
) -> Result<()> {
    for (k, v) in table {
        let key = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            toml::Value::Table(t) => flatten(&key, t, out)?,
            toml::Value::Array(_) => {
                return Err(Error::Config(format!("`{key}`: arrays are not supported")))
            }
            scalar => {
                out.insert(key, scalar.clone());
            }
        }
    }
    Ok(())
}
