//! Key=value config files. Every flag has a config equivalent under its
//! snake_case name; a flag given on the command line wins. Dotted keys are
//! run metadata, so a manifest written by one run is a valid config for
//! reproducing it.

use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use soda::{Error, Result};

pub struct ConfigFile {
    pairs: Vec<(String, String)>,
}

impl ConfigFile {
    pub fn empty() -> Self {
        ConfigFile { pairs: Vec::new() }
    }

    /// Parses `path` if given. `command` must match any `command=` key, and
    /// every bare key must be in `allowed`.
    pub fn load(path: Option<&Path>, command: &str, allowed: &[&str]) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::empty());
        };
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut pairs: Vec<(String, String)> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::InvalidConfig(format!(
                    "{}:{}: expected key=value, got {line:?}",
                    path.display(),
                    lineno + 1
                )));
            };
            let key = key.trim();
            let value = value.trim();
            if key.contains('.') {
                continue;
            }
            if key == "command" {
                if value != command {
                    return Err(Error::InvalidConfig(format!(
                        "config file is for command {value:?}, not {command:?}"
                    )));
                }
                continue;
            }
            if !allowed.contains(&key) {
                return Err(Error::InvalidConfig(format!(
                    "unknown config key {key:?} for command {command:?}"
                )));
            }
            if pairs.iter().any(|(existing, _)| existing == key) {
                return Err(Error::InvalidConfig(format!("duplicate config key {key:?}")));
            }
            pairs.push((key.to_string(), value.to_string()));
        }
        Ok(ConfigFile { pairs })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.pairs
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn get_parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|e| {
                Error::InvalidConfig(format!("config key {key:?}: cannot parse {raw:?}: {e}"))
            }),
        }
    }
}

/// Flag value if present, else the config value under `key`.
pub fn resolve<T: FromStr>(flag: Option<T>, cfg: &ConfigFile, key: &str) -> Result<Option<T>>
where
    T::Err: Display,
{
    match flag {
        Some(v) => Ok(Some(v)),
        None => cfg.get_parsed(key),
    }
}

pub fn required<T>(value: Option<T>, key: &str) -> Result<T> {
    value.ok_or_else(|| {
        Error::InvalidConfig(format!(
            "missing required input: flag --{} or config key {key:?}",
            key.replace('_', "-")
        ))
    })
}
