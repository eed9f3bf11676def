//! `key=value` text used for experiment plans and output sidecars.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

pub const VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

/// Ordered `key=value` map. Blank lines and lines starting with `#` are
/// ignored; keys and values are trimmed; a later key overrides an earlier one.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvMap(BTreeMap<String, String>);

impl KvMap {
    pub fn new() -> Self {
        KvMap::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected key=value, got `{line}`", lineno + 1)))?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(KvMap(map))
    }

    pub fn read(path: &Path) -> Result<Self> {
        KvMap::parse(&std::fs::read_to_string(path)?)
    }

    pub fn insert(&mut self, key: impl Into<String>, value: impl ToString) {
        self.0.insert(key.into(), value.to_string());
    }

    pub fn extend(&mut self, pairs: impl IntoIterator<Item = (String, String)>) {
        self.0.extend(pairs);
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| Error::MissingKey(key.to_string()))
    }

    /// Parses a required value.
    pub fn value<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.require(key)?;
        raw.parse().map_err(|e| Error::Parse(format!("`{key} = {raw}`: {e}")))
    }

    /// Parses an optional value.
    pub fn value_or<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            Some(_) => self.value(key),
            None => Ok(default),
        }
    }

    /// Comma-separated list.
    pub fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.require(key)?;
        raw.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(|e| Error::Parse(format!("`{key}` entry `{s}`: {e}"))))
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.0 {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }
}

/// Path of the sidecar belonging to `output`: `output` with `.meta` appended.
pub fn sidecar_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".meta");
    PathBuf::from(name)
}

/// Writes `pairs` plus the version string next to `output`.
pub fn write_sidecar(output: &Path, pairs: &KvMap) -> Result<PathBuf> {
    let mut all = pairs.clone();
    all.insert("version", VERSION);
    let path = sidecar_path(output);
    std::fs::write(&path, all.to_text())?;
    Ok(path)
}
