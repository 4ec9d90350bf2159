//! Flat `key = value` experiment configuration.
//!
//! One entry per line, `#` starts a comment. A value may be a comma-separated
//! list; list-valued sweep keys expand into one job per combination.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use ftnn::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Config {
    entries: BTreeMap<String, Entry>,
}

#[derive(Clone, Debug, PartialEq)]
struct Entry {
    line: usize,
    values: Vec<String>,
}

fn config_error(line: usize, msg: impl Display) -> Error {
    Error::Config(format!("line {line}: {msg}"))
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| config_error(line, format!("expected `key = value`, got `{content}`")))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(config_error(line, "empty key"));
            }
            let values: Vec<String> = value.split(',').map(|v| v.trim().to_string()).collect();
            if values.iter().any(String::is_empty) {
                return Err(config_error(line, format!("empty value for `{key}`")));
            }
            if let Some(prev) = entries.insert(key.to_string(), Entry { line, values }) {
                return Err(config_error(line, format!("`{key}` already set on line {}", prev.line)));
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Rejects keys outside `known`; catches typos that would silently
    /// fall back to defaults.
    pub fn ensure_known(&self, known: &[&str]) -> Result<()> {
        match self.entries.iter().find(|(k, _)| !known.contains(&k.as_str())) {
            Some((k, e)) => Err(config_error(
                e.line,
                format!("unknown key `{k}` (expected one of: {})", known.join(", ")),
            )),
            None => Ok(()),
        }
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn set(&mut self, key: &str, value: impl Display) {
        self.entries.insert(
            key.to_string(),
            Entry {
                line: 0,
                values: vec![value.to_string()],
            },
        );
    }

    /// All values of `key`, or `default` when absent.
    pub fn list<T>(&self, key: &str, default: &[T]) -> Result<Vec<T>>
    where
        T: FromStr + Clone,
        T::Err: Display,
    {
        let Some(entry) = self.entries.get(key) else {
            return Ok(default.to_vec());
        };
        entry
            .values
            .iter()
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| config_error(entry.line, format!("`{key}`: invalid value `{v}`: {e}")))
            })
            .collect()
    }

    /// The single value of `key`, or `default` when absent.
    pub fn one<T>(&self, key: &str, default: T) -> Result<T>
    where
        T: FromStr + Clone,
        T::Err: Display,
    {
        let mut values = self.list(key, std::slice::from_ref(&default))?;
        if values.len() != 1 {
            let line = self.entries.get(key).map_or(0, |e| e.line);
            return Err(config_error(line, format!("`{key}` takes a single value")));
        }
        Ok(values.remove(0))
    }

    /// Optional single value.
    pub fn optional<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr + Clone,
        T::Err: Display,
    {
        if !self.contains(key) {
            return Ok(None);
        }
        let entry = &self.entries[key];
        if entry.values.len() != 1 {
            return Err(config_error(entry.line, format!("`{key}` takes a single value")));
        }
        let v = &entry.values[0];
        v.parse::<T>()
            .map(Some)
            .map_err(|e| config_error(entry.line, format!("`{key}`: invalid value `{v}`: {e}")))
    }
}
