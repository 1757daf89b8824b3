//! Flat `name = value` configuration dialect shared by every file-based
//! interface: loop constants, sampling plans, threshold vectors, scenario
//! specs, and run manifests.
//!
//! Grammar: one `name = value` pair per line, `#` starts a comment, blank
//! lines are ignored. Values are numbers or comma-separated number lists;
//! repeated keys are allowed (scenario event lines rely on this).

use std::fs;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: expected `name = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: key `{key}`: {message}")]
    Value {
        line: usize,
        key: String,
        message: String,
    },
    #[error("missing key `{0}`")]
    MissingKey(String),
    #[error("unknown key `{key}` on line {line}")]
    UnknownKey { key: String, line: usize },
}

#[derive(Debug, Clone)]
struct Entry {
    key: String,
    value: String,
    line: usize,
}

/// A parsed key=value file. Preserves order, line numbers, and duplicates.
#[derive(Debug, Clone, Default)]
pub struct KvFile {
    entries: Vec<Entry>,
}

impl KvFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let stripped = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            };
            let stripped = stripped.trim();
            if stripped.is_empty() {
                continue;
            }
            let (key, value) = stripped.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                text: raw.trim().to_string(),
            })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(ConfigError::Syntax {
                    line,
                    text: raw.trim().to_string(),
                });
            }
            entries.push(Entry {
                key: key.to_string(),
                value: value.trim().to_string(),
                line,
            });
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Last occurrence wins for scalar lookups.
    fn find(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().rev().find(|e| e.key == key)
    }

    pub fn keys(&self) -> impl Iterator<Item = (&str, usize)> {
        self.entries.iter().map(|e| (e.key.as_str(), e.line))
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.find(key).map(|e| e.value.as_str())
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.find(key) {
            None => Ok(None),
            Some(e) => parse_f64(&e.value)
                .map(Some)
                .map_err(|message| ConfigError::Value {
                    line: e.line,
                    key: key.to_string(),
                    message,
                }),
        }
    }

    pub fn require_f64(&self, key: &str) -> Result<f64, ConfigError> {
        self.get_f64(key)?
            .ok_or_else(|| ConfigError::MissingKey(key.to_string()))
    }

    pub fn get_u64(&self, key: &str) -> Result<Option<u64>, ConfigError> {
        match self.find(key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse::<u64>()
                .map(Some)
                .map_err(|err| ConfigError::Value {
                    line: e.line,
                    key: key.to_string(),
                    message: err.to_string(),
                }),
        }
    }

    pub fn get_f64_list(&self, key: &str) -> Result<Option<Vec<f64>>, ConfigError> {
        match self.find(key) {
            None => Ok(None),
            Some(e) => parse_f64_list(&e.value)
                .map(Some)
                .map_err(|message| ConfigError::Value {
                    line: e.line,
                    key: key.to_string(),
                    message,
                }),
        }
    }

    /// All values for a repeated key, in file order, with line numbers.
    pub fn get_all(&self, key: &str) -> Vec<(usize, &str)> {
        self.entries
            .iter()
            .filter(|e| e.key == key)
            .map(|e| (e.line, e.value.as_str()))
            .collect()
    }

    /// Rejects keys outside `allowed` so typos fail loudly.
    pub fn check_known_keys(&self, allowed: &[&str]) -> Result<(), ConfigError> {
        for e in &self.entries {
            if !allowed.contains(&e.key.as_str()) {
                return Err(ConfigError::UnknownKey {
                    key: e.key.clone(),
                    line: e.line,
                });
            }
        }
        Ok(())
    }
}

fn parse_f64(text: &str) -> Result<f64, String> {
    text.trim()
        .parse::<f64>()
        .map_err(|e| format!("invalid number `{}`: {}", text.trim(), e))
}

fn parse_f64_list(text: &str) -> Result<Vec<f64>, String> {
    text.split(',').map(parse_f64).collect()
}

/// Full-precision float formatting: 17 significant digits round-trip any f64.
pub fn format_full(v: f64) -> String {
    format!("{:.16e}", v)
}
