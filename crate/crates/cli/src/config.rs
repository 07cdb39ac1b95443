//! Sectioned `key = value` configuration files.
//!
//! ```text
//! # comment
//! [system]
//! A = -1 0.5; 0 -2      # rows separated by ';', entries by whitespace
//! C = 1 0
//! ```

use std::collections::BTreeMap;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

/// Keys accepted in each section.
const SCHEMA: &[(&str, &[&str])] = &[
    ("system", &["A", "B", "C", "Q", "R", "P0", "m"]),
    ("wave", &["modes", "c", "sigma", "R"]),
    ("grid", &["horizon", "n", "depth"]),
    ("study", &["n_list", "ref_depth", "seeds", "variant", "monte_carlo"]),
    ("bounds", &["n", "variant", "mu"]),
    ("demo", &["levels", "reference_level"]),
    ("run", &["seed", "out"]),
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

type Result<T> = std::result::Result<T, ConfigError>;

fn err<T>(msg: impl Into<String>) -> Result<T> {
    Err(ConfigError(msg.into()))
}

fn check_key(section: &str, key: &str) -> Result<()> {
    match SCHEMA.iter().find(|(s, _)| *s == section) {
        None => err(format!("unknown section [{section}]")),
        Some((_, keys)) if !keys.contains(&key) => err(format!("unknown key '{key}' in section [{section}]")),
        Some(_) => Ok(()),
    }
}

#[derive(Debug, Clone)]
pub struct Config {
    entries: BTreeMap<(String, String), String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        let mut section: Option<String> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = lineno + 1;
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| ConfigError(format!("line {at}: malformed section header '{line}'")))?
                    .trim();
                if !SCHEMA.iter().any(|(s, _)| *s == name) {
                    return err(format!("line {at}: unknown section [{name}]"));
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ConfigError(format!("line {at}: expected 'key = value', got '{line}'")))?;
            let key = key.trim();
            let Some(sec) = &section else {
                return err(format!("line {at}: key '{key}' appears before any section header"));
            };
            check_key(sec, key).map_err(|e| ConfigError(format!("line {at}: {}", e.0)))?;
            if entries.insert((sec.clone(), key.to_string()), value.trim().to_string()).is_some() {
                return err(format!("line {at}: duplicate key '{key}' in section [{sec}]"));
            }
        }
        Ok(Self { entries })
    }

    /// Applies a `section.key=value` override.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (path, value) = assignment
            .split_once('=')
            .ok_or_else(|| ConfigError(format!("override '{assignment}' is not of the form section.key=value")))?;
        let (section, key) = path
            .trim()
            .split_once('.')
            .ok_or_else(|| ConfigError(format!("override key '{path}' must be written section.key")))?;
        check_key(section, key)?;
        self.entries.insert((section.to_string(), key.to_string()), value.trim().to_string());
        Ok(())
    }

    pub fn has_section(&self, section: &str) -> bool {
        self.entries.keys().any(|(s, _)| s == section)
    }

    pub fn raw(&self, section: &str, key: &str) -> Option<&str> {
        self.entries.get(&(section.to_string(), key.to_string())).map(String::as_str)
    }

    fn required(&self, section: &str, key: &str) -> Result<&str> {
        self.raw(section, key)
            .ok_or_else(|| ConfigError(format!("missing required key '{key}' in section [{section}]")))
    }

    pub fn scalar<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<T>> {
        self.raw(section, key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| ConfigError(format!("[{section}] {key}: cannot parse '{v}'")))
            })
            .transpose()
    }

    pub fn scalar_or<T: FromStr>(&self, section: &str, key: &str, default: T) -> Result<T> {
        Ok(self.scalar(section, key)?.unwrap_or(default))
    }

    pub fn required_scalar<T: FromStr>(&self, section: &str, key: &str) -> Result<T> {
        self.required(section, key)?;
        Ok(self.scalar(section, key)?.expect("checked above"))
    }

    pub fn list<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<Vec<T>>> {
        self.raw(section, key)
            .map(|v| {
                v.split(|ch: char| ch == ',' || ch.is_whitespace())
                    .filter(|item| !item.is_empty())
                    .map(|item| {
                        item.parse::<T>()
                            .map_err(|_| ConfigError(format!("[{section}] {key}: cannot parse entry '{item}'")))
                    })
                    .collect()
            })
            .transpose()
    }

    pub fn required_list<T: FromStr>(&self, section: &str, key: &str) -> Result<Vec<T>> {
        self.required(section, key)?;
        Ok(self.list(section, key)?.expect("checked above"))
    }

    pub fn matrix(&self, section: &str, key: &str) -> Result<Option<DMatrix<f64>>> {
        self.raw(section, key).map(|v| parse_matrix(v).map_err(|e| ConfigError(format!("[{section}] {key}: {e}")))).transpose()
    }

    pub fn required_matrix(&self, section: &str, key: &str) -> Result<DMatrix<f64>> {
        self.required(section, key)?;
        Ok(self.matrix(section, key)?.expect("checked above"))
    }

    pub fn vector(&self, section: &str, key: &str) -> Result<Option<DVector<f64>>> {
        Ok(self.list::<f64>(section, key)?.map(DVector::from_vec))
    }
}

/// Parses `a b; c d` into a row-major matrix; an empty string is a 0×0 matrix.
pub fn parse_matrix(text: &str) -> std::result::Result<DMatrix<f64>, String> {
    let text = text.trim();
    if text.is_empty() {
        return Ok(DMatrix::zeros(0, 0));
    }
    let rows: Vec<Vec<f64>> = text
        .split(';')
        .map(|row| {
            row.split_whitespace()
                .map(|e| e.parse::<f64>().map_err(|_| format!("cannot parse entry '{e}'")))
                .collect()
        })
        .collect::<std::result::Result<_, _>>()?;
    let cols = rows[0].len();
    if let Some(bad) = rows.iter().position(|r| r.len() != cols) {
        return Err(format!("row {} has {} entries, row 1 has {cols}", bad + 1, rows[bad].len()));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}
