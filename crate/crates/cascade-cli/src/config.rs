//! Flat key=value config files and flag/config/env merging.
//!
//! Every run is determined by the merged settings: command-line flags win
//! over config-file entries, which win over environment fallbacks and
//! built-in defaults.  Keys use the long flag spelling (`depth-cap`, `N`).

use std::sync::Mutex;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

/// CLI-level failure with its process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config keys, or parameter values → exit 1.
    Usage(String),
    /// A mathematical invariant the engine guarantees was violated → exit 2.
    Assertion(String),
    /// Filesystem trouble → exit 3.
    Io(String),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> CliError {
        CliError::Usage(msg.into())
    }

    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Assertion(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Assertion(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

impl From<cascade_core::error::CoreError> for CliError {
    fn from(e: cascade_core::error::CoreError) -> CliError {
        use cascade_core::error::CoreError::*;
        match e {
            InvariantViolated(_) | Diverged { .. } => CliError::Assertion(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> CliError {
        CliError::Io(e.to_string())
    }
}

/// Merged settings source: config map plus bookkeeping of which keys the
/// active subcommand actually understands, so typos in the file surface as
/// usage errors naming the offending field.
pub struct Settings {
    entries: BTreeMap<String, String>,
    known: Mutex<BTreeSet<&'static str>>,
}

impl Settings {
    pub fn empty() -> Settings {
        Settings {
            entries: BTreeMap::new(),
            known: Mutex::new(BTreeSet::new()),
        }
    }

    pub fn load(path: &Path) -> Result<Settings, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("config `{}`: {e}", path.display())))?;
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::usage(format!(
                    "config `{}` line {}: expected key=value, got `{line}`",
                    path.display(),
                    lineno + 1
                )));
            };
            let key = key.trim().to_string();
            if entries.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(CliError::usage(format!(
                    "config `{}`: duplicate key `{key}`",
                    path.display()
                )));
            }
        }
        Ok(Settings {
            entries,
            known: Mutex::new(BTreeSet::new()),
        })
    }

    /// Flag value if given, else the parsed config entry, else `None`.
    pub fn opt<T>(
        &self,
        key: &'static str,
        flag: Option<T>,
        parse: impl FnOnce(&str) -> Result<T, CliError>,
    ) -> Result<Option<T>, CliError> {
        self.known.lock().expect("no poisoned key set").insert(key);
        if flag.is_some() {
            return Ok(flag);
        }
        match self.entries.get(key) {
            Some(raw) => parse(raw)
                .map(Some)
                .map_err(|e| CliError::usage(format!("config key `{key}`: {e}"))),
            None => Ok(None),
        }
    }

    pub fn get<T>(
        &self,
        key: &'static str,
        flag: Option<T>,
        parse: impl FnOnce(&str) -> Result<T, CliError>,
        default: T,
    ) -> Result<T, CliError> {
        Ok(self.opt(key, flag, parse)?.unwrap_or(default))
    }

    pub fn num<T: FromStr>(
        &self,
        key: &'static str,
        flag: Option<T>,
        default: T,
    ) -> Result<T, CliError> {
        self.get(key, flag, parse_num::<T>, default)
    }

    pub fn flag(&self, key: &'static str, set: bool) -> Result<bool, CliError> {
        self.get(key, set.then_some(true), parse_bool, false)
    }

    /// Rejects config keys the active subcommand never consumed.
    pub fn finish(&self) -> Result<(), CliError> {
        let known = self.known.lock().expect("no poisoned key set");
        for key in self.entries.keys() {
            if !known.contains(key.as_str()) {
                return Err(CliError::usage(format!(
                    "unknown config key `{key}` for this command"
                )));
            }
        }
        Ok(())
    }
}

pub fn parse_num<T: FromStr>(s: &str) -> Result<T, CliError> {
    s.trim()
        .parse::<T>()
        .map_err(|_| CliError::usage(format!("bad number `{s}`")))
}

fn parse_bool(s: &str) -> Result<bool, CliError> {
    match s.trim() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        other => Err(CliError::usage(format!("bad boolean `{other}`"))),
    }
}

/// Comma-separated list of numbers.
pub fn parse_num_list<T: FromStr>(s: &str) -> Result<Vec<T>, CliError> {
    s.split(',')
        .map(|t| parse_num::<T>(t))
        .collect::<Result<Vec<_>, _>>()
        .and_then(|v| {
            if v.is_empty() {
                Err(CliError::usage("empty list"))
            } else {
                Ok(v)
            }
        })
}

/// `p`/`q`-style exponents: a float or the word `inf`.
pub fn parse_exponent(s: &str) -> Result<f64, CliError> {
    match s.trim() {
        "inf" | "infinity" | "∞" => Ok(f64::INFINITY),
        other => parse_num::<f64>(other),
    }
}
