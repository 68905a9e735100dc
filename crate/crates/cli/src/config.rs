//! Flat `key = value` configuration files.
//!
//! Lines are `key = value`; `#` starts a comment. An axis is written as
//! `min, max, count` with an optional fourth field `linear` or `log`.
//! A user file is laid over the built-in defaults of its mode, so it only
//! needs the keys it changes.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{source_name}:{line}: {message}")]
pub struct ConfigError {
    pub source_name: String,
    /// 1-based; 0 when the problem is not tied to a line.
    pub line: usize,
    pub message: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    EffectiveGrid,
    CavityKappaScan,
    CavityGrid,
    Robustness,
    Trajectories,
}

impl Mode {
    pub const ALL: [Mode; 5] = [
        Mode::EffectiveGrid,
        Mode::CavityKappaScan,
        Mode::CavityGrid,
        Mode::Robustness,
        Mode::Trajectories,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mode::EffectiveGrid => "effective-grid",
            Mode::CavityKappaScan => "cavity-kappa-scan",
            Mode::CavityGrid => "cavity-grid",
            Mode::Robustness => "robustness",
            Mode::Trajectories => "trajectories",
        }
    }

    pub fn default_config(self) -> &'static str {
        match self {
            Mode::EffectiveGrid => include_str!("../configs/effective-grid.conf"),
            Mode::CavityKappaScan => include_str!("../configs/cavity-kappa-scan.conf"),
            Mode::CavityGrid => include_str!("../configs/cavity-grid.conf"),
            Mode::Robustness => include_str!("../configs/robustness.conf"),
            Mode::Trajectories => include_str!("../configs/trajectories.conf"),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown mode `{s}`"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub count: usize,
    pub spacing: Spacing,
}

impl Axis {
    pub fn points(&self) -> Vec<f64> {
        let n = self.count;
        (0..n)
            .map(|i| {
                let t = i as f64 / (n - 1) as f64;
                match self.spacing {
                    Spacing::Linear => self.min + (self.max - self.min) * t,
                    Spacing::Log => {
                        let (a, b) = (self.min.log10(), self.max.log10());
                        10f64.powf(a + (b - a) * t)
                    }
                }
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
struct Entry {
    value: String,
    source_name: String,
    line: usize,
}

/// Parsed configuration with the location of every value.
#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    entries: BTreeMap<String, Entry>,
}

impl Config {
    pub fn parse(text: &str, source_name: &str) -> Result<Self, ConfigError> {
        let mut entries: BTreeMap<String, Entry> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let err = |message: String| ConfigError {
                source_name: source_name.to_string(),
                line,
                message,
            };
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, found `{content}`")))?;
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(err(format!("invalid key `{key}`")));
            }
            if let Some(prev) = entries.get(key) {
                return Err(err(format!(
                    "duplicate key `{key}` (first set on line {})",
                    prev.line
                )));
            }
            entries.insert(
                key.to_string(),
                Entry {
                    value: value.to_string(),
                    source_name: source_name.to_string(),
                    line,
                },
            );
        }
        Ok(Self { entries })
    }

    /// Built-in defaults of `mode` overlaid with `user`. Keys of `user` must
    /// exist in the defaults, and a `mode` key in `user` must match.
    pub fn for_mode(mode: Mode, user: Option<(&str, &str)>) -> Result<Self, ConfigError> {
        let mut base = Config::parse(mode.default_config(), &format!("<default {mode}>"))?;
        if let Some((text, name)) = user {
            let overlay = Config::parse(text, name)?;
            for (key, entry) in overlay.entries {
                if !base.entries.contains_key(&key) {
                    let known: Vec<&str> = base.entries.keys().map(String::as_str).collect();
                    return Err(ConfigError {
                        source_name: entry.source_name,
                        line: entry.line,
                        message: format!(
                            "unknown key `{key}` for mode {mode} (known: {})",
                            known.join(", ")
                        ),
                    });
                }
                if key == "mode" && entry.value != mode.name() {
                    return Err(ConfigError {
                        source_name: entry.source_name,
                        line: entry.line,
                        message: format!(
                            "config is for mode `{}`, but `{mode}` was requested",
                            entry.value
                        ),
                    });
                }
                base.entries.insert(key, entry);
            }
        }
        Ok(base)
    }

    /// Replaces the value of an existing key, e.g. from a command-line flag.
    pub fn set(&mut self, key: &str, value: &str) {
        let entry = self
            .entries
            .entry(key.to_string())
            .or_insert_with(|| Entry {
                value: String::new(),
                source_name: "<command line>".into(),
                line: 0,
            });
        entry.value = value.to_string();
        entry.source_name = "<command line>".into();
        entry.line = 0;
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    fn entry(&self, key: &str) -> Result<&Entry, ConfigError> {
        self.entries.get(key).ok_or_else(|| ConfigError {
            source_name: "<config>".into(),
            line: 0,
            message: format!("missing key `{key}`"),
        })
    }

    /// Error located at the line that set `key`.
    pub fn invalid(&self, key: &str, message: String) -> ConfigError {
        let e = &self.entries[key];
        ConfigError {
            source_name: e.source_name.clone(),
            line: e.line,
            message: format!("`{key}`: {message}"),
        }
    }

    pub fn string(&self, key: &str) -> Result<String, ConfigError> {
        Ok(self.entry(key)?.value.clone())
    }

    pub fn f64(&self, key: &str) -> Result<f64, ConfigError> {
        let v = &self.entry(key)?.value;
        let x: f64 = v
            .parse()
            .map_err(|_| self.invalid(key, format!("expected a number, found `{v}`")))?;
        if !x.is_finite() {
            return Err(self.invalid(key, format!("expected a finite number, found `{v}`")));
        }
        Ok(x)
    }

    pub fn non_negative(&self, key: &str) -> Result<f64, ConfigError> {
        let x = self.f64(key)?;
        if x < 0.0 {
            return Err(self.invalid(key, format!("must be >= 0, found {x}")));
        }
        Ok(x)
    }

    pub fn positive(&self, key: &str) -> Result<f64, ConfigError> {
        let x = self.f64(key)?;
        if x <= 0.0 {
            return Err(self.invalid(key, format!("must be > 0, found {x}")));
        }
        Ok(x)
    }

    pub fn usize(&self, key: &str) -> Result<usize, ConfigError> {
        let v = &self.entry(key)?.value;
        v.parse()
            .map_err(|_| self.invalid(key, format!("expected a non-negative integer, found `{v}`")))
    }

    pub fn u64(&self, key: &str) -> Result<u64, ConfigError> {
        let v = &self.entry(key)?.value;
        v.parse()
            .map_err(|_| self.invalid(key, format!("expected a non-negative integer, found `{v}`")))
    }

    pub fn bool(&self, key: &str) -> Result<bool, ConfigError> {
        match self.entry(key)?.value.as_str() {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            other => Err(self.invalid(key, format!("expected true or false, found `{other}`"))),
        }
    }

    /// Comma-separated numbers.
    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>, ConfigError> {
        let v = &self.entry(key)?.value;
        let out: Result<Vec<f64>, _> = v.split(',').map(|s| s.trim().parse::<f64>()).collect();
        let out = out.map_err(|_| {
            self.invalid(
                key,
                format!("expected comma-separated numbers, found `{v}`"),
            )
        })?;
        if out.is_empty() || out.iter().any(|x| !x.is_finite()) {
            return Err(self.invalid(key, "expected at least one finite number".into()));
        }
        Ok(out)
    }

    pub fn axis(&self, key: &str) -> Result<Axis, ConfigError> {
        let v = &self.entry(key)?.value;
        let fields: Vec<&str> = v.split(',').map(str::trim).collect();
        if !(3..=4).contains(&fields.len()) {
            return Err(self.invalid(
                key,
                format!("expected `min, max, count[, linear|log]`, found `{v}`"),
            ));
        }
        let num = |s: &str| {
            s.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| self.invalid(key, format!("`{s}` is not a finite number")))
        };
        let min = num(fields[0])?;
        let max = num(fields[1])?;
        let count: usize = fields[2]
            .parse()
            .map_err(|_| self.invalid(key, format!("count `{}` is not an integer", fields[2])))?;
        let spacing = match fields.get(3).copied().unwrap_or("linear") {
            "linear" => Spacing::Linear,
            "log" => Spacing::Log,
            other => {
                return Err(self.invalid(
                    key,
                    format!("spacing must be linear or log, found `{other}`"),
                ))
            }
        };
        if count < 2 {
            return Err(self.invalid(key, format!("axis needs at least 2 points, found {count}")));
        }
        if spacing == Spacing::Log && (min <= 0.0 || max <= 0.0) {
            return Err(self.invalid(key, "log spacing needs positive bounds".into()));
        }
        if max < min {
            return Err(self.invalid(key, format!("max {max} is below min {min}")));
        }
        Ok(Axis {
            min,
            max,
            count,
            spacing,
        })
    }
}
