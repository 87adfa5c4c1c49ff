//! `key = value` configuration with per-command sections, and the resolved
//! parameter record embedded in every output file.
//!
//! ```text
//! # shared by every command
//! seed = 7
//!
//! [fit]
//! method = gibbs-ice
//! iters = 4000
//!
//! [theory.lan]
//! ns = 250,1000,4000
//! ```
//!
//! Keys are the long flag names. Flags win over the file. `--config` also
//! accepts any file this tool wrote: the embedded record is read back from
//! the JSON `config` object or from the `# key=value` lines heading a CSV.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use anyhow::Context;

use crate::CliError;

/// Keys describing where output goes; they never enter the embedded record.
const LOCATION_KEYS: [&str; 5] = ["out", "trace", "metrics", "threads", "timing"];

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigFile {
    global: BTreeMap<String, String>,
    sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl ConfigFile {
    /// Empty config when no path is given; load errors are usage errors.
    pub fn load_opt(path: Option<&Path>) -> Result<ConfigFile, String> {
        match path {
            None => Ok(ConfigFile::default()),
            Some(p) => ConfigFile::load(p).map_err(|e| format!("{e:#}")),
        }
    }

    pub fn load(path: &Path) -> anyhow::Result<ConfigFile> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        if text.trim_start().starts_with('{') {
            let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
            let value: serde_json::Value = serde_json::from_str(first)
                .or_else(|_| serde_json::from_str(&text))
                .with_context(|| format!("parsing JSON in {}", path.display()))?;
            let obj = value
                .get("config")
                .and_then(|c| c.as_object())
                .with_context(|| format!("{} has no embedded config", path.display()))?;
            let record = obj
                .iter()
                .map(|(k, v)| (k.clone(), v.as_str().map(str::to_string).unwrap_or_else(|| v.to_string())))
                .collect();
            return Ok(ConfigFile::from_record(record));
        }
        if text.starts_with("# ") {
            let record = text
                .lines()
                .map_while(|l| l.strip_prefix("# "))
                .filter_map(|l| l.split_once('='))
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .collect();
            return Ok(ConfigFile::from_record(record));
        }
        ConfigFile::parse(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// An embedded record: every key belongs to the section named by its
    /// `command` (and `check`, for theory) entries.
    fn from_record(mut record: BTreeMap<String, String>) -> ConfigFile {
        let mut section = record.remove("command").unwrap_or_default();
        if let Some(check) = record.remove("check") {
            section = format!("{section}.{check}");
        }
        let mut sections = BTreeMap::new();
        sections.insert(section, record);
        ConfigFile { global: BTreeMap::new(), sections }
    }

    pub fn parse(text: &str) -> anyhow::Result<ConfigFile> {
        let mut cfg = ConfigFile::default();
        let mut current: Option<String> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                current = Some(name.trim().to_string());
                cfg.sections.entry(name.trim().to_string()).or_default();
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .with_context(|| format!("line {}: expected key = value, got '{raw}'", lineno + 1))?;
            let target = match &current {
                Some(s) => cfg.sections.get_mut(s).expect("section inserted on header"),
                None => &mut cfg.global,
            };
            target.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(cfg)
    }

    /// Resolver for `section`, e.g. `fit` or `theory.lan`.
    pub fn resolver(&self, section: &str) -> Resolver {
        let mut values = self.global.clone();
        let scoped = self.sections.get(section).cloned().unwrap_or_default();
        let strict: BTreeSet<String> = scoped.keys().cloned().collect();
        values.extend(scoped);
        Resolver { section: section.to_string(), values, strict, used: BTreeSet::new(), record: BTreeMap::new() }
    }
}

/// Merges flags, config values and defaults, recording every final value.
#[derive(Debug)]
pub struct Resolver {
    section: String,
    values: BTreeMap<String, String>,
    /// Keys from the command's own section; all must be consumed.
    strict: BTreeSet<String>,
    used: BTreeSet<String>,
    record: BTreeMap<String, String>,
}

impl Resolver {
    fn from_config<T: FromStr>(&mut self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: Display,
    {
        self.used.insert(key.to_string());
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|e| CliError::Usage(format!("config key '{key}': cannot parse '{raw}': {e}"))),
        }
    }

    fn note<T: Display>(&mut self, key: &str, value: &T) {
        if !LOCATION_KEYS.contains(&key) {
            self.record.insert(key.to_string(), value.to_string());
        }
    }

    /// Flag, else config, else `default`.
    pub fn get<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T, CliError>
    where
        T::Err: Display,
    {
        let value = match flag {
            Some(v) => {
                self.used.insert(key.to_string());
                v
            }
            None => self.from_config(key)?.unwrap_or(default),
        };
        self.note(key, &value);
        Ok(value)
    }

    /// Flag, else config; a usage error naming `--key` when neither is set.
    pub fn require<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>) -> Result<T, CliError>
    where
        T::Err: Display,
    {
        let value = match flag {
            Some(v) => {
                self.used.insert(key.to_string());
                Some(v)
            }
            None => self.from_config(key)?,
        };
        let value = value.ok_or_else(|| CliError::Usage(format!("missing required flag --{key}")))?;
        self.note(key, &value);
        Ok(value)
    }

    /// Flag, else config, else absent (absence is recorded as nothing).
    pub fn optional<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError>
    where
        T::Err: Display,
    {
        let value = match flag {
            Some(v) => {
                self.used.insert(key.to_string());
                Some(v)
            }
            None => self.from_config(key)?,
        };
        if let Some(v) = &value {
            self.note(key, v);
        }
        Ok(value)
    }

    /// A switch: set by the flag, or by `true`/`false` in the config.
    pub fn switch(&mut self, key: &str, flag: bool) -> Result<bool, CliError> {
        let value = if flag { true } else { self.from_config(key)?.unwrap_or(false) };
        self.note(key, &value);
        Ok(value)
    }

    /// Fails on keys in the command's section that nothing consumed, then
    /// returns the record to embed, tagged with the command name.
    pub fn finish(self) -> Result<BTreeMap<String, String>, CliError> {
        if let Some(k) = self.strict.iter().find(|k| !self.used.contains(*k)) {
            return Err(CliError::Usage(format!("unknown key '{k}' in section [{}]", self.section)));
        }
        let mut record = self.record;
        match self.section.split_once('.') {
            Some((cmd, check)) => {
                record.insert("command".into(), cmd.into());
                record.insert("check".into(), check.into());
            }
            None => {
                record.insert("command".into(), self.section.clone());
            }
        }
        Ok(record)
    }
}

/// Comma-separated list, e.g. `250,1000,4000`.
#[derive(Clone, Debug, PartialEq)]
pub struct List<T>(pub Vec<T>);

impl<T: FromStr> FromStr for List<T>
where
    T::Err: Display,
{
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        s.split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<T>().map_err(|e| format!("'{t}': {e}")))
            .collect::<Result<Vec<T>, String>>()
            .map(List)
    }
}

impl<T: Display> Display for List<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Problem size written `NxD`, e.g. `500x4`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Size {
    pub n: usize,
    pub d: usize,
}

impl FromStr for Size {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (n, d) = s.split_once('x').ok_or_else(|| format!("expected NxD, got '{s}'"))?;
        Ok(Size {
            n: n.trim().parse().map_err(|e| format!("'{n}': {e}"))?,
            d: d.trim().parse().map_err(|e| format!("'{d}': {e}"))?,
        })
    }
}

impl Display for Size {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}", self.n, self.d)
    }
}
