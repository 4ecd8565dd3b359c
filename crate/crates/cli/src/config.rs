//! Flat `key = value` run files. Lists are comma-separated; word lists are
//! separated by `;` because a single word is itself comma-separated.

use crate::error::CliError;
use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

const KNOWN_KEYS: &[&str] = &[
    "H",
    "words",
    "m",
    "depth",
    "d",
    "tolerance",
    "seed",
    "output",
    "format",
    "no_timestamp",
    "degree",
    "branch",
    "T",
    "paths",
    "steps",
    "rk_steps",
    "x0",
    "M",
    "gamma",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunFile {
    entries: BTreeMap<String, String>,
}

impl RunFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        text.parse()
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn value<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        self.raw(key).map(|v| parse_one(key, v)).transpose()
    }

    pub fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, CliError> {
        self.raw(key)
            .map(|v| {
                v.split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| parse_one(key, s))
                    .collect()
            })
            .transpose()
    }

    pub fn words(&self) -> Option<Vec<String>> {
        self.raw("words").map(|v| {
            v.split(';')
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect()
        })
    }

    pub fn flag(&self, key: &str) -> Result<bool, CliError> {
        Ok(self.value::<bool>(key)?.unwrap_or(false))
    }
}

fn parse_one<T: FromStr>(key: &str, v: &str) -> Result<T, CliError> {
    v.trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("config key {key}: cannot parse {v:?}")))
}

impl FromStr for RunFile {
    type Err = CliError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut entries = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(CliError::Usage(format!("config line {}: expected key = value", n + 1)));
            };
            let k = k.trim();
            if !KNOWN_KEYS.contains(&k) {
                return Err(CliError::Usage(format!("config line {}: unknown key {k:?}", n + 1)));
            }
            entries.insert(k.to_string(), v.trim().to_string());
        }
        Ok(Self { entries })
    }
}
