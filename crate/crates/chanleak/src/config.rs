//! Flat `key = value` config files and one-entry-per-line list files.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use crate::CliError;

/// Keys accepted in a config file.
pub const KEYS: [&str; 11] = [
    "seed",
    "max_steps",
    "model_time",
    "threshold",
    "top_n",
    "suppress",
    "transient",
    "strict",
    "format",
    "out",
    "generated_at",
];

/// Parsed config file. Path values are resolved against the file's directory.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FileConfig {
    values: BTreeMap<String, String>,
}

impl FileConfig {
    pub fn parse(text: &str, base: &Path) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = strip_comment(raw);
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(CliError::usage(format!("config line {}: expected `key = value`", i + 1)));
            };
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(CliError::usage(format!("config line {}: unknown key `{k}`", i + 1)));
            }
            let v = match k {
                "suppress" | "transient" | "out" => base.join(v).to_string_lossy().into_owned(),
                _ => v.to_string(),
            };
            values.insert(k.to_string(), v);
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new("")))
    }

    pub fn str(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.str(key).map(PathBuf::from)
    }

    pub fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.str(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| CliError::usage(format!("config key `{key}`: invalid value `{v}`"))),
        }
    }
}

fn strip_comment(line: &str) -> &str {
    line.split_once('#').map_or(line, |(a, _)| a).trim()
}

/// One entry per line; blank lines and `#` comments are ignored.
pub fn parse_list(text: &str) -> BTreeSet<String> {
    text.lines().map(strip_comment).filter(|l| !l.is_empty()).map(String::from).collect()
}

pub fn load_list(path: &Path) -> Result<BTreeSet<String>, CliError> {
    std::fs::read_to_string(path)
        .map(|t| parse_list(&t))
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))
}
