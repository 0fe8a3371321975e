//! Run configuration files: `key = value` lines grouped under `[section]`
//! headers, `#` or `;` comments.
//!
//! ```text
//! [data]
//! train = train.txt
//! streams = word,pos,chunk
//!
//! [training]
//! min_score = 2
//! ```
//!
//! Section names only group keys; every key is global and may appear once.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Keys accepted in a configuration file.
pub const KEYS: &[&str] = &[
    "train",
    "test",
    "templates",
    "model",
    "out",
    "pred",
    "streams",
    "tasks",
    "weights",
    "init",
    "mode",
    "order",
    "min_score",
    "max_rules",
    "scorer",
    "workers",
    "seed",
    "sentences",
    "noise",
    "offset_bound",
    "task",
    "buckets",
    "layer",
    "format",
];

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<ConfigFile> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let bad = |m: String| Error::Config(format!("config line {}: {m}", i + 1));
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| bad("unterminated section header".into()))?;
                if name.trim().is_empty() {
                    return Err(bad("empty section name".into()));
                }
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key = value, found `{line}`")))?;
            let key = key.trim().replace('-', "_");
            if !KEYS.contains(&key.as_str()) {
                return Err(bad(format!("unknown key `{key}`")));
            }
            if values.insert(key.clone(), value.trim().to_owned()).is_some() {
                return Err(bad(format!("duplicate key `{key}`")));
            }
        }
        Ok(ConfigFile { values })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// `flag` if given, else the file's value for `key`.
    pub fn pick(&self, flag: Option<String>, key: &str) -> Option<String> {
        flag.or_else(|| self.get(key).map(str::to_owned))
    }

    /// Parsed form of [`ConfigFile::pick`].
    pub fn pick_parsed<T: std::str::FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.get(key) {
            None => Ok(None),
            Some(text) => text
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("invalid value `{text}` for `{key}`"))),
        }
    }
}
