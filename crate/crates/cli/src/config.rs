//! `key=value` run configuration. Flags given on the command line win.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};

use crate::Usage;

pub const KEYS: &[&str] = &[
    "grid",
    "grid-rows",
    "grid-cols",
    "feed",
    "lanes",
    "a-group",
    "b-group",
    "cuts",
    "cache-sets",
    "cache-ways",
    "hit-cycles",
    "miss-penalty",
    "dram-cycles",
    "t",
    "eps",
    "iters",
    "segments",
    "threads",
    "seed",
    "format",
];

#[derive(Clone, Debug, Default)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                bail!(Usage(format!("config line {}: expected key=value", no + 1)));
            };
            let k = k.trim().replace('_', "-");
            if !KEYS.contains(&k.as_str()) {
                bail!(Usage(format!("config line {}: unknown key `{k}`", no + 1)));
            }
            values.insert(k, v.trim().to_string());
        }
        Ok(Config { values })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Config::parse(&text)
    }

    /// The flag value if given, else the parsed config value.
    pub fn pick<T>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e| Usage(format!("config key `{key}`: {e}")).into()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let c = Config::parse("# grid\ngrid_rows = 8\ncache-ways=4\n").unwrap();
        assert_eq!(c.pick::<usize>(None, "grid-rows").unwrap(), Some(8));
        assert_eq!(c.pick(Some(16usize), "grid-rows").unwrap(), Some(16));
        assert_eq!(c.pick::<usize>(None, "lanes").unwrap(), None);
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        assert!(Config::parse("colour=red").is_err());
        assert!(Config::parse("grid-rows").is_err());
        let c = Config::parse("lanes=four").unwrap();
        assert!(c.pick::<usize>(None, "lanes").is_err());
    }
}
