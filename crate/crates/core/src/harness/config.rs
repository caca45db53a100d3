//! Plain `key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. Keys are normalized so
//! `eps-list` and `eps_list` name the same setting.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

fn normalize(key: &str) -> String {
    key.trim().replace('-', "_")
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value, got {raw:?}", i + 1)))?;
            let key = normalize(k);
            if key.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", i + 1)));
            }
            values.insert(key, v.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(&normalize(key)).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key)
            .map(|v| v.parse::<T>().map_err(|e| Error::Config(format!("{key} = {v}: {e}"))))
            .transpose()
    }

    /// Comma-separated list.
    pub fn get_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key).map(|v| parse_list(v).map_err(|e| Error::Config(format!("{key}: {e}")))).transpose()
    }

    /// `cli` if given, else the file value, else `default`.
    pub fn pick<T: FromStr>(&self, cli: Option<T>, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        match cli {
            Some(v) => Ok(v),
            None => Ok(self.get(key)?.unwrap_or(default)),
        }
    }

    pub fn pick_list<T: FromStr>(&self, cli: Option<Vec<T>>, key: &str, default: Vec<T>) -> Result<Vec<T>>
    where
        T::Err: std::fmt::Display,
    {
        match cli {
            Some(v) => Ok(v),
            None => Ok(self.get_list(key)?.unwrap_or(default)),
        }
    }

    /// Boolean switches: a CLI flag that is set wins; otherwise the file decides.
    pub fn pick_flag(&self, cli: bool, key: &str) -> Result<bool> {
        if cli {
            return Ok(true);
        }
        Ok(self.get(key)?.unwrap_or(false))
    }
}

pub fn parse_list<T: FromStr>(text: &str) -> std::result::Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| format!("{s}: {e}")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_override() {
        let cfg = ConfigFile::parse("# sweep\n\neps-list = 0.4, 0.2,0.1\n delta0=0.01\nassert = true\n").unwrap();
        assert_eq!(cfg.get_list::<f64>("eps_list").unwrap(), Some(vec![0.4, 0.2, 0.1]));
        assert_eq!(cfg.pick(None, "delta0", 0.5).unwrap(), 0.01);
        assert_eq!(cfg.pick(Some(0.02), "delta0", 0.5).unwrap(), 0.02);
        assert_eq!(cfg.pick(None, "t-max", 3.0).unwrap(), 3.0);
        assert!(cfg.pick_flag(false, "assert").unwrap());
        assert!(!cfg.pick_flag(false, "skip-layer").unwrap());
    }

    #[test]
    fn errors() {
        assert!(ConfigFile::parse("novalue\n").is_err());
        assert!(ConfigFile::parse("= 3\n").is_err());
        let cfg = ConfigFile::parse("delta0 = abc").unwrap();
        assert!(cfg.get::<f64>("delta0").is_err());
    }
}
