use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{GmcError, Result};

/// Flat `key = value` configuration. Blank lines and lines starting with
/// `#` are ignored.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KvConfig {
    entries: BTreeMap<String, String>,
}

impl KvConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| GmcError::ParseError {
                line: i + 1,
                column: String::new(),
                reason: format!("expected key=value, got `{line}`"),
            })?;
            let key = k.trim();
            if key.is_empty() {
                return Err(GmcError::ParseError {
                    line: i + 1,
                    column: String::new(),
                    reason: "empty key".into(),
                });
            }
            if entries.insert(key.to_string(), v.trim().to_string()).is_some() {
                return Err(GmcError::ParseError {
                    line: i + 1,
                    column: key.into(),
                    reason: "duplicate key".into(),
                });
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.entries
            .get(key)
            .map(|v| {
                v.parse().map_err(|_| {
                    GmcError::InvalidConfig(format!("cannot parse `{v}` for key `{key}`"))
                })
            })
            .transpose()
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    /// Comma-separated list value.
    pub fn get_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        self.entries
            .get(key)
            .map(|v| {
                v.split(',')
                    .map(|x| {
                        x.trim().parse().map_err(|_| {
                            GmcError::InvalidConfig(format!("cannot parse `{x}` in key `{key}`"))
                        })
                    })
                    .collect()
            })
            .transpose()
    }

    /// Rejects keys outside `known`.
    pub fn check_known(&self, known: &[&str]) -> Result<()> {
        match self.entries.keys().find(|k| !known.contains(&k.as_str())) {
            Some(k) => Err(GmcError::InvalidConfig(format!("unknown config key `{k}`"))),
            None => Ok(()),
        }
    }

    /// Sorted `key=value` lines; two configs with equal values render
    /// identically.
    pub fn canonical(&self) -> String {
        self.entries
            .iter()
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_values() {
        let c = KvConfig::parse("# sim\nseed = 7\n\nd_grid=0, 0.5,1\nmode=stratified\n").unwrap();
        assert_eq!(c.get::<u64>("seed").unwrap(), Some(7));
        assert_eq!(c.get_list::<f64>("d_grid").unwrap(), Some(vec![0.0, 0.5, 1.0]));
        assert_eq!(c.raw("mode"), Some("stratified"));
        assert_eq!(c.get_or("M", 3usize).unwrap(), 3);
        assert!(c.get::<u64>("mode").is_err());
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(matches!(KvConfig::parse("seed 7"), Err(GmcError::ParseError { line: 1, .. })));
        assert!(KvConfig::parse("a=1\na=2").is_err());
        assert!(KvConfig::parse("=2").is_err());
        let c = KvConfig::parse("sede=1").unwrap();
        assert!(c.check_known(&["seed"]).is_err());
    }

    #[test]
    fn canonical_form_ignores_order_and_spacing() {
        let a = KvConfig::parse("b=2\na = 1").unwrap();
        let b = KvConfig::parse("a=1\n# c\nb=2").unwrap();
        assert_eq!(a.canonical(), b.canonical());
        let c = KvConfig::parse("a=1\nb=3").unwrap();
        assert_ne!(a.canonical(), c.canonical());
    }
}
