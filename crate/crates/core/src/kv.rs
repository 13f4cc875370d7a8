//! Flat `key = value` text files used for parameter files, config snapshots
//! and run manifests. Blank lines and `#` comments are ignored.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues {
    entries: BTreeMap<String, String>,
    order: Vec<String>,
}

impl KeyValues {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str, what: &str) -> Result<Self> {
        let mut kv = KeyValues::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::parse(what, format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::parse(what, format!("line {}: empty key", lineno + 1)));
            }
            if kv.entries.contains_key(key) {
                return Err(Error::parse(what, format!("line {}: duplicate key `{key}`", lineno + 1)));
            }
            kv.insert(key, value.trim());
        }
        Ok(kv)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_string()).map_err(|e| Error::io(path, e))
    }

    pub fn insert(&mut self, key: &str, value: impl ToString) {
        if !self.entries.contains_key(key) {
            self.order.push(key.to_string());
        }
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<T>()
                .map(Some)
                .map_err(|e| Error::parse(key, format!("`{v}`: {e}"))),
        }
    }

    /// Overwrites `slot` when `key` is present.
    pub fn update<T: FromStr>(&self, key: &str, slot: &mut T) -> Result<()>
    where
        T::Err: std::fmt::Display,
    {
        if let Some(v) = self.get(key)? {
            *slot = v;
        }
        Ok(())
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.order.iter().map(String::as_str)
    }

    /// Fails on any key outside `known`.
    pub fn reject_unknown(&self, known: &[&str], what: &str) -> Result<()> {
        for key in self.keys() {
            if !known.contains(&key) {
                return Err(Error::parse(what, format!("unknown key `{key}`")));
            }
        }
        Ok(())
    }

    pub fn extend(&mut self, prefix: &str, other: &KeyValues) {
        for key in other.keys() {
            let value = other.get_str(key).unwrap_or_default().to_string();
            self.insert(&format!("{prefix}{key}"), value);
        }
    }

    /// Sub-map of every key starting with `prefix`, prefix stripped.
    pub fn section(&self, prefix: &str) -> KeyValues {
        let mut out = KeyValues::new();
        for key in self.keys() {
            if let Some(rest) = key.strip_prefix(prefix) {
                out.insert(rest, self.entries[key].clone());
            }
        }
        out
    }
}

impl std::fmt::Display for KeyValues {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut out = String::new();
        for key in &self.order {
            let _ = writeln!(out, "{key} = {}", self.entries[key]);
        }
        f.write_str(&out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_whitespace() {
        let kv = KeyValues::parse("# header\n a = 1.5 \n\nb=hello # trailing\n", "t").unwrap();
        assert_eq!(kv.get::<f64>("a").unwrap(), Some(1.5));
        assert_eq!(kv.get_str("b"), Some("hello"));
        assert_eq!(kv.get::<f64>("missing").unwrap(), None);
    }

    #[test]
    fn rejects_malformed_lines_and_duplicates() {
        assert!(KeyValues::parse("novalue\n", "t").is_err());
        assert!(KeyValues::parse("a = 1\na = 2\n", "t").is_err());
        assert!(KeyValues::parse(" = 2\n", "t").is_err());
    }

    #[test]
    fn display_keeps_insertion_order() {
        let mut kv = KeyValues::new();
        kv.insert("z", 1);
        kv.insert("a", 2);
        assert_eq!(kv.to_string(), "z = 1\na = 2\n");
        let back = KeyValues::parse(&kv.to_string(), "t").unwrap();
        assert_eq!(back, kv);
    }
}
