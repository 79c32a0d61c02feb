//! The plain key-value text schema shared by configs and manifests.
//!
//! One `key = value` pair per line. Blank lines and lines starting with `#`
//! are ignored. Keys are lowercase ASCII words (`[a-z0-9_.]+`). A key may
//! repeat; order is preserved.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvDoc {
    entries: Vec<(String, String)>,
}

impl KvDoc {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
            let key = key.trim();
            if key.is_empty()
                || !key
                    .bytes()
                    .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_' || b == b'.')
            {
                return Err(Error::Config(format!("line {}: bad key `{key}`", lineno + 1)));
            }
            entries.push((key.to_string(), value.trim().to_string()));
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::format(path, msg),
            other => other,
        })
    }

    pub fn save(&self, path: &Path, header: &str) -> Result<()> {
        let mut out = String::new();
        for line in header.lines() {
            let _ = writeln!(out, "# {line}");
        }
        out.push_str(&self.to_string());
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn push(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.entries.push((key.to_string(), value.to_string()));
        self
    }

    /// Replaces the last value of `key`, or appends it.
    pub fn set(&mut self, key: &str, value: impl ToString) -> &mut Self {
        match self.entries.iter_mut().rev().find(|(k, _)| k == key) {
            Some(slot) => slot.1 = value.to_string(),
            None => {
                self.push(key, value);
            }
        }
        self
    }

    /// Last value of `key`.
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .rev()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn get_all<'a>(&'a self, key: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.entries
            .iter()
            .filter(move |(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::Config(format!("missing key `{key}`")))
    }

    pub fn parse_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::Config(format!("bad value `{v}` for `{key}`"))),
        }
    }

    pub fn parse_required<T: FromStr>(&self, key: &str) -> Result<T> {
        let v = self.require(key)?;
        v.parse()
            .map_err(|_| Error::Config(format!("bad value `{v}` for `{key}`")))
    }
}

impl std::fmt::Display for KvDoc {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_print() {
        let doc = KvDoc::parse("# hi\n\nstage = chroma\nlr=3e-4\nscene = a 1 train a\nscene = b 2 val b\n").unwrap();
        assert_eq!(doc.get("stage"), Some("chroma"));
        assert_eq!(doc.parse_or("lr", 0.0f32).unwrap(), 3e-4);
        assert_eq!(doc.get_all("scene").count(), 2);
        assert_eq!(KvDoc::parse(&doc.to_string()).unwrap(), doc);
    }

    #[test]
    fn rejects_garbage() {
        assert!(KvDoc::parse("no equals sign").is_err());
        assert!(KvDoc::parse("Bad Key = 1").is_err());
        let doc = KvDoc::parse("n = x").unwrap();
        assert!(doc.parse_or("n", 1usize).is_err());
        assert!(doc.require("missing").is_err());
    }
}
