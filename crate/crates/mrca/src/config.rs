//! Flat `key = value` configuration files.
//!
//! `#` starts a comment, blank lines are ignored, and keys are normalized so
//! `learning_rate` and `learning-rate` name the same setting.

use std::collections::BTreeMap;

use mrca_core::Error;

pub fn normalize_key(key: &str) -> String {
    key.trim().replace('_', "-").to_lowercase()
}

/// Parses a configuration text. Later duplicates are rejected.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, Error> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let malformed = |reason: String| Error::Malformed { line: i + 1, reason };
        let (key, value) = line.split_once('=').ok_or_else(|| malformed(format!("expected `key = value`, found `{line}`")))?;
        let key = normalize_key(key);
        if key.is_empty() {
            return Err(malformed("empty key".into()));
        }
        if out.insert(key.clone(), value.trim().to_owned()).is_some() {
            return Err(malformed(format!("`{key}` set twice")));
        }
    }
    Ok(out)
}
