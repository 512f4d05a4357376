//! Header synonym table.
//!
//! File format: one `src = dst` pair per line, `#` starts a comment. Pairs are
//! symmetric and transitive, so every header belongs to one equivalence class.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::normalize::normalize_header;

const BUILTIN: &str = include_str!("../../data/aliases.txt");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Aliases {
    /// Normalized header to class representative (smallest member).
    classes: BTreeMap<String, String>,
    hash: String,
}

#[derive(Debug, thiserror::Error)]
pub enum AliasError {
    #[error("alias file line {line}: expected `src = dst`")]
    Syntax { line: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Default for Aliases {
    fn default() -> Self {
        Self::builtin()
    }
}

impl Aliases {
    pub fn builtin() -> Self {
        Self::parse(BUILTIN).expect("shipped alias file is well formed")
    }

    /// No synonyms at all: only normalized equality matches.
    pub fn none() -> Self {
        Self::parse("").expect("empty alias file")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, AliasError> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<Self, AliasError> {
        let mut parent: BTreeMap<String, String> = BTreeMap::new();
        fn find(parent: &mut BTreeMap<String, String>, x: &str) -> String {
            let p = parent.entry(x.to_string()).or_insert_with(|| x.to_string()).clone();
            if p == x {
                return p;
            }
            let root = find(parent, &p);
            parent.insert(x.to_string(), root.clone());
            root
        }
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (a, b) = line.split_once('=').ok_or(AliasError::Syntax { line: i + 1 })?;
            let (a, b) = (normalize_header(a), normalize_header(b));
            if a.is_empty() || b.is_empty() {
                return Err(AliasError::Syntax { line: i + 1 });
            }
            let (ra, rb) = (find(&mut parent, &a), find(&mut parent, &b));
            // Smallest member represents the class, independent of line order.
            let (keep, drop) = if ra <= rb { (ra, rb) } else { (rb, ra) };
            parent.insert(drop, keep);
        }
        let keys: Vec<String> = parent.keys().cloned().collect();
        let classes = keys.into_iter().map(|k| {
            let root = find(&mut parent, &k);
            (k, root)
        }).collect();
        let hash = hex::encode(Sha256::digest(text.as_bytes()));
        Ok(Self { classes, hash })
    }

    /// SHA-256 of the source text; reported alongside alignment results.
    pub fn hash(&self) -> &str {
        &self.hash
    }

    /// Canonical key of a header: the class representative of its normalized
    /// form, or the normalized form itself.
    pub fn key(&self, header: &str) -> String {
        let n = normalize_header(header);
        self.classes.get(&n).cloned().unwrap_or(n)
    }

    pub fn equivalent(&self, a: &str, b: &str) -> bool {
        self.key(a) == self.key(b)
    }
}
