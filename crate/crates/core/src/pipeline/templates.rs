//! Prompt templates, addressed as `<strategy>/<stage>` and rendered with
//! `{{placeholder}}` substitution.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

macro_rules! builtin {
    ($($key:literal),* $(,)?) => {
        &[$(($key, include_str!(concat!("../../prompts/", $key, ".txt")))),*]
    };
}

const BUILTIN: &[(&str, &str)] = builtin![
    "cot0/tables",
    "cot1/tables",
    "t3/tuples",
    "t3/tuples_counting",
    "t3/tables",
    "t3/tables_counting",
    "t3d/tables",
    "mm-3s/atomize",
    "mm-3s/schema",
    "mm-3s/schema_direct",
    "mm-3s/table",
    "mm-3s/table_direct",
    "mm-u/preamble",
    "autoqa/generate",
    "autoqa/answer",
    "autoqa/judge",
    "tabeval/entail",
    "align/match",
];

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("no template {0:?}")]
    Missing(String),
    #[error("template {template:?} uses {{{{{name}}}}} but no value was supplied")]
    Unbound { template: String, name: String },
    #[error("reading templates from {path}: {source}")]
    Io { path: String, source: io::Error },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    entries: BTreeMap<String, String>,
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self::builtin()
    }
}

impl TemplateSet {
    /// The shipped defaults.
    pub fn builtin() -> Self {
        let entries = BUILTIN.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        Self { entries }
    }

    /// The shipped defaults, overridden by every `<dir>/<strategy>/<stage>.txt`.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self, TemplateError> {
        let dir = dir.as_ref();
        let io_err = |p: &Path| {
            let path = p.display().to_string();
            move |source| TemplateError::Io { path, source }
        };
        let mut set = Self::builtin();
        for strategy in fs::read_dir(dir).map_err(io_err(dir))? {
            let strategy = strategy.map_err(io_err(dir))?.path();
            if !strategy.is_dir() {
                continue;
            }
            for stage in fs::read_dir(&strategy).map_err(io_err(&strategy))? {
                let path = stage.map_err(io_err(&strategy))?.path();
                if path.extension().is_none_or(|e| e != "txt") {
                    continue;
                }
                let (Some(s), Some(t)) = (
                    strategy.file_name().and_then(|n| n.to_str()),
                    path.file_stem().and_then(|n| n.to_str()),
                ) else {
                    continue;
                };
                let text = fs::read_to_string(&path).map_err(io_err(&path))?;
                set.entries.insert(format!("{s}/{t}"), text);
            }
        }
        Ok(set)
    }

    /// Writes every template under `dir` in the same layout `load_dir` reads.
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> io::Result<()> {
        for (key, text) in &self.entries {
            let path = dir.as_ref().join(format!("{key}.txt"));
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::write(path, text)?;
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Result<&str, TemplateError> {
        self.entries.get(key).map(String::as_str).ok_or_else(|| TemplateError::Missing(key.into()))
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn insert(&mut self, key: impl Into<String>, text: impl Into<String>) {
        self.entries.insert(key.into(), text.into());
    }

    pub fn render(&self, key: &str, vars: &[(&str, &str)]) -> Result<String, TemplateError> {
        render_str(key, self.get(key)?, vars)
    }

    /// SHA-256 over every key and text, in key order.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in &self.entries {
            h.update(k.as_bytes());
            h.update([0]);
            h.update(v.as_bytes());
            h.update([0]);
        }
        hex::encode(h.finalize())
    }
}

/// Replaces `{{name}}` tokens in one pass; substituted text is not rescanned,
/// so inputs containing braces pass through untouched.
pub fn render_str(label: &str, template: &str, vars: &[(&str, &str)]) -> Result<String, TemplateError> {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(start) = rest.find("{{") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        let name_len = after
            .find("}}")
            .filter(|&end| {
                end > 0 && after[..end].bytes().all(|b| b.is_ascii_lowercase() || b == b'_')
            });
        match name_len {
            Some(end) => {
                let name = &after[..end];
                let value = vars
                    .iter()
                    .find(|(k, _)| *k == name)
                    .map(|(_, v)| *v)
                    .ok_or_else(|| TemplateError::Unbound { template: label.into(), name: name.into() })?;
                out.push_str(value);
                rest = &after[end + 2..];
            }
            None => {
                out.push_str("{{");
                rest = after;
            }
        }
    }
    out.push_str(rest);
    Ok(out)
}

/// Drops a trailing `**Input**:` section so stage instructions can be
/// concatenated into one prompt.
pub fn strip_input_section(template: &str) -> &str {
    let mut offset = 0;
    let mut cut = None;
    for line in template.split_inclusive('\n') {
        if line.trim_start().starts_with("**Input**:") {
            cut = Some(offset);
        }
        offset += line.len();
    }
    template[..cut.unwrap_or(template.len())].trim_end()
}
