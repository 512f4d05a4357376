//! Table schemas: table name to row and column header lists.

use std::collections::HashSet;

use serde_json::{Map, Value};
use thiserror::Error;

use crate::normalize::normalize_header;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SchemaError {
    #[error("no schema-shaped JSON object found")]
    SchemaNotFound,
    #[error("schema object has invalid shape: {0}")]
    SchemaShapeInvalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SchemaEntry {
    pub row_headers: Vec<String>,
    pub column_headers: Vec<String>,
}

impl SchemaEntry {
    /// Builds an entry, dropping headers that duplicate an earlier one after
    /// normalization.
    pub fn new(row_headers: Vec<String>, column_headers: Vec<String>) -> Self {
        Self { row_headers: dedup(row_headers), column_headers: dedup(column_headers) }
    }
}

fn dedup(headers: Vec<String>) -> Vec<String> {
    let mut seen = HashSet::new();
    headers
        .into_iter()
        .map(|h| h.trim().to_string())
        .filter(|h| !h.is_empty() && seen.insert(normalize_header(h)))
        .collect()
}

/// Ordered map of table name to headers.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Schema {
    pub entries: Vec<(String, SchemaEntry)>,
}

impl Schema {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, name: &str) -> Option<&SchemaEntry> {
        let key = normalize_header(name);
        self.entries.iter().find(|(n, _)| normalize_header(n) == key).map(|(_, e)| e)
    }

    /// Inserts or replaces (by normalized name) an entry, keeping its position.
    pub fn insert(&mut self, name: impl Into<String>, entry: SchemaEntry) {
        let name = name.into();
        let key = normalize_header(&name);
        match self.entries.iter_mut().find(|(n, _)| normalize_header(n) == key) {
            Some(slot) => slot.1 = entry,
            None => self.entries.push((name, entry)),
        }
    }

    pub fn table_names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    pub fn to_json(&self) -> Value {
        let mut map = Map::new();
        for (name, e) in &self.entries {
            let mut inner = Map::new();
            inner.insert("row_headers".into(), Value::from(e.row_headers.clone()));
            inner.insert("column_headers".into(), Value::from(e.column_headers.clone()));
            map.insert(name.clone(), Value::Object(inner));
        }
        Value::Object(map)
    }

    /// Indented JSON, as substituted into prompts.
    pub fn to_pretty_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("schema json always serializes")
    }

    fn from_object(obj: &Map<String, Value>) -> Result<Self, SchemaError> {
        let mut schema = Schema::new();
        for (name, v) in obj {
            let inner = v.as_object().expect("shape checked by caller");
            let rows = string_list(inner.get("row_headers"), name, "row_headers")?;
            let cols = string_list(
                inner.get("column_headers").or_else(|| inner.get("col_headers")),
                name,
                "column_headers",
            )?;
            let name = crate::table::clean_heading(name);
            if name.is_empty() {
                return Err(SchemaError::SchemaShapeInvalid("empty table name".into()));
            }
            schema.insert(name, SchemaEntry::new(rows, cols));
        }
        Ok(schema)
    }
}

fn string_list(v: Option<&Value>, table: &str, key: &str) -> Result<Vec<String>, SchemaError> {
    let invalid = || SchemaError::SchemaShapeInvalid(format!("{table}.{key} is not a list of strings"));
    let items = v.and_then(Value::as_array).ok_or_else(invalid)?;
    items
        .iter()
        .map(|x| match x {
            Value::String(s) => Ok(s.clone()),
            // Bare numbers show up as headers (years, jersey numbers).
            Value::Number(n) => Ok(n.to_string()),
            _ => Err(invalid()),
        })
        .collect()
}

fn has_schema_keys(obj: &Map<String, Value>) -> bool {
    !obj.is_empty()
        && obj.values().all(|v| {
            v.as_object().is_some_and(|inner| {
                inner.contains_key("row_headers")
                    && (inner.contains_key("column_headers") || inner.contains_key("col_headers"))
            })
        })
}

/// Spans of top-level `{ ... }` groups, ignoring braces inside strings.
fn object_spans(text: &str) -> Vec<&str> {
    let mut spans = Vec::new();
    let mut depth = 0usize;
    let mut start = 0;
    let mut in_str = false;
    let mut escaped = false;
    for (i, ch) in text.char_indices() {
        if in_str {
            match ch {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => in_str = false,
                _ => {}
            }
            continue;
        }
        match ch {
            '"' if depth > 0 => in_str = true,
            '{' => {
                if depth == 0 {
                    start = i;
                }
                depth += 1;
            }
            '}' if depth > 0 => {
                depth -= 1;
                if depth == 0 {
                    spans.push(&text[start..=i]);
                }
            }
            _ => {}
        }
    }
    spans
}

/// Fixes the two defects seen in model output: missing commas between
/// adjacent values and trailing commas before a closing bracket.
fn repair_json(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 8);
    let mut in_str = false;
    let mut escaped = false;
    // Last non-whitespace character emitted outside strings, with its byte offset in `out`.
    let mut last: Option<(char, usize)> = None;
    for ch in s.chars() {
        if in_str {
            out.push(ch);
            match ch {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => {
                    in_str = false;
                    last = Some(('"', out.len() - 1));
                }
                _ => {}
            }
            continue;
        }
        if ch.is_whitespace() {
            out.push(ch);
            continue;
        }
        let ends_value = |c: char| matches!(c, '}' | ']' | '"') || c.is_ascii_alphanumeric();
        match ch {
            '}' | ']' => {
                if let Some((',', pos)) = last {
                    out.remove(pos);
                }
            }
            '"' | '{' | '[' => {
                if let Some((c, _)) = last {
                    if ends_value(c) {
                        out.push(',');
                    }
                }
            }
            _ => {}
        }
        out.push(ch);
        if ch == '"' {
            in_str = true;
        } else {
            last = Some((ch, out.len() - ch.len_utf8()));
        }
    }
    out
}

/// Extracts the last schema-shaped JSON object from free text.
///
/// Every top-level value must carry `row_headers` and `column_headers` (or
/// `col_headers`). Objects that fail strict JSON parsing are retried after
/// comma repair.
pub fn parse_schema_json(text: &str) -> Result<Schema, SchemaError> {
    for span in object_spans(text).into_iter().rev() {
        let value = serde_json::from_str::<Value>(span)
            .or_else(|_| serde_json::from_str::<Value>(&repair_json(span)));
        let Ok(Value::Object(obj)) = value else { continue };
        if has_schema_keys(&obj) {
            return Schema::from_object(&obj);
        }
    }
    Err(SchemaError::SchemaNotFound)
}
