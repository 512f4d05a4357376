//! Tables, the pipe-delimited wire grammar, and the canonical JSON form.
//!
//! Wire grammar, as produced and consumed by the prompts:
//!
//! ```text
//! ### Team
//! | Team | Wins | Losses | Total Points |
//! | Thunder | 16 | 17 | None |
//! ```
//!
//! The first header cell labels the row-header column and is not a column
//! header. Empty cells are written `None`.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::normalize::normalize_header;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub enum CellValue {
    #[default]
    Absent,
    Text(String),
}

/// Numeric reading of a cell: optional sign, digits, optional decimal part,
/// optional trailing `%`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Numeric {
    pub value: f64,
    pub integer: Option<i64>,
    pub percent: bool,
}

impl CellValue {
    /// Reads a wire cell: empty or any casing of `none` is [`CellValue::Absent`].
    pub fn parse(raw: &str) -> Self {
        let t = raw.trim();
        if t.is_empty() || t.eq_ignore_ascii_case("none") {
            CellValue::Absent
        } else {
            CellValue::Text(t.to_string())
        }
    }

    pub fn text(s: impl Into<String>) -> Self {
        CellValue::Text(s.into())
    }

    pub fn is_absent(&self) -> bool {
        matches!(self, CellValue::Absent)
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            CellValue::Absent => None,
            CellValue::Text(s) => Some(s),
        }
    }

    /// The exact wire spelling.
    pub fn wire(&self) -> &str {
        self.as_text().unwrap_or("None")
    }

    pub fn numeric(&self) -> Option<Numeric> {
        parse_numeric(self.as_text()?)
    }

    pub fn as_integer(&self) -> Option<i64> {
        self.numeric().and_then(|n| n.integer)
    }
}

impl fmt::Display for CellValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.wire())
    }
}

fn parse_numeric(s: &str) -> Option<Numeric> {
    let s = s.trim();
    let (body, percent) = match s.strip_suffix('%') {
        Some(b) => (b.trim_end(), true),
        None => (s, false),
    };
    let digits = body.strip_prefix(['+', '-']).unwrap_or(body);
    let (int_part, frac_part) = match digits.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (digits, None),
    };
    let all_digits = |p: &str| p.bytes().all(|b| b.is_ascii_digit());
    let valid = match frac_part {
        None => !int_part.is_empty() && all_digits(int_part),
        Some(f) => {
            all_digits(int_part) && all_digits(f) && !(int_part.is_empty() && f.is_empty())
        }
    };
    if !valid {
        return None;
    }
    let value: f64 = body.parse().ok()?;
    let integer = if frac_part.is_none() { body.parse::<i64>().ok() } else { None };
    Some(Numeric { value, integer, percent })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Row {
    pub header: String,
    pub cells: Vec<CellValue>,
}

impl Row {
    pub fn new(header: impl Into<String>, cells: Vec<CellValue>) -> Self {
        Self { header: header.into(), cells }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TableError {
    #[error("no `###` table block with a header row found")]
    NoTablesFound,
    #[error("table {table}: row {row:?} has {found} cells, expected {expected}")]
    RowArityMismatch { table: String, row: String, expected: usize, found: usize },
    #[error("table {table}: duplicate row header {row:?}")]
    DuplicateRowHeader { table: String, row: String },
    #[error("duplicate table name {0:?}")]
    DuplicateTableName(String),
    #[error("table {table}: empty column header at position {index}")]
    EmptyColumnHeader { table: String, index: usize },
    #[error("table {0}: empty row header")]
    EmptyRowHeader(String),
}

/// A named grid: one row-header column plus `column_headers.len()` attribute
/// columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "JsonTable", into = "JsonTable")]
pub struct Table {
    pub name: String,
    /// Label of the row-header column (the first header cell on the wire).
    pub row_label: String,
    pub column_headers: Vec<String>,
    pub rows: Vec<Row>,
}

impl Table {
    pub fn new(
        name: impl Into<String>,
        row_label: impl Into<String>,
        column_headers: Vec<String>,
        rows: Vec<Row>,
    ) -> Result<Self, TableError> {
        let t = Self {
            name: name.into(),
            row_label: row_label.into(),
            column_headers,
            rows,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), TableError> {
        if let Some(index) = self.column_headers.iter().position(|c| c.trim().is_empty()) {
            return Err(TableError::EmptyColumnHeader { table: self.name.clone(), index });
        }
        let mut seen = HashSet::new();
        for row in &self.rows {
            if row.header.trim().is_empty() {
                return Err(TableError::EmptyRowHeader(self.name.clone()));
            }
            if row.cells.len() != self.column_headers.len() {
                return Err(TableError::RowArityMismatch {
                    table: self.name.clone(),
                    row: row.header.clone(),
                    expected: self.column_headers.len(),
                    found: row.cells.len(),
                });
            }
            if !seen.insert(normalize_header(&row.header)) {
                return Err(TableError::DuplicateRowHeader {
                    table: self.name.clone(),
                    row: row.header.clone(),
                });
            }
        }
        Ok(())
    }

    pub fn row_headers(&self) -> impl Iterator<Item = &str> {
        self.rows.iter().map(|r| r.header.as_str())
    }

    pub fn column_index(&self, header: &str) -> Option<usize> {
        let key = normalize_header(header);
        self.column_headers.iter().position(|c| normalize_header(c) == key)
    }

    pub fn row_index(&self, header: &str) -> Option<usize> {
        let key = normalize_header(header);
        self.rows.iter().position(|r| normalize_header(&r.header) == key)
    }

    /// Cell lookup by normalized row and column header.
    pub fn get(&self, row: &str, col: &str) -> Option<&CellValue> {
        let c = self.column_index(col)?;
        let r = self.row_index(row)?;
        self.rows[r].cells.get(c)
    }

    pub fn cell_count(&self) -> usize {
        self.rows.len() * self.column_headers.len()
    }

    pub fn filled_cell_count(&self) -> usize {
        self.rows.iter().flat_map(|r| &r.cells).filter(|c| !c.is_absent()).count()
    }

    /// Rewrites the table into the form the wire grammar can carry exactly:
    /// no `|` or line breaks, trimmed text, `None`/empty cells as Absent.
    pub fn canonicalize(&mut self) {
        self.name = canonical_name(&self.name);
        self.row_label = canonical_text(&self.row_label);
        for c in &mut self.column_headers {
            *c = canonical_text(c);
        }
        for row in &mut self.rows {
            row.header = canonical_text(&row.header);
            for cell in &mut row.cells {
                if let CellValue::Text(s) = cell {
                    *cell = CellValue::parse(&canonical_text(s));
                }
            }
        }
    }
}

fn canonical_text(s: &str) -> String {
    s.replace(['|'], "/")
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

fn canonical_name(s: &str) -> String {
    clean_heading(&canonical_text(s))
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<Table>", into = "Vec<Table>")]
pub struct TableSet {
    pub tables: Vec<Table>,
}

impl TableSet {
    pub fn new(tables: Vec<Table>) -> Result<Self, TableError> {
        let mut seen = HashSet::new();
        for t in &tables {
            t.validate()?;
            if !seen.insert(normalize_header(&t.name)) {
                return Err(TableError::DuplicateTableName(t.name.clone()));
            }
        }
        Ok(Self { tables })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }

    pub fn len(&self) -> usize {
        self.tables.len()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Table> {
        self.tables.iter()
    }

    /// Lookup by normalized table name.
    pub fn get(&self, name: &str) -> Option<&Table> {
        let key = normalize_header(name);
        self.tables.iter().find(|t| normalize_header(&t.name) == key)
    }

    pub fn canonicalize(&mut self) {
        self.tables.iter_mut().for_each(Table::canonicalize);
    }
}

impl TryFrom<Vec<Table>> for TableSet {
    type Error = TableError;

    fn try_from(tables: Vec<Table>) -> Result<Self, Self::Error> {
        TableSet::new(tables)
    }
}

impl From<TableSet> for Vec<Table> {
    fn from(ts: TableSet) -> Self {
        ts.tables
    }
}

impl<'a> IntoIterator for &'a TableSet {
    type Item = &'a Table;
    type IntoIter = std::slice::Iter<'a, Table>;

    fn into_iter(self) -> Self::IntoIter {
        self.tables.iter()
    }
}

#[derive(Serialize, Deserialize)]
struct JsonRow {
    header: String,
    cells: Vec<Option<String>>,
}

#[derive(Serialize, Deserialize)]
struct JsonTable {
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    row_label: Option<String>,
    columns: Vec<String>,
    rows: Vec<JsonRow>,
}

impl TryFrom<JsonTable> for Table {
    type Error = TableError;

    fn try_from(j: JsonTable) -> Result<Self, Self::Error> {
        let rows = j
            .rows
            .into_iter()
            .map(|r| {
                let cells = r
                    .cells
                    .into_iter()
                    .map(|c| c.map_or(CellValue::Absent, |s| CellValue::parse(&s)))
                    .collect();
                Row::new(r.header, cells)
            })
            .collect();
        let label = j.row_label.unwrap_or_else(|| j.name.clone());
        Table::new(j.name, label, j.columns, rows)
    }
}

impl From<Table> for JsonTable {
    fn from(t: Table) -> Self {
        let row_label = (t.row_label != t.name).then_some(t.row_label);
        JsonTable {
            name: t.name,
            row_label,
            columns: t.column_headers,
            rows: t
                .rows
                .into_iter()
                .map(|r| JsonRow {
                    header: r.header,
                    cells: r.cells.into_iter().map(|c| c.as_text().map(str::to_string)).collect(),
                })
                .collect(),
        }
    }
}

/// A (row header, column header, value) triple.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ContentTuple {
    pub row: String,
    pub col: String,
    pub value: String,
}

impl ContentTuple {
    pub fn new(row: impl Into<String>, col: impl Into<String>, value: impl Into<String>) -> Self {
        Self { row: row.into(), col: col.into(), value: value.into() }
    }

    /// String form used by the similarity kernels: `row | col | value`.
    pub fn similarity_string(&self) -> String {
        format!("{} | {} | {}", self.row, self.col, self.value)
    }
}

/// Row-major tuples of `t`. Absent cells are skipped unless `include_absent`,
/// in which case they appear with the value `None`.
pub fn extract_tuples(t: &Table, include_absent: bool) -> Vec<ContentTuple> {
    let mut out = Vec::new();
    for row in &t.rows {
        for (col, cell) in t.column_headers.iter().zip(&row.cells) {
            if include_absent || !cell.is_absent() {
                out.push(ContentTuple::new(&row.header, col, cell.wire()));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseMode {
    Strict,
    Lenient,
}

/// A defect repaired by lenient parsing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParseWarning {
    NoTables,
    PaddedRow { table: String, row: String, missing: usize },
    TruncatedRow { table: String, row: String, extra: usize },
    RenamedDuplicateRow { table: String, row: String, renamed: String },
    ReplacedDuplicateTable { table: String },
    FilledEmptyColumnHeader { table: String, index: usize },
    FilledEmptyRowHeader { table: String, renamed: String },
    UnnamedTable { assigned: String },
}

impl fmt::Display for ParseWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseWarning::NoTables => write!(f, "no tables found"),
            ParseWarning::PaddedRow { table, row, missing } => {
                write!(f, "{table}: row {row:?} padded with {missing} None cell(s)")
            }
            ParseWarning::TruncatedRow { table, row, extra } => {
                write!(f, "{table}: row {row:?} truncated by {extra} cell(s)")
            }
            ParseWarning::RenamedDuplicateRow { table, row, renamed } => {
                write!(f, "{table}: duplicate row {row:?} renamed to {renamed:?}")
            }
            ParseWarning::ReplacedDuplicateTable { table } => {
                write!(f, "duplicate table {table:?}: keeping the last occurrence")
            }
            ParseWarning::FilledEmptyColumnHeader { table, index } => {
                write!(f, "{table}: empty column header {index} named")
            }
            ParseWarning::FilledEmptyRowHeader { table, renamed } => {
                write!(f, "{table}: empty row header named {renamed:?}")
            }
            ParseWarning::UnnamedTable { assigned } => {
                write!(f, "table heading without a name; using {assigned:?}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parsed {
    pub tables: TableSet,
    pub warnings: Vec<ParseWarning>,
}

struct Block {
    name: String,
    header: Option<Vec<String>>,
    rows: Vec<Vec<String>>,
}

fn heading_name(line: &str) -> Option<&str> {
    let hashes = line.len() - line.trim_start_matches('#').len();
    if hashes == 0 || hashes > 6 {
        return None;
    }
    let rest = &line[hashes..];
    if !rest.is_empty() && !rest.starts_with(char::is_whitespace) {
        return None;
    }
    Some(rest)
}

/// Strips markdown emphasis and a trailing colon from a heading.
pub(crate) fn clean_heading(s: &str) -> String {
    let s = s.trim().trim_matches('*').trim();
    let s = s.trim_end_matches(':').trim_end();
    s.trim_matches('*').trim().trim_start_matches('#').trim().to_string()
}

fn split_cells(line: &str) -> Vec<String> {
    let t = line.trim();
    let t = t.strip_prefix('|').unwrap_or(t);
    let t = t.strip_suffix('|').unwrap_or(t);
    t.split('|').map(|c| c.trim().to_string()).collect()
}

fn is_alignment_row(cells: &[String]) -> bool {
    cells.iter().any(|c| !c.is_empty())
        && cells.iter().all(|c| {
            let c = c.trim_start_matches(':').trim_end_matches(':');
            c.is_empty() || c.chars().all(|ch| ch == '-')
        })
        && cells.iter().any(|c| c.contains('-'))
}

fn blocks_of(text: &str) -> Vec<Block> {
    let mut blocks: Vec<Block> = Vec::new();
    for line in text.lines() {
        let trimmed = line.trim();
        if trimmed.starts_with("```") {
            continue;
        }
        if let Some(name) = heading_name(trimmed) {
            blocks.push(Block { name: clean_heading(name), header: None, rows: Vec::new() });
            continue;
        }
        if !trimmed.contains('|') {
            continue;
        }
        let Some(block) = blocks.last_mut() else { continue };
        let cells = split_cells(trimmed);
        if is_alignment_row(&cells) {
            continue;
        }
        if block.header.is_none() {
            block.header = Some(cells);
        } else {
            block.rows.push(cells);
        }
    }
    blocks
}

fn build_table(
    block: Block,
    mode: ParseMode,
    warnings: &mut Vec<ParseWarning>,
) -> Result<Table, TableError> {
    let mut header = block.header.expect("only blocks with headers are built");
    let row_label = header.remove(0);
    let name = if block.name.is_empty() {
        let assigned = if row_label.is_empty() { "Table".to_string() } else { row_label.clone() };
        warnings.push(ParseWarning::UnnamedTable { assigned: assigned.clone() });
        assigned
    } else {
        block.name
    };
    let lenient = mode == ParseMode::Lenient;
    for (index, col) in header.iter_mut().enumerate() {
        if col.is_empty() {
            if !lenient {
                return Err(TableError::EmptyColumnHeader { table: name, index });
            }
            *col = format!("Column {}", index + 1);
            warnings.push(ParseWarning::FilledEmptyColumnHeader { table: name.clone(), index });
        }
    }
    let width = header.len();
    let mut seen = HashSet::new();
    let mut rows = Vec::with_capacity(block.rows.len());
    for (i, mut cells) in block.rows.into_iter().enumerate() {
        let mut row_header = cells.remove(0);
        if row_header.is_empty() {
            if !lenient {
                return Err(TableError::EmptyRowHeader(name));
            }
            row_header = format!("Row {}", i + 1);
            warnings.push(ParseWarning::FilledEmptyRowHeader {
                table: name.clone(),
                renamed: row_header.clone(),
            });
        }
        if cells.len() != width {
            if !lenient {
                return Err(TableError::RowArityMismatch {
                    table: name,
                    row: row_header,
                    expected: width,
                    found: cells.len(),
                });
            }
            if cells.len() < width {
                warnings.push(ParseWarning::PaddedRow {
                    table: name.clone(),
                    row: row_header.clone(),
                    missing: width - cells.len(),
                });
                cells.resize(width, String::new());
            } else {
                warnings.push(ParseWarning::TruncatedRow {
                    table: name.clone(),
                    row: row_header.clone(),
                    extra: cells.len() - width,
                });
                cells.truncate(width);
            }
        }
        if !seen.insert(normalize_header(&row_header)) {
            if !lenient {
                return Err(TableError::DuplicateRowHeader { table: name, row: row_header });
            }
            let mut k = 2;
            let renamed = loop {
                let candidate = format!("{row_header}#{k}");
                if seen.insert(normalize_header(&candidate)) {
                    break candidate;
                }
                k += 1;
            };
            warnings.push(ParseWarning::RenamedDuplicateRow {
                table: name.clone(),
                row: row_header,
                renamed: renamed.clone(),
            });
            row_header = renamed;
        }
        rows.push(Row::new(row_header, cells.iter().map(|c| CellValue::parse(c)).collect()));
    }
    Table::new(name, row_label, header, rows)
}

/// Extracts every `### <name>` block followed by pipe rows.
///
/// Prose, fenced-code markers and markdown alignment rows are skipped in both
/// modes. Headings without pipe rows (such as `### Final Output Tables:`) are
/// ignored.
pub fn parse_table_blocks(text: &str, mode: ParseMode) -> Result<Parsed, TableError> {
    let mut warnings = Vec::new();
    let mut tables: Vec<Table> = Vec::new();
    for block in blocks_of(text).into_iter().filter(|b| b.header.is_some()) {
        let table = build_table(block, mode, &mut warnings)?;
        let key = normalize_header(&table.name);
        if let Some(pos) = tables.iter().position(|t| normalize_header(&t.name) == key) {
            if mode == ParseMode::Strict {
                return Err(TableError::DuplicateTableName(table.name));
            }
            warnings.push(ParseWarning::ReplacedDuplicateTable { table: table.name.clone() });
            tables.remove(pos);
        }
        tables.push(table);
    }
    if tables.is_empty() {
        if mode == ParseMode::Strict {
            return Err(TableError::NoTablesFound);
        }
        warnings.push(ParseWarning::NoTables);
    }
    Ok(Parsed { tables: TableSet { tables }, warnings })
}

/// Emits the exact wire grammar, one blank line between tables.
pub fn serialize_table_set(ts: &TableSet) -> String {
    let mut blocks = Vec::with_capacity(ts.len());
    for t in ts {
        let mut s = format!("### {}\n", t.name);
        let mut header = vec![t.row_label.as_str()];
        header.extend(t.column_headers.iter().map(String::as_str));
        s.push_str(&pipe_row(&header));
        for row in &t.rows {
            let mut cells = vec![row.header.as_str()];
            cells.extend(row.cells.iter().map(CellValue::wire));
            s.push_str(&pipe_row(&cells));
        }
        blocks.push(s);
    }
    blocks.join("\n")
}

fn pipe_row(cells: &[&str]) -> String {
    format!("| {} |\n", cells.join(" | "))
}
