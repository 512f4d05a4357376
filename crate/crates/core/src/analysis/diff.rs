//! Cell-level diff between two versions of the same gold tables.
//!
//! Tables and headers are paired with the deterministic matcher and the diff
//! runs over the union grid. A cell filled in `a` but empty or missing in `b`
//! is hallucinated; the reverse is missing. A cell filled in both with
//! different values counts as both. A row or column is flagged when it holds
//! at least one such cell.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::analysis::align::match_headers;
use crate::analysis::aliases::Aliases;
use crate::table::{CellValue, Table, TableSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DiffCounts {
    pub hallucinated_cells: usize,
    pub missing_cells: usize,
    pub hallucinated_rows: usize,
    pub missing_rows: usize,
    pub hallucinated_cols: usize,
    pub missing_cols: usize,
}

impl DiffCounts {
    pub fn is_zero(&self) -> bool {
        *self == Self::default()
    }

    pub fn add(&mut self, o: &DiffCounts) {
        self.hallucinated_cells += o.hallucinated_cells;
        self.missing_cells += o.missing_cells;
        self.hallucinated_rows += o.hallucinated_rows;
        self.missing_rows += o.missing_rows;
        self.hallucinated_cols += o.hallucinated_cols;
        self.missing_cols += o.missing_cols;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableDiff {
    /// Name in `a` when present there, else the name in `b`.
    pub table: String,
    #[serde(flatten)]
    pub counts: DiffCounts,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DiffReport {
    pub tables: Vec<TableDiff>,
    pub totals: DiffCounts,
}

const EMPTY: CellValue = CellValue::Absent;

/// Diffs `a` (source version) against `b` (target version).
pub fn diff_table_sets(a: &TableSet, b: &TableSet, aliases: &Aliases) -> DiffReport {
    let names_a: Vec<&str> = a.iter().map(|t| t.name.as_str()).collect();
    let names_b: Vec<&str> = b.iter().map(|t| t.name.as_str()).collect();
    let pairs = match_headers(&names_a, &names_b, aliases);
    let mut report = DiffReport::default();
    let mut push = |table: &str, counts: DiffCounts| {
        report.totals.add(&counts);
        report.tables.push(TableDiff { table: table.to_string(), counts });
    };
    for (ai, ta) in a.iter().enumerate() {
        let tb = pairs.iter().find(|p| p.0 == ai).map(|p| &b.tables[p.1]);
        push(&ta.name, diff_tables(Some(ta), tb, aliases));
    }
    for (bi, tb) in b.iter().enumerate() {
        if !pairs.iter().any(|p| p.1 == bi) {
            push(&tb.name, diff_tables(None, Some(tb), aliases));
        }
    }
    report
}

fn diff_tables(a: Option<&Table>, b: Option<&Table>, aliases: &Aliases) -> DiffCounts {
    let (rows_a, cols_a) = headers(a);
    let (rows_b, cols_b) = headers(b);
    // Union grid axes as (index in a, index in b).
    let axis = |xa: &[&str], xb: &[&str]| -> Vec<(Option<usize>, Option<usize>)> {
        let m = match_headers(xa, xb, aliases);
        let mut out: Vec<_> = (0..xa.len()).map(|i| (Some(i), m.iter().find(|p| p.0 == i).map(|p| p.1))).collect();
        out.extend((0..xb.len()).filter(|j| !m.iter().any(|p| p.1 == *j)).map(|j| (None, Some(j))));
        out
    };
    let rows = axis(&rows_a, &rows_b);
    let cols = axis(&cols_a, &cols_b);

    let mut counts = DiffCounts::default();
    let (mut h_rows, mut m_rows, mut h_cols, mut m_cols) = (BTreeSet::new(), BTreeSet::new(), BTreeSet::new(), BTreeSet::new());
    for (ri, &(ra, rb)) in rows.iter().enumerate() {
        for (ci, &(ca, cb)) in cols.iter().enumerate() {
            let (va, vb) = (cell(a, ra, ca), cell(b, rb, cb));
            if va == vb {
                continue;
            }
            if !va.is_absent() {
                counts.hallucinated_cells += 1;
                h_rows.insert(ri);
                h_cols.insert(ci);
            }
            if !vb.is_absent() {
                counts.missing_cells += 1;
                m_rows.insert(ri);
                m_cols.insert(ci);
            }
        }
    }
    counts.hallucinated_rows = h_rows.len();
    counts.missing_rows = m_rows.len();
    counts.hallucinated_cols = h_cols.len();
    counts.missing_cols = m_cols.len();
    counts
}

fn headers(t: Option<&Table>) -> (Vec<&str>, Vec<&str>) {
    t.map(|t| (t.row_headers().collect(), t.column_headers.iter().map(String::as_str).collect()))
        .unwrap_or_default()
}

fn cell(t: Option<&Table>, r: Option<usize>, c: Option<usize>) -> &CellValue {
    match (t, r, c) {
        (Some(t), Some(r), Some(c)) => &t.rows[r].cells[c],
        _ => &EMPTY,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::{parse_table_blocks, ParseMode};

    fn ts(s: &str) -> TableSet {
        parse_table_blocks(s, ParseMode::Strict).unwrap().tables
    }

    const A: &str = "### Team\n| Team | Wins | Losses |\n| Thunder | 16 | 17 |\n| Suns | 18 | None |\n| Heat | 1 | 2 |";

    #[test]
    fn identical_is_zero() {
        let a = ts(A);
        let d = diff_table_sets(&a, &a, &Aliases::builtin());
        assert!(d.totals.is_zero());
        assert_eq!(d.tables.len(), 1);
    }

    #[test]
    fn added_column() {
        let a = ts(A);
        let b = ts("### Team\n| Team | Wins | Losses | Points |\n| Thunder | 16 | 17 | 1 |\n| Suns | 18 | None | 2 |\n| Heat | 1 | 2 | 3 |");
        let d = diff_table_sets(&a, &b, &Aliases::none()).totals;
        assert_eq!((d.missing_cells, d.missing_cols, d.hallucinated_cells), (3, 1, 0));
        assert_eq!(d.missing_rows, 3);
    }

    #[test]
    fn changed_value_counts_both_ways() {
        let a = ts(A);
        let b = ts("### Team\n| Team | Wins | Losses |\n| Thunder | 16 | 18 |\n| Suns | 18 | None |\n| Heat | 1 | 2 |");
        let d = diff_table_sets(&a, &b, &Aliases::none()).totals;
        assert_eq!((d.hallucinated_cells, d.missing_cells, d.hallucinated_rows, d.missing_cols), (1, 1, 1, 1));
    }

    #[test]
    fn unpaired_tables_count_fully() {
        let a = ts(&format!("{A}\n\n### Player\n| Player | Points |\n| X | 3 |\n| Y | None |"));
        let b = ts(A);
        let d = diff_table_sets(&a, &b, &Aliases::none());
        assert_eq!(d.tables[1].table, "Player");
        assert_eq!(d.tables[1].counts.hallucinated_cells, 1);
        assert_eq!(d.tables[1].counts.hallucinated_rows, 1);
        let r = diff_table_sets(&b, &a, &Aliases::none());
        assert_eq!(r.totals.missing_cells, 1);
    }
}
