//! RMSE and error rate over Livesum count tables.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::analysis::{align_table, Aliases, Matcher};
use crate::dataset::{Difficulty, LivesumEvent, LIVESUM_ROWS};
use crate::metrics::MetricError;
use crate::normalize::normalize_header;
use crate::table::Table;

/// Squared-error statistics over one subset of cells.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SplitStats {
    pub n: usize,
    pub sse: f64,
    pub rmse: f64,
}

impl SplitStats {
    fn push(&mut self, err: f64) {
        self.n += 1;
        self.sse += err * err;
    }

    fn finish(&mut self) {
        self.rmse = if self.n == 0 { 0.0 } else { (self.sse / self.n as f64).sqrt() };
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DifficultyStats {
    pub n_cells: usize,
    pub rmse: f64,
    pub error_rate_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NumericReport {
    pub n_cells: usize,
    pub rmse: f64,
    pub error_rate_pct: f64,
    pub sse: f64,
    pub per_difficulty: BTreeMap<Difficulty, DifficultyStats>,
    /// Cells where the prediction exceeds gold.
    pub over: SplitStats,
    /// Cells where the prediction falls short of gold.
    pub under: SplitStats,
    /// Gold cells with no counterpart in the prediction, read as 0.
    pub missing_cells: usize,
    /// Predicted cells that are not integers, read as 0.
    pub non_numeric_cells: usize,
}

/// Checks that `gold` has exactly the two team rows and the eight event
/// columns with integer cells, and returns each column's difficulty.
pub fn livesum_columns(gold: &Table) -> Result<Vec<Difficulty>, MetricError> {
    let bad = |why: String| MetricError::NotLivesumShaped(why);
    let mut rows: Vec<String> = gold.row_headers().map(normalize_header).collect();
    rows.sort();
    let mut want: Vec<String> = LIVESUM_ROWS.iter().map(|r| normalize_header(r)).collect();
    want.sort();
    if rows != want {
        return Err(bad(format!("rows must be {LIVESUM_ROWS:?}")));
    }
    let mut seen = Vec::new();
    let mut diffs = Vec::new();
    for c in &gold.column_headers {
        let ev = LivesumEvent::from_header(c).ok_or_else(|| bad(format!("unknown event column {c:?}")))?;
        if seen.contains(&ev) {
            return Err(bad(format!("duplicate event column {c:?}")));
        }
        seen.push(ev);
        diffs.push(ev.difficulty());
    }
    if seen.len() != LivesumEvent::ALL.len() {
        return Err(bad(format!("expected {} event columns, found {}", LivesumEvent::ALL.len(), seen.len())));
    }
    for r in &gold.rows {
        if let Some(c) = r.cells.iter().find(|c| c.as_integer().is_none()) {
            return Err(bad(format!("non-integer gold cell {c} in row {}", r.header)));
        }
    }
    Ok(diffs)
}

/// One flattened cell: gold count, predicted count, column difficulty.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CountCell {
    pub gold: i64,
    pub pred: i64,
    pub difficulty: Difficulty,
}

/// RMSE, error rate and the difficulty and over/under splits of a flattened
/// cell sequence. An empty sequence scores 0 everywhere.
pub fn score_cells(cells: &[CountCell]) -> NumericReport {
    let mut rep = NumericReport::default();
    let mut wrong = 0usize;
    let mut per: BTreeMap<Difficulty, (SplitStats, usize)> = Difficulty::ALL.iter().map(|d| (*d, Default::default())).collect();
    for c in cells {
        let err = (c.pred - c.gold) as f64;
        rep.n_cells += 1;
        rep.sse += err * err;
        let slot = per.get_mut(&c.difficulty).expect("all difficulties present");
        slot.0.push(err);
        if c.pred != c.gold {
            wrong += 1;
            slot.1 += 1;
        }
        if c.pred > c.gold {
            rep.over.push(err);
        } else if c.pred < c.gold {
            rep.under.push(err);
        }
    }
    if rep.n_cells > 0 {
        rep.rmse = (rep.sse / rep.n_cells as f64).sqrt();
        rep.error_rate_pct = 100.0 * wrong as f64 / rep.n_cells as f64;
    }
    rep.over.finish();
    rep.under.finish();
    rep.per_difficulty = per
        .into_iter()
        .map(|(d, (mut s, w))| {
            s.finish();
            let er = if s.n == 0 { 0.0 } else { 100.0 * w as f64 / s.n as f64 };
            (d, DifficultyStats { n_cells: s.n, rmse: s.rmse, error_rate_pct: er })
        })
        .collect();
    rep
}

/// Aligns `pred` onto `gold` with the deterministic matcher, then scores the
/// cells flattened row-major. Absent or non-integer predictions count as 0.
pub fn numeric_eval(gold: &Table, pred: &Table, aliases: &Aliases) -> Result<NumericReport, MetricError> {
    let diffs = livesum_columns(gold)?;
    let (mapped, ..) = align_table(gold, pred, &Matcher::Deterministic(aliases));
    let (mut missing, mut non_numeric) = (0, 0);
    let mut cells = Vec::with_capacity(gold.cell_count());
    for (grow, prow) in gold.rows.iter().zip(&mapped.rows) {
        for ((g, p), d) in grow.cells.iter().zip(&prow.cells).zip(&diffs) {
            let pred = if p.is_absent() {
                missing += 1;
                0
            } else {
                p.as_integer().unwrap_or_else(|| {
                    non_numeric += 1;
                    0
                })
            };
            cells.push(CountCell { gold: g.as_integer().expect("validated above"), pred, difficulty: *d });
        }
    }
    let mut rep = score_cells(&cells);
    rep.missing_cells = missing;
    rep.non_numeric_cells = non_numeric;
    Ok(rep)
}
