//! Tuple and header coverage: each source item scores its best match on the
//! target side (targets may be reused), and the scores are averaged.

use serde::{Deserialize, Serialize};

use crate::metrics::similarity::Similarity;
use crate::metrics::MetricError;
use crate::table::{extract_tuples, ContentTuple, TableSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    /// Gold items looked up in the prediction: recall / completeness.
    GoldToPred,
    /// Predicted items looked up in gold: precision / correctness.
    PredToGold,
}

/// Mean over source strings of the best similarity to any target string.
/// `sim.score` always receives (gold side, pred side).
pub fn string_coverage(gold: &[String], pred: &[String], sim: &Similarity, dir: Direction) -> Result<f64, MetricError> {
    let (src, tgt) = match dir {
        Direction::GoldToPred => (gold, pred),
        Direction::PredToGold => (pred, gold),
    };
    if src.is_empty() {
        return Err(MetricError::EmptySourceSide);
    }
    let total: f64 = src
        .iter()
        .map(|s| {
            tgt.iter()
                .map(|t| match dir {
                    Direction::GoldToPred => sim.score(s, t),
                    Direction::PredToGold => sim.score(t, s),
                })
                .fold(0.0, f64::max)
        })
        .sum();
    Ok(total / src.len() as f64)
}

pub fn tuple_coverage(gold: &[ContentTuple], pred: &[ContentTuple], sim: &Similarity, dir: Direction) -> Result<f64, MetricError> {
    let g: Vec<String> = gold.iter().map(ContentTuple::similarity_string).collect();
    let p: Vec<String> = pred.iter().map(ContentTuple::similarity_string).collect();
    string_coverage(&g, &p, sim, dir)
}

pub fn header_coverage(gold: &[String], pred: &[String], sim: &Similarity, dir: Direction) -> Result<f64, MetricError> {
    string_coverage(gold, pred, sim, dir)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub fn new(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        Self { precision, recall, f1 }
    }

    /// Component-wise mean; `f1` is the mean of the per-item F1 values.
    pub fn mean<'a>(items: impl IntoIterator<Item = &'a Prf>) -> Prf {
        let mut n = 0usize;
        let mut acc = Prf::default();
        for p in items {
            acc.precision += p.precision;
            acc.recall += p.recall;
            acc.f1 += p.f1;
            n += 1;
        }
        if n == 0 {
            return acc;
        }
        let n = n as f64;
        Prf { precision: acc.precision / n, recall: acc.recall / n, f1: acc.f1 / n }
    }
}

/// Coverage at cell, row-header and column-header level for one kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub kind: String,
    pub cell: Prf,
    pub row: Prf,
    pub col: Prf,
}

/// The strings compared by [`coverage_report`], for prefetching embeddings.
pub struct CoverageInputs {
    pub cells: Vec<String>,
    pub rows: Vec<String>,
    pub cols: Vec<String>,
}

impl CoverageInputs {
    /// Tuples of filled cells and the row/column headers, pooled over all
    /// tables of the set.
    pub fn of(ts: &TableSet) -> Self {
        let mut cells = Vec::new();
        let mut rows = Vec::new();
        let mut cols = Vec::new();
        for t in ts.iter() {
            cells.extend(extract_tuples(t, false).iter().map(ContentTuple::similarity_string));
            rows.extend(t.row_headers().map(str::to_string));
            cols.extend(t.column_headers.iter().cloned());
        }
        Self { cells, rows, cols }
    }

    pub fn all_strings(&self) -> impl Iterator<Item = String> + '_ {
        self.cells.iter().chain(&self.rows).chain(&self.cols).cloned()
    }
}

/// Precision/recall for one level. Two empty sides agree perfectly; one empty
/// side scores 0 in both directions.
fn level(gold: &[String], pred: &[String], sim: &Similarity) -> Prf {
    match (gold.is_empty(), pred.is_empty()) {
        (true, true) => Prf::new(1.0, 1.0),
        (true, false) | (false, true) => Prf::new(0.0, 0.0),
        (false, false) => {
            let r = string_coverage(gold, pred, sim, Direction::GoldToPred).expect("gold side is non-empty");
            let p = string_coverage(gold, pred, sim, Direction::PredToGold).expect("pred side is non-empty");
            Prf::new(p, r)
        }
    }
}

pub fn coverage_report(gold: &TableSet, pred: &TableSet, sim: &Similarity) -> CoverageReport {
    let g = CoverageInputs::of(gold);
    let p = CoverageInputs::of(pred);
    CoverageReport {
        kind: sim.kind.label().to_string(),
        cell: level(&g.cells, &p.cells, sim),
        row: level(&g.rows, &p.rows, sim),
        col: level(&g.cols, &p.cols, sim),
    }
}
