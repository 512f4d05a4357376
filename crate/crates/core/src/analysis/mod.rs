//! Error localization: alignment onto gold schemas, structural error counts,
//! version diffs and the schema-size report.

pub mod align;
pub mod aliases;
pub mod diff;

use serde::{Deserialize, Serialize};

pub use align::{
    align_table, align_to_gold, match_headers, pair_tables, AlignedResult, Axis, HeaderMapping,
    MatchMethod, Matcher, TableAlignment,
};
pub use aliases::{AliasError, Aliases};
pub use diff::{diff_table_sets, DiffCounts, DiffReport, TableDiff};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AnalysisError {
    #[error("no alignment results contain table {0:?}")]
    EmptyInput(String),
}

/// Mean structural error counts for one gold table.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ErrorCounts {
    pub samples: usize,
    pub avg_extra_rows: f64,
    pub avg_extra_cols: f64,
    pub avg_missing_rows: f64,
    pub avg_missing_cols: f64,
}

/// Averages the extra/missing list lengths for `table_name` over every result
/// whose gold side has that table.
pub fn error_counts(results: &[AlignedResult], table_name: &str) -> Result<ErrorCounts, AnalysisError> {
    let hits: Vec<&TableAlignment> = results.iter().filter_map(|r| r.for_gold_table(table_name)).collect();
    if hits.is_empty() {
        return Err(AnalysisError::EmptyInput(table_name.to_string()));
    }
    let n = hits.len() as f64;
    let mean = |f: fn(&TableAlignment) -> usize| hits.iter().map(|t| f(t)).sum::<usize>() as f64 / n;
    Ok(ErrorCounts {
        samples: hits.len(),
        avg_extra_rows: mean(|t| t.extra_rows.len()),
        avg_extra_cols: mean(|t| t.extra_cols.len()),
        avg_missing_rows: mean(|t| t.missing_rows.len()),
        avg_missing_cols: mean(|t| t.missing_cols.len()),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaSizeRecord {
    pub sample_id: String,
    pub table_name: String,
    pub gold_col_count: usize,
    pub missing_col_count: usize,
}

/// One record per (sample, gold table). `sample_ids` and `aligned` are parallel.
pub fn schema_size_report(sample_ids: &[String], aligned: &[AlignedResult]) -> Vec<SchemaSizeRecord> {
    sample_ids
        .iter()
        .zip(aligned)
        .flat_map(|(id, r)| {
            r.tables.iter().filter_map(move |t| {
                Some(SchemaSizeRecord {
                    sample_id: id.clone(),
                    table_name: t.gold.clone()?,
                    gold_col_count: t.gold_col_count,
                    missing_col_count: t.missing_cols.len(),
                })
            })
        })
        .collect()
}
