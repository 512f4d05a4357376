//! Evaluation metrics: similarity kernels, coverage, numeric error, Auto-QA
//! and entailment scoring.

pub mod autoqa;
pub mod coverage;
pub mod numeric;
pub mod similarity;
pub mod tabeval;

use text2table_gateway::GatewayError;

use crate::pipeline::templates::TemplateError;

pub use autoqa::{autoqa, parse_qa_pairs, AutoQaReport, QaJudgement, QaPair};
pub use coverage::{
    coverage_report, header_coverage, string_coverage, tuple_coverage, CoverageInputs, CoverageReport,
    Direction, Prf,
};
pub use numeric::{livesum_columns, numeric_eval, score_cells, CountCell, DifficultyStats, NumericReport, SplitStats};
pub use similarity::{chrf, Embeddings, Similarity, SimilarityKind, DEFAULT_CHRF_BETA, DEFAULT_CHRF_N};
pub use tabeval::{tabeval, unroll_table, EntailmentScores, TabEvalReport, TableEntailment};

#[derive(Debug, thiserror::Error)]
pub enum MetricError {
    #[error("coverage source side is empty")]
    EmptySourceSide,
    #[error("table is not Livesum-shaped: {0}")]
    NotLivesumShaped(String),
    #[error("no question/answer pairs in generator output")]
    QaParseFailure,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

impl PartialEq for MetricError {
    fn eq(&self, other: &Self) -> bool {
        self.to_string() == other.to_string()
    }
}

/// Reads a YES/NO verdict from the first word of a reply, ignoring case,
/// markdown emphasis and trailing punctuation.
pub fn parse_yes_no(reply: &str) -> Option<bool> {
    let word: String = reply
        .trim_start_matches(|c: char| c.is_whitespace() || matches!(c, '*' | '_' | '`' | '"' | '\''))
        .chars()
        .take_while(|c| c.is_ascii_alphabetic())
        .collect();
    match word.to_ascii_uppercase().as_str() {
        "YES" => Some(true),
        "NO" => Some(false),
        _ => None,
    }
}

pub fn is_yes(reply: &str) -> bool {
    parse_yes_no(reply) == Some(true)
}
