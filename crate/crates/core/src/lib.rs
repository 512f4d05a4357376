//! Schema-agnostic text-to-table generation and evaluation.
//!
//! * [`table`] and [`schema`]: the data model and the pipe-table / schema-JSON
//!   grammars exchanged with language models.
//! * [`pipeline`]: generation strategies (three-stage map-and-make, unified,
//!   chain-of-thought and text-tuple-table baselines).
//! * [`metrics`]: tuple coverage, numeric error, Auto-QA and entailment scoring.
//! * [`analysis`]: alignment onto gold schemas, structural error counts and
//!   corpus version diffs.
//! * [`dataset`]: JSONL corpus loading and the Livesum event taxonomy.

pub mod analysis;
pub mod dataset;
pub mod metrics;
pub mod normalize;
pub mod pipeline;
pub mod schema;
pub mod table;

pub use dataset::{DatasetKind, Sample};
pub use normalize::normalize_header;
pub use schema::{parse_schema_json, Schema, SchemaEntry, SchemaError};
pub use table::{
    extract_tuples, parse_table_blocks, serialize_table_set, CellValue, ContentTuple, Numeric,
    ParseMode, ParseWarning, Parsed, Row, Table, TableError, TableSet,
};
