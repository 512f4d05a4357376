//! Generation strategies.
//!
//! `Mm3Step` runs atomization, schema extraction and table filling as three
//! calls; `MmUnified` asks for all three in one call. The baselines are
//! chain-of-thought (zero- and one-shot), text-tuple-table (`T3`, two calls)
//! and its merged single-call form (`T3D`).

pub mod extract;
pub mod splitter;
pub mod t3;
pub mod templates;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use text2table_gateway::{CacheKey, Gateway, GatewayError, Message};
use thiserror::Error;

use crate::dataset::{DatasetKind, Sample};
use crate::schema::{parse_schema_json, Schema, SchemaError};
use crate::table::{Parsed, TableSet};

pub use extract::{extract_final_tables, extract_statements, extract_tuple_lines};
pub use splitter::split_sentences;
pub use t3::aggregate_event_tuples;
pub use templates::{TemplateError, TemplateSet};

pub const DEFAULT_MAX_STATEMENTS: usize = 600;
/// Total attempts per stage: the first call plus one repair.
pub const DEFAULT_MAX_ATTEMPTS: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Strategy {
    #[serde(rename = "cot0")]
    CotZeroShot,
    #[serde(rename = "cot1")]
    CotOneShot,
    #[serde(rename = "t3")]
    T3,
    #[serde(rename = "t3d")]
    T3D,
    #[serde(rename = "mm-u")]
    MmUnified,
    #[serde(rename = "mm-3s")]
    Mm3Step,
}

impl Strategy {
    pub const ALL: [Strategy; 6] = [
        Strategy::CotZeroShot,
        Strategy::CotOneShot,
        Strategy::T3,
        Strategy::T3D,
        Strategy::MmUnified,
        Strategy::Mm3Step,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::CotZeroShot => "cot0",
            Strategy::CotOneShot => "cot1",
            Strategy::T3 => "t3",
            Strategy::T3D => "t3d",
            Strategy::MmUnified => "mm-u",
            Strategy::Mm3Step => "mm-3s",
        }
    }

    pub fn is_map_and_make(self) -> bool {
        matches!(self, Strategy::MmUnified | Strategy::Mm3Step)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| format!("unknown strategy {s:?} (cot0|cot1|t3|t3d|mm-u|mm-3s)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AblationFlags {
    pub disable_atomization: bool,
    pub disable_iterative_schema: bool,
    pub disable_iterative_table: bool,
}

impl AblationFlags {
    pub fn is_empty(&self) -> bool {
        *self == Self::default()
    }
}

impl FromStr for AblationFlags {
    type Err = String;

    /// Comma-separated subset of `atomization`, `iter-schema`, `iter-table`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut flags = AblationFlags::default();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "atomization" => flags.disable_atomization = true,
                "iter-schema" => flags.disable_iterative_schema = true,
                "iter-table" => flags.disable_iterative_table = true,
                other => {
                    return Err(format!(
                        "unknown ablation {other:?} (atomization|iter-schema|iter-table)"
                    ))
                }
            }
        }
        Ok(flags)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtomicStatement {
    pub index: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub stage: String,
    pub digest: CacheKey,
    pub attempt: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt: u64,
    pub completion: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationResult {
    pub sample_id: String,
    pub tables: TableSet,
    pub statements: Vec<AtomicStatement>,
    pub schema: Schema,
    pub transcript: Vec<TranscriptEntry>,
    pub warnings: Vec<String>,
    pub token_usage: TokenUsage,
}

impl GenerationResult {
    pub fn stages(&self) -> Vec<&str> {
        self.transcript.iter().map(|t| t.stage.as_str()).collect()
    }

    pub fn to_record(&self) -> PredictionRecord {
        PredictionRecord {
            id: self.sample_id.clone(),
            tables: self.tables.clone(),
            statements: self.statements.iter().map(|s| s.text.clone()).collect(),
            schema: self.schema.to_json(),
            transcript: self.transcript.clone(),
            warnings: self.warnings.clone(),
            token_usage: self.token_usage,
        }
    }
}

/// One line of a predictions file. Readers that only need tables can use
/// [`crate::dataset::TableRecord`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    pub tables: TableSet,
    #[serde(default)]
    pub statements: Vec<String>,
    #[serde(default)]
    pub schema: serde_json::Value,
    #[serde(default)]
    pub transcript: Vec<TranscriptEntry>,
    #[serde(default)]
    pub warnings: Vec<String>,
    #[serde(default)]
    pub token_usage: TokenUsage,
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("input text is empty")]
    EmptyInput,
    #[error("response lacks the {0:?} marker")]
    MalformedResponse(&'static str),
    #[error("no statements after the marker")]
    EmptyStatements,
    #[error("{count} statements exceed the limit of {max}")]
    TooManyStatements { count: usize, max: usize },
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error("schema has no tables")]
    EmptySchema,
    #[error("no (entity, attribute, value) tuples found")]
    NoTuplesFound,
    #[error("no tables found in the response")]
    NoTablesFound,
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

/// A failed run, tagged with the stage that failed. The transcript up to and
/// including the failing call is kept.
#[derive(Debug, Error)]
#[error("stage {stage}: {error}")]
pub struct StageError {
    pub stage: String,
    #[source]
    pub error: PipelineError,
    pub transcript: Vec<TranscriptEntry>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub strategy: Strategy,
    pub flags: AblationFlags,
    pub task: DatasetKind,
    pub max_statements: usize,
    pub max_attempts: u32,
}

impl RunConfig {
    pub fn new(strategy: Strategy) -> Self {
        Self {
            strategy,
            flags: AblationFlags::default(),
            task: DatasetKind::Generic,
            max_statements: DEFAULT_MAX_STATEMENTS,
            max_attempts: DEFAULT_MAX_ATTEMPTS,
        }
    }

    pub fn with_flags(mut self, flags: AblationFlags) -> Self {
        self.flags = flags;
        self
    }

    pub fn with_task(mut self, task: DatasetKind) -> Self {
        self.task = task;
        self
    }

    fn counting(&self) -> bool {
        self.task == DatasetKind::Livesum
    }
}

enum Outcome<T> {
    Done(T),
    Retry(PipelineError),
    Fail(PipelineError),
}

/// Stage runner for one sample: holds the transcript, token usage and
/// warnings accumulated across calls.
pub struct Session<'a> {
    gateway: &'a Gateway,
    templates: &'a TemplateSet,
    max_attempts: u32,
    max_statements: usize,
    stage: &'static str,
    pub transcript: Vec<TranscriptEntry>,
    pub usage: TokenUsage,
    pub warnings: Vec<String>,
}

const REPAIR: &str = "Your previous response could not be parsed. Reply again following the specified output format exactly.";

pub fn number_statements(statements: &[AtomicStatement]) -> String {
    statements.iter().map(|s| format!("{}. {}", s.index, s.text)).collect::<Vec<_>>().join("\n")
}

fn indexed(texts: Vec<String>) -> Vec<AtomicStatement> {
    texts.into_iter().enumerate().map(|(i, text)| AtomicStatement { index: i + 1, text }).collect()
}

impl<'a> Session<'a> {
    pub fn new(gateway: &'a Gateway, templates: &'a TemplateSet) -> Self {
        Self {
            gateway,
            templates,
            max_attempts: DEFAULT_MAX_ATTEMPTS,
            max_statements: DEFAULT_MAX_STATEMENTS,
            stage: "input",
            transcript: Vec::new(),
            usage: TokenUsage::default(),
            warnings: Vec::new(),
        }
    }

    pub fn with_limits(mut self, max_attempts: u32, max_statements: usize) -> Self {
        self.max_attempts = max_attempts.max(1);
        self.max_statements = max_statements;
        self
    }

    /// Name of the stage currently (or last) running.
    pub fn stage(&self) -> &'static str {
        self.stage
    }

    fn call<T>(
        &mut self,
        prompt: String,
        mut parse: impl FnMut(&str, &mut Vec<String>) -> Outcome<T>,
    ) -> Result<T, PipelineError> {
        let mut messages = vec![Message::user(prompt)];
        let mut attempt = 1;
        loop {
            let req = self.gateway.request(messages.clone())?;
            let resp = self.gateway.complete(&req)?;
            self.transcript.push(TranscriptEntry {
                stage: self.stage.to_string(),
                digest: req.cache_key(),
                attempt,
            });
            self.usage.prompt += resp.prompt_tokens;
            self.usage.completion += resp.completion_tokens;
            match parse(&resp.text, &mut self.warnings) {
                Outcome::Done(v) => return Ok(v),
                Outcome::Fail(e) => return Err(e),
                Outcome::Retry(e) if attempt >= self.max_attempts => return Err(e),
                Outcome::Retry(e) => {
                    log::debug!("{}: attempt {attempt} unusable: {e}", self.stage);
                    self.warnings.push(format!("{}: attempt {attempt}: {e}", self.stage));
                    messages.push(Message::assistant(resp.text));
                    messages.push(Message::user(REPAIR));
                    attempt += 1;
                }
            }
        }
    }

    fn check_count(&self, statements: Vec<String>) -> Result<Vec<AtomicStatement>, PipelineError> {
        if statements.is_empty() {
            return Err(PipelineError::EmptyStatements);
        }
        if statements.len() > self.max_statements {
            return Err(PipelineError::TooManyStatements {
                count: statements.len(),
                max: self.max_statements,
            });
        }
        Ok(indexed(statements))
    }

    pub fn atomize(&mut self, text: &str) -> Result<Vec<AtomicStatement>, PipelineError> {
        self.stage = "atomize";
        let prompt = self.templates.render("mm-3s/atomize", &[("input_text", text)])?;
        let lines = self.call(prompt, |resp, _| match extract_statements(resp) {
            None => Outcome::Retry(PipelineError::MalformedResponse(extract::STATEMENTS_MARKER)),
            Some(v) if v.is_empty() => Outcome::Fail(PipelineError::EmptyStatements),
            Some(v) => Outcome::Done(v),
        })?;
        self.check_count(lines)
    }

    /// Sentence splitting in place of atomization; makes no call.
    pub fn split(&mut self, text: &str) -> Result<Vec<AtomicStatement>, PipelineError> {
        self.stage = "split";
        self.check_count(split_sentences(text))
    }

    pub fn extract_schema(
        &mut self,
        statements: &[AtomicStatement],
        iterative: bool,
    ) -> Result<Schema, PipelineError> {
        self.stage = "schema";
        let key = if iterative { "mm-3s/schema" } else { "mm-3s/schema_direct" };
        let numbered = number_statements(statements);
        let prompt = self.templates.render(key, &[("statements", &numbered)])?;
        self.call(prompt, |resp, _| match parse_schema_json(resp) {
            Ok(s) => Outcome::Done(s),
            Err(e) => Outcome::Retry(e.into()),
        })
    }

    pub fn fill_tables(
        &mut self,
        statements: &[AtomicStatement],
        schema: &Schema,
        iterative: bool,
    ) -> Result<TableSet, PipelineError> {
        self.stage = "table";
        if schema.is_empty() {
            return Err(PipelineError::EmptySchema);
        }
        let key = if iterative { "mm-3s/table" } else { "mm-3s/table_direct" };
        let numbered = number_statements(statements);
        let schema_json = schema.to_pretty_json();
        let prompt = self
            .templates
            .render(key, &[("statements", &numbered), ("schema_json", &schema_json)])?;
        self.call(prompt, |resp, warnings| final_tables(resp, Some(schema), warnings))
    }

    pub fn t3_tuples(&mut self, text: &str, counting: bool) -> Result<Vec<t3::Tuple>, PipelineError> {
        self.stage = "tuples";
        let key = if counting { "t3/tuples_counting" } else { "t3/tuples" };
        let prompt = self.templates.render(key, &[("input_text", text)])?;
        self.call(prompt, |resp, _| {
            let tuples = extract_tuple_lines(resp);
            if tuples.is_empty() {
                Outcome::Retry(PipelineError::NoTuplesFound)
            } else {
                Outcome::Done(tuples)
            }
        })
    }

    pub fn t3_tables(&mut self, tuples: &[t3::Tuple], counting: bool) -> Result<TableSet, PipelineError> {
        self.stage = "tables";
        let key = if counting { "t3/tables_counting" } else { "t3/tables" };
        let listed = t3::format_tuples(tuples);
        let prompt = self.templates.render(key, &[("tuples", &listed)])?;
        self.call(prompt, whole_response_tables)
    }

    /// One call whose whole response holds the tables (CoT, T3D).
    pub fn single_call(&mut self, key: &str, text: &str) -> Result<TableSet, PipelineError> {
        self.stage = "tables";
        let prompt = self.templates.render(key, &[("input_text", text)])?;
        self.call(prompt, whole_response_tables)
    }

    /// The three stages in one call. With `given` statements the atomization
    /// task is left out and the statements are supplied as input.
    pub fn unified(
        &mut self,
        text: &str,
        given: Option<Vec<AtomicStatement>>,
        flags: AblationFlags,
    ) -> Result<(Vec<AtomicStatement>, Schema, TableSet), PipelineError> {
        self.stage = "unified";
        let t = self.templates;
        let mut tasks = Vec::new();
        if given.is_none() {
            tasks.push(t.get("mm-3s/atomize")?);
        }
        tasks.push(t.get(if flags.disable_iterative_schema { "mm-3s/schema_direct" } else { "mm-3s/schema" })?);
        tasks.push(t.get(if flags.disable_iterative_table { "mm-3s/table_direct" } else { "mm-3s/table" })?);
        let mut template = t.get("mm-u/preamble")?.trim_end().to_string();
        for (i, task) in tasks.iter().enumerate() {
            template.push_str(&format!("\n\n===== TASK {} =====\n", i + 1));
            template.push_str(templates::strip_input_section(task));
        }
        let numbered = given.as_deref().map(number_statements).unwrap_or_default();
        template.push_str("\n\n===== INPUT =====\n");
        template.push_str(if given.is_some() { "Statements:\n{{statements}}\n" } else { "{{input_text}}\n" });
        let prompt = templates::render_str(
            "mm-u",
            &template,
            &[("input_text", text), ("statements", &numbered)],
        )?;
        let max = self.max_statements;
        self.call(prompt, |resp, warnings| {
            let statements = match &given {
                Some(s) => s.clone(),
                None => match extract_statements(resp) {
                    None => {
                        return Outcome::Retry(PipelineError::MalformedResponse(
                            extract::STATEMENTS_MARKER,
                        ))
                    }
                    Some(v) if v.is_empty() => return Outcome::Fail(PipelineError::EmptyStatements),
                    Some(v) if v.len() > max => {
                        return Outcome::Fail(PipelineError::TooManyStatements { count: v.len(), max })
                    }
                    Some(v) => indexed(v),
                },
            };
            let schema = match parse_schema_json(resp) {
                Ok(s) => s,
                Err(e) => return Outcome::Retry(e.into()),
            };
            match final_tables(resp, Some(&schema), warnings) {
                Outcome::Done(tables) => Outcome::Done((statements, schema, tables)),
                Outcome::Retry(e) => Outcome::Retry(e),
                Outcome::Fail(e) => Outcome::Fail(e),
            }
        })
    }
}

fn record_warnings(parsed: &Parsed, warnings: &mut Vec<String>) {
    warnings.extend(parsed.warnings.iter().map(|w| w.to_string()));
}

fn final_tables(resp: &str, schema: Option<&Schema>, warnings: &mut Vec<String>) -> Outcome<TableSet> {
    match extract_final_tables(resp, schema) {
        None => Outcome::Retry(PipelineError::MalformedResponse("### Final")),
        Some(p) if p.tables.is_empty() => Outcome::Fail(PipelineError::NoTablesFound),
        Some(p) => {
            record_warnings(&p, warnings);
            Outcome::Done(p.tables)
        }
    }
}

fn whole_response_tables(resp: &str, warnings: &mut Vec<String>) -> Outcome<TableSet> {
    let p = extract::extract_any_tables(resp);
    if p.tables.is_empty() {
        Outcome::Retry(PipelineError::NoTablesFound)
    } else {
        record_warnings(&p, warnings);
        Outcome::Done(p.tables)
    }
}

/// Runs one strategy on one sample.
pub fn run_strategy(
    sample: &Sample,
    cfg: &RunConfig,
    gateway: &Gateway,
    templates: &TemplateSet,
) -> Result<GenerationResult, StageError> {
    let mut s = Session::new(gateway, templates).with_limits(cfg.max_attempts, cfg.max_statements);
    let outcome = run_stages(&mut s, &sample.text, cfg);
    match outcome {
        Ok((mut tables, statements, schema)) => {
            tables.canonicalize();
            Ok(GenerationResult {
                sample_id: sample.id.clone(),
                tables,
                statements,
                schema,
                transcript: s.transcript,
                warnings: s.warnings,
                token_usage: s.usage,
            })
        }
        Err(error) => Err(StageError {
            stage: s.stage().to_string(),
            error,
            transcript: s.transcript,
            warnings: s.warnings,
        }),
    }
}

type StageOutput = (TableSet, Vec<AtomicStatement>, Schema);

fn run_stages(s: &mut Session<'_>, text: &str, cfg: &RunConfig) -> Result<StageOutput, PipelineError> {
    if text.trim().is_empty() {
        return Err(PipelineError::EmptyInput);
    }
    let flags = cfg.flags;
    match cfg.strategy {
        Strategy::CotZeroShot => Ok((s.single_call("cot0/tables", text)?, vec![], Schema::new())),
        Strategy::CotOneShot => Ok((s.single_call("cot1/tables", text)?, vec![], Schema::new())),
        Strategy::T3D => Ok((s.single_call("t3d/tables", text)?, vec![], Schema::new())),
        Strategy::T3 => {
            let counting = cfg.counting();
            let mut tuples = s.t3_tuples(text, counting)?;
            if counting {
                tuples = aggregate_event_tuples(&tuples);
            }
            Ok((s.t3_tables(&tuples, counting)?, vec![], Schema::new()))
        }
        Strategy::Mm3Step => {
            let statements =
                if flags.disable_atomization { s.split(text)? } else { s.atomize(text)? };
            let schema = s.extract_schema(&statements, !flags.disable_iterative_schema)?;
            let tables = s.fill_tables(&statements, &schema, !flags.disable_iterative_table)?;
            Ok((tables, statements, schema))
        }
        Strategy::MmUnified => {
            let given = if flags.disable_atomization { Some(s.split(text)?) } else { None };
            let (statements, schema, tables) = s.unified(text, given, flags)?;
            Ok((tables, statements, schema))
        }
    }
}
