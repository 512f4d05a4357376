use std::collections::{BTreeSet, HashMap};
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use text2table_core::analysis::{align_to_gold, error_counts, schema_size_report, AlignedResult, ErrorCounts, Matcher};
use text2table_core::dataset::{load_dataset, load_table_records};
use text2table_core::pipeline::TemplateSet;
use text2table_core::{DatasetKind, TableSet};

use crate::common::{build_gateway, config_error, csv_bytes, load_aliases, thread_pool, write_atomic, write_json, write_jsonl};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MatcherKind {
    Deterministic,
    Llm,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long, default_value = "generic")]
    pub kind: DatasetKind,
    #[arg(long, value_enum, default_value_t = MatcherKind::Deterministic)]
    pub matcher: MatcherKind,
    #[arg(long)]
    pub aliases: Option<PathBuf>,
    #[arg(long)]
    pub backend: Option<String>,
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    #[arg(long)]
    pub parallel: Option<usize>,
    #[arg(long)]
    pub templates: Option<PathBuf>,
    #[arg(long)]
    pub allow_partial: bool,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AlignmentRecord {
    pub id: String,
    #[serde(flatten)]
    pub result: AlignedResult,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorCountRow {
    pub table: String,
    #[serde(flatten)]
    pub counts: ErrorCounts,
}

#[derive(Serialize)]
struct ErrorCsvRow<'a> {
    table: &'a str,
    samples: usize,
    avg_extra_rows: f64,
    avg_extra_cols: f64,
    avg_missing_rows: f64,
    avg_missing_cols: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AnalysisSummary {
    pub matcher: String,
    pub alias_hash: String,
    pub backend: Option<String>,
    pub samples: usize,
    pub missing_predictions: Vec<String>,
    pub warnings: usize,
    pub error_counts: Vec<ErrorCountRow>,
}

pub fn run(args: &AnalyzeArgs) -> Result<i32> {
    let aliases = load_aliases(args.aliases.as_ref())?;
    let setup = match (args.matcher, &args.backend) {
        (MatcherKind::Llm, None) => return Err(config_error("--matcher llm needs --backend")),
        (MatcherKind::Llm, Some(spec)) => Some(build_gateway(spec, args.cache_dir.as_deref(), args.parallel)?),
        (MatcherKind::Deterministic, _) => None,
    };
    let templates = match &args.templates {
        Some(dir) => TemplateSet::load_dir(dir).map_err(|e| config_error(e.to_string()))?,
        None => TemplateSet::builtin(),
    };
    let matcher = match &setup {
        Some(s) => Matcher::LlmAssisted { aliases: &aliases, gateway: &s.gateway, templates: &templates },
        None => Matcher::Deterministic(&aliases),
    };

    let gold = load_dataset(&args.gold, args.kind, None).with_context(|| format!("loading {}", args.gold.display()))?;
    let preds: HashMap<String, TableSet> = load_table_records(&args.pred)
        .with_context(|| format!("loading {}", args.pred.display()))?
        .into_iter()
        .map(|r| (r.id, r.tables))
        .collect();
    let missing: Vec<String> = gold.iter().filter(|s| !preds.contains_key(&s.id)).map(|s| s.id.clone()).collect();
    let scored: Vec<_> = gold.iter().filter(|s| preds.contains_key(&s.id)).collect();

    let parallel = setup.as_ref().map(|s| s.parallel).or(args.parallel).unwrap_or(4);
    let aligned: Vec<AlignedResult> =
        thread_pool(parallel)?.install(|| scored.par_iter().map(|s| align_to_gold(&preds[&s.id], &s.gold, &matcher)).collect());
    let ids: Vec<String> = scored.iter().map(|s| s.id.clone()).collect();

    // Gold table names in first-seen order.
    let mut seen = BTreeSet::new();
    let names: Vec<String> = scored
        .iter()
        .flat_map(|s| s.gold.iter().map(|t| t.name.clone()))
        .filter(|n| seen.insert(n.clone()))
        .collect();
    let counts: Vec<ErrorCountRow> = names
        .iter()
        .filter_map(|n| error_counts(&aligned, n).ok().map(|c| ErrorCountRow { table: n.clone(), counts: c }))
        .collect();
    let sizes = schema_size_report(&ids, &aligned);
    let warnings: usize = aligned.iter().map(|a| a.warnings.len()).sum();

    let records: Vec<AlignmentRecord> =
        ids.into_iter().zip(aligned).map(|(id, result)| AlignmentRecord { id, result }).collect();
    write_jsonl(&args.out_dir.join("alignment.jsonl"), &records)?;
    let csv_rows: Vec<ErrorCsvRow> = counts
        .iter()
        .map(|r| ErrorCsvRow {
            table: &r.table,
            samples: r.counts.samples,
            avg_extra_rows: r.counts.avg_extra_rows,
            avg_extra_cols: r.counts.avg_extra_cols,
            avg_missing_rows: r.counts.avg_missing_rows,
            avg_missing_cols: r.counts.avg_missing_cols,
        })
        .collect();
    write_atomic(&args.out_dir.join("error_counts.csv"), &csv_bytes(&csv_rows)?)?;
    write_atomic(&args.out_dir.join("schema_size.csv"), &csv_bytes(&sizes)?)?;
    let summary = AnalysisSummary {
        matcher: matcher.kind().to_string(),
        alias_hash: aliases.hash().to_string(),
        backend: setup.as_ref().map(|s| s.descriptor.clone()),
        samples: records.len(),
        missing_predictions: missing.clone(),
        warnings,
        error_counts: counts,
    };
    write_json(&args.out_dir.join("analysis.json"), &summary)?;

    for r in &records {
        for w in &r.result.warnings {
            eprintln!("{}: {w}", r.id);
        }
    }
    if !missing.is_empty() {
        eprintln!("missing predictions for {} samples: {}", missing.len(), missing.join(", "));
    }
    eprintln!("aligned {} samples ({} matcher)", records.len(), summary.matcher);
    Ok(if missing.is_empty() || args.allow_partial { 0 } else { 1 })
}
