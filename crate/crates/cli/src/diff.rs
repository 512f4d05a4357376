use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};
use text2table_core::analysis::{diff_table_sets, DiffCounts, TableDiff};
use text2table_core::dataset::load_table_records;
use text2table_core::TableSet;

use crate::common::{csv_bytes, load_aliases, write_atomic, write_json};

#[derive(Args, Debug)]
pub struct DiffArgs {
    /// First version: JSONL of `{"id", "tables"}`.
    #[arg(long)]
    pub a: PathBuf,
    /// Second version.
    #[arg(long)]
    pub b: PathBuf,
    #[arg(long)]
    pub aliases: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SampleDiff {
    pub id: String,
    /// Present in only one file; the other side is treated as empty.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub only_in: Option<String>,
    pub tables: Vec<TableDiff>,
    pub totals: DiffCounts,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DiffSummary {
    pub a: String,
    pub b: String,
    pub alias_hash: String,
    /// Summed per table name over all samples.
    pub per_table: BTreeMap<String, DiffCounts>,
    pub totals: DiffCounts,
    pub samples: Vec<SampleDiff>,
}

#[derive(Serialize)]
struct CsvRow<'a> {
    id: &'a str,
    table: &'a str,
    hallucinated_cells: usize,
    missing_cells: usize,
    hallucinated_rows: usize,
    missing_rows: usize,
    hallucinated_cols: usize,
    missing_cols: usize,
}

impl<'a> CsvRow<'a> {
    fn new(id: &'a str, table: &'a str, c: &DiffCounts) -> Self {
        CsvRow {
            id,
            table,
            hallucinated_cells: c.hallucinated_cells,
            missing_cells: c.missing_cells,
            hallucinated_rows: c.hallucinated_rows,
            missing_rows: c.missing_rows,
            hallucinated_cols: c.hallucinated_cols,
            missing_cols: c.missing_cols,
        }
    }
}

pub fn run(args: &DiffArgs) -> Result<i32> {
    let aliases = load_aliases(args.aliases.as_ref())?;
    let a = load_table_records(&args.a).with_context(|| format!("loading {}", args.a.display()))?;
    let b = load_table_records(&args.b).with_context(|| format!("loading {}", args.b.display()))?;
    let b_by_id: HashMap<&str, &TableSet> = b.iter().map(|r| (r.id.as_str(), &r.tables)).collect();
    let a_ids: std::collections::HashSet<&str> = a.iter().map(|r| r.id.as_str()).collect();
    let empty = TableSet::default();

    let mut samples = Vec::new();
    for r in &a {
        let (other, only_in) = match b_by_id.get(r.id.as_str()) {
            Some(t) => (*t, None),
            None => (&empty, Some("a".to_string())),
        };
        let d = diff_table_sets(&r.tables, other, &aliases);
        samples.push(SampleDiff { id: r.id.clone(), only_in, tables: d.tables, totals: d.totals });
    }
    for r in b.iter().filter(|r| !a_ids.contains(r.id.as_str())) {
        let d = diff_table_sets(&empty, &r.tables, &aliases);
        samples.push(SampleDiff { id: r.id.clone(), only_in: Some("b".into()), tables: d.tables, totals: d.totals });
    }

    let mut per_table: BTreeMap<String, DiffCounts> = BTreeMap::new();
    let mut totals = DiffCounts::default();
    for s in &samples {
        for t in &s.tables {
            per_table.entry(t.table.clone()).or_default().add(&t.counts);
        }
        totals.add(&s.totals);
    }
    let rows: Vec<CsvRow> = samples
        .iter()
        .flat_map(|s| s.tables.iter().map(move |t| CsvRow::new(&s.id, &t.table, &t.counts)))
        .collect();
    write_atomic(&args.out_dir.join("diff.csv"), &csv_bytes(&rows)?)?;
    let unpaired = samples.iter().filter(|s| s.only_in.is_some()).count();
    let summary = DiffSummary {
        a: args.a.display().to_string(),
        b: args.b.display().to_string(),
        alias_hash: aliases.hash().to_string(),
        per_table,
        totals,
        samples,
    };
    write_json(&args.out_dir.join("diff.json"), &summary)?;
    eprintln!(
        "{} samples ({} in one file only): {} hallucinated / {} missing cells",
        summary.samples.len(),
        unpaired,
        totals.hallucinated_cells,
        totals.missing_cells
    );
    Ok(0)
}
