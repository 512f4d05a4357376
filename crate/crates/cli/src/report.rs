use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use text2table_core::dataset::Difficulty;

use crate::analyze::AnalysisSummary;
use crate::common::{config_error, write_atomic};
use crate::evaluate::EvalReport;

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Evaluation directories (each with `report.json`), one table row per run.
    #[arg(long = "eval", num_args = 1..)]
    pub eval: Vec<PathBuf>,
    /// Analysis directories (each with `analysis.json`).
    #[arg(long = "analysis", num_args = 1..)]
    pub analysis: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

fn label(p: &std::path::Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| p.display().to_string())
}

fn load<T: serde::de::DeserializeOwned>(path: PathBuf) -> Result<T> {
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn render(evals: &[(String, EvalReport)], analyses: &[(String, AnalysisSummary)]) -> String {
    let mut md = String::from("# Results\n");

    let kinds: Vec<String> = {
        let mut k: Vec<String> = evals.iter().flat_map(|(_, r)| r.aggregate.coverage.keys().cloned()).collect();
        k.sort();
        k.dedup();
        k
    };
    for kind in &kinds {
        let _ = write!(md, "\n## Coverage F1 ({kind})\n\n| run | samples | cell | row | col |\n|---|---|---|---|---|\n");
        for (name, r) in evals {
            if let Some(c) = r.aggregate.coverage.get(kind) {
                let _ = writeln!(md, "| {name} | {} | {:.3} | {:.3} | {:.3} |", r.aggregate.samples, c.cell.f1, c.row.f1, c.col.f1);
            }
        }
    }

    let numeric: Vec<_> = evals.iter().filter_map(|(n, r)| r.aggregate.numeric.as_ref().map(|a| (n, a))).collect();
    if !numeric.is_empty() {
        md.push_str("\n## Numeric error by difficulty (RMSE / ER %)\n\n| run | Easy | Medium | Hard | Average |\n|---|---|---|---|---|\n");
        for (name, a) in &numeric {
            let cell = |d: Difficulty| a.per_difficulty.get(&d).map(|s| format!("{:.2} / {:.2}", s.rmse, s.error_rate_pct)).unwrap_or("-".into());
            let _ = writeln!(
                md,
                "| {name} | {} | {} | {} | {:.2} / {:.2} |",
                cell(Difficulty::Easy),
                cell(Difficulty::Medium),
                cell(Difficulty::Hard),
                a.rmse,
                a.error_rate_pct
            );
        }
        md.push_str("\n## Over- and under-counting\n\n| run | over cells | over RMSE | under cells | under RMSE | missing | non-numeric |\n|---|---|---|---|---|---|---|\n");
        for (name, a) in &numeric {
            let _ = writeln!(
                md,
                "| {name} | {} | {:.2} | {} | {:.2} | {} | {} |",
                a.over_cells, a.over_rmse, a.under_cells, a.under_rmse, a.missing_cells, a.non_numeric_cells
            );
        }
    }

    let qa: Vec<_> = evals.iter().filter(|(_, r)| r.aggregate.autoqa.is_some() || r.aggregate.tabeval.is_some()).collect();
    if !qa.is_empty() {
        md.push_str("\n## Question answering and entailment\n\n| run | AutoQA % | TabEval correctness | TabEval completeness | TabEval overall |\n|---|---|---|---|---|\n");
        for (name, r) in qa {
            let q = r.aggregate.autoqa.as_ref().map(|a| format!("{:.1}", a.accuracy_pct)).unwrap_or("-".into());
            let t = r
                .aggregate
                .tabeval
                .as_ref()
                .map(|t| format!("{:.3} | {:.3} | {:.3}", t.correctness, t.completeness, t.overall))
                .unwrap_or("- | - | -".into());
            let _ = writeln!(md, "| {name} | {q} | {t} |");
        }
    }

    if !analyses.is_empty() {
        md.push_str("\n## Structural errors (average per sample)\n\n| run | table | extra rows | extra cols | missing rows | missing cols |\n|---|---|---|---|---|---|\n");
        for (name, a) in analyses {
            for row in &a.error_counts {
                let c = &row.counts;
                let _ = writeln!(
                    md,
                    "| {name} | {} | {:.2} | {:.2} | {:.2} | {:.2} |",
                    row.table, c.avg_extra_rows, c.avg_extra_cols, c.avg_missing_rows, c.avg_missing_cols
                );
            }
        }
    }
    md
}

pub fn run(args: &ReportArgs) -> Result<i32> {
    if args.eval.is_empty() && args.analysis.is_empty() {
        return Err(config_error("give at least one --eval or --analysis directory"));
    }
    let evals = args
        .eval
        .iter()
        .map(|d| Ok((label(d), load::<EvalReport>(d.join("report.json"))?)))
        .collect::<Result<Vec<_>>>()?;
    let analyses = args
        .analysis
        .iter()
        .map(|d| Ok((label(d), load::<AnalysisSummary>(d.join("analysis.json"))?)))
        .collect::<Result<Vec<_>>>()?;
    write_atomic(&args.out, render(&evals, &analyses).as_bytes())?;
    Ok(0)
}
