use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use text2table_core::analysis::{pair_tables, Aliases};
use text2table_core::dataset::{load_dataset, load_table_records, Difficulty, Sample};
use text2table_core::metrics::{
    autoqa, coverage_report, numeric_eval, tabeval, AutoQaReport, CoverageInputs, CoverageReport, Embeddings,
    NumericReport, Prf, Similarity, TabEvalReport,
};
use text2table_core::pipeline::TemplateSet;
use text2table_core::{DatasetKind, Table, TableSet};
use text2table_gateway::Gateway;

use crate::common::{build_gateway, config_error, csv_bytes, load_aliases, thread_pool, write_atomic, write_json};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Em,
    Chrf,
    Embed,
    Numeric,
    Autoqa,
    Tabeval,
}

impl Metric {
    fn parse(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "em" => Metric::Em,
            "chrf" => Metric::Chrf,
            "embed" => Metric::Embed,
            "numeric" => Metric::Numeric,
            "autoqa" => Metric::Autoqa,
            "tabeval" => Metric::Tabeval,
            other => return Err(config_error(format!("unknown metric {other:?} (em|chrf|embed|numeric|autoqa|tabeval)"))),
        })
    }

    fn needs_backend(self) -> bool {
        matches!(self, Metric::Embed | Metric::Autoqa | Metric::Tabeval)
    }
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long, default_value = "generic")]
    pub kind: DatasetKind,
    /// Comma-separated: em, chrf, embed, numeric, autoqa, tabeval.
    #[arg(long, default_value = "em,chrf")]
    pub metrics: String,
    #[arg(long, default_value_t = text2table_core::metrics::DEFAULT_CHRF_N)]
    pub chrf_n: usize,
    #[arg(long, default_value_t = text2table_core::metrics::DEFAULT_CHRF_BETA)]
    pub chrf_beta: f64,
    /// Lowercase both sides before string comparison.
    #[arg(long)]
    pub normalize_case: bool,
    #[arg(long, default_value_t = 10)]
    pub qa_n: usize,
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
    /// Score the samples that have predictions and exit 0 even if some are missing.
    #[arg(long)]
    pub allow_partial: bool,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Parameters {
    pub gold: String,
    pub pred: String,
    pub kind: DatasetKind,
    pub metrics: Vec<Metric>,
    pub chrf_n: usize,
    pub chrf_beta: f64,
    pub normalize_case: bool,
    pub qa_n: usize,
    pub alias_hash: String,
    pub matcher: String,
    /// Metrics are computed per sample, then averaged over samples.
    pub averaging: String,
    pub cell_tuples: String,
    pub backend: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleReport {
    pub id: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub coverage: BTreeMap<String, CoverageReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub numeric: Option<NumericReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub autoqa: Option<AutoQaReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tabeval: Option<TabEvalReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CoverageAggregate {
    pub cell: Prf,
    pub row: Prf,
    pub col: Prf,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RmseEr {
    pub rmse: f64,
    pub error_rate_pct: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct NumericAggregate {
    pub samples: usize,
    pub rmse: f64,
    pub error_rate_pct: f64,
    pub per_difficulty: BTreeMap<Difficulty, RmseEr>,
    pub over_rmse: f64,
    pub under_rmse: f64,
    pub over_cells: usize,
    pub under_cells: usize,
    pub missing_cells: usize,
    pub non_numeric_cells: usize,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct AutoQaAggregate {
    pub samples: usize,
    pub accuracy_pct: f64,
    pub n_questions: usize,
    pub n_correct: usize,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TabEvalAggregate {
    pub samples: usize,
    pub correctness: f64,
    pub completeness: f64,
    pub overall: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Aggregate {
    pub samples: usize,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub coverage: BTreeMap<String, CoverageAggregate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub numeric: Option<NumericAggregate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub autoqa: Option<AutoQaAggregate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tabeval: Option<TabEvalAggregate>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub parameters: Parameters,
    pub missing_predictions: Vec<String>,
    pub aggregate: Aggregate,
    pub samples: Vec<SampleReport>,
}

struct Ctx<'a> {
    metrics: &'a [Metric],
    sims: Vec<Similarity>,
    args: &'a EvaluateArgs,
    aliases: &'a Aliases,
    gateway: Option<&'a Gateway>,
    templates: &'a TemplateSet,
}

/// The pred table scored against a Livesum gold table: the paired one, else
/// the sole pred table, else an empty table (every cell missing).
fn livesum_pred<'a>(gold: &TableSet, pred: &'a TableSet, aliases: &Aliases) -> Option<&'a Table> {
    pair_tables(gold, pred, aliases).first().map(|&(_, pi, _)| &pred.tables[pi])
}

fn evaluate_sample(sample: &Sample, pred: &TableSet, ctx: &Ctx<'_>) -> SampleReport {
    let mut rep = SampleReport { id: sample.id.clone(), coverage: BTreeMap::new(), numeric: None, autoqa: None, tabeval: None, errors: vec![] };
    for sim in &ctx.sims {
        rep.coverage.insert(sim.kind.label().to_string(), coverage_report(&sample.gold, pred, sim));
    }
    let gateway = ctx.gateway;
    if ctx.metrics.contains(&Metric::Embed) {
        let gw = gateway.expect("checked before scoring");
        let strings = CoverageInputs::of(&sample.gold).all_strings().chain(CoverageInputs::of(pred).all_strings()).collect::<Vec<_>>();
        match Embeddings::fetch(gw, strings) {
            Ok(e) => {
                let sim = Similarity::embedding(e).with_normalize_case(false);
                rep.coverage.insert("embed".into(), coverage_report(&sample.gold, pred, &sim));
            }
            Err(e) => rep.errors.push(format!("embed: {e}")),
        }
    }
    if ctx.metrics.contains(&Metric::Numeric) {
        match sample.gold.tables.as_slice() {
            [g] => {
                let empty = Table::new(g.name.clone(), g.row_label.clone(), vec![], vec![]).expect("empty table");
                let p = livesum_pred(&sample.gold, pred, ctx.aliases).unwrap_or(&empty);
                match numeric_eval(g, p, ctx.aliases) {
                    Ok(n) => rep.numeric = Some(n),
                    Err(e) => rep.errors.push(format!("numeric: {e}")),
                }
            }
            other => rep.errors.push(format!("numeric: gold has {} tables, expected one", other.len())),
        }
    }
    if ctx.metrics.contains(&Metric::Autoqa) {
        match autoqa(&sample.text, pred, gateway.expect("checked"), ctx.templates, ctx.args.qa_n) {
            Ok(r) => rep.autoqa = Some(r),
            Err(e) => rep.errors.push(format!("autoqa: {e}")),
        }
    }
    if ctx.metrics.contains(&Metric::Tabeval) {
        match tabeval(pred, &sample.gold, gateway.expect("checked"), ctx.templates) {
            Ok(r) => rep.tabeval = Some(r),
            Err(e) => rep.errors.push(format!("tabeval: {e}")),
        }
    }
    rep
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (mut s, mut n) = (0.0, 0usize);
    for x in xs {
        s += x;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

fn aggregate(samples: &[SampleReport]) -> Aggregate {
    let mut agg = Aggregate { samples: samples.len(), ..Default::default() };
    let kinds: Vec<String> = samples.iter().flat_map(|s| s.coverage.keys().cloned()).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    for k in kinds {
        let reps: Vec<&CoverageReport> = samples.iter().filter_map(|s| s.coverage.get(&k)).collect();
        agg.coverage.insert(
            k,
            CoverageAggregate {
                cell: Prf::mean(reps.iter().map(|r| &r.cell)),
                row: Prf::mean(reps.iter().map(|r| &r.row)),
                col: Prf::mean(reps.iter().map(|r| &r.col)),
            },
        );
    }
    let nums: Vec<&NumericReport> = samples.iter().filter_map(|s| s.numeric.as_ref()).collect();
    if !nums.is_empty() {
        agg.numeric = Some(NumericAggregate {
            samples: nums.len(),
            rmse: mean(nums.iter().map(|n| n.rmse)),
            error_rate_pct: mean(nums.iter().map(|n| n.error_rate_pct)),
            per_difficulty: Difficulty::ALL
                .iter()
                .map(|d| {
                    let stats = nums.iter().filter_map(|n| n.per_difficulty.get(d)).filter(|s| s.n_cells > 0).collect::<Vec<_>>();
                    (*d, RmseEr { rmse: mean(stats.iter().map(|s| s.rmse)), error_rate_pct: mean(stats.iter().map(|s| s.error_rate_pct)) })
                })
                .collect(),
            over_rmse: mean(nums.iter().filter(|n| n.over.n > 0).map(|n| n.over.rmse)),
            under_rmse: mean(nums.iter().filter(|n| n.under.n > 0).map(|n| n.under.rmse)),
            over_cells: nums.iter().map(|n| n.over.n).sum(),
            under_cells: nums.iter().map(|n| n.under.n).sum(),
            missing_cells: nums.iter().map(|n| n.missing_cells).sum(),
            non_numeric_cells: nums.iter().map(|n| n.non_numeric_cells).sum(),
        });
    }
    let qas: Vec<&AutoQaReport> = samples.iter().filter_map(|s| s.autoqa.as_ref()).collect();
    if !qas.is_empty() {
        agg.autoqa = Some(AutoQaAggregate {
            samples: qas.len(),
            accuracy_pct: mean(qas.iter().map(|q| q.accuracy_pct)),
            n_questions: qas.iter().map(|q| q.n_questions).sum(),
            n_correct: qas.iter().map(|q| q.n_correct).sum(),
        });
    }
    let tes: Vec<&TabEvalReport> = samples.iter().filter_map(|s| s.tabeval.as_ref()).collect();
    if !tes.is_empty() {
        agg.tabeval = Some(TabEvalAggregate {
            samples: tes.len(),
            correctness: mean(tes.iter().map(|t| t.scores.correctness)),
            completeness: mean(tes.iter().map(|t| t.scores.completeness)),
            overall: mean(tes.iter().map(|t| t.scores.overall)),
        });
    }
    agg
}

#[derive(Serialize)]
struct CoverageRow<'a> {
    id: &'a str,
    kind: &'a str,
    level: &'a str,
    precision: f64,
    recall: f64,
    f1: f64,
}

#[derive(Serialize)]
struct NumericRow<'a> {
    id: &'a str,
    easy_rmse: f64,
    easy_er: f64,
    medium_rmse: f64,
    medium_er: f64,
    hard_rmse: f64,
    hard_er: f64,
    average_rmse: f64,
    average_er: f64,
    over_rmse: f64,
    under_rmse: f64,
}

fn coverage_rows<'a>(id: &'a str, kind: &'a str, cell: &Prf, row: &Prf, col: &Prf, out: &mut Vec<CoverageRow<'a>>) {
    for (level, p) in [("cell", cell), ("row", row), ("col", col)] {
        out.push(CoverageRow { id, kind, level, precision: p.precision, recall: p.recall, f1: p.f1 });
    }
}

fn write_csvs(report: &EvalReport, out_dir: &std::path::Path) -> Result<()> {
    let mut rows = Vec::new();
    for s in &report.samples {
        for (k, c) in &s.coverage {
            coverage_rows(&s.id, k, &c.cell, &c.row, &c.col, &mut rows);
        }
    }
    for (k, c) in &report.aggregate.coverage {
        coverage_rows("mean", k, &c.cell, &c.row, &c.col, &mut rows);
    }
    if !rows.is_empty() {
        write_atomic(&out_dir.join("coverage.csv"), &csv_bytes(&rows)?)?;
    }

    if let Some(agg) = &report.aggregate.numeric {
        let d = |n: &BTreeMap<Difficulty, RmseEr>, k| n.get(&k).map(|s| (s.rmse, s.error_rate_pct)).unwrap_or_default();
        let mut rows = Vec::new();
        for s in &report.samples {
            let Some(n) = &s.numeric else { continue };
            let per: BTreeMap<Difficulty, RmseEr> =
                n.per_difficulty.iter().map(|(k, v)| (*k, RmseEr { rmse: v.rmse, error_rate_pct: v.error_rate_pct })).collect();
            let (e, m, h) = (d(&per, Difficulty::Easy), d(&per, Difficulty::Medium), d(&per, Difficulty::Hard));
            rows.push(NumericRow {
                id: &s.id,
                easy_rmse: e.0,
                easy_er: e.1,
                medium_rmse: m.0,
                medium_er: m.1,
                hard_rmse: h.0,
                hard_er: h.1,
                average_rmse: n.rmse,
                average_er: n.error_rate_pct,
                over_rmse: n.over.rmse,
                under_rmse: n.under.rmse,
            });
        }
        let (e, m, h) = (d(&agg.per_difficulty, Difficulty::Easy), d(&agg.per_difficulty, Difficulty::Medium), d(&agg.per_difficulty, Difficulty::Hard));
        rows.push(NumericRow {
            id: "mean",
            easy_rmse: e.0,
            easy_er: e.1,
            medium_rmse: m.0,
            medium_er: m.1,
            hard_rmse: h.0,
            hard_er: h.1,
            average_rmse: agg.rmse,
            average_er: agg.error_rate_pct,
            over_rmse: agg.over_rmse,
            under_rmse: agg.under_rmse,
        });
        write_atomic(&out_dir.join("numeric_difficulty.csv"), &csv_bytes(&rows)?)?;
    }
    Ok(())
}

pub fn run(args: &EvaluateArgs) -> Result<i32> {
    let mut metrics = args.metrics.split(',').filter(|s| !s.trim().is_empty()).map(Metric::parse).collect::<Result<Vec<_>>>()?;
    metrics.sort();
    metrics.dedup();
    if metrics.is_empty() {
        return Err(config_error("--metrics is empty"));
    }
    if args.chrf_n == 0 || args.chrf_beta <= 0.0 {
        return Err(config_error("--chrf-n must be >= 1 and --chrf-beta > 0"));
    }
    if metrics.contains(&Metric::Autoqa) && args.qa_n == 0 {
        return Err(config_error("--qa-n must be >= 1"));
    }
    let llm: Vec<&str> = metrics.iter().filter(|m| m.needs_backend()).map(|m| m.label()).collect();
    if !llm.is_empty() && args.backend.is_none() {
        return Err(config_error(format!("metrics {} need --backend", llm.join(","))));
    }
    let setup = match &args.backend {
        Some(spec) if !llm.is_empty() => Some(build_gateway(spec, args.cache_dir.as_deref(), args.parallel)?),
        _ => None,
    };
    let templates = match &args.templates {
        Some(dir) => TemplateSet::load_dir(dir).map_err(|e| config_error(e.to_string()))?,
        None => TemplateSet::builtin(),
    };
    let aliases = load_aliases(args.aliases.as_ref())?;

    let gold = load_dataset(&args.gold, args.kind, None).with_context(|| format!("loading {}", args.gold.display()))?;
    let preds: HashMap<String, TableSet> = load_table_records(&args.pred)
        .with_context(|| format!("loading {}", args.pred.display()))?
        .into_iter()
        .map(|r| (r.id, r.tables))
        .collect();
    let missing: Vec<String> = gold.iter().filter(|s| !preds.contains_key(&s.id)).map(|s| s.id.clone()).collect();

    let mut sims = Vec::new();
    if metrics.contains(&Metric::Em) {
        sims.push(Similarity::exact().with_normalize_case(args.normalize_case));
    }
    if metrics.contains(&Metric::Chrf) {
        sims.push(Similarity::chrf(args.chrf_n, args.chrf_beta).with_normalize_case(args.normalize_case));
    }
    let ctx = Ctx { metrics: &metrics, sims, args, aliases: &aliases, gateway: setup.as_ref().map(|s| &s.gateway), templates: &templates };
    let parallel = setup.as_ref().map(|s| s.parallel).or(args.parallel).unwrap_or(4);
    let scored: Vec<&Sample> = gold.iter().filter(|s| preds.contains_key(&s.id)).collect();
    let samples: Vec<SampleReport> = thread_pool(parallel)?.install(|| {
        scored.par_iter().map(|s| evaluate_sample(s, &preds[&s.id], &ctx)).collect()
    });

    let report = EvalReport {
        parameters: Parameters {
            gold: args.gold.display().to_string(),
            pred: args.pred.display().to_string(),
            kind: args.kind,
            metrics: metrics.clone(),
            chrf_n: args.chrf_n,
            chrf_beta: args.chrf_beta,
            normalize_case: args.normalize_case,
            qa_n: args.qa_n,
            alias_hash: aliases.hash().to_string(),
            matcher: "deterministic".into(),
            averaging: "per-sample, then mean over samples".into(),
            cell_tuples: "filled cells only, as \"row | col | value\", pooled over the tables of a sample".into(),
            backend: setup.as_ref().map(|s| s.descriptor.clone()),
        },
        missing_predictions: missing.clone(),
        aggregate: aggregate(&samples),
        samples,
    };
    write_json(&args.out_dir.join("report.json"), &report)?;
    write_csvs(&report, &args.out_dir)?;

    let errors: Vec<String> = report.samples.iter().flat_map(|s| s.errors.iter().map(move |e| format!("{}: {e}", s.id))).collect();
    for e in &errors {
        eprintln!("{e}");
    }
    if !missing.is_empty() {
        eprintln!("missing predictions for {} samples: {}", missing.len(), missing.join(", "));
    }
    eprintln!("scored {} samples, report in {}", report.samples.len(), args.out_dir.display());
    let ok = errors.is_empty() && (missing.is_empty() || args.allow_partial);
    Ok(if ok { 0 } else { 1 })
}

impl Metric {
    fn label(self) -> &'static str {
        match self {
            Metric::Em => "em",
            Metric::Chrf => "chrf",
            Metric::Embed => "embed",
            Metric::Numeric => "numeric",
            Metric::Autoqa => "autoqa",
            Metric::Tabeval => "tabeval",
        }
    }
}
