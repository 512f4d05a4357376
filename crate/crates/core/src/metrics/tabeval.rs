//! Entailment scoring over unrolled tables.

use serde::{Deserialize, Serialize};
use text2table_gateway::{Gateway, Message};

use crate::analysis::{match_headers, Aliases};
use crate::metrics::{parse_yes_no, MetricError};
use crate::pipeline::templates::TemplateSet;
use crate::table::{serialize_table_set, Table, TableSet};

/// One sentence per filled cell, row-major:
/// `The <col> of <row> in table <name> is <value>.`
pub fn unroll_table(t: &Table) -> Vec<String> {
    let mut out = Vec::new();
    for row in &t.rows {
        for (col, cell) in t.column_headers.iter().zip(&row.cells) {
            if let Some(v) = cell.as_text() {
                out.push(format!("The {col} of {} in table {} is {v}.", row.header, t.name));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EntailmentScores {
    pub correctness: f64,
    pub completeness: f64,
    pub overall: f64,
    pub pred_statements: usize,
    pub pred_entailed: usize,
    pub gold_statements: usize,
    pub gold_entailed: usize,
}

impl EntailmentScores {
    fn from_counts(pred_statements: usize, pred_entailed: usize, gold_statements: usize, gold_entailed: usize) -> Self {
        // Both sides empty is perfect agreement; one empty side scores 0.
        let (correctness, completeness) = match (pred_statements, gold_statements) {
            (0, 0) => (1.0, 1.0),
            (0, _) | (_, 0) => (0.0, 0.0),
            (p, g) => (pred_entailed as f64 / p as f64, gold_entailed as f64 / g as f64),
        };
        let overall = if correctness + completeness == 0.0 {
            0.0
        } else {
            2.0 * correctness * completeness / (correctness + completeness)
        };
        Self { correctness, completeness, overall, pred_statements, pred_entailed, gold_statements, gold_entailed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableEntailment {
    /// Gold name when paired or gold-only, else the pred name.
    pub table: String,
    #[serde(flatten)]
    pub scores: EntailmentScores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabEvalReport {
    /// Pooled over every statement of the sample.
    #[serde(flatten)]
    pub scores: EntailmentScores,
    pub tables: Vec<TableEntailment>,
}

fn entailed(gateway: &Gateway, templates: &TemplateSet, premise: &str, statements: &[String]) -> Result<usize, MetricError> {
    let mut n = 0;
    for s in statements {
        let prompt = templates.render("tabeval/entail", &[("premise", premise), ("statement", s)])?;
        let req = gateway.request(vec![Message::user(prompt)])?;
        if parse_yes_no(&gateway.complete(&req)?.text) == Some(true) {
            n += 1;
        }
    }
    Ok(n)
}

fn premise(t: &Table) -> String {
    serialize_table_set(&TableSet::new(vec![t.clone()]).expect("single table"))
}

/// Tables are paired by normalized name. Statements of unpaired tables are
/// counted but never judged, so they score 0.
pub fn tabeval(pred: &TableSet, gold: &TableSet, gateway: &Gateway, templates: &TemplateSet) -> Result<TabEvalReport, MetricError> {
    let gn: Vec<&str> = gold.iter().map(|t| t.name.as_str()).collect();
    let pn: Vec<&str> = pred.iter().map(|t| t.name.as_str()).collect();
    let pairs = match_headers(&gn, &pn, &Aliases::none());
    let mut tables = Vec::new();
    let (mut ps, mut pe, mut gs, mut ge) = (0, 0, 0, 0);
    let mut push = |name: &str, p: Option<&Table>, g: Option<&Table>| -> Result<(), MetricError> {
        let pst = p.map(unroll_table).unwrap_or_default();
        let gst = g.map(unroll_table).unwrap_or_default();
        let (p_ok, g_ok) = match (p, g) {
            (Some(p), Some(g)) => (entailed(gateway, templates, &premise(g), &pst)?, entailed(gateway, templates, &premise(p), &gst)?),
            _ => (0, 0),
        };
        ps += pst.len();
        pe += p_ok;
        gs += gst.len();
        ge += g_ok;
        tables.push(TableEntailment {
            table: name.to_string(),
            scores: EntailmentScores::from_counts(pst.len(), p_ok, gst.len(), g_ok),
        });
        Ok(())
    };
    for (gi, g) in gold.iter().enumerate() {
        let p = pairs.iter().find(|x| x.0 == gi).map(|x| &pred.tables[x.1]);
        push(&g.name, p, Some(g))?;
    }
    for (pi, p) in pred.iter().enumerate() {
        if !pairs.iter().any(|x| x.1 == pi) {
            push(&p.name, Some(p), None)?;
        }
    }
    Ok(TabEvalReport { scores: EntailmentScores::from_counts(ps, pe, gs, ge), tables })
}
