//! Reshape predicted tables onto the gold headers.

use serde::{Deserialize, Serialize};
use text2table_gateway::{Gateway, Message};

use crate::analysis::aliases::Aliases;
use crate::normalize::normalize_header;
use crate::pipeline::templates::TemplateSet;
use crate::table::{CellValue, Row, Table, TableSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMethod {
    Normalized,
    Alias,
    Llm,
    /// Table pairing only: the single unpaired gold and pred tables.
    Leftover,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Table,
    Row,
    Column,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeaderMapping {
    /// Gold table the mapping belongs to (the gold name itself for `Axis::Table`).
    pub table: String,
    pub axis: Axis,
    pub pred: String,
    pub gold: String,
    pub method: MatchMethod,
}

/// Structural differences for one gold table, or for one unpaired pred table
/// (then `gold` is `None` and everything is extra).
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TableAlignment {
    pub gold: Option<String>,
    pub pred: Option<String>,
    pub gold_col_count: usize,
    pub extra_rows: Vec<String>,
    pub extra_cols: Vec<String>,
    pub missing_rows: Vec<String>,
    pub missing_cols: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AlignedResult {
    /// Gold's exact names, headers and order; values pulled from the pred.
    pub mapped: TableSet,
    pub tables: Vec<TableAlignment>,
    pub mapping: Vec<HeaderMapping>,
    pub warnings: Vec<String>,
}

impl AlignedResult {
    pub fn for_gold_table(&self, name: &str) -> Option<&TableAlignment> {
        let key = normalize_header(name);
        self.tables
            .iter()
            .find(|t| t.gold.as_deref().is_some_and(|g| normalize_header(g) == key))
    }
}

pub enum Matcher<'a> {
    Deterministic(&'a Aliases),
    LlmAssisted { aliases: &'a Aliases, gateway: &'a Gateway, templates: &'a TemplateSet },
}

impl Matcher<'_> {
    pub fn aliases(&self) -> &Aliases {
        match self {
            Matcher::Deterministic(a) => a,
            Matcher::LlmAssisted { aliases, .. } => aliases,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Matcher::Deterministic(_) => "deterministic",
            Matcher::LlmAssisted { .. } => "llm-assisted",
        }
    }
}

/// One-to-one header matching: normalized equality first, then alias
/// equivalence, each pass walking gold headers in order. Returns
/// `(gold index, pred index, method)` and leaves the rest unmatched.
pub fn match_headers(gold: &[&str], pred: &[&str], aliases: &Aliases) -> Vec<(usize, usize, MatchMethod)> {
    let mut used_pred = vec![false; pred.len()];
    let mut used_gold = vec![false; gold.len()];
    let mut out = Vec::new();
    type Same<'f> = &'f dyn Fn(&str, &str) -> bool;
    let passes: [(MatchMethod, Same); 2] = [
        (MatchMethod::Normalized, &|g, p| normalize_header(g) == normalize_header(p)),
        (MatchMethod::Alias, &|g, p| aliases.equivalent(g, p)),
    ];
    for (method, same) in passes {
        for (gi, g) in gold.iter().enumerate() {
            if used_gold[gi] {
                continue;
            }
            if let Some(pi) = (0..pred.len()).find(|&pi| !used_pred[pi] && same(g, pred[pi])) {
                used_gold[gi] = true;
                used_pred[pi] = true;
                out.push((gi, pi, method));
            }
        }
    }
    out
}

/// Pairs tables by normalized name, then alias-equivalent name; if exactly
/// one gold and one pred table remain, they are paired as well.
pub fn pair_tables(gold: &TableSet, pred: &TableSet, aliases: &Aliases) -> Vec<(usize, usize, MatchMethod)> {
    let g: Vec<&str> = gold.iter().map(|t| t.name.as_str()).collect();
    let p: Vec<&str> = pred.iter().map(|t| t.name.as_str()).collect();
    let mut pairs = match_headers(&g, &p, aliases);
    let free_g: Vec<usize> = (0..g.len()).filter(|i| !pairs.iter().any(|x| x.0 == *i)).collect();
    let free_p: Vec<usize> = (0..p.len()).filter(|i| !pairs.iter().any(|x| x.1 == *i)).collect();
    if let ([gi], [pi]) = (free_g.as_slice(), free_p.as_slice()) {
        pairs.push((*gi, *pi, MatchMethod::Leftover));
    }
    pairs.sort_by_key(|x| x.0);
    pairs
}

struct AxisMatch {
    /// For each gold index, the matched pred index.
    gold_to_pred: Vec<Option<usize>>,
    methods: Vec<Option<MatchMethod>>,
}

impl AxisMatch {
    fn new(pairs: Vec<(usize, usize, MatchMethod)>, n_gold: usize) -> Self {
        let mut gold_to_pred = vec![None; n_gold];
        let mut methods = vec![None; n_gold];
        for (g, p, m) in pairs {
            gold_to_pred[g] = Some(p);
            methods[g] = Some(m);
        }
        Self { gold_to_pred, methods }
    }

    fn pred_used(&self, p: usize) -> bool {
        self.gold_to_pred.contains(&Some(p))
    }

    fn add(&mut self, g: usize, p: usize, m: MatchMethod) {
        if self.gold_to_pred[g].is_none() && !self.pred_used(p) {
            self.gold_to_pred[g] = Some(p);
            self.methods[g] = Some(m);
        }
    }
}

/// Asks the model which residual header pairs denote the same thing.
/// Only YES answers are used; anything unparseable means no match.
fn llm_residuals(
    gold: &Table,
    pred: &Table,
    rows: &mut AxisMatch,
    cols: &mut AxisMatch,
    gateway: &Gateway,
    templates: &TemplateSet,
) -> Result<(), String> {
    let mut candidates = Vec::new();
    for (axis, gold_h, pred_h, m) in [
        (Axis::Column, gold.column_headers.iter().map(String::as_str).collect::<Vec<_>>(), pred.column_headers.iter().map(String::as_str).collect::<Vec<_>>(), &*cols),
        (Axis::Row, gold.row_headers().collect(), pred.row_headers().collect(), &*rows),
    ] {
        for (gi, g) in gold_h.iter().enumerate() {
            if m.gold_to_pred[gi].is_some() {
                continue;
            }
            for (pi, p) in pred_h.iter().enumerate() {
                if !m.pred_used(pi) {
                    candidates.push((axis, gi, pi, g.to_string(), p.to_string()));
                }
            }
        }
    }
    if candidates.is_empty() {
        return Ok(());
    }
    let listing: Vec<String> = candidates
        .iter()
        .enumerate()
        .map(|(k, (axis, _, _, g, p))| {
            let kind = if *axis == Axis::Row { "row" } else { "column" };
            format!("{}. {kind}: predicted \"{p}\" / reference \"{g}\"", k + 1)
        })
        .collect();
    let prompt = templates
        .render("align/match", &[("table_name", &gold.name), ("candidates", &listing.join("\n"))])
        .map_err(|e| e.to_string())?;
    let req = gateway.request(vec![Message::user(prompt)]).map_err(|e| e.to_string())?;
    let resp = gateway.complete(&req).map_err(|e| e.to_string())?;
    for line in resp.text.lines() {
        let Some((k, verdict)) = line.split_once(':') else { continue };
        let Ok(k) = k.trim().trim_start_matches(|c: char| !c.is_ascii_digit()).parse::<usize>() else {
            continue;
        };
        if k == 0 || k > candidates.len() || !crate::metrics::is_yes(verdict) {
            continue;
        }
        let (axis, gi, pi, _, _) = &candidates[k - 1];
        let m = if *axis == Axis::Row { &mut *rows } else { &mut *cols };
        m.add(*gi, *pi, MatchMethod::Llm);
    }
    Ok(())
}

/// Aligns one pred table onto one gold table. The result keeps gold's name.
pub fn align_table(gold: &Table, pred: &Table, matcher: &Matcher<'_>) -> (Table, TableAlignment, Vec<HeaderMapping>, Vec<String>) {
    let aliases = matcher.aliases();
    let gold_cols: Vec<&str> = gold.column_headers.iter().map(String::as_str).collect();
    let pred_cols: Vec<&str> = pred.column_headers.iter().map(String::as_str).collect();
    let gold_rows: Vec<&str> = gold.row_headers().collect();
    let pred_rows: Vec<&str> = pred.row_headers().collect();
    let mut cols = AxisMatch::new(match_headers(&gold_cols, &pred_cols, aliases), gold_cols.len());
    let mut rows = AxisMatch::new(match_headers(&gold_rows, &pred_rows, aliases), gold_rows.len());
    let mut warnings = Vec::new();
    if let Matcher::LlmAssisted { gateway, templates, .. } = matcher {
        if let Err(e) = llm_residuals(gold, pred, &mut rows, &mut cols, gateway, templates) {
            warnings.push(format!("table {}: header matching call failed: {e}", gold.name));
        }
    }

    let mapped_rows = gold
        .rows
        .iter()
        .enumerate()
        .map(|(gi, grow)| {
            let cells = (0..gold_cols.len())
                .map(|gc| match (rows.gold_to_pred[gi], cols.gold_to_pred[gc]) {
                    (Some(pr), Some(pc)) => pred.rows[pr].cells[pc].clone(),
                    _ => CellValue::Absent,
                })
                .collect();
            Row::new(grow.header.clone(), cells)
        })
        .collect();
    let mapped = Table::new(gold.name.clone(), gold.row_label.clone(), gold.column_headers.clone(), mapped_rows)
        .expect("gold table shape is valid");

    let mut mapping = Vec::new();
    for (axis, m, g, p) in [(Axis::Row, &rows, &gold_rows, &pred_rows), (Axis::Column, &cols, &gold_cols, &pred_cols)] {
        for (gi, pi) in m.gold_to_pred.iter().enumerate() {
            if let (Some(pi), Some(method)) = (pi, m.methods[gi]) {
                mapping.push(HeaderMapping {
                    table: gold.name.clone(),
                    axis,
                    pred: p[*pi].to_string(),
                    gold: g[gi].to_string(),
                    method,
                });
            }
        }
    }
    let alignment = TableAlignment {
        gold: Some(gold.name.clone()),
        pred: Some(pred.name.clone()),
        gold_col_count: gold_cols.len(),
        extra_rows: unmatched_pred(&pred_rows, &rows),
        extra_cols: unmatched_pred(&pred_cols, &cols),
        missing_rows: unmatched_gold(&gold_rows, &rows),
        missing_cols: unmatched_gold(&gold_cols, &cols),
    };
    (mapped, alignment, mapping, warnings)
}

fn unmatched_pred(pred: &[&str], m: &AxisMatch) -> Vec<String> {
    (0..pred.len()).filter(|&p| !m.pred_used(p)).map(|p| pred[p].to_string()).collect()
}

fn unmatched_gold(gold: &[&str], m: &AxisMatch) -> Vec<String> {
    (0..gold.len()).filter(|&g| m.gold_to_pred[g].is_none()).map(|g| gold[g].to_string()).collect()
}

fn empty_like(gold: &Table) -> Table {
    let rows = gold
        .rows
        .iter()
        .map(|r| Row::new(r.header.clone(), vec![CellValue::Absent; gold.column_headers.len()]))
        .collect();
    Table::new(gold.name.clone(), gold.row_label.clone(), gold.column_headers.clone(), rows)
        .expect("gold table shape is valid")
}

/// Maps every pred table onto its paired gold table. Unpaired gold tables are
/// wholly missing, unpaired pred tables wholly extra.
pub fn align_to_gold(pred: &TableSet, gold: &TableSet, matcher: &Matcher<'_>) -> AlignedResult {
    let pairs = pair_tables(gold, pred, matcher.aliases());
    let mut out = AlignedResult::default();
    let mut mapped = Vec::with_capacity(gold.len());
    for (gi, g) in gold.iter().enumerate() {
        match pairs.iter().find(|x| x.0 == gi) {
            Some(&(_, pi, method)) => {
                let p = &pred.tables[pi];
                let (t, alignment, mapping, warnings) = align_table(g, p, matcher);
                out.mapping.push(HeaderMapping {
                    table: g.name.clone(),
                    axis: Axis::Table,
                    pred: p.name.clone(),
                    gold: g.name.clone(),
                    method,
                });
                mapped.push(t);
                out.tables.push(alignment);
                out.mapping.extend(mapping);
                out.warnings.extend(warnings);
            }
            None => {
                mapped.push(empty_like(g));
                out.tables.push(TableAlignment {
                    gold: Some(g.name.clone()),
                    pred: None,
                    gold_col_count: g.column_headers.len(),
                    missing_rows: g.row_headers().map(str::to_string).collect(),
                    missing_cols: g.column_headers.clone(),
                    ..Default::default()
                });
            }
        }
    }
    for (pi, p) in pred.iter().enumerate() {
        if !pairs.iter().any(|x| x.1 == pi) {
            out.tables.push(TableAlignment {
                gold: None,
                pred: Some(p.name.clone()),
                extra_rows: p.row_headers().map(str::to_string).collect(),
                extra_cols: p.column_headers.clone(),
                ..Default::default()
            });
        }
    }
    out.mapped = TableSet::new(mapped).expect("gold names are unique");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::{parse_table_blocks, ParseMode};

    fn ts(s: &str) -> TableSet {
        parse_table_blocks(s, ParseMode::Strict).unwrap().tables
    }

    const GOLD: &str = "### Team\n| Team | Wins | Total Points | Turnovers |\n| Thunder | 16 | 137 | 10 |\n| Suns | 18 | 134 | 12 |";

    #[test]
    fn normalized_alias_extra_and_missing() {
        let gold = ts(GOLD);
        let pred = ts("### team\n| Team | points | wins | Injury Status |\n| Suns | 134 | 18 | healthy |\n| thunder | 137 | 16 | None |\n| Lakers | 1 | 1 | 1 |");
        let aliases = Aliases::builtin();
        let r = align_to_gold(&pred, &gold, &Matcher::Deterministic(&aliases));
        let t = &r.tables[0];
        assert_eq!(t.extra_cols, ["Injury Status"]);
        assert_eq!(t.missing_cols, ["Turnovers"]);
        assert_eq!(t.extra_rows, ["Lakers"]);
        assert!(t.missing_rows.is_empty());
        let m = &r.mapped.tables[0];
        assert_eq!(m.column_headers, gold.tables[0].column_headers);
        assert_eq!(m.get("Thunder", "Total Points").unwrap(), &CellValue::text("137"));
        assert_eq!(m.get("Suns", "Wins").unwrap(), &CellValue::text("18"));
        assert!(m.get("Suns", "Turnovers").unwrap().is_absent());
        let method = |pred: &str| r.mapping.iter().find(|h| h.pred == pred).unwrap().method;
        assert_eq!(method("wins"), MatchMethod::Normalized);
        assert_eq!(method("points"), MatchMethod::Alias);
    }

    #[test]
    fn mapping_partitions_pred_headers() {
        let gold = ts(GOLD);
        let pred = ts("### Team\n| Team | Total points | Wins | Extra |\n| Suns | 1 | 2 | 3 |");
        let r = align_to_gold(&pred, &gold, &Matcher::Deterministic(&Aliases::none()));
        let mapped_cols: Vec<&str> =
            r.mapping.iter().filter(|h| h.axis == Axis::Column).map(|h| h.pred.as_str()).collect();
        let mut all: Vec<&str> = mapped_cols.iter().copied().chain(r.tables[0].extra_cols.iter().map(String::as_str)).collect();
        all.sort_unstable();
        assert_eq!(all, ["Extra", "Total points", "Wins"]);
    }

    #[test]
    fn alias_ties_follow_gold_order() {
        let aliases = Aliases::parse("points = total points\npts = points").unwrap();
        let m = match_headers(&["Points", "Total Points"], &["pts"], &aliases);
        assert_eq!(m, vec![(0, 0, MatchMethod::Alias)]);
    }

    #[test]
    fn unpaired_tables() {
        let gold = ts("### Team\n| Team | Wins |\n| A | 1 |\n\n### Player\n| Player | Points |\n| B | 2 |");
        let pred = ts("### Team\n| Team | Wins |\n| A | 1 |");
        let r = align_to_gold(&pred, &gold, &Matcher::Deterministic(&Aliases::none()));
        let player = r.for_gold_table("Player").unwrap();
        assert_eq!(player.missing_cols, ["Points"]);
        assert_eq!(player.missing_rows, ["B"]);
        assert!(r.mapped.get("Player").unwrap().get("B", "Points").unwrap().is_absent());

        let pred = ts("### Team\n| Team | Wins |\n| A | 1 |\n\n### Coach\n| Coach | Age |\n| C | 50 |\n\n### Venue\n| Venue | Seats |\n| V | 9 |");
        let gold = ts("### Team\n| Team | Wins |\n| A | 1 |");
        let r = align_to_gold(&pred, &gold, &Matcher::Deterministic(&Aliases::none()));
        let extra: Vec<_> = r.tables.iter().filter(|t| t.gold.is_none()).collect();
        assert_eq!(extra.len(), 2);
        assert_eq!(extra[0].extra_cols, ["Age"]);
    }

    #[test]
    fn single_leftover_tables_pair() {
        let gold = ts("### Match Stats\n| Team | Goals |\n| Home Team | 2 |");
        let pred = ts("### Football Match\n| Team | Goals |\n| Home Team | 2 |");
        let r = align_to_gold(&pred, &gold, &Matcher::Deterministic(&Aliases::none()));
        assert_eq!(r.mapped.tables[0].get("Home Team", "Goals").unwrap(), &CellValue::text("2"));
        assert_eq!(r.mapping[0].method, MatchMethod::Leftover);
    }
}
