//! Pull statements, tuples and final tables out of free-form model responses.
//!
//! Every extractor anchors on the last occurrence of its marker: prompts ask
//! for reasoning first and the final artifact last.

use crate::schema::Schema;
use crate::table::{parse_table_blocks, ParseMode, Parsed};

pub const STATEMENTS_MARKER: &str = "### Atomic Statements";

/// Lines after the last `### Atomic Statements:` marker, up to the next
/// heading (`#`, a bold `**` step line, or a `=====` task delimiter).
///
/// Returns `None` when the marker is absent. List numbering and bullets are
/// stripped.
pub fn extract_statements(text: &str) -> Option<Vec<String>> {
    let start = last_marker_line(text, |l| l.starts_with(STATEMENTS_MARKER))?;
    let mut out = Vec::new();
    for line in text.lines().skip(start + 1) {
        let t = line.trim();
        if t.starts_with('#') || t.starts_with("**") || t.starts_with("=====") {
            break;
        }
        if t.is_empty() || t.starts_with("```") {
            continue;
        }
        let t = strip_list_prefix(t);
        if !t.is_empty() {
            out.push(t.to_string());
        }
    }
    Some(out)
}

fn last_marker_line(text: &str, is_marker: impl Fn(&str) -> bool) -> Option<usize> {
    text.lines().enumerate().filter(|(_, l)| is_marker(l.trim())).map(|(i, _)| i).last()
}

/// Strips `1.`, `1)`, `-`, `*`, `•` prefixes.
pub fn strip_list_prefix(line: &str) -> &str {
    let t = line.trim_start();
    let digits = t.bytes().take_while(u8::is_ascii_digit).count();
    if digits > 0 {
        let rest = &t[digits..];
        if let Some(r) = rest.strip_prefix('.').or_else(|| rest.strip_prefix(')')) {
            if r.is_empty() || r.starts_with(char::is_whitespace) {
                return r.trim_start();
            }
        }
    }
    for bullet in ["- ", "* ", "• "] {
        if let Some(r) = t.strip_prefix(bullet) {
            return r.trim_start();
        }
    }
    t
}

fn is_final_tables_marker(line: &str) -> bool {
    let Some(rest) = line.strip_prefix('#') else { return false };
    let heading = rest.trim_start_matches('#').trim().trim_matches('*').trim().to_ascii_lowercase();
    heading.starts_with("final") && !heading.contains("schema")
}

/// Parses the tables after the last `### Final ...` heading (`### Final Table:`,
/// `### Final Output Tables:`). `None` when no such heading exists.
///
/// Pipe rows that appear before any table heading get a synthetic heading: the
/// schema's only table name when the schema has exactly one table, else the
/// first header cell.
pub fn extract_final_tables(text: &str, schema: Option<&Schema>) -> Option<Parsed> {
    let start = last_marker_line(text, is_final_tables_marker)?;
    let body: Vec<&str> = text.lines().skip(start + 1).collect();
    Some(parse_with_orphan_heading(&body, schema))
}

fn parse_with_orphan_heading(lines: &[&str], schema: Option<&Schema>) -> Parsed {
    let first_pipe = lines.iter().position(|l| l.contains('|'));
    let first_heading = lines.iter().position(|l| l.trim_start().starts_with('#'));
    let orphan = match (first_pipe, first_heading) {
        (Some(p), Some(h)) => p < h,
        (Some(_), None) => true,
        _ => false,
    };
    let mut text = String::new();
    if orphan {
        let sole = schema.filter(|s| s.len() == 1).and_then(|s| s.table_names().next());
        let name = match sole {
            Some(n) => n.to_string(),
            None => {
                let line = lines[first_pipe.unwrap_or(0)].trim();
                let line = line.strip_prefix('|').unwrap_or(line);
                line.split('|').next().unwrap_or("").trim().to_string()
            }
        };
        text.push_str("### ");
        text.push_str(&name);
        text.push('\n');
    }
    text.push_str(&lines.join("\n"));
    parse_table_blocks(&text, ParseMode::Lenient).expect("lenient parsing does not fail")
}

/// Lenient parse of a whole response (single-call baselines).
pub fn extract_any_tables(text: &str) -> Parsed {
    let lines: Vec<&str> = text.lines().collect();
    parse_with_orphan_heading(&lines, None)
}

/// `(entity, attribute, value)` lines, optionally numbered. Splits on the
/// first two commas only, so values keep their own commas.
pub fn extract_tuple_lines(text: &str) -> Vec<(String, String, String)> {
    let mut out = Vec::new();
    for line in text.lines() {
        let t = strip_list_prefix(line.trim());
        let Some(inner) = t.strip_prefix('(') else { continue };
        let Some(end) = inner.rfind(')') else { continue };
        let mut parts = inner[..end].splitn(3, ',').map(str::trim);
        if let (Some(e), Some(a), Some(v)) = (parts.next(), parts.next(), parts.next()) {
            if !e.is_empty() && !a.is_empty() {
                out.push((e.to_string(), a.to_string(), v.to_string()));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{Schema, SchemaEntry};
    use crate::table::CellValue;

    #[test]
    fn statements_after_last_marker() {
        let text = "### Atomic Statements:\nold\n\nreasoning\n### Atomic Statements:\n1. A is 1.\n- B is 2.\n\nC is 3.\n### Next\nignored";
        assert_eq!(extract_statements("### Atomic Statements:\nA.\n\n**Step 1**\nB.").unwrap(), ["A."]);
        assert_eq!(extract_statements(text).unwrap(), ["A is 1.", "B is 2.", "C is 3."]);
        assert_eq!(extract_statements("nothing"), None);
        assert_eq!(extract_statements("### Atomic Statements:\n\n  \n"), Some(vec![]));
    }

    #[test]
    fn list_prefixes() {
        assert_eq!(strip_list_prefix("12. The Suns won."), "The Suns won.");
        assert_eq!(strip_list_prefix("3) x"), "x");
        assert_eq!(strip_list_prefix("1.5 points"), "1.5 points");
        assert_eq!(strip_list_prefix("2016 was a year."), "2016 was a year.");
        assert_eq!(strip_list_prefix("* bullet"), "bullet");
    }

    #[test]
    fn final_tables_after_last_marker() {
        let text = "### Team:\n| Team | Wins |\n| A | None |\n\n### Final Output Tables:\n\n### Team\n| Team | Wins |\n| A | 5 |";
        let p = extract_final_tables(text, None).unwrap();
        assert_eq!(p.tables.len(), 1);
        assert_eq!(p.tables.tables[0].rows[0].cells, vec![CellValue::text("5")]);
        assert!(extract_final_tables("### Final Schema:\n{}", None).is_none());
    }

    #[test]
    fn orphan_rows_take_schema_name() {
        let text = "### Final Table:\n| Team | Goals |\n| Home Team | 2 |";
        let mut schema = Schema::new();
        schema.insert("Football Match", SchemaEntry::default());
        let p = extract_final_tables(text, Some(&schema)).unwrap();
        let t = &p.tables.tables[0];
        assert_eq!((t.name.as_str(), t.row_label.as_str()), ("Football Match", "Team"));
        let p = extract_final_tables(text, None).unwrap();
        assert_eq!(p.tables.tables[0].name, "Team");
    }

    #[test]
    fn tuple_lines() {
        let text = "Tuples:\n1. (Oklahoma City Thunder, Record, 16-17)  \n(A, B, C, D)\nnot a tuple\n(only, two)";
        assert_eq!(
            extract_tuple_lines(text),
            vec![
                ("Oklahoma City Thunder".into(), "Record".into(), "16-17".into()),
                ("A".into(), "B".into(), "C, D".into()),
            ]
        );
    }
}
