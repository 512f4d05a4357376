//! Reference-free coverage: questions generated from the source text are
//! answered from the tables and the answers judged against the references.

use serde::{Deserialize, Serialize};
use text2table_gateway::{Gateway, Message};

use crate::metrics::{parse_yes_no, MetricError};
use crate::pipeline::extract::strip_list_prefix;
use crate::pipeline::templates::TemplateSet;
use crate::table::{serialize_table_set, TableSet};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaPair {
    pub question: String,
    pub answer: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaJudgement {
    pub question: String,
    pub reference_answer: String,
    pub table_answer: String,
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoQaReport {
    pub n_questions: usize,
    pub n_correct: usize,
    pub accuracy_pct: f64,
    pub judgements: Vec<QaJudgement>,
}

impl AutoQaReport {
    pub fn from_judgements(judgements: Vec<QaJudgement>) -> Self {
        let n_questions = judgements.len();
        let n_correct = judgements.iter().filter(|j| j.correct).count();
        let accuracy_pct = if n_questions == 0 { 0.0 } else { 100.0 * n_correct as f64 / n_questions as f64 };
        Self { n_questions, n_correct, accuracy_pct, judgements }
    }
}

/// `Q<k>: ...` / `A<k>: ...` line pairs, numbering optional. A question
/// without a following answer is dropped.
pub fn parse_qa_pairs(text: &str) -> Vec<QaPair> {
    let mut out = Vec::new();
    let mut pending: Option<String> = None;
    for line in text.lines() {
        let t = strip_list_prefix(line.trim()).trim_matches('*').trim();
        if let Some(q) = tagged(t, 'Q') {
            pending = Some(q.to_string());
        } else if let Some(a) = tagged(t, 'A') {
            if let Some(q) = pending.take() {
                out.push(QaPair { question: q, answer: a.to_string() });
            }
        }
    }
    out
}

fn tagged(line: &str, tag: char) -> Option<&str> {
    let rest = line.strip_prefix(tag).or_else(|| line.strip_prefix(tag.to_ascii_lowercase()))?;
    let rest = rest.trim_start_matches(|c: char| c.is_ascii_digit());
    let rest = rest.strip_prefix(':').or_else(|| rest.strip_prefix('.'))?;
    let rest = rest.trim().trim_start_matches("**").trim();
    (!rest.is_empty()).then_some(rest)
}

fn ask(gateway: &Gateway, prompt: String) -> Result<String, MetricError> {
    let req = gateway.request(vec![Message::user(prompt)])?;
    Ok(gateway.complete(&req)?.text)
}

/// Generates up to `n_questions` pairs from `source_text`, answers each from
/// the serialized tables, then judges every answer. Judge replies that are
/// not a clear YES count as incorrect.
pub fn autoqa(
    source_text: &str,
    tables: &TableSet,
    gateway: &Gateway,
    templates: &TemplateSet,
    n_questions: usize,
) -> Result<AutoQaReport, MetricError> {
    if n_questions == 0 {
        return Err(MetricError::InvalidParameter("n_questions must be at least 1".into()));
    }
    let n = n_questions.to_string();
    let gen = ask(gateway, templates.render("autoqa/generate", &[("n_questions", &n), ("input_text", source_text)])?)?;
    let mut pairs = parse_qa_pairs(&gen);
    if pairs.is_empty() {
        return Err(MetricError::QaParseFailure);
    }
    pairs.truncate(n_questions);

    let serialized = serialize_table_set(tables);
    let answers = pairs
        .iter()
        .map(|p| {
            let prompt = templates.render("autoqa/answer", &[("tables", &serialized), ("question", &p.question)])?;
            Ok(ask(gateway, prompt)?.trim().to_string())
        })
        .collect::<Result<Vec<_>, MetricError>>()?;

    let mut judgements = Vec::with_capacity(pairs.len());
    for (p, a) in pairs.into_iter().zip(answers) {
        let prompt = templates.render(
            "autoqa/judge",
            &[("question", &p.question), ("reference_answer", &p.answer), ("table_answer", &a)],
        )?;
        let verdict = ask(gateway, prompt)?;
        judgements.push(QaJudgement {
            question: p.question,
            reference_answer: p.answer,
            table_answer: a,
            correct: parse_yes_no(&verdict) == Some(true),
        });
    }
    Ok(AutoQaReport::from_judgements(judgements))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qa_grammar() {
        let text = "Here you go:\nQ1: Who won?\nA1: Suns\n\nQ2: Score?\nQ3: Points by Booker?\nA3: 32\n**Q4:** Where?\n**A4:** Phoenix";
        let pairs = parse_qa_pairs(text);
        assert_eq!(pairs.len(), 3);
        assert_eq!(pairs[1], QaPair { question: "Points by Booker?".into(), answer: "32".into() });
        assert_eq!(pairs[2].answer, "Phoenix");
        assert_eq!(parse_qa_pairs("Q: a\nA: b")[0].answer, "b");
        assert!(parse_qa_pairs("Quarter: 3\nAnswer: x").is_empty());
    }

    #[test]
    fn accuracy_arithmetic() {
        let j = |c| QaJudgement { question: String::new(), reference_answer: String::new(), table_answer: String::new(), correct: c };
        let r = AutoQaReport::from_judgements(vec![j(true), j(true), j(true), j(false)]);
        assert_eq!(r.accuracy_pct, 75.0);
    }
}
