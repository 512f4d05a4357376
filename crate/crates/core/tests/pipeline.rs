use std::fs;
use std::sync::Arc;

use text2table_core::dataset::Sample;
use text2table_core::pipeline::{
    run_strategy, AblationFlags, PipelineError, RunConfig, Strategy, TemplateSet,
};
use text2table_core::{serialize_table_set, CellValue, DatasetKind, ParseMode};
use text2table_gateway::{DiskCache, Gateway, ReplayBackend, Role, SamplingParams, ScriptedBackend};

fn fixture(path: &str) -> String {
    let root = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/worked/");
    fs::read_to_string(format!("{root}{path}")).unwrap()
}

fn sample(id: &str, text: &str) -> Sample {
    Sample { id: id.into(), text: text.into(), gold: Default::default(), meta: Default::default() }
}

fn scripted(responses: &[&str]) -> (Arc<ScriptedBackend>, Gateway) {
    let backend = Arc::new(ScriptedBackend::new(responses.iter().map(|s| s.to_string())));
    let gw = Gateway::new(backend.clone(), SamplingParams::default());
    (backend, gw)
}

fn cell<'a>(r: &'a text2table_core::pipeline::GenerationResult, t: &str, row: &str, col: &str) -> &'a CellValue {
    r.tables.get(t).unwrap().get(row, col).unwrap()
}

#[test]
fn three_step_reproduces_rotowire_worked_example() {
    let (atomize, schema, table) =
        (fixture("rotowire/atomize.txt"), fixture("rotowire/schema.txt"), fixture("rotowire/table.txt"));
    let (_, gw) = scripted(&[&atomize, &schema, &table]);
    let s = sample("rotowire-worked", &fixture("rotowire/input.txt"));
    let r = run_strategy(&s, &RunConfig::new(Strategy::Mm3Step), &gw, &TemplateSet::builtin()).unwrap();

    assert_eq!(r.stages(), ["atomize", "schema", "table"]);
    assert_eq!(r.statements.len(), 44);
    assert_eq!(r.statements[0].text, "The Hornets' record is 5 wins.");
    assert!(r.statements.iter().enumerate().all(|(i, s)| s.index == i + 1));

    let player = r.schema.get("Player").unwrap();
    assert_eq!(player.row_headers.len(), 9);
    assert_eq!(r.schema.get("Team").unwrap().column_headers.len(), 14);

    assert_eq!(cell(&r, "Player", "Kemba Walker", "Points"), &CellValue::text("11"));
    assert_eq!(cell(&r, "Player", "Kemba Walker", "Buzzer beater"), &CellValue::text("Yes"));
    assert_eq!(cell(&r, "Player", "Carmelo Anthony", "Points"), &CellValue::text("32"));
    assert_eq!(cell(&r, "Team", "Hornets", "Wins"), &CellValue::text("5"));
    assert_eq!(r.tables.len(), 2);
}

#[test]
fn three_step_reproduces_livesum_worked_example() {
    let (_, gw) = scripted(&[
        &fixture("livesum/atomize.txt"),
        &fixture("livesum/schema.txt"),
        &fixture("livesum/table.txt"),
    ]);
    let s = sample("livesum-worked", &fixture("livesum/input.txt"));
    let cfg = RunConfig::new(Strategy::Mm3Step).with_task(DatasetKind::Livesum);
    let r = run_strategy(&s, &cfg, &gw, &TemplateSet::builtin()).unwrap();

    let entry = r.schema.get("Football Match").unwrap();
    assert_eq!(entry.row_headers, ["Home Team", "Away Team"]);
    assert_eq!(entry.column_headers.len(), 9);
    assert_eq!(entry.column_headers[0], "Team");

    let t = r.tables.get("Football Match").unwrap();
    assert_eq!(t.row_label, "Team");
    let row = |name: &str| -> Vec<&str> {
        t.rows[t.row_index(name).unwrap()].cells.iter().map(|c| c.wire()).collect()
    };
    // Fouls, Offsides, Free Kicks, Shots, Shots on Target, Corner Kicks, Yellow Cards, Goals
    assert_eq!(row("Home Team"), ["5", "3", "11", "20", "6", "11", "1", "2"]);
    assert_eq!(row("Away Team"), ["11", "3", "6", "6", "1", "2", "3", "0"]);
}

const COT_OUTPUT: &str = "### Team\n| Team | Wins | Losses | Total Points |\n| Thunder | 16 | 17| None |\n| Suns | 18 | None | 134 |\n\n### Player\n| Player | Points | Minutes Played |\n| Kevin Durant | 44 | 40 |\n";

#[test]
fn one_shot_cot_single_call() {
    let (backend, gw) = scripted(&[COT_OUTPUT]);
    let s = sample("s", "The Oklahoma City Thunder (16 - 17) defeated the Phoenix Suns.");
    let r = run_strategy(&s, &RunConfig::new(Strategy::CotOneShot), &gw, &TemplateSet::builtin()).unwrap();
    assert_eq!(r.stages(), ["tables"]);
    assert_eq!(cell(&r, "Team", "Thunder", "Wins"), &CellValue::text("16"));
    let prompt = &backend.requests()[0].messages[0].content;
    assert!(prompt.contains("Sample Illustration:"));
    assert!(prompt.contains("defeated the Phoenix Suns."));

    let (backend, gw) = scripted(&[COT_OUTPUT]);
    run_strategy(&s, &RunConfig::new(Strategy::CotZeroShot), &gw, &TemplateSet::builtin()).unwrap();
    assert!(!backend.requests()[0].messages[0].content.contains("Sample Illustration:"));
}

#[test]
fn atomize_without_marker_retries_once_then_fails() {
    let (backend, gw) = scripted(&["no marker here", "still nothing"]);
    let s = sample("s", "Some text.");
    let err = run_strategy(&s, &RunConfig::new(Strategy::Mm3Step), &gw, &TemplateSet::builtin()).unwrap_err();
    assert_eq!(err.stage, "atomize");
    assert!(matches!(err.error, PipelineError::MalformedResponse(_)));
    assert_eq!(err.transcript.len(), 2);
    assert_eq!((err.transcript[0].attempt, err.transcript[1].attempt), (1, 2));
    let repair = &backend.requests()[1];
    let roles: Vec<Role> = repair.messages.iter().map(|m| m.role).collect();
    assert_eq!(roles, [Role::User, Role::Assistant, Role::User]);
    assert_eq!(repair.messages[1].content, "no marker here");
}

#[test]
fn repaired_response_is_accepted() {
    let (_, gw) = scripted(&[
        "oops",
        "### Atomic Statements:\nThe Suns scored 134 points.",
        r#"{"Team": {"row_headers": ["Suns"], "column_headers": ["Points"]}}"#,
        "### Final Table:\n| Team | Points |\n| Suns | 134 |",
    ]);
    let r = run_strategy(&sample("s", "x"), &RunConfig::new(Strategy::Mm3Step), &gw, &TemplateSet::builtin())
        .unwrap();
    assert_eq!(r.stages(), ["atomize", "atomize", "schema", "table"]);
    assert_eq!(r.warnings.len(), 1);
    let t = &r.tables.tables[0];
    assert_eq!((t.name.as_str(), t.rows.len(), t.column_headers.len()), ("Team", 1, 1));
}

#[test]
fn empty_statement_section_is_not_retried() {
    let (_, gw) = scripted(&["### Atomic Statements:\n\n"]);
    let err = run_strategy(&sample("s", "x"), &RunConfig::new(Strategy::Mm3Step), &gw, &TemplateSet::builtin())
        .unwrap_err();
    assert!(matches!(err.error, PipelineError::EmptyStatements));
    assert_eq!(err.transcript.len(), 1);
}

#[test]
fn atomization_ablation_uses_sentence_split() {
    let (backend, gw) = scripted(&[
        r#"{"Score": {"row_headers": ["A", "B"], "column_headers": ["Points"]}}"#,
        "### Final Table:\n| Player | Points |\n| A | 3 |\n| B | 4 |",
    ]);
    let flags: AblationFlags = "atomization".parse().unwrap();
    let cfg = RunConfig::new(Strategy::Mm3Step).with_flags(flags);
    let r = run_strategy(&sample("s", "A scored 3. B scored 4."), &cfg, &gw, &TemplateSet::builtin()).unwrap();
    let texts: Vec<&str> = r.statements.iter().map(|s| s.text.as_str()).collect();
    assert_eq!(texts, ["A scored 3.", "B scored 4."]);
    assert_eq!(r.stages(), ["schema", "table"]);
    assert!(backend.requests()[0].messages[0].content.contains("1. A scored 3.\n2. B scored 4."));
    assert_eq!(r.tables.get("Score").unwrap().get("B", "Points").unwrap(), &CellValue::text("4"));
}

#[test]
fn non_iterative_ablations_select_direct_templates() {
    let (backend, gw) = scripted(&[
        "### Atomic Statements:\nA scored 3.",
        r#"{"T": {"row_headers": ["A"], "column_headers": ["Points"]}}"#,
        "### Final Output Tables:\n### T\n| T | Points |\n| A | 3 |",
    ]);
    let flags: AblationFlags = "iter-schema,iter-table".parse().unwrap();
    let cfg = RunConfig::new(Strategy::Mm3Step).with_flags(flags);
    run_strategy(&sample("s", "A scored 3."), &cfg, &gw, &TemplateSet::builtin()).unwrap();
    let reqs = backend.requests();
    let t = TemplateSet::builtin();
    let direct_schema_head = &t.get("mm-3s/schema_direct").unwrap()[..200];
    assert!(reqs[1].messages[0].content.contains("in a single pass"));
    assert!(reqs[1].messages[0].content.starts_with(direct_schema_head));
    assert!(reqs[2].messages[0].content.contains("without per-statement updates"));
    assert!("bogus".parse::<AblationFlags>().is_err());
}

#[test]
fn t3_two_calls_with_tuples() {
    let (backend, gw) = scripted(&[
        "Tuples:\n1. (Oklahoma City Thunder, Record, 16-17)\n2. (Kevin Durant, Points Scored, 44)",
        COT_OUTPUT,
    ]);
    let r = run_strategy(&sample("s", "x"), &RunConfig::new(Strategy::T3), &gw, &TemplateSet::builtin()).unwrap();
    assert_eq!(r.stages(), ["tuples", "tables"]);
    let second = &backend.requests()[1].messages[0].content;
    assert!(second.contains("1. (Oklahoma City Thunder, Record, 16-17)\n2. (Kevin Durant, Points Scored, 44)"));
}

#[test]
fn t3_counting_aggregates_in_process() {
    let (backend, gw) = scripted(&[
        "1. (Home Team, Goal, 1)\n2. (Home Team, Missed attempt, 1)\n3. (Away Team, Foul, 1)\n4. (Away Team, Handball, 1)",
        "### Football Match\n| Team | Goals | Shots | Fouls |\n| Home Team | 1 | 2 | 0 |\n| Away Team | 0 | 0 | 2 |",
    ]);
    let cfg = RunConfig::new(Strategy::T3).with_task(DatasetKind::Livesum);
    let r = run_strategy(&sample("s", "x"), &cfg, &gw, &TemplateSet::builtin()).unwrap();
    assert_eq!(r.transcript.len(), 2);
    let second = &backend.requests()[1].messages[0].content;
    assert!(second.contains("1. (Home Team, Goals, 1)\n2. (Home Team, Shots, 2)\n3. (Away Team, Fouls, 2)"));
}

#[test]
fn t3_without_tuples_fails_after_retry() {
    let (_, gw) = scripted(&["nothing", "still nothing"]);
    let err = run_strategy(&sample("s", "x"), &RunConfig::new(Strategy::T3), &gw, &TemplateSet::builtin())
        .unwrap_err();
    assert!(matches!(err.error, PipelineError::NoTuplesFound));
    assert_eq!(err.stage, "tuples");
}

#[test]
fn t3_merged_single_call() {
    let (_, gw) = scripted(&[COT_OUTPUT]);
    let r = run_strategy(&sample("s", "x"), &RunConfig::new(Strategy::T3D), &gw, &TemplateSet::builtin()).unwrap();
    assert_eq!(r.transcript.len(), 1);
}

#[test]
fn unified_single_call_extracts_all_three() {
    let response = format!(
        "{}\n\n{}\n\n{}",
        fixture("rotowire/atomize.txt"),
        fixture("rotowire/schema.txt"),
        fixture("rotowire/table.txt")
    );
    let (backend, gw) = scripted(&[&response]);
    let r = run_strategy(&sample("s", "x"), &RunConfig::new(Strategy::MmUnified), &gw, &TemplateSet::builtin())
        .unwrap();
    assert_eq!(r.stages(), ["unified"]);
    assert_eq!(r.statements.len(), 44);
    assert_eq!(r.schema.len(), 2);
    assert_eq!(cell(&r, "Player", "Carmelo Anthony", "Points"), &CellValue::text("32"));
    let prompt = &backend.requests()[0].messages[0].content;
    for marker in ["===== TASK 1 =====", "===== TASK 3 =====", "===== INPUT =====\nx"] {
        assert!(prompt.contains(marker), "{marker}");
    }
}

#[test]
fn unified_with_split_statements_omits_atomization_task() {
    let response = "### Final Schema:\n{\"T\": {\"row_headers\": [\"A\"], \"column_headers\": [\"Points\"]}}\n### Final Output Tables:\n### T\n| T | Points |\n| A | 3 |";
    let (backend, gw) = scripted(&[response]);
    let cfg = RunConfig::new(Strategy::MmUnified).with_flags("atomization".parse().unwrap());
    let r = run_strategy(&sample("s", "A scored 3."), &cfg, &gw, &TemplateSet::builtin()).unwrap();
    assert_eq!(r.statements.len(), 1);
    let prompt = &backend.requests()[0].messages[0].content;
    assert!(!prompt.contains("===== TASK 3 ====="));
    assert!(prompt.contains("Statements:\n1. A scored 3."));
}

#[test]
fn empty_input_rejected() {
    let (_, gw) = scripted(&[]);
    let err = run_strategy(&sample("s", "  "), &RunConfig::new(Strategy::Mm3Step), &gw, &TemplateSet::builtin())
        .unwrap_err();
    assert!(matches!(err.error, PipelineError::EmptyInput));
}

#[test]
fn statement_guard() {
    let many: String = (0..5).map(|i| format!("S{i} happened.\n")).collect();
    let (_, gw) = scripted(&[&format!("### Atomic Statements:\n{many}")]);
    let mut cfg = RunConfig::new(Strategy::Mm3Step);
    cfg.max_statements = 4;
    let err = run_strategy(&sample("s", "x"), &cfg, &gw, &TemplateSet::builtin()).unwrap_err();
    assert!(matches!(err.error, PipelineError::TooManyStatements { count: 5, max: 4 }));
}

#[test]
fn replay_reproduces_cached_run() {
    let dir = tempfile::tempdir().unwrap();
    let s = sample("livesum-worked", &fixture("livesum/input.txt"));
    let cfg = RunConfig::new(Strategy::Mm3Step).with_task(DatasetKind::Livesum);
    let templates = TemplateSet::builtin();
    let (_, gw) = scripted(&[
        &fixture("livesum/atomize.txt"),
        &fixture("livesum/schema.txt"),
        &fixture("livesum/table.txt"),
    ]);
    let gw = gw.with_cache(DiskCache::open(dir.path()).unwrap());
    let first = run_strategy(&s, &cfg, &gw, &templates).unwrap();

    let replay = Gateway::new(Arc::new(ReplayBackend::new(dir.path())), SamplingParams::default());
    let second = run_strategy(&s, &cfg, &replay, &templates).unwrap();
    assert_eq!(first, second);
    let text = serialize_table_set(&second.tables);
    let reparsed = text2table_core::parse_table_blocks(&text, ParseMode::Strict).unwrap();
    assert_eq!(reparsed.tables, second.tables);

    let err = run_strategy(&sample("other", "different"), &cfg, &replay, &templates).unwrap_err();
    assert!(matches!(err.error, PipelineError::Gateway(_)));
}
