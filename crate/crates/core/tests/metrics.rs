use std::sync::Arc;

use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use text2table_core::analysis::Aliases;
use text2table_core::dataset::{Difficulty, LivesumEvent};
use text2table_core::metrics::{
    autoqa, chrf, coverage_report, numeric_eval, score_cells, CountCell, tabeval, tuple_coverage, Direction, Embeddings, MetricError, Similarity,
};
use text2table_core::pipeline::TemplateSet;
use text2table_core::{extract_tuples, CellValue, ContentTuple, Row, Table, TableSet};
use text2table_gateway::{ChatRequest, Gateway, SamplingParams, ScriptedBackend};

// Brute-force chrF: lists every n-gram as a String and counts matches with
// linear scans.
fn chrf_oracle(hyp: &str, reference: &str, max_n: usize, beta: f64) -> f64 {
    let h: Vec<char> = hyp.chars().filter(|c| !c.is_whitespace()).collect();
    let r: Vec<char> = reference.chars().filter(|c| !c.is_whitespace()).collect();
    let grams = |s: &[char], n: usize| -> Vec<String> {
        let mut out = Vec::new();
        let mut i = 0;
        while i + n <= s.len() {
            out.push(s[i..i + n].iter().collect());
            i += 1;
        }
        out
    };
    let mut ps = Vec::new();
    let mut rs = Vec::new();
    for n in 1..=max_n {
        let hg = grams(&h, n);
        let rg = grams(&r, n);
        if rg.is_empty() {
            continue;
        }
        let mut seen: Vec<&String> = Vec::new();
        let mut overlap = 0usize;
        for g in &hg {
            if seen.contains(&g) {
                continue;
            }
            seen.push(g);
            let in_h = hg.iter().filter(|x| *x == g).count();
            let in_r = rg.iter().filter(|x| *x == g).count();
            overlap += in_h.min(in_r);
        }
        ps.push(if hg.is_empty() { 0.0 } else { overlap as f64 / hg.len() as f64 });
        rs.push(overlap as f64 / rg.len() as f64);
    }
    if ps.is_empty() {
        return if h.is_empty() { 1.0 } else { 0.0 };
    }
    let p: f64 = ps.iter().sum::<f64>() / ps.len() as f64;
    let rr: f64 = rs.iter().sum::<f64>() / rs.len() as f64;
    let b2 = beta * beta;
    if b2 * p + rr == 0.0 {
        0.0
    } else {
        (1.0 + b2) * p * rr / (b2 * p + rr)
    }
}

// Exhaustive per-source max, written without the library's kernel plumbing.
fn coverage_oracle(src: &[String], tgt: &[String], score: impl Fn(&str, &str) -> f64) -> f64 {
    let mut total = 0.0;
    for s in src {
        let mut best = 0.0f64;
        for t in tgt {
            let v = score(s, t);
            if v > best {
                best = v;
            }
        }
        total += best;
    }
    total / src.len() as f64
}

fn random_string(rng: &mut StdRng, max_len: usize) -> String {
    let alphabet: Vec<char> = "ab c1".chars().collect();
    let len = rng.gen_range(0..=max_len);
    (0..len).map(|_| alphabet[rng.gen_range(0..alphabet.len())]).collect()
}

fn random_table(rng: &mut StdRng, name: &str) -> Table {
    let rows = rng.gen_range(1..=5);
    let cols = rng.gen_range(1..=5);
    let vals = ["1", "2", "16", "17", "Suns", "x"];
    let col_headers: Vec<String> = (0..cols).map(|c| format!("c{}", rng.gen_range(0..3) * 10 + c)).collect();
    let rows = (0..rows)
        .map(|r| {
            let cells = (0..cols)
                .map(|_| if rng.gen_bool(0.2) { CellValue::Absent } else { CellValue::text(vals[rng.gen_range(0..vals.len())]) })
                .collect();
            Row::new(format!("r{}", rng.gen_range(0..2) * 10 + r), cells)
        })
        .collect();
    Table::new(name, name, col_headers, rows).unwrap()
}

#[test]
fn chrf_matches_oracle_on_random_pairs() {
    let mut rng = StdRng::seed_from_u64(7);
    for _ in 0..200 {
        let a = random_string(&mut rng, 30);
        let b = random_string(&mut rng, 30);
        let got = chrf(&a, &b, 6, 2.0);
        let want = chrf_oracle(&a, &b, 6, 2.0);
        assert!((got - want).abs() < 1e-9, "{a:?} {b:?}: {got} vs {want}");
    }
}

#[test]
fn chrf_pinned_value() {
    assert!((chrf("16", "17", 6, 2.0) - chrf_oracle("16", "17", 6, 2.0)).abs() < 1e-12);
    assert!((chrf("16", "17", 6, 2.0) - 0.25).abs() < 1e-12);
}

proptest! {
    #[test]
    fn chrf_identity_and_disjoint(a in "[a-z]{1,20}", b in "[0-9]{1,20}") {
        prop_assert_eq!(chrf(&a, &a, 6, 2.0), 1.0);
        prop_assert_eq!(chrf(&a, &b, 6, 2.0), 0.0);
        let v = chrf(&a, &format!("{a}{b}"), 4, 1.0);
        prop_assert!((0.0..=1.0).contains(&v));
    }

    #[test]
    fn exact_subset_covers_fully(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let pred = random_table(&mut rng, "T");
        let all = extract_tuples(&pred, false);
        prop_assume!(!all.is_empty());
        let k = rng.gen_range(1..=all.len());
        let gold: Vec<ContentTuple> = all[..k].to_vec();
        prop_assert_eq!(tuple_coverage(&gold, &all, &Similarity::exact(), Direction::GoldToPred).unwrap(), 1.0);
    }
}

#[test]
fn coverage_matches_oracle_on_random_tables() {
    let mut rng = StdRng::seed_from_u64(11);
    let kernels = [Similarity::exact(), Similarity::chrf(6, 2.0)];
    for _ in 0..200 {
        let g = extract_tuples(&random_table(&mut rng, "T"), false);
        let p = extract_tuples(&random_table(&mut rng, "T"), false);
        if g.is_empty() || p.is_empty() {
            continue;
        }
        let gs: Vec<String> = g.iter().map(|t| format!("{} | {} | {}", t.row, t.col, t.value)).collect();
        let ps: Vec<String> = p.iter().map(|t| format!("{} | {} | {}", t.row, t.col, t.value)).collect();
        for sim in &kernels {
            let score = |gold: &str, pred: &str| match sim.kind.label() {
                "em" => f64::from(u8::from(gold == pred)),
                _ => chrf_oracle(pred, gold, 6, 2.0),
            };
            let recall = coverage_oracle(&gs, &ps, score);
            let precision = coverage_oracle(&ps, &gs, |pred, gold| score(gold, pred));
            assert_eq!(tuple_coverage(&g, &p, sim, Direction::GoldToPred).unwrap(), recall);
            assert_eq!(tuple_coverage(&g, &p, sim, Direction::PredToGold).unwrap(), precision);
        }
    }
}

#[test]
fn four_gold_three_pred_exact() {
    let gold = vec![
        ContentTuple::new("Thunder", "Wins", "16"),
        ContentTuple::new("Thunder", "Losses", "17"),
        ContentTuple::new("Suns", "Wins", "18"),
        ContentTuple::new("Suns", "Losses", "None"),
    ];
    let pred = vec![
        ContentTuple::new("Thunder", "Wins", "16"),
        ContentTuple::new("Suns", "Wins", "18"),
        ContentTuple::new("Suns", "Losses", "12"),
    ];
    let em = Similarity::exact();
    assert_eq!(tuple_coverage(&gold, &pred, &em, Direction::GoldToPred).unwrap(), 0.5);
    assert!((tuple_coverage(&gold, &pred, &em, Direction::PredToGold).unwrap() - 2.0 / 3.0).abs() < 1e-15);
}

#[test]
fn embedding_kernel_through_gateway() {
    let backend = Arc::new(ScriptedBackend::new(Vec::<String>::new()).with_embeddings(vec![vec![
        vec![1.0, 0.0],
        vec![0.6, 0.8],
        vec![0.0, 1.0],
    ]]));
    let gw = Gateway::new(backend, SamplingParams::default());
    // fetch sorts its inputs: "a", "b", "c".
    let emb = Embeddings::fetch(&gw, ["c", "a", "b", "a"].map(String::from)).unwrap();
    let sim = Similarity::embedding(emb);
    assert!((sim.score("a", "b") - 0.6).abs() < 1e-12);
    assert_eq!(sim.score("a", "c"), 0.0);
}

// --- numeric ---

fn livesum(home: &[i64], away: &[i64]) -> Table {
    let cols = LivesumEvent::ALL.iter().map(|e| e.header().to_string()).collect();
    let row = |h: &str, v: &[i64]| Row::new(h, v.iter().map(|x| CellValue::text(x.to_string())).collect());
    Table::new("Match", "Team", cols, vec![row("Home Team", home), row("Away Team", away)]).unwrap()
}

#[test]
fn numeric_hand_check() {
    let cells: Vec<CountCell> = [(2, 3), (0, 0), (1, 1)]
        .into_iter()
        .map(|(gold, pred)| CountCell { gold, pred, difficulty: Difficulty::Medium })
        .collect();
    let r = score_cells(&cells);
    assert!((r.rmse - (1.0f64 / 3.0).sqrt()).abs() < 1e-12);
    assert!((r.error_rate_pct - 33.33).abs() < 0.01);

    // The same three cells inside a full table: n grows to 16.
    let mut g = [0i64; 8];
    let mut p = [0i64; 8];
    g[..3].copy_from_slice(&[2, 0, 1]);
    p[..3].copy_from_slice(&[3, 0, 1]);
    let r = numeric_eval(&livesum(&g, &[0; 8]), &livesum(&p, &[0; 8]), &Aliases::builtin()).unwrap();
    assert_eq!(r.n_cells, 16);
    assert!((r.rmse - (1.0f64 / 16.0).sqrt()).abs() < 1e-12);
    assert!((r.error_rate_pct - 6.25).abs() < 1e-12);
    assert_eq!((r.over.n, r.under.n), (1, 0));
}

proptest! {
    #[test]
    fn numeric_conservation(g in prop::collection::vec(0i64..30, 16), p in prop::collection::vec(0i64..30, 16), k in -5i64..5) {
        let r = numeric_eval(&livesum(&g[..8], &g[8..]), &livesum(&p[..8], &p[8..]), &Aliases::builtin()).unwrap();
        let n = r.n_cells as f64;
        let lhs = n * r.rmse * r.rmse;
        let rhs = r.over.n as f64 * r.over.rmse.powi(2) + r.under.n as f64 * r.under.rmse.powi(2);
        prop_assert!((lhs - rhs).abs() < 1e-9);
        let per: usize = Difficulty::ALL.iter().map(|d| r.per_difficulty[d].n_cells).sum();
        prop_assert_eq!(per, r.n_cells);

        // Shifting both sides by the same constant changes nothing.
        let shift = |v: &[i64]| v.iter().map(|x| x + k + 10).collect::<Vec<_>>();
        let (gs, ps) = (shift(&g), shift(&p));
        let s = numeric_eval(&livesum(&gs[..8], &gs[8..]), &livesum(&ps[..8], &ps[8..]), &Aliases::builtin()).unwrap();
        prop_assert_eq!(s.rmse, r.rmse);
        prop_assert_eq!(s.error_rate_pct, r.error_rate_pct);
    }
}

// --- LLM-backed metrics ---

fn prompt(req: &ChatRequest) -> &str {
    &req.messages.last().unwrap().content
}

/// Generator emits `Q<k>: question k?` / `A<k>: answer k`; the answerer
/// echoes the question number; the judge says YES for questions in `yes`.
fn qa_gateway(order: Vec<usize>, yes: Vec<usize>) -> Gateway {
    let backend = ScriptedBackend::default().with_responder(move |req| {
        let p = prompt(req);
        if p.contains("question-answer pairs") {
            let mut out = String::new();
            for (i, k) in order.iter().enumerate() {
                out.push_str(&format!("Q{}: question {k}?\nA{}: answer {k}\n", i + 1, i + 1));
            }
            Some(out)
        } else if p.starts_with("Answer the question") {
            let q = p.rsplit("Question: question ").next().unwrap();
            Some(format!("table answer {}", q.split('?').next().unwrap()))
        } else if p.starts_with("Decide whether") {
            let k: usize = p.split("Question: question ").nth(1).unwrap().split('?').next().unwrap().parse().unwrap();
            Some(if yes.contains(&k) { "YES".into() } else { "NO".into() })
        } else {
            None
        }
    });
    Gateway::new(Arc::new(backend), SamplingParams::default())
}

#[test]
fn autoqa_seven_of_ten() {
    let gw = qa_gateway((1..=10).collect(), (1..=7).collect());
    let r = autoqa("text", &TableSet::empty(), &gw, &TemplateSet::builtin(), 10).unwrap();
    assert_eq!((r.n_questions, r.n_correct), (10, 7));
    assert_eq!(r.accuracy_pct, 70.0);
    assert_eq!(r.judgements[0].table_answer, "table answer 1");
    assert_eq!(gw.stats().backend_calls, 21);
}

#[test]
fn autoqa_order_invariant_and_truncates() {
    let a = autoqa("t", &TableSet::empty(), &qa_gateway(vec![3, 1, 4, 2], vec![1, 4]), &TemplateSet::builtin(), 4).unwrap();
    let b = autoqa("t", &TableSet::empty(), &qa_gateway(vec![2, 4, 1, 3], vec![1, 4]), &TemplateSet::builtin(), 4).unwrap();
    assert_eq!(a.accuracy_pct, 50.0);
    assert_eq!(a.accuracy_pct, b.accuracy_pct);
    let c = autoqa("t", &TableSet::empty(), &qa_gateway(vec![1, 2, 3, 4], vec![1, 2]), &TemplateSet::builtin(), 2).unwrap();
    assert_eq!((c.n_questions, c.accuracy_pct), (2, 100.0));
}

#[test]
fn autoqa_errors() {
    let gw = qa_gateway(vec![1], vec![]);
    assert!(matches!(autoqa("t", &TableSet::empty(), &gw, &TemplateSet::builtin(), 0), Err(MetricError::InvalidParameter(_))));
    let gw = Gateway::new(Arc::new(ScriptedBackend::new(["no pairs here"])), SamplingParams::default());
    assert_eq!(autoqa("t", &TableSet::empty(), &gw, &TemplateSet::builtin(), 3).unwrap_err(), MetricError::QaParseFailure);
}

fn team_table(extra_col: bool) -> TableSet {
    let mut cols = vec!["Wins".to_string(), "Losses".to_string()];
    let mut thunder = vec![CellValue::text("16"), CellValue::text("17")];
    let mut suns = vec![CellValue::text("18"), CellValue::text("12")];
    if extra_col {
        cols.push("Injury Status".into());
        thunder.push(CellValue::text("healthy"));
        suns.push(CellValue::text("healthy"));
    }
    let t = Table::new("Team", "Team", cols, vec![Row::new("Thunder", thunder), Row::new("Suns", suns)]).unwrap();
    TableSet::new(vec![t]).unwrap()
}

/// Judge: YES when the statement's value text appears in the premise table.
fn entail_gateway() -> Gateway {
    let backend = ScriptedBackend::default().with_responder(|req| {
        let p = prompt(req);
        let premise = p.split("Statement:").next().unwrap();
        let stmt = p.split("Statement: ").nth(1).unwrap().lines().next().unwrap();
        let col = stmt.strip_prefix("The ").unwrap().split(" of ").next().unwrap();
        Some(if premise.contains(col) { "YES".into() } else { "NO".into() })
    });
    Gateway::new(Arc::new(backend), SamplingParams::default())
}

#[test]
fn tabeval_identical_and_asymmetric() {
    let gold = team_table(false);
    let r = tabeval(&gold, &gold, &entail_gateway(), &TemplateSet::builtin()).unwrap();
    assert_eq!((r.scores.correctness, r.scores.completeness, r.scores.overall), (1.0, 1.0, 1.0));

    let pred = team_table(true);
    let r = tabeval(&pred, &gold, &entail_gateway(), &TemplateSet::builtin()).unwrap();
    assert!(r.scores.correctness < r.scores.completeness);
    assert!((r.scores.correctness - 4.0 / 6.0).abs() < 1e-12);
    assert_eq!(r.scores.completeness, 1.0);
    assert_eq!(r.tables.len(), 1);
}

#[test]
fn tabeval_half_and_unpaired() {
    let gold = team_table(false);
    let n = std::sync::atomic::AtomicUsize::new(0);
    let backend = ScriptedBackend::default().with_responder(move |_| {
        let k = n.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
        Some(if k.is_multiple_of(2) { "YES".into() } else { "NO".into() })
    });
    let gw = Gateway::new(Arc::new(backend), SamplingParams::default());
    let r = tabeval(&gold, &gold, &gw, &TemplateSet::builtin()).unwrap();
    assert_eq!((r.scores.correctness, r.scores.completeness, r.scores.overall), (0.5, 0.5, 0.5));

    let other = TableSet::new(vec![Table::new("Player", "Player", vec!["Points".into()], vec![Row::new("X", vec![CellValue::text("3")])]).unwrap()]).unwrap();
    let gw = entail_gateway();
    let r = tabeval(&other, &gold, &gw, &TemplateSet::builtin()).unwrap();
    assert_eq!((r.scores.correctness, r.scores.completeness), (0.0, 0.0));
    assert_eq!(r.tables.len(), 2);
    assert_eq!(gw.stats().backend_calls, 0);
}

#[test]
fn coverage_report_identical_is_one() {
    let g = team_table(true);
    for sim in [Similarity::exact(), Similarity::chrf(6, 2.0)] {
        let r = coverage_report(&g, &g, &sim);
        for prf in [r.cell, r.row, r.col] {
            assert_eq!((prf.precision, prf.recall, prf.f1), (1.0, 1.0, 1.0));
        }
    }
}
