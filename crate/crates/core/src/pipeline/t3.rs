//! In-process tuple integration for counting tasks.
//!
//! Event tuples `(team, event, value)` are tallied per team and canonical
//! event, applying the counting rules of the integration prompt: goals and
//! saved, blocked or missed attempts are shots; handball and dangerous play
//! are fouls; a second yellow is a red card; a penalty is a free kick.

use crate::dataset::LivesumEvent;
use crate::normalize::normalize_header;

pub type Tuple = (String, String, String);

/// Canonical events credited by one event mention.
fn credit(attribute: &str) -> Vec<String> {
    use LivesumEvent::*;
    let a = normalize_header(attribute);
    let has = |s: &str| a.contains(s);
    let events: Vec<LivesumEvent> = if let Some(e) = LivesumEvent::from_header(attribute) {
        if e == Goals {
            vec![Goals, Shots]
        } else {
            vec![e]
        }
    } else if has("second yellow") {
        vec![YellowCards, RedCards]
    } else if has("handball") || has("hand ball") || has("dangerous play") || has("foul") {
        vec![Fouls]
    } else if has("penalty") || has("free kick") || has("free-kick") {
        vec![FreeKicks]
    } else if has("corner") {
        vec![CornerKicks]
    } else if has("offside") {
        vec![Offsides]
    } else if has("yellow") || has("booking") {
        vec![YellowCards]
    } else if has("red card") || has("sending off") || has("sent off") {
        vec![RedCards]
    } else if has("goal") {
        vec![Goals, Shots]
    } else if has("attempt") || has("shot") {
        vec![Shots]
    } else {
        return vec![attribute.trim().to_string()];
    };
    events.into_iter().map(|e| e.header().to_string()).collect()
}

fn canonical_team(entity: &str) -> String {
    match normalize_header(entity).as_str() {
        "home team" | "home" => "Home Team".into(),
        "away team" | "away" => "Away Team".into(),
        _ => entity.trim().to_string(),
    }
}

/// Tallies event tuples into `(team, event, count)` totals.
///
/// Numeric values count that many events; anything else counts one. Teams
/// keep first-seen order; events follow the canonical event order, then
/// unknown attributes in first-seen order.
pub fn aggregate_event_tuples(tuples: &[Tuple]) -> Vec<Tuple> {
    let mut teams: Vec<String> = Vec::new();
    let mut extra_events: Vec<String> = Vec::new();
    let mut counts: Vec<((String, String), u64)> = Vec::new();
    for (entity, attribute, value) in tuples {
        let team = canonical_team(entity);
        if !teams.iter().any(|t| normalize_header(t) == normalize_header(&team)) {
            teams.push(team.clone());
        }
        let team = teams.iter().find(|t| normalize_header(t) == normalize_header(&team)).unwrap().clone();
        let n = value.trim().parse::<u64>().unwrap_or(1);
        for event in credit(attribute) {
            let known = LivesumEvent::ALL.iter().any(|e| e.header() == event);
            let event = if known {
                event
            } else {
                match extra_events.iter().find(|x| normalize_header(x) == normalize_header(&event)) {
                    Some(x) => x.clone(),
                    None => {
                        extra_events.push(event.clone());
                        event
                    }
                }
            };
            match counts.iter_mut().find(|((t, e), _)| *t == team && *e == event) {
                Some((_, c)) => *c += n,
                None => counts.push(((team.clone(), event), n)),
            }
        }
    }
    let event_order: Vec<String> = LivesumEvent::ALL
        .iter()
        .map(|e| e.header().to_string())
        .chain(extra_events)
        .collect();
    let mut out = Vec::new();
    for team in &teams {
        for event in &event_order {
            if let Some((_, c)) = counts.iter().find(|((t, e), _)| t == team && e == event) {
                out.push((team.clone(), event.clone(), c.to_string()));
            }
        }
    }
    out
}

/// Numbered `(a, b, c)` lines, as shown in the prompts.
pub fn format_tuples(tuples: &[Tuple]) -> String {
    tuples
        .iter()
        .enumerate()
        .map(|(i, (e, a, v))| format!("{}. ({e}, {a}, {v})", i + 1))
        .collect::<Vec<_>>()
        .join("\n")
}
