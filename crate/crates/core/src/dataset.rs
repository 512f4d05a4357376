//! JSONL corpora and the Livesum event taxonomy.
//!
//! One record per line: `{"id": str, "text": str, "tables": [...], "meta": {...}}`
//! with tables in the canonical JSON form of [`TableSet`].

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::normalize::normalize_header;
use crate::table::{Table, TableSet};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("sample {id}: {reason}")]
    SchemaViolation { id: String, reason: String },
    #[error("duplicate sample id {0:?}")]
    DuplicateId(String),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("unknown Livesum event {0:?}")]
    UnknownEvent(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Rotowire,
    Livesum,
    Generic,
}

impl FromStr for DatasetKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "rotowire" => Ok(Self::Rotowire),
            "livesum" => Ok(Self::Livesum),
            "generic" => Ok(Self::Generic),
            other => Err(format!("unknown dataset kind {other:?} (rotowire|livesum|generic)")),
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Rotowire => "rotowire",
            Self::Livesum => "livesum",
            Self::Generic => "generic",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub text: String,
    pub gold: TableSet,
    pub meta: BTreeMap<String, String>,
}

/// Wire form of a corpus line.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: String,
    #[serde(default)]
    pub text: String,
    #[serde(default)]
    pub tables: TableSet,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub meta: BTreeMap<String, String>,
}

impl From<SampleRecord> for Sample {
    fn from(r: SampleRecord) -> Self {
        Sample { id: r.id, text: r.text, gold: r.tables, meta: r.meta }
    }
}

impl From<&Sample> for SampleRecord {
    fn from(s: &Sample) -> Self {
        SampleRecord {
            id: s.id.clone(),
            text: s.text.clone(),
            tables: s.gold.clone(),
            meta: s.meta.clone(),
        }
    }
}

/// Just the id and tables of a line; used for prediction files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRecord {
    pub id: String,
    pub tables: TableSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Difficulty {
    Easy,
    Medium,
    Hard,
}

impl Difficulty {
    pub const ALL: [Difficulty; 3] = [Difficulty::Easy, Difficulty::Medium, Difficulty::Hard];

    pub fn name(self) -> &'static str {
        match self {
            Difficulty::Easy => "Easy",
            Difficulty::Medium => "Medium",
            Difficulty::Hard => "Hard",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LivesumEvent {
    Goals,
    Shots,
    Fouls,
    YellowCards,
    RedCards,
    CornerKicks,
    FreeKicks,
    Offsides,
}

impl LivesumEvent {
    pub const ALL: [LivesumEvent; 8] = [
        LivesumEvent::Goals,
        LivesumEvent::Shots,
        LivesumEvent::Fouls,
        LivesumEvent::YellowCards,
        LivesumEvent::RedCards,
        LivesumEvent::CornerKicks,
        LivesumEvent::FreeKicks,
        LivesumEvent::Offsides,
    ];

    pub fn header(self) -> &'static str {
        match self {
            LivesumEvent::Goals => "Goals",
            LivesumEvent::Shots => "Shots",
            LivesumEvent::Fouls => "Fouls",
            LivesumEvent::YellowCards => "Yellow Cards",
            LivesumEvent::RedCards => "Red Cards",
            LivesumEvent::CornerKicks => "Corner Kicks",
            LivesumEvent::FreeKicks => "Free Kicks",
            LivesumEvent::Offsides => "Offsides",
        }
    }

    pub fn difficulty(self) -> Difficulty {
        match self {
            LivesumEvent::Goals | LivesumEvent::RedCards => Difficulty::Easy,
            LivesumEvent::Shots | LivesumEvent::Fouls => Difficulty::Hard,
            _ => Difficulty::Medium,
        }
    }

    /// Resolves a column header, accepting common synonyms
    /// ("corners", "bookings", "yellow card", ...).
    pub fn from_header(header: &str) -> Option<Self> {
        let h = normalize_header(header);
        let event = match h.as_str() {
            "goals" | "goal" | "goals scored" => LivesumEvent::Goals,
            "shots" | "shot" | "total shots" | "shot attempts" | "attempts" => LivesumEvent::Shots,
            "fouls" | "foul" | "fouls committed" => LivesumEvent::Fouls,
            "yellow cards" | "yellow card" | "yellows" | "bookings" | "booking" => {
                LivesumEvent::YellowCards
            }
            "red cards" | "red card" | "reds" | "sending offs" | "sending-offs" | "dismissals" => {
                LivesumEvent::RedCards
            }
            "corner kicks" | "corner kick" | "corners" | "corner" => LivesumEvent::CornerKicks,
            "free kicks" | "free kick" | "freekicks" | "free-kicks" => LivesumEvent::FreeKicks,
            "offsides" | "offside" => LivesumEvent::Offsides,
            _ => return None,
        };
        Some(event)
    }
}

pub fn livesum_difficulty(column_header: &str) -> Result<Difficulty, DatasetError> {
    LivesumEvent::from_header(column_header)
        .map(LivesumEvent::difficulty)
        .ok_or_else(|| DatasetError::UnknownEvent(column_header.to_string()))
}

pub const LIVESUM_ROWS: [&str; 2] = ["Home Team", "Away Team"];

fn violation(id: &str, reason: impl Into<String>) -> DatasetError {
    DatasetError::SchemaViolation { id: id.to_string(), reason: reason.into() }
}

fn check_livesum_table(id: &str, t: &Table) -> Result<(), DatasetError> {
    let rows: HashSet<String> = t.row_headers().map(normalize_header).collect();
    let want: HashSet<String> = LIVESUM_ROWS.iter().map(|r| normalize_header(r)).collect();
    if rows != want {
        return Err(violation(id, "Livesum table must have exactly the rows Home Team and Away Team"));
    }
    let mut seen = HashSet::new();
    for col in &t.column_headers {
        let event = LivesumEvent::from_header(col)
            .ok_or_else(|| violation(id, format!("unexpected Livesum column {col:?}")))?;
        if !seen.insert(event) {
            return Err(violation(id, format!("column {col:?} repeats event {}", event.header())));
        }
    }
    if let Some(missing) = LivesumEvent::ALL.iter().find(|e| !seen.contains(e)) {
        return Err(violation(id, format!("missing Livesum column {:?}", missing.header())));
    }
    for row in &t.rows {
        for (col, cell) in t.column_headers.iter().zip(&row.cells) {
            if cell.as_integer().is_none() {
                return Err(violation(
                    id,
                    format!("cell ({}, {col}) = {:?} is not an integer", row.header, cell.wire()),
                ));
            }
        }
    }
    Ok(())
}

/// Checks a sample against the constraints of `kind`.
pub fn validate_sample(s: &Sample, kind: DatasetKind) -> Result<(), DatasetError> {
    if s.text.trim().is_empty() {
        return Err(violation(&s.id, "text is empty"));
    }
    match kind {
        DatasetKind::Generic => Ok(()),
        DatasetKind::Rotowire => {
            let mut names: Vec<&str> = s.gold.iter().map(|t| t.name.as_str()).collect();
            names.sort_unstable();
            if names != ["Player", "Team"] {
                return Err(violation(
                    &s.id,
                    format!("Rotowire gold must be exactly tables Team and Player, found {names:?}"),
                ));
            }
            Ok(())
        }
        DatasetKind::Livesum => match s.gold.tables.as_slice() {
            [t] => check_livesum_table(&s.id, t),
            other => Err(violation(
                &s.id,
                format!("Livesum gold must be one table, found {}", other.len()),
            )),
        },
    }
}

/// Reads the first `limit` records (all when `None`) from JSONL text.
pub fn parse_dataset(
    reader: impl BufRead,
    kind: DatasetKind,
    limit: Option<usize>,
) -> Result<Vec<Sample>, DatasetError> {
    let mut out = Vec::new();
    let mut ids = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        if limit.is_some_and(|n| out.len() >= n) {
            break;
        }
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: SampleRecord = serde_json::from_str(&line)
            .map_err(|e| DatasetError::Malformed { line: i + 1, message: e.to_string() })?;
        let sample = Sample::from(record);
        if !ids.insert(sample.id.clone()) {
            return Err(DatasetError::DuplicateId(sample.id));
        }
        validate_sample(&sample, kind)?;
        out.push(sample);
    }
    Ok(out)
}

pub fn load_dataset(
    path: impl AsRef<Path>,
    kind: DatasetKind,
    limit: Option<usize>,
) -> Result<Vec<Sample>, DatasetError> {
    parse_dataset(BufReader::new(File::open(path)?), kind, limit)
}

/// Reads `{"id", "tables"}` records, ignoring any other fields.
pub fn load_table_records(path: impl AsRef<Path>) -> Result<Vec<TableRecord>, DatasetError> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    let mut ids = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: TableRecord = serde_json::from_str(&line)
            .map_err(|e| DatasetError::Malformed { line: i + 1, message: e.to_string() })?;
        if !ids.insert(record.id.clone()) {
            return Err(DatasetError::DuplicateId(record.id));
        }
        out.push(record);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const ROTO: &str = r#"{"id":"r1","text":"The Thunder won.","tables":[{"name":"Team","columns":["Wins"],"rows":[{"header":"Thunder","cells":["16"]}]},{"name":"Player","columns":["Points"],"rows":[{"header":"Kevin Durant","cells":["44"]}]}]}
{"id":"r2","text":"The Suns lost.","tables":[{"name":"Team","columns":["Losses"],"rows":[{"header":"Suns","cells":[null]}]},{"name":"Player","columns":[],"rows":[]}],"meta":{"version":"original"}}
"#;

    fn livesum_line(columns: &[&str]) -> String {
        let cols: Vec<String> = columns.iter().map(|c| format!("{c:?}")).collect();
        let cells = vec!["\"1\""; columns.len()].join(",");
        format!(
            r#"{{"id":"l1","text":"Kick off.","tables":[{{"name":"Football Match","row_label":"Team","columns":[{}],"rows":[{{"header":"Home Team","cells":[{cells}]}},{{"header":"Away Team","cells":[{cells}]}}]}}]}}"#,
            cols.join(",")
        )
    }

    const EVENTS: [&str; 8] =
        ["Goals", "Shots", "Fouls", "Yellow Cards", "Red Cards", "Corner Kicks", "Free Kicks", "Offsides"];

    #[test]
    fn loads_rotowire() {
        let samples = parse_dataset(ROTO.as_bytes(), DatasetKind::Rotowire, None).unwrap();
        assert_eq!(samples.len(), 2);
        assert_eq!(samples[0].gold.get("Team").unwrap().rows[0].header, "Thunder");
        assert_eq!(samples[1].meta["version"], "original");
        let first = parse_dataset(ROTO.as_bytes(), DatasetKind::Rotowire, Some(1)).unwrap();
        assert_eq!(first, samples[..1]);
    }

    #[test]
    fn rotowire_needs_both_tables() {
        let line = r#"{"id":"x","text":"t","tables":[{"name":"Team","columns":[],"rows":[]}]}"#;
        let err = parse_dataset(line.as_bytes(), DatasetKind::Rotowire, None).unwrap_err();
        assert!(matches!(err, DatasetError::SchemaViolation { ref id, .. } if id == "x"));
    }

    #[test]
    fn livesum_shape() {
        let ok = livesum_line(&EVENTS);
        assert_eq!(parse_dataset(ok.as_bytes(), DatasetKind::Livesum, None).unwrap().len(), 1);
        let missing = livesum_line(&EVENTS[..7]);
        let err = parse_dataset(missing.as_bytes(), DatasetKind::Livesum, None).unwrap_err();
        assert!(err.to_string().contains("Offsides"), "{err}");
        let mut with_red_missing = EVENTS.to_vec();
        with_red_missing.retain(|e| *e != "Red Cards");
        let err = parse_dataset(livesum_line(&with_red_missing).as_bytes(), DatasetKind::Livesum, None)
            .unwrap_err();
        assert!(err.to_string().contains("Red Cards"));
        let mut extra = EVENTS.to_vec();
        extra.push("Shots on Target");
        assert!(parse_dataset(livesum_line(&extra).as_bytes(), DatasetKind::Livesum, None).is_err());
        let non_int = ok.replacen("\"1\"", "\"one\"", 1);
        assert!(parse_dataset(non_int.as_bytes(), DatasetKind::Livesum, None).is_err());
    }

    #[test]
    fn generic_accepts_empty_gold() {
        let line = r#"{"id":"g","text":"Some prose."}"#;
        let s = parse_dataset(line.as_bytes(), DatasetKind::Generic, None).unwrap();
        assert!(s[0].gold.is_empty());
        let empty_text = r#"{"id":"g","text":"  "}"#;
        assert!(parse_dataset(empty_text.as_bytes(), DatasetKind::Generic, None).is_err());
    }

    #[test]
    fn duplicate_ids_rejected() {
        let line = r#"{"id":"g","text":"a"}"#;
        let text = format!("{line}\n{line}\n");
        assert!(matches!(
            parse_dataset(text.as_bytes(), DatasetKind::Generic, None),
            Err(DatasetError::DuplicateId(_))
        ));
    }

    #[test]
    fn difficulty_taxonomy() {
        assert_eq!(livesum_difficulty("Goals").unwrap(), Difficulty::Easy);
        assert_eq!(livesum_difficulty("Fouls").unwrap(), Difficulty::Hard);
        assert_eq!(livesum_difficulty("Corner Kicks").unwrap(), Difficulty::Medium);
        assert_eq!(livesum_difficulty("corners").unwrap(), Difficulty::Medium);
        assert_eq!(livesum_difficulty("Bookings").unwrap(), Difficulty::Medium);
        assert!(matches!(livesum_difficulty("Shots on Target"), Err(DatasetError::UnknownEvent(_))));
        let count = |d| LivesumEvent::ALL.iter().filter(|e| e.difficulty() == d).count();
        assert_eq!((count(Difficulty::Easy), count(Difficulty::Medium), count(Difficulty::Hard)), (2, 4, 2));
        for e in LivesumEvent::ALL {
            assert_eq!(LivesumEvent::from_header(e.header()), Some(e));
        }
    }

    #[test]
    fn record_round_trip() {
        let samples = parse_dataset(ROTO.as_bytes(), DatasetKind::Rotowire, None).unwrap();
        let lines: Vec<String> = samples
            .iter()
            .map(|s| serde_json::to_string(&SampleRecord::from(s)).unwrap())
            .collect();
        let again = parse_dataset(lines.join("\n").as_bytes(), DatasetKind::Rotowire, None).unwrap();
        assert_eq!(again, samples);
    }
}
