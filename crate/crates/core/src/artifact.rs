//! The lifecycle artifact chain: stages, records, and adjacent stage pairs.

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::pylang;
use crate::scxml;

/// One step of the lifecycle. `Intent` is the raw input; the other four are
/// generated in order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Intent,
    Requirement,
    Scxml,
    Pseudocode,
    Code,
}

impl Stage {
    pub const ALL: [Stage; 5] = [
        Stage::Intent,
        Stage::Requirement,
        Stage::Scxml,
        Stage::Pseudocode,
        Stage::Code,
    ];

    /// The four stages a pipeline generates, in order.
    pub const GENERATED: [Stage; 4] = [Stage::Requirement, Stage::Scxml, Stage::Pseudocode, Stage::Code];

    pub fn ordinal(self) -> usize {
        self as usize
    }

    pub fn successor(self) -> Option<Stage> {
        Stage::ALL.get(self.ordinal() + 1).copied()
    }

    pub fn predecessor(self) -> Option<Stage> {
        self.ordinal().checked_sub(1).map(|i| Stage::ALL[i])
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Intent => "intent",
            Stage::Requirement => "requirement",
            Stage::Scxml => "scxml",
            Stage::Pseudocode => "pseudocode",
            Stage::Code => "code",
        }
    }

    /// Short column-group label used in reports (RA/AD/DD/CG).
    pub fn phase_label(self) -> &'static str {
        match self {
            Stage::Intent => "IN",
            Stage::Requirement => "RA",
            Stage::Scxml => "AD",
            Stage::Pseudocode => "DD",
            Stage::Code => "CG",
        }
    }

    pub fn phase_title(self) -> &'static str {
        match self {
            Stage::Intent => "Intent",
            Stage::Requirement => "Requirements Analysis",
            Stage::Scxml => "Architectural Design",
            Stage::Pseudocode => "Detailed Design",
            Stage::Code => "Code Generation",
        }
    }
}

/// Free function form of [`Stage::successor`].
pub fn stage_successor(stage: Stage) -> Option<Stage> {
    stage.successor()
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown stage `{0}` (expected intent, requirement, scxml, pseudocode or code)")]
pub struct UnknownStage(pub String);

impl FromStr for Stage {
    type Err = UnknownStage;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "intent" | "in" => Ok(Stage::Intent),
            "requirement" | "requirements" | "ra" => Ok(Stage::Requirement),
            "scxml" | "ad" => Ok(Stage::Scxml),
            "pseudocode" | "dd" => Ok(Stage::Pseudocode),
            "code" | "cg" => Ok(Stage::Code),
            _ => Err(UnknownStage(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Document,
    Code,
    Seed,
    Generated,
}

/// One aligned five-artifact chain. Any artifact may be absent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LifecycleRecord {
    pub id: String,
    pub source: Source,
    #[serde(default)]
    pub intent: Option<String>,
    #[serde(default)]
    pub requirement: Option<String>,
    #[serde(default)]
    pub scxml: Option<String>,
    #[serde(default)]
    pub pseudocode: Option<String>,
    #[serde(default)]
    pub code: Option<String>,
    /// Natural-language FSM description from dataset construction. Metadata
    /// only, never a stage.
    #[serde(default)]
    pub fsm_description: Option<String>,
}

impl LifecycleRecord {
    pub fn new(id: impl Into<String>, source: Source) -> Self {
        LifecycleRecord {
            id: id.into(),
            source,
            intent: None,
            requirement: None,
            scxml: None,
            pseudocode: None,
            code: None,
            fsm_description: None,
        }
    }

    pub fn artifact(&self, stage: Stage) -> Option<&str> {
        match stage {
            Stage::Intent => self.intent.as_deref(),
            Stage::Requirement => self.requirement.as_deref(),
            Stage::Scxml => self.scxml.as_deref(),
            Stage::Pseudocode => self.pseudocode.as_deref(),
            Stage::Code => self.code.as_deref(),
        }
    }

    /// Present and nonempty.
    pub fn filled(&self, stage: Stage) -> Option<&str> {
        self.artifact(stage).filter(|s| !s.is_empty())
    }

    /// Stores `text` normalized.
    pub fn set_artifact(&mut self, stage: Stage, text: &str) {
        let slot = match stage {
            Stage::Intent => &mut self.intent,
            Stage::Requirement => &mut self.requirement,
            Stage::Scxml => &mut self.scxml,
            Stage::Pseudocode => &mut self.pseudocode,
            Stage::Code => &mut self.code,
        };
        *slot = Some(normalize_artifact(text));
    }

    pub fn with(mut self, stage: Stage, text: &str) -> Self {
        self.set_artifact(stage, text);
        self
    }

    pub fn is_complete(&self) -> bool {
        Stage::ALL.iter().all(|s| self.filled(*s).is_some())
    }
}

/// Strips trailing whitespace on every line and converts line endings to LF.
/// Interior whitespace is untouched.
pub fn normalize_artifact(text: &str) -> String {
    let unified = text.replace("\r\n", "\n").replace('\r', "\n");
    let mut out = String::with_capacity(unified.len());
    for (i, line) in unified.split('\n').enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(line.trim_end());
    }
    out
}

/// An (input, output) example spanning two stages.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StagePair {
    pub record_id: String,
    pub from_stage: Stage,
    pub to_stage: Stage,
    pub input: String,
    pub output: String,
}

impl StagePair {
    pub fn is_adjacent(&self) -> bool {
        self.from_stage.successor() == Some(self.to_stage)
    }
}

/// One pair per adjacent stage boundary where both artifacts are present, in
/// stage order.
pub fn adjacent_pairs(record: &LifecycleRecord) -> Vec<StagePair> {
    Stage::ALL
        .windows(2)
        .filter_map(|w| {
            let input = record.filled(w[0])?;
            let output = record.filled(w[1])?;
            Some(StagePair {
                record_id: record.id.clone(),
                from_stage: w[0],
                to_stage: w[1],
                input: input.to_string(),
                output: output.to_string(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordFindingKind {
    Missing,
    Empty,
    ParseError,
    /// SCXML that parses but has validation errors.
    InvalidScxml,
    EmptyId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordFinding {
    /// `id` or a stage name.
    pub field: String,
    pub kind: RecordFindingKind,
    pub severity: Severity,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub record_id: String,
    pub findings: Vec<RecordFinding>,
}

impl ValidationReport {
    pub fn has_errors(&self) -> bool {
        self.findings.iter().any(|f| f.severity == Severity::Error)
    }

    pub fn is_clean(&self) -> bool {
        self.findings.is_empty()
    }
}

/// Mechanical checks on one record. Findings are data, never failures.
pub fn validate_record(record: &LifecycleRecord) -> ValidationReport {
    let mut findings = Vec::new();
    let mut push = |field: &str, kind, severity, message: String| {
        findings.push(RecordFinding {
            field: field.to_string(),
            kind,
            severity,
            message,
        })
    };

    if record.id.trim().is_empty() {
        push(
            "id",
            RecordFindingKind::EmptyId,
            Severity::Error,
            "record id is empty".into(),
        );
    }

    for stage in Stage::ALL {
        match record.artifact(stage) {
            None => push(
                stage.as_str(),
                RecordFindingKind::Missing,
                Severity::Error,
                format!("{stage} artifact is missing"),
            ),
            Some(text) if text.trim().is_empty() => push(
                stage.as_str(),
                RecordFindingKind::Empty,
                Severity::Error,
                format!("{stage} artifact is empty"),
            ),
            Some(text) => match stage {
                Stage::Scxml => {
                    let report = scxml::check(text);
                    let first_parse_error = report.parse_errors().next().map(|f| f.to_string());
                    if let Some(first) = first_parse_error {
                        push("scxml", RecordFindingKind::ParseError, Severity::Error, first);
                    } else if report.has_errors() {
                        let kinds: Vec<String> = report.errors().map(|f| f.to_string()).collect();
                        push(
                            "scxml",
                            RecordFindingKind::InvalidScxml,
                            Severity::Error,
                            kinds.join("; "),
                        );
                    }
                }
                Stage::Code => {
                    if let Err(e) = pylang::parse_module(text) {
                        push("code", RecordFindingKind::ParseError, Severity::Error, e.to_string());
                    }
                }
                _ => {}
            },
        }
    }

    ValidationReport {
        record_id: record.id.clone(),
        findings,
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DatasetIoError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: invalid record: {source}")]
    Json {
        path: String,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}:{line}: duplicate record id `{id}`")]
    DuplicateId { path: String, line: usize, id: String },
}

/// Reads a JSON-lines dataset. Blank lines are skipped; ids must be unique.
pub fn read_jsonl(path: &Path) -> Result<Vec<LifecycleRecord>, DatasetIoError> {
    let display = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|source| DatasetIoError::Io {
        path: display.clone(),
        source,
    })?;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| DatasetIoError::Io {
            path: display.clone(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: LifecycleRecord = serde_json::from_str(&line).map_err(|source| DatasetIoError::Json {
            path: display.clone(),
            line: i + 1,
            source,
        })?;
        if !seen.insert(record.id.clone()) {
            return Err(DatasetIoError::DuplicateId {
                path: display,
                line: i + 1,
                id: record.id,
            });
        }
        out.push(record);
    }
    Ok(out)
}

pub fn write_jsonl(path: &Path, records: &[LifecycleRecord]) -> Result<(), DatasetIoError> {
    let io = |source| DatasetIoError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut buf = Vec::new();
    for record in records {
        serde_json::to_writer(&mut buf, record).expect("records serialize");
        buf.push(b'\n');
    }
    let mut file = std::fs::File::create(path).map_err(io)?;
    file.write_all(&buf).map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCXML: &str = r#"<scxml xmlns="http://www.w3.org/2005/07/scxml" version="1.0" initial="a"><state id="a"><transition event="go" target="b"/></state><final id="b"/></scxml>"#;

    pub(crate) fn complete() -> LifecycleRecord {
        LifecycleRecord::new("r1", Source::Seed)
            .with(Stage::Intent, "Control a door.")
            .with(Stage::Requirement, "The door opens on request.")
            .with(Stage::Scxml, SCXML)
            .with(Stage::Pseudocode, "IF go THEN state <- b")
            .with(Stage::Code, "state = 'a'\nif event == 'go':\n    state = 'b'\n")
    }

    #[test]
    fn successor_chain() {
        assert_eq!(stage_successor(Stage::Intent), Some(Stage::Requirement));
        assert_eq!(stage_successor(Stage::Pseudocode), Some(Stage::Code));
        assert_eq!(stage_successor(Stage::Code), None);
        assert!(Stage::Intent < Stage::Requirement && Stage::Pseudocode < Stage::Code);
    }

    #[test]
    fn complete_record_has_four_chained_pairs() {
        let pairs = adjacent_pairs(&complete());
        assert_eq!(pairs.len(), 4);
        let stages: Vec<_> = pairs.iter().map(|p| (p.from_stage, p.to_stage)).collect();
        assert_eq!(
            stages,
            vec![
                (Stage::Intent, Stage::Requirement),
                (Stage::Requirement, Stage::Scxml),
                (Stage::Scxml, Stage::Pseudocode),
                (Stage::Pseudocode, Stage::Code),
            ]
        );
        for w in pairs.windows(2) {
            assert_eq!(w[0].output, w[1].input);
        }
    }

    #[test]
    fn partial_records_yield_fewer_pairs() {
        let r = LifecycleRecord::new("p", Source::Code)
            .with(Stage::Intent, "i")
            .with(Stage::Requirement, "r");
        assert_eq!(adjacent_pairs(&r).len(), 1);

        let gap = LifecycleRecord::new("g", Source::Code)
            .with(Stage::Intent, "i")
            .with(Stage::Scxml, SCXML);
        assert!(adjacent_pairs(&gap).is_empty());
    }

    #[test]
    fn clean_record_validates() {
        let report = validate_record(&complete());
        assert!(report.is_clean(), "{:?}", report.findings);
    }

    #[test]
    fn malformed_scxml_and_missing_pseudocode() {
        let mut r = complete();
        r.scxml = Some("not xml".into());
        r.pseudocode = None;
        let report = validate_record(&r);
        let got: Vec<_> = report.findings.iter().map(|f| (f.field.as_str(), f.kind)).collect();
        assert_eq!(
            got,
            vec![
                ("scxml", RecordFindingKind::ParseError),
                ("pseudocode", RecordFindingKind::Missing)
            ]
        );
        assert_eq!(validate_record(&r), report);
    }

    #[test]
    fn unparsable_code_is_reported() {
        let mut r = complete();
        r.code = Some("def broken(:\n".into());
        let report = validate_record(&r);
        assert_eq!(report.findings.len(), 1);
        assert_eq!(report.findings[0].kind, RecordFindingKind::ParseError);
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize_artifact("a  \r\nb\t\r\n  c"), "a\nb\n  c");
        assert_eq!(normalize_artifact("x \n"), "x\n");
    }

    #[test]
    fn jsonl_round_trip_uses_exact_field_names() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        write_jsonl(&path, &[complete()]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        for key in [
            "\"id\"",
            "\"source\"",
            "\"intent\"",
            "\"requirement\"",
            "\"scxml\"",
            "\"pseudocode\"",
            "\"code\"",
            "\"fsm_description\"",
        ] {
            assert!(text.contains(key), "missing {key}");
        }
        assert_eq!(read_jsonl(&path).unwrap(), vec![complete()]);
    }

    #[test]
    fn duplicate_ids_rejected_on_read() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        write_jsonl(&path, &[complete(), complete()]).unwrap();
        assert!(matches!(read_jsonl(&path), Err(DatasetIoError::DuplicateId { .. })));
    }
}
