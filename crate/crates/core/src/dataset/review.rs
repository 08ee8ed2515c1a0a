use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DatasetError;
use crate::artifact::{validate_record, LifecycleRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Accepted,
    Rejected,
}

/// A screening decision by one reviewer on one record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewDecision {
    pub record_id: String,
    pub verdict: Verdict,
    pub reviewer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReviewStatus {
    Pending,
    Accepted,
    Rejected,
}

fn check_unique(decisions: &[ReviewDecision]) -> Result<(), DatasetError> {
    let mut seen = BTreeSet::new();
    for d in decisions {
        if !seen.insert((d.record_id.as_str(), d.reviewer.as_str())) {
            return Err(DatasetError::DuplicateDecision {
                record_id: d.record_id.clone(),
                reviewer: d.reviewer.clone(),
            });
        }
    }
    Ok(())
}

/// Reads a decisions file. A missing file reads as no decisions.
pub fn read_decisions(path: &Path) -> Result<Vec<ReviewDecision>, DatasetError> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(DatasetError::io(path, e)),
    };
    let decisions = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| DatasetError::Json(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect::<Result<Vec<ReviewDecision>, _>>()?;
    check_unique(&decisions)?;
    Ok(decisions)
}

pub fn write_decisions(path: &Path, decisions: &[ReviewDecision]) -> Result<(), DatasetError> {
    check_unique(decisions)?;
    let mut buf = Vec::new();
    for d in decisions {
        serde_json::to_writer(&mut buf, d).expect("decisions serialize");
        buf.push(b'\n');
    }
    std::fs::write(path, buf).map_err(|e| DatasetError::io(path, e))
}

/// Appends one decision, refusing a second decision by the same reviewer on
/// the same record.
pub fn append_decision(path: &Path, decision: &ReviewDecision) -> Result<(), DatasetError> {
    let existing = read_decisions(path)?;
    if existing
        .iter()
        .any(|d| d.record_id == decision.record_id && d.reviewer == decision.reviewer)
    {
        return Err(DatasetError::DuplicateDecision {
            record_id: decision.record_id.clone(),
            reviewer: decision.reviewer.clone(),
        });
    }
    let mut line = serde_json::to_vec(decision).expect("decision serializes");
    line.push(b'\n');
    let mut f = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| DatasetError::io(path, e))?;
    f.write_all(&line).map_err(|e| DatasetError::io(path, e))
}

/// Any rejection rejects; otherwise one acceptance accepts.
pub fn review_status(record_id: &str, decisions: &[ReviewDecision]) -> ReviewStatus {
    let mut status = ReviewStatus::Pending;
    for d in decisions.iter().filter(|d| d.record_id == record_id) {
        match d.verdict {
            Verdict::Rejected => return ReviewStatus::Rejected,
            Verdict::Accepted => status = ReviewStatus::Accepted,
        }
    }
    status
}

/// Records that were accepted and validate without error findings.
pub fn accepted_records(records: &[LifecycleRecord], decisions: &[ReviewDecision]) -> Vec<LifecycleRecord> {
    records
        .iter()
        .filter(|r| review_status(&r.id, decisions) == ReviewStatus::Accepted && !validate_record(r).has_errors())
        .cloned()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(id: &str, v: Verdict, who: &str) -> ReviewDecision {
        ReviewDecision {
            record_id: id.into(),
            verdict: v,
            reviewer: who.into(),
            reason: None,
        }
    }

    #[test]
    fn status_rules() {
        let ds = [
            d("a", Verdict::Accepted, "x"),
            d("b", Verdict::Accepted, "x"),
            d("b", Verdict::Rejected, "y"),
        ];
        assert_eq!(review_status("a", &ds), ReviewStatus::Accepted);
        assert_eq!(review_status("b", &ds), ReviewStatus::Rejected);
        assert_eq!(review_status("c", &ds), ReviewStatus::Pending);
    }

    #[test]
    fn one_decision_per_reviewer() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("decisions.jsonl");
        append_decision(&p, &d("a", Verdict::Accepted, "x")).unwrap();
        append_decision(&p, &d("a", Verdict::Accepted, "y")).unwrap();
        assert!(matches!(
            append_decision(&p, &d("a", Verdict::Rejected, "x")),
            Err(DatasetError::DuplicateDecision { .. })
        ));
        assert_eq!(read_decisions(&p).unwrap().len(), 2);
        assert!(read_decisions(&dir.path().join("none.jsonl")).unwrap().is_empty());
    }
}
