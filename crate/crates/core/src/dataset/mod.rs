//! Dataset construction, screening, splits and training exports.

mod build;
mod review;
mod split;

use std::collections::{BTreeSet, HashSet};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::artifact::{adjacent_pairs, normalize_artifact, LifecycleRecord, Stage, StagePair};
use crate::prompts::{PromptMode, PromptRegistry};

pub use build::{
    build_from_code, build_from_document, evolve_from_seeds, record_id, synthesize_scxml, BuildFinding,
    BuildFindingKind, BuildOutput, DocumentSource, SeedSample,
};
pub use review::{
    accepted_records, append_decision, read_decisions, review_status, write_decisions, ReviewDecision, ReviewStatus,
    Verdict,
};
pub use split::{
    fraction_label, split, subsample, test_fingerprint, DatasetManifest, FractionSubset, Split, FRACTION_LADDER,
    MIN_SPLIT_RECORDS,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DatasetError {
    #[error("dataset has {records} record(s); at least {minimum} are needed")]
    DatasetTooSmall { records: usize, minimum: usize },
    #[error("fraction {0} is out of range")]
    InvalidFraction(f64),
    #[error("record `{0}` is incomplete")]
    IncompleteRecord(String),
    #[error("duplicate record id `{0}`")]
    DuplicateId(String),
    #[error("stage {0} cannot be ablated; choose requirement, scxml or pseudocode")]
    NotAblatable(Stage),
    #[error("export mode must be multi_step or one_step, got {0}")]
    UnsupportedMode(PromptMode),
    #[error("reviewer `{reviewer}` already decided on record `{record_id}`")]
    DuplicateDecision { record_id: String, reviewer: String },
    #[error("{0}")]
    Json(String),
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

impl DatasetError {
    pub(crate) fn io(path: &Path, e: std::io::Error) -> Self {
        DatasetError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }
}

/// Stage pairs of every complete record with `removed` bridged over: the two
/// pairs touching it become one pair from its predecessor to its successor.
/// Incomplete records contribute nothing.
pub fn ablate_stage(records: &[LifecycleRecord], removed: Stage) -> Result<Vec<StagePair>, DatasetError> {
    let (Some(before), Some(after)) = (removed.predecessor(), removed.successor()) else {
        return Err(DatasetError::NotAblatable(removed));
    };
    let mut out = Vec::new();
    for r in records.iter().filter(|r| r.is_complete()) {
        for p in adjacent_pairs(r) {
            if p.to_stage == removed {
                out.push(StagePair {
                    record_id: r.id.clone(),
                    from_stage: before,
                    to_stage: after,
                    input: p.input,
                    output: r.filled(after).unwrap_or_default().to_string(),
                });
            } else if p.from_stage != removed {
                out.push(p);
            }
        }
    }
    Ok(out)
}

/// Keeps the first record of each group with identical normalized artifacts.
/// Returns the kept records and the ids dropped.
pub fn dedup(records: Vec<LifecycleRecord>) -> (Vec<LifecycleRecord>, Vec<String>) {
    let mut seen = HashSet::new();
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for r in records {
        let key: Vec<String> = Stage::ALL
            .iter()
            .map(|s| {
                normalize_artifact(r.artifact(*s).unwrap_or_default())
                    .trim()
                    .to_string()
            })
            .collect();
        if seen.insert(key) {
            kept.push(r);
        } else {
            dropped.push(r.id);
        }
    }
    (kept, dropped)
}

/// One line of a fine-tuning file. `record_id` lets the export be audited
/// against the split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionPair {
    pub instruction: String,
    pub input: String,
    pub output: String,
    pub record_id: String,
}

/// Instruction pairs of the training records. Multi-step mode gives the
/// four adjacent-stage pairs of each record; one-step mode gives intent to
/// each later stage. Test-split records and records not in the manifest are
/// never emitted.
pub fn instruction_pairs(
    records: &[LifecycleRecord],
    manifest: &DatasetManifest,
    mode: PromptMode,
) -> Result<Vec<InstructionPair>, DatasetError> {
    if !matches!(mode, PromptMode::MultiStep | PromptMode::OneStep) {
        return Err(DatasetError::UnsupportedMode(mode));
    }
    let registry = PromptRegistry::builtin();
    let train: BTreeSet<&str> = manifest.split.train_ids.iter().map(String::as_str).collect();
    let test: BTreeSet<&str> = manifest.split.test_ids.iter().map(String::as_str).collect();
    let mut out = Vec::new();
    for r in records
        .iter()
        .filter(|r| train.contains(r.id.as_str()) && !test.contains(r.id.as_str()))
    {
        for stage in Stage::GENERATED {
            let from = match mode {
                PromptMode::MultiStep => stage.predecessor().expect("generated stages have a predecessor"),
                _ => Stage::Intent,
            };
            let (Some(input), Some(output)) = (r.filled(from), r.filled(stage)) else {
                continue;
            };
            let template = registry
                .for_stage(mode, stage)
                .expect("builtin prompt set covers every stage");
            out.push(InstructionPair {
                instruction: template.instruction.clone(),
                input: input.to_string(),
                output: output.to_string(),
                record_id: r.id.clone(),
            });
        }
    }
    Ok(out)
}

/// Writes [`instruction_pairs`] as JSON lines and returns the line count.
pub fn export_instruction_pairs(
    records: &[LifecycleRecord],
    manifest: &DatasetManifest,
    mode: PromptMode,
    out: &Path,
) -> Result<usize, DatasetError> {
    let pairs = instruction_pairs(records, manifest, mode)?;
    let mut buf = Vec::new();
    for p in &pairs {
        serde_json::to_writer(&mut buf, p).expect("pairs serialize");
        buf.push(b'\n');
    }
    let mut f = std::fs::File::create(out).map_err(|e| DatasetError::io(out, e))?;
    f.write_all(&buf).map_err(|e| DatasetError::io(out, e))?;
    Ok(pairs.len())
}

pub fn read_instruction_pairs(path: &Path) -> Result<Vec<InstructionPair>, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|e| DatasetError::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| DatasetError::Json(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeakageAudit {
    pub lines: usize,
    /// Exported lines whose record id is in the test split.
    pub test_ids_found: Vec<String>,
    /// Exported lines whose (input, output) equals an adjacent or one-step
    /// pair of a test record, whatever their id.
    pub test_content_found: Vec<String>,
}

impl LeakageAudit {
    pub fn passed(&self) -> bool {
        self.test_ids_found.is_empty() && self.test_content_found.is_empty()
    }
}

pub fn audit_leakage(
    pairs: &[InstructionPair],
    manifest: &DatasetManifest,
    records: &[LifecycleRecord],
) -> LeakageAudit {
    let test: BTreeSet<&str> = manifest.split.test_ids.iter().map(String::as_str).collect();
    let mut test_content = HashSet::new();
    for r in records.iter().filter(|r| test.contains(r.id.as_str())) {
        for stage in Stage::GENERATED {
            for from in [stage.predecessor().expect("has predecessor"), Stage::Intent] {
                if let (Some(i), Some(o)) = (r.filled(from), r.filled(stage)) {
                    test_content.insert((i.to_string(), o.to_string()));
                }
            }
        }
    }
    let mut audit = LeakageAudit {
        lines: pairs.len(),
        ..LeakageAudit::default()
    };
    for p in pairs {
        if test.contains(p.record_id.as_str()) {
            audit.test_ids_found.push(p.record_id.clone());
        }
        if test_content.contains(&(p.input.clone(), p.output.clone())) {
            audit.test_content_found.push(p.record_id.clone());
        }
    }
    audit.test_ids_found.dedup();
    audit.test_content_found.dedup();
    audit
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::artifact::Source;

    fn full(id: &str) -> LifecycleRecord {
        let mut r = LifecycleRecord::new(id, Source::Document);
        for s in Stage::ALL {
            r.set_artifact(s, &format!("{id}-{s}"));
        }
        r
    }

    fn stages(pairs: &[StagePair]) -> Vec<(Stage, Stage)> {
        pairs.iter().map(|p| (p.from_stage, p.to_stage)).collect()
    }

    #[test]
    fn ablation_bridges() {
        use Stage::*;
        let rs = [full("a")];
        let no_req = ablate_stage(&rs, Requirement).unwrap();
        assert_eq!(
            stages(&no_req),
            [(Intent, Scxml), (Scxml, Pseudocode), (Pseudocode, Code)]
        );
        assert_eq!(no_req[0].input, "a-intent");
        assert_eq!(no_req[0].output, "a-scxml");
        assert_eq!(
            stages(&ablate_stage(&rs, Scxml).unwrap()),
            [(Intent, Requirement), (Requirement, Pseudocode), (Pseudocode, Code)]
        );
        assert_eq!(
            stages(&ablate_stage(&rs, Pseudocode).unwrap()),
            [(Intent, Requirement), (Requirement, Scxml), (Scxml, Code)]
        );
        assert_eq!(ablate_stage(&rs, Code), Err(DatasetError::NotAblatable(Code)));
        assert_eq!(ablate_stage(&rs, Intent), Err(DatasetError::NotAblatable(Intent)));
    }

    #[test]
    fn export_excludes_test_split() {
        let rs: Vec<_> = (0..10).map(|i| full(&format!("r{i}"))).collect();
        let m = split("x", &rs, 0.2, 5).unwrap();
        let multi = instruction_pairs(&rs, &m, PromptMode::MultiStep).unwrap();
        assert_eq!(multi.len(), 8 * 4);
        let one = instruction_pairs(&rs, &m, PromptMode::OneStep).unwrap();
        assert_eq!(one.len(), 8 * 4);
        assert!(one.iter().all(|p| p.input.ends_with("-intent")));
        assert!(audit_leakage(&multi, &m, &rs).passed());
        let reg = PromptRegistry::builtin();
        assert_eq!(
            multi[0].instruction,
            reg.get("multi_step/requirement").unwrap().instruction
        );
        assert!(instruction_pairs(&rs, &m, PromptMode::FromCode).is_err());

        let mut leaked = multi.clone();
        let tid = m.split.test_ids[0].clone();
        leaked.push(InstructionPair {
            instruction: String::new(),
            input: format!("{tid}-intent"),
            output: format!("{tid}-requirement"),
            record_id: "other".into(),
        });
        let audit = audit_leakage(&leaked, &m, &rs);
        assert!(!audit.passed());
        assert_eq!(audit.test_content_found, vec!["other".to_string()]);
    }

    #[test]
    fn dedup_keeps_first() {
        let mut b = full("a");
        b.id = "b".into();
        let (kept, dropped) = dedup(vec![full("a"), b, full("c")]);
        assert_eq!(kept.iter().map(|r| r.id.as_str()).collect::<Vec<_>>(), ["a", "c"]);
        assert_eq!(dropped, ["b"]);
    }
}
