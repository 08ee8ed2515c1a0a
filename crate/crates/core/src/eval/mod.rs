//! Reports over persisted runs: stage-wise scores, single- versus
//! multi-step deltas, training-data and stage ablations.

mod emit;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::artifact::{LifecycleRecord, Stage};
use crate::dataset::{fraction_label, test_fingerprint};
use crate::metrics::{evaluate_stage, MetricConfig, MetricError, MetricRow};
use crate::pipeline::{RunMode, RunState, RunStatus};

pub use emit::{emit, render_csv, render_json, render_markdown, ReportFormat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportKind {
    Stagewise,
    StepDelta,
    DataAblation,
    StageAblation,
}

impl ReportKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ReportKind::Stagewise => "stagewise",
            ReportKind::StepDelta => "step_delta",
            ReportKind::DataAblation => "data_ablation",
            ReportKind::StageAblation => "stage_ablation",
        }
    }
}

/// Settings that change scores. Backend identity is left out so that
/// reports from differently adapted models stay comparable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FingerprintInputs {
    pub metrics: MetricConfig,
    pub temperature: f64,
    pub max_output_tokens: u32,
}

impl FingerprintInputs {
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("fingerprint inputs serialize");
        hex::encode(Sha256::digest(json.as_bytes()))[..16].to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowGroup {
    /// Empty for single-group reports; "100%", "80%", ... for data ablation.
    pub label: String,
    pub rows: Vec<MetricRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub model: String,
    pub stage: Stage,
    /// single − multi per metric, in column order.
    pub deltas: Vec<(String, f64)>,
    pub n_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub model: String,
    /// None for the full pipeline.
    pub removed: Option<Stage>,
    pub em: f64,
    pub bleu: f64,
    pub codebleu: f64,
    /// (variant − baseline) / baseline; None when the baseline is 0.
    pub codebleu_change: Option<f64>,
    pub n_samples: usize,
}

impl AblationRow {
    pub fn label(&self) -> String {
        match self.removed {
            None => "full".into(),
            Some(s) => format!("-{}", s.phase_label()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub kind: ReportKind,
    pub config_fingerprint: String,
    pub fingerprint_inputs: FingerprintInputs,
    /// Hash of the reference ids the rows were scored against.
    pub test_fingerprint: String,
    pub backends: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub groups: Vec<RowGroup>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub deltas: Vec<DeltaRow>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ablation: Vec<AblationRow>,
}

impl EvaluationReport {
    /// Builds a stage-wise report from already computed rows.
    pub fn from_rows(rows: Vec<MetricRow>, inputs: FingerprintInputs, test_fingerprint: String) -> Self {
        let backends: BTreeSet<String> = rows.iter().map(|r| r.model.clone()).collect();
        EvaluationReport {
            kind: ReportKind::Stagewise,
            config_fingerprint: inputs.hash(),
            fingerprint_inputs: inputs,
            test_fingerprint,
            backends: backends.into_iter().collect(),
            groups: vec![RowGroup {
                label: String::new(),
                rows,
            }],
            deltas: Vec::new(),
            ablation: Vec::new(),
        }
    }

    pub fn rows(&self) -> impl Iterator<Item = &MetricRow> {
        self.groups.iter().flat_map(|g| g.rows.iter())
    }

    pub fn row(&self, model: &str, stage: Stage) -> Option<&MetricRow> {
        self.rows().find(|r| r.model == model && r.stage == stage)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("run `{run_id}` refers to record `{record_id}`, which is not among the references")]
    MissingReference { run_id: String, record_id: String },
    #[error("run `{0}` has no record id")]
    UnlinkedRun(String),
    #[error("reference `{record_id}` has no {stage} artifact")]
    MissingReferenceArtifact { record_id: String, stage: Stage },
    #[error("model `{model}` has no {stage} run for reference `{record_id}`")]
    MissingRun {
        model: String,
        stage: Stage,
        record_id: String,
    },
    #[error("reports cannot be compared: {0}")]
    MismatchedReports(String),
    #[error("fraction reports were scored on different test splits")]
    TestSplitMismatch,
    #[error("no runs to evaluate")]
    NoRuns,
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

fn stages_of(run: &RunState) -> Vec<Stage> {
    match run.mode {
        RunMode::OneStep => run.target_stage.into_iter().collect(),
        _ => Stage::GENERATED.to_vec(),
    }
}

/// Scores runs against references, one row per (model, stage) the runs
/// address. The model is the backend name. Runs still in progress are
/// ignored; for several runs on one (model, record, stage) the most recently
/// updated wins. A failed or partial run scores its missing artifacts as
/// empty text.
pub fn stagewise_report(
    runs: &[RunState],
    references: &[LifecycleRecord],
    config: &MetricConfig,
) -> Result<EvaluationReport, EvalError> {
    let refs: BTreeMap<&str, &LifecycleRecord> = references.iter().map(|r| (r.id.as_str(), r)).collect();
    // (model, stage) -> record -> run
    let mut chosen: BTreeMap<(String, Stage), BTreeMap<String, &RunState>> = BTreeMap::new();
    for run in runs
        .iter()
        .filter(|r| matches!(r.status, RunStatus::Completed | RunStatus::Failed))
    {
        let record_id = run
            .record_id
            .as_deref()
            .ok_or_else(|| EvalError::UnlinkedRun(run.run_id.clone()))?;
        if !refs.contains_key(record_id) {
            return Err(EvalError::MissingReference {
                run_id: run.run_id.clone(),
                record_id: record_id.to_string(),
            });
        }
        for stage in stages_of(run) {
            let slot = chosen.entry((run.backend.clone(), stage)).or_default();
            let newer = slot
                .get(record_id)
                .is_none_or(|old| (&run.updated_at, &run.run_id) > (&old.updated_at, &old.run_id));
            if newer {
                slot.insert(record_id.to_string(), run);
            }
        }
    }
    if chosen.is_empty() {
        return Err(EvalError::NoRuns);
    }
    let mut rows = Vec::new();
    let mut decoding = None;
    for ((model, stage), by_record) in &chosen {
        let mut pairs = Vec::with_capacity(refs.len());
        for (id, reference) in &refs {
            let run = by_record.get(*id).ok_or_else(|| EvalError::MissingRun {
                model: model.clone(),
                stage: *stage,
                record_id: id.to_string(),
            })?;
            decoding.get_or_insert_with(|| run.decoding.clone());
            let r = reference
                .filled(*stage)
                .ok_or_else(|| EvalError::MissingReferenceArtifact {
                    record_id: id.to_string(),
                    stage: *stage,
                })?;
            pairs.push((run.extracted(*stage).unwrap_or_default(), r.to_string()));
        }
        rows.push(evaluate_stage(model, &pairs, *stage, config)?);
    }
    let decoding = decoding.unwrap_or_default();
    let inputs = FingerprintInputs {
        metrics: config.clone(),
        temperature: decoding.temperature,
        max_output_tokens: decoding.max_output_tokens,
    };
    let ids: Vec<String> = refs.keys().map(|s| s.to_string()).collect();
    Ok(EvaluationReport::from_rows(rows, inputs, test_fingerprint(&ids)))
}

fn ensure_comparable(a: &EvaluationReport, b: &EvaluationReport) -> Result<(), EvalError> {
    if a.kind != ReportKind::Stagewise || b.kind != ReportKind::Stagewise {
        return Err(EvalError::MismatchedReports(
            "both inputs must be stage-wise reports".into(),
        ));
    }
    if a.config_fingerprint != b.config_fingerprint {
        return Err(EvalError::MismatchedReports(format!(
            "config fingerprints differ ({} vs {})",
            a.config_fingerprint, b.config_fingerprint
        )));
    }
    Ok(())
}

pub const DELTA_STAGES: [Stage; 3] = [Stage::Scxml, Stage::Pseudocode, Stage::Code];

/// single − multi for every model of the multi-step report over the SCXML,
/// pseudocode and code stages.
pub fn step_delta_report(multi: &EvaluationReport, single: &EvaluationReport) -> Result<EvaluationReport, EvalError> {
    ensure_comparable(multi, single)?;
    if multi.test_fingerprint != single.test_fingerprint {
        return Err(EvalError::MismatchedReports("test splits differ".into()));
    }
    let models: BTreeSet<&str> = multi.rows().map(|r| r.model.as_str()).collect();
    let mut deltas = Vec::new();
    for model in models {
        for stage in DELTA_STAGES {
            let m = multi
                .row(model, stage)
                .ok_or_else(|| EvalError::MismatchedReports(format!("multi-step report lacks {model}/{stage}")))?;
            let s = single
                .row(model, stage)
                .ok_or_else(|| EvalError::MismatchedReports(format!("single-step report lacks {model}/{stage}")))?;
            let sv: BTreeMap<&str, f64> = s.values().into_iter().collect();
            let d = m
                .values()
                .into_iter()
                .map(|(name, mv)| {
                    let s = sv.get(name).ok_or_else(|| {
                        EvalError::MismatchedReports(format!("single-step {model}/{stage} lacks {name}"))
                    })?;
                    Ok((name.to_string(), s - mv))
                })
                .collect::<Result<Vec<_>, EvalError>>()?;
            deltas.push(DeltaRow {
                model: model.to_string(),
                stage,
                deltas: d,
                n_samples: m.n_samples,
            });
        }
    }
    let backends: BTreeSet<String> = multi.backends.iter().chain(&single.backends).cloned().collect();
    Ok(EvaluationReport {
        kind: ReportKind::StepDelta,
        config_fingerprint: multi.config_fingerprint.clone(),
        fingerprint_inputs: multi.fingerprint_inputs.clone(),
        test_fingerprint: multi.test_fingerprint.clone(),
        backends: backends.into_iter().collect(),
        groups: Vec::new(),
        deltas,
        ablation: Vec::new(),
    })
}

/// One row group per training fraction, largest first. Every fraction must
/// have been scored on the same test split with the same settings.
pub fn data_ablation_report(per_fraction: &[(f64, EvaluationReport)]) -> Result<EvaluationReport, EvalError> {
    let (_, first) = per_fraction.first().ok_or(EvalError::NoRuns)?;
    for (_, r) in per_fraction {
        if r.test_fingerprint != first.test_fingerprint {
            return Err(EvalError::TestSplitMismatch);
        }
        ensure_comparable(first, r)?;
    }
    let mut sorted: Vec<&(f64, EvaluationReport)> = per_fraction.iter().collect();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
    let groups = sorted
        .iter()
        .map(|(f, r)| RowGroup {
            label: fraction_label(*f),
            rows: r.rows().cloned().collect(),
        })
        .collect();
    let backends: BTreeSet<String> = per_fraction
        .iter()
        .flat_map(|(_, r)| r.backends.iter().cloned())
        .collect();
    Ok(EvaluationReport {
        kind: ReportKind::DataAblation,
        config_fingerprint: first.config_fingerprint.clone(),
        fingerprint_inputs: first.fingerprint_inputs.clone(),
        test_fingerprint: first.test_fingerprint.clone(),
        backends: backends.into_iter().collect(),
        groups,
        deltas: Vec::new(),
        ablation: Vec::new(),
    })
}

fn code_row(report: &EvaluationReport, model: &str) -> Result<MetricRow, EvalError> {
    report
        .row(model, Stage::Code)
        .cloned()
        .ok_or_else(|| EvalError::MismatchedReports(format!("no code row for {model}")))
}

/// Code-stage scores of the full pipeline and of each stage-ablated variant,
/// with the relative CodeBLEU change against the full pipeline.
pub fn stage_ablation_report(
    baseline: &EvaluationReport,
    variants: &BTreeMap<Stage, EvaluationReport>,
) -> Result<EvaluationReport, EvalError> {
    for v in variants.values() {
        ensure_comparable(baseline, v)?;
        if v.test_fingerprint != baseline.test_fingerprint {
            return Err(EvalError::TestSplitMismatch);
        }
    }
    let models: BTreeSet<&str> = baseline
        .rows()
        .filter(|r| r.stage == Stage::Code)
        .map(|r| r.model.as_str())
        .collect();
    if models.is_empty() {
        return Err(EvalError::MismatchedReports("baseline has no code rows".into()));
    }
    let mut rows = Vec::new();
    for model in models {
        let base = code_row(baseline, model)?;
        let base_cb = base.codebleu.unwrap_or(0.0);
        let make = |removed: Option<Stage>, row: &MetricRow| {
            let cb = row.codebleu.unwrap_or(0.0);
            AblationRow {
                model: model.to_string(),
                removed,
                em: row.em,
                bleu: row.bleu,
                codebleu: cb,
                codebleu_change: (base_cb != 0.0).then(|| (cb - base_cb) / base_cb),
                n_samples: row.n_samples,
            }
        };
        rows.push(make(None, &base));
        for (stage, report) in variants {
            rows.push(make(Some(*stage), &code_row(report, model)?));
        }
    }
    let backends: BTreeSet<String> = std::iter::once(baseline)
        .chain(variants.values())
        .flat_map(|r| r.backends.iter().cloned())
        .collect();
    Ok(EvaluationReport {
        kind: ReportKind::StageAblation,
        config_fingerprint: baseline.config_fingerprint.clone(),
        fingerprint_inputs: baseline.fingerprint_inputs.clone(),
        test_fingerprint: baseline.test_fingerprint.clone(),
        backends: backends.into_iter().collect(),
        groups: Vec::new(),
        deltas: Vec::new(),
        ablation: rows,
    })
}
