//! Multi-step, one-step and gated pipeline runs with persisted, resumable
//! state.

mod clock;
mod extract;
mod store;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::artifact::Stage;
use crate::gateway::{Backend, Decoding, TranscriptEntry, TranscriptWriter};
use crate::prompts::{PromptMode, PromptRegistry};
use crate::scxml::{self, Finding};

pub use clock::{rfc3339, Clock, FixedClock, SystemClock};
pub use extract::extract_artifact;
pub use store::{artifact_file_name, RunStore, StoreError, STATE_FILE, TRANSCRIPT_FILE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    MultiStep,
    OneStep,
    Gated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Running,
    AwaitingReview,
    Completed,
    Failed,
}

impl RunStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::Running => "running",
            RunStatus::AwaitingReview => "awaiting_review",
            RunStatus::Completed => "completed",
            RunStatus::Failed => "failed",
        }
    }
}

impl std::str::FromStr for RunStatus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "running" => Ok(RunStatus::Running),
            "awaiting_review" => Ok(RunStatus::AwaitingReview),
            "completed" => Ok(RunStatus::Completed),
            "failed" => Ok(RunStatus::Failed),
            _ => Err(format!("unknown run status `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Generated,
    HumanEdited,
}

/// Default gates when gating is requested without an explicit list.
pub const DEFAULT_GATES: [Stage; 2] = [Stage::Requirement, Stage::Scxml];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunState {
    pub run_id: String,
    pub mode: RunMode,
    pub backend: String,
    pub decoding: Decoding,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_id: Option<String>,
    pub input_intent: String,
    pub intent_provenance: Provenance,
    /// Raw completions, stored verbatim.
    pub artifacts: BTreeMap<Stage, String>,
    pub provenance: BTreeMap<Stage, Provenance>,
    pub status: RunStatus,
    /// Gates pause a run before generating the gated stage; the checkpoint
    /// is the stage whose artifact is up for review.
    pub gates: BTreeSet<Stage>,
    pub checkpoint_stage: Option<Stage>,
    /// Set for one-step runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_stage: Option<Stage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failed_stage: Option<Stage>,
    /// Findings for the SCXML artifact; advisory only.
    #[serde(default)]
    pub scxml_findings: Vec<Finding>,
    pub backend_calls: u32,
    /// Relative to the run directory.
    pub transcript_path: String,
    pub created_at: String,
    pub updated_at: String,
}

impl RunState {
    /// The artifact of `stage`, counting the input intent as the Intent
    /// artifact.
    pub fn artifact(&self, stage: Stage) -> Option<&str> {
        match stage {
            Stage::Intent => Some(&self.input_intent),
            s => self.artifacts.get(&s).map(String::as_str),
        }
    }

    /// Artifact text after fence extraction.
    pub fn extracted(&self, stage: Stage) -> Option<String> {
        self.artifact(stage).map(|t| extract_artifact(stage, t))
    }

    pub fn next_stage(&self) -> Option<Stage> {
        Stage::GENERATED.into_iter().find(|s| !self.artifacts.contains_key(s))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("run `{0}` not found")]
    RunNotFound(String),
    #[error("run `{run_id}` is {status}, not awaiting review", status = .status.as_str())]
    NotAwaitingReview { run_id: String, status: RunStatus },
    #[error("run is paused at `{expected}`, cannot edit `{got}`")]
    StageMismatch { expected: Stage, got: Stage },
    #[error("intent is empty")]
    EmptyIntent,
    #[error("one-step target must be a generated stage, got `{0}`")]
    InvalidTarget(Stage),
    #[error(transparent)]
    Store(StoreError),
    #[error(transparent)]
    Prompt(#[from] crate::prompts::PromptError),
}

impl From<StoreError> for PipelineError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::NotFound(id) => PipelineError::RunNotFound(id),
            e => PipelineError::Store(e),
        }
    }
}

/// What to run for one input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunSpec {
    /// All four stages; pauses before each gated stage.
    MultiStep {
        gates: BTreeSet<Stage>,
    },
    OneStep {
        target: Stage,
    },
}

impl RunSpec {
    pub fn multi() -> Self {
        RunSpec::MultiStep { gates: BTreeSet::new() }
    }

    pub fn gated(gates: impl IntoIterator<Item = Stage>) -> Self {
        RunSpec::MultiStep {
            gates: gates.into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunRequest {
    pub intent: String,
    pub record_id: Option<String>,
}

impl From<&str> for RunRequest {
    fn from(intent: &str) -> Self {
        RunRequest {
            intent: intent.to_string(),
            record_id: None,
        }
    }
}

#[derive(Clone)]
pub struct Pipeline {
    store: RunStore,
    clock: Arc<dyn Clock>,
    registry: &'static PromptRegistry,
    counter: Arc<AtomicU64>,
}

impl Pipeline {
    pub fn new(store: RunStore) -> Self {
        Pipeline {
            store,
            clock: Arc::new(SystemClock),
            registry: PromptRegistry::builtin(),
            counter: Arc::new(AtomicU64::new(0)),
        }
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn store(&self) -> &RunStore {
        &self.store
    }

    fn now(&self) -> String {
        rfc3339(self.clock.now())
    }

    /// Deterministic given the clock, the per-pipeline counter and the
    /// request.
    fn new_run_id(&self, stamp: &str, intent: &str, mode: RunMode, backend: &str) -> String {
        loop {
            let n = self.counter.fetch_add(1, Ordering::SeqCst);
            let mut h = Sha256::new();
            h.update(n.to_le_bytes());
            h.update(stamp.as_bytes());
            h.update([0]);
            h.update(format!("{mode:?}").as_bytes());
            h.update([0]);
            h.update(backend.as_bytes());
            h.update([0]);
            h.update(intent.as_bytes());
            let digest = hex::encode(h.finalize());
            let compact: String = stamp.chars().filter(|c| c.is_ascii_digit()).collect();
            let id = format!("run-{compact}-{}", &digest[..8]);
            if !self.store.exists(&id) {
                return id;
            }
        }
    }

    /// Persists a new run in `running` state without generating anything.
    pub fn create(
        &self,
        request: &RunRequest,
        spec: &RunSpec,
        backend: &dyn Backend,
    ) -> Result<RunState, PipelineError> {
        if request.intent.trim().is_empty() {
            return Err(PipelineError::EmptyIntent);
        }
        let (mode, gates, target) = match spec {
            RunSpec::MultiStep { gates } if gates.is_empty() => (RunMode::MultiStep, BTreeSet::new(), None),
            RunSpec::MultiStep { gates } => (RunMode::Gated, gates.clone(), None),
            RunSpec::OneStep { target } => {
                if *target == Stage::Intent {
                    return Err(PipelineError::InvalidTarget(*target));
                }
                (RunMode::OneStep, BTreeSet::new(), Some(*target))
            }
        };
        let now = self.now();
        let run_id = self.new_run_id(&now, &request.intent, mode, backend.name());
        let state = RunState {
            run_id,
            mode,
            backend: backend.name().to_string(),
            decoding: backend.decoding(),
            record_id: request.record_id.clone(),
            input_intent: request.intent.clone(),
            intent_provenance: Provenance::Generated,
            artifacts: BTreeMap::new(),
            provenance: BTreeMap::new(),
            status: RunStatus::Running,
            gates: gates.into_iter().filter(|g| *g != Stage::Intent).collect(),
            checkpoint_stage: None,
            target_stage: target,
            error: None,
            failed_stage: None,
            scxml_findings: Vec::new(),
            backend_calls: 0,
            transcript_path: TRANSCRIPT_FILE.to_string(),
            created_at: now.clone(),
            updated_at: now,
        };
        self.store.save(&state)?;
        Ok(state)
    }

    /// Drives a `running` run until it completes, fails or reaches a gate.
    pub fn execute(&self, run_id: &str, backend: &dyn Backend) -> Result<RunState, PipelineError> {
        let lock = self.store.lock(run_id);
        let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());
        let state = self.store.load(run_id)?;
        if state.status != RunStatus::Running {
            return Ok(state);
        }
        self.advance(state, backend, false)
    }

    pub fn run_multi_step(
        &self,
        intent: &str,
        backend: &dyn Backend,
        gates: impl IntoIterator<Item = Stage>,
    ) -> Result<RunState, PipelineError> {
        let state = self.create(&intent.into(), &RunSpec::gated(gates), backend)?;
        self.execute(&state.run_id, backend)
    }

    pub fn run_one_step(
        &self,
        intent: &str,
        target_stage: Stage,
        backend: &dyn Backend,
    ) -> Result<RunState, PipelineError> {
        let state = self.create(&intent.into(), &RunSpec::OneStep { target: target_stage }, backend)?;
        self.execute(&state.run_id, backend)
    }

    /// Replaces the checkpoint artifact of a paused run. The run stays
    /// paused.
    pub fn edit_artifact(&self, run_id: &str, stage: Stage, text: &str) -> Result<RunState, PipelineError> {
        let lock = self.store.lock(run_id);
        let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());
        let mut state = self.store.load(run_id)?;
        self.apply_edit(&mut state, Some(stage), text)?;
        self.store.save(&state)?;
        Ok(state)
    }

    fn apply_edit(&self, state: &mut RunState, stage: Option<Stage>, text: &str) -> Result<(), PipelineError> {
        if state.status != RunStatus::AwaitingReview {
            return Err(PipelineError::NotAwaitingReview {
                run_id: state.run_id.clone(),
                status: state.status,
            });
        }
        let checkpoint = state.checkpoint_stage.expect("awaiting_review implies a checkpoint");
        let stage = stage.unwrap_or(checkpoint);
        if stage != checkpoint {
            return Err(PipelineError::StageMismatch {
                expected: checkpoint,
                got: stage,
            });
        }
        if stage == Stage::Intent {
            state.input_intent = text.to_string();
            state.intent_provenance = Provenance::HumanEdited;
        } else {
            state.artifacts.insert(stage, text.to_string());
            state.provenance.insert(stage, Provenance::HumanEdited);
            if stage == Stage::Scxml {
                state.scxml_findings = scxml_findings(text);
            }
        }
        state.updated_at = self.now();
        Ok(())
    }

    /// Continues a paused run, optionally replacing the checkpoint artifact
    /// first. The next stage is generated even if it is gated; later gates
    /// still apply.
    pub fn resume(
        &self,
        run_id: &str,
        edited_artifact: Option<&str>,
        backend: &dyn Backend,
    ) -> Result<RunState, PipelineError> {
        let lock = self.store.lock(run_id);
        let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());
        let mut state = self.store.load(run_id)?;
        if let Some(text) = edited_artifact {
            self.apply_edit(&mut state, None, text)?;
        } else if state.status != RunStatus::AwaitingReview {
            return Err(PipelineError::NotAwaitingReview {
                run_id: state.run_id.clone(),
                status: state.status,
            });
        }
        state.status = RunStatus::Running;
        state.checkpoint_stage = None;
        self.advance(state, backend, true)
    }

    /// Marks a run as approved without generating; the caller executes it.
    pub fn approve(&self, run_id: &str) -> Result<RunState, PipelineError> {
        let lock = self.store.lock(run_id);
        let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());
        let mut state = self.store.load(run_id)?;
        if state.status != RunStatus::AwaitingReview {
            return Err(PipelineError::NotAwaitingReview {
                run_id: state.run_id.clone(),
                status: state.status,
            });
        }
        state.status = RunStatus::Running;
        state.checkpoint_stage = None;
        state.updated_at = self.now();
        self.store.save(&state)?;
        Ok(state)
    }

    /// Executes a run approved with [`Pipeline::approve`], skipping the gate
    /// of the stage right after the old checkpoint.
    pub fn execute_approved(&self, run_id: &str, backend: &dyn Backend) -> Result<RunState, PipelineError> {
        let lock = self.store.lock(run_id);
        let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());
        let state = self.store.load(run_id)?;
        if state.status != RunStatus::Running {
            return Ok(state);
        }
        self.advance(state, backend, true)
    }

    fn advance(
        &self,
        mut state: RunState,
        backend: &dyn Backend,
        mut skip_gate: bool,
    ) -> Result<RunState, PipelineError> {
        let transcript =
            TranscriptWriter::open(&self.store.transcript_path(&state.run_id)).map_err(|source| StoreError::Io {
                path: self.store.transcript_path(&state.run_id),
                source,
            })?;
        loop {
            let (stage, template, input) = match state.mode {
                RunMode::OneStep => {
                    let target = state.target_stage.expect("one-step runs have a target");
                    if state.artifacts.contains_key(&target) {
                        return self.finish(state);
                    }
                    let t = self.registry.for_stage(PromptMode::OneStep, target)?;
                    (target, t, state.input_intent.clone())
                }
                RunMode::MultiStep | RunMode::Gated => {
                    let Some(next) = state.next_stage() else {
                        return self.finish(state);
                    };
                    if state.gates.contains(&next) && !skip_gate {
                        state.status = RunStatus::AwaitingReview;
                        state.checkpoint_stage = next.predecessor();
                        state.updated_at = self.now();
                        self.store.save(&state)?;
                        return Ok(state);
                    }
                    let prev = next.predecessor().expect("generated stages have a predecessor");
                    let input = state.artifact(prev).expect("artifacts have no gaps").to_string();
                    let t = self.registry.for_stage(PromptMode::MultiStep, next)?;
                    (next, t, input)
                }
            };
            skip_gate = false;
            let prompt = self.registry.render(&template.id, &input)?;
            let result = backend.generate(&prompt);
            state.backend_calls += 1;
            let mut entry = TranscriptEntry {
                seq: state.backend_calls as u64,
                timestamp: self.now(),
                run_id: state.run_id.clone(),
                stage: stage.as_str().to_string(),
                template_id: prompt.template_id.clone(),
                backend: backend.name().to_string(),
                prompt: prompt.text.clone(),
                response: None,
                error: None,
                attempts: 1,
                latency_ms: 0,
            };
            match result {
                Ok(r) => {
                    entry.response = Some(r.text.clone());
                    entry.attempts = r.attempts;
                    entry.latency_ms = r.latency_ms;
                    let _ = transcript.append(&entry);
                    if stage == Stage::Scxml {
                        state.scxml_findings = scxml_findings(&r.text);
                    }
                    state.artifacts.insert(stage, r.text);
                    state.provenance.insert(stage, Provenance::Generated);
                    state.updated_at = entry.timestamp;
                    self.store.save(&state)?;
                }
                Err(e) => {
                    entry.error = Some(e.to_string());
                    let _ = transcript.append(&entry);
                    state.status = RunStatus::Failed;
                    state.failed_stage = Some(stage);
                    state.error = Some(e.to_string());
                    state.updated_at = entry.timestamp;
                    self.store.save(&state)?;
                    return Ok(state);
                }
            }
        }
    }

    fn finish(&self, mut state: RunState) -> Result<RunState, PipelineError> {
        state.status = RunStatus::Completed;
        state.checkpoint_stage = None;
        if let Some(text) = state.artifacts.get(&Stage::Scxml) {
            state.scxml_findings = scxml_findings(text);
        }
        state.updated_at = self.now();
        self.store.save(&state)?;
        Ok(state)
    }

    pub fn load(&self, run_id: &str) -> Result<RunState, PipelineError> {
        Ok(self.store.load(run_id)?)
    }

    /// Runs every request, isolating failures. Runs are created in input
    /// order before any generation starts, so ids do not depend on thread
    /// scheduling. Output order matches input order.
    pub fn batch_run(
        &self,
        requests: &[RunRequest],
        spec: &RunSpec,
        backend: &dyn Backend,
        parallelism: usize,
    ) -> Vec<Result<RunState, PipelineError>> {
        let mut results: Vec<Option<Result<RunState, PipelineError>>> = Vec::with_capacity(requests.len());
        let mut pending = Vec::new();
        for (i, r) in requests.iter().enumerate() {
            match self.create(r, spec, backend) {
                Ok(state) => {
                    pending.push((i, state.run_id));
                    results.push(None);
                }
                Err(e) => results.push(Some(Err(e))),
            }
        }
        let next = AtomicU64::new(0);
        let slots = std::sync::Mutex::new(&mut results);
        std::thread::scope(|s| {
            for _ in 0..parallelism.max(1).min(pending.len().max(1)) {
                s.spawn(|| loop {
                    let k = next.fetch_add(1, Ordering::SeqCst) as usize;
                    let Some((i, run_id)) = pending.get(k) else { break };
                    let out = self.execute(run_id, backend);
                    slots.lock().unwrap_or_else(|e| e.into_inner())[*i] = Some(out);
                });
            }
        });
        results.into_iter().map(|r| r.expect("every slot filled")).collect()
    }
}

fn scxml_findings(raw: &str) -> Vec<Finding> {
    scxml::check(&extract_artifact(Stage::Scxml, raw)).findings
}

/// The INPUT section of a rendered prompt.
pub fn prompt_input(prompt_text: &str) -> Option<&str> {
    crate::prompts::split_rendered(prompt_text).map(|(_, input)| input)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{scripted_backend, ScriptedBackend};

    fn pipeline() -> (tempfile::TempDir, Pipeline) {
        let dir = tempfile::tempdir().unwrap();
        let p = Pipeline::new(RunStore::open(dir.path()).unwrap()).with_clock(Arc::new(FixedClock::epoch()));
        (dir, p)
    }

    #[test]
    fn multi_step_inherits_context() {
        let (_d, p) = pipeline();
        let b = scripted_backend(["R", "S", "P", "C"]);
        let run = p.run_multi_step("intent", &b, []).unwrap();
        assert_eq!(run.status, RunStatus::Completed);
        assert_eq!(run.mode, RunMode::MultiStep);
        let arts: Vec<&str> = run.artifacts.values().map(String::as_str).collect();
        assert_eq!(arts, vec!["R", "S", "P", "C"]);
        let rec = b.received();
        assert_eq!(rec.len(), 4);
        assert_eq!(prompt_input(&rec[0].text), Some("intent"));
        assert_eq!(prompt_input(&rec[1].text), Some("R"));
        assert_eq!(prompt_input(&rec[3].text), Some("P"));
    }

    #[test]
    fn gate_pauses_before_stage() {
        let (_d, p) = pipeline();
        let b = scripted_backend(["R"]);
        let run = p.run_multi_step("intent", &b, [Stage::Scxml]).unwrap();
        assert_eq!(run.status, RunStatus::AwaitingReview);
        assert_eq!(run.checkpoint_stage, Some(Stage::Requirement));
        assert_eq!(run.artifacts.len(), 1);
        assert_eq!(b.call_count(), 1);
    }

    #[test]
    fn failure_preserves_earlier_artifacts() {
        let (_d, p) = pipeline();
        let b = scripted_backend(["R", "S", "P", "C"]).fail_on_call(3);
        let run = p.run_multi_step("intent", &b, []).unwrap();
        assert_eq!(run.status, RunStatus::Failed);
        assert_eq!(run.failed_stage, Some(Stage::Pseudocode));
        assert_eq!(
            run.artifacts.keys().copied().collect::<Vec<_>>(),
            vec![Stage::Requirement, Stage::Scxml]
        );
    }

    #[test]
    fn one_step() {
        let (_d, p) = pipeline();
        let b = scripted_backend(["C"]);
        let run = p.run_one_step("intent", Stage::Code, &b).unwrap();
        assert_eq!(run.artifacts.len(), 1);
        assert_eq!(run.artifacts[&Stage::Code], "C");
        assert_eq!(b.call_count(), 1);
        assert!(matches!(
            p.run_one_step("intent", Stage::Intent, &b),
            Err(PipelineError::InvalidTarget(Stage::Intent))
        ));
        let b = scripted_backend(["S"]);
        p.run_one_step("intent", Stage::Scxml, &b).unwrap();
        let t = PromptRegistry::builtin().get("one_step/scxml").unwrap();
        assert!(b.received()[0].text.contains(&t.instruction));
    }

    #[test]
    fn resume_with_and_without_edit() {
        let (_d, p) = pipeline();
        let b = scripted_backend(["R", "S", "P", "C"]);
        let run = p.run_multi_step("intent", &b, [Stage::Scxml]).unwrap();
        let run = p.resume(&run.run_id, Some("R2"), &b).unwrap();
        assert_eq!(run.status, RunStatus::Completed);
        assert_eq!(run.provenance[&Stage::Requirement], Provenance::HumanEdited);
        assert_eq!(prompt_input(&b.received()[1].text), Some("R2"));
        assert!(matches!(
            p.resume(&run.run_id, None, &b),
            Err(PipelineError::NotAwaitingReview { .. })
        ));

        let b = scripted_backend(["R", "S", "P", "C"]);
        let run = p.run_multi_step("intent", &b, [Stage::Scxml]).unwrap();
        let run = p.resume(&run.run_id, None, &b).unwrap();
        assert_eq!(run.artifacts[&Stage::Requirement], "R");
        assert_eq!(run.provenance[&Stage::Requirement], Provenance::Generated);
    }

    #[test]
    fn default_gates_pause_twice() {
        let (_d, p) = pipeline();
        let b = ScriptedBackend::echo();
        let run = p.run_multi_step("intent", &b, DEFAULT_GATES).unwrap();
        assert_eq!(run.checkpoint_stage, Some(Stage::Intent));
        assert_eq!(b.call_count(), 0);
        let run = p.resume(&run.run_id, Some("edited intent"), &b).unwrap();
        assert_eq!(run.checkpoint_stage, Some(Stage::Requirement));
        assert_eq!(run.artifacts[&Stage::Requirement], "edited intent");
        let run = p.resume(&run.run_id, None, &b).unwrap();
        assert_eq!(run.status, RunStatus::Completed);
        assert_eq!(b.call_count(), 4);
    }

    #[test]
    fn edit_rules() {
        let (_d, p) = pipeline();
        let b = scripted_backend(["R"]);
        let run = p.run_multi_step("intent", &b, [Stage::Scxml]).unwrap();
        assert!(matches!(
            p.edit_artifact(&run.run_id, Stage::Code, "x"),
            Err(PipelineError::StageMismatch { .. })
        ));
        let edited = p
            .edit_artifact(&run.run_id, Stage::Requirement, "new\r\n  text ")
            .unwrap();
        assert_eq!(edited.status, RunStatus::AwaitingReview);
        assert_eq!(
            p.load(&run.run_id).unwrap().artifacts[&Stage::Requirement],
            "new\r\n  text "
        );
        assert!(matches!(p.load("missing"), Err(PipelineError::RunNotFound(_))));
    }

    #[test]
    fn scxml_findings_attached() {
        let (_d, p) = pipeline();
        let b = scripted_backend([
            "R",
            "```xml\n<scxml initial=\"a\"><state id=\"a\"><transition event=\"e\" target=\"zz\"/></state></scxml>\n```",
            "P",
            "C",
        ]);
        let run = p.run_multi_step("intent", &b, []).unwrap();
        assert_eq!(run.scxml_findings.len(), 1);
        assert_eq!(run.scxml_findings[0].kind, scxml::FindingKind::DanglingTarget);
    }

    #[test]
    fn batch_isolates_failures_and_keeps_order() {
        let (_d, p) = pipeline();
        let intents = ["a", "b", "c"].map(RunRequest::from);
        let b = ScriptedBackend::echo();
        let runs = p.batch_run(&intents, &RunSpec::multi(), &b, 3);
        let got: Vec<String> = runs.iter().map(|r| r.as_ref().unwrap().input_intent.clone()).collect();
        assert_eq!(got, vec!["a", "b", "c"]);

        let (_d, p) = pipeline();
        let b = scripted_backend(["C1", "C2"]);
        let runs = p.batch_run(&intents, &RunSpec::OneStep { target: Stage::Code }, &b, 1);
        let statuses: Vec<RunStatus> = runs.iter().map(|r| r.as_ref().unwrap().status).collect();
        assert_eq!(
            statuses,
            vec![RunStatus::Completed, RunStatus::Completed, RunStatus::Failed]
        );
    }

    #[test]
    fn run_ids_are_deterministic() {
        let ids = || {
            let (_d, p) = pipeline();
            let b = ScriptedBackend::echo();
            (0..3)
                .map(|_| p.run_multi_step("same", &b, []).unwrap().run_id)
                .collect::<Vec<_>>()
        };
        let a = ids();
        assert_eq!(a, ids());
        assert_eq!(a.iter().collect::<BTreeSet<_>>().len(), 3);
    }
}
