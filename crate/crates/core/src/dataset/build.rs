use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::artifact::{LifecycleRecord, Source, Stage};
use crate::gateway::Backend;
use crate::pipeline::extract_artifact;
use crate::prompts::{PromptRegistry, RenderOptions};
use crate::pylang;

/// One input to the document route: an FSM description and, when available,
/// the pseudocode extracted alongside it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentSource {
    pub fsm_description: String,
    #[serde(default)]
    pub pseudocode: Option<String>,
}

impl From<&str> for DocumentSource {
    fn from(fsm: &str) -> Self {
        DocumentSource {
            fsm_description: fsm.to_string(),
            pseudocode: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuildFindingKind {
    BackendFailure,
    UnparsableProgram,
    JsonParseError,
    MissingPseudocode,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildFinding {
    /// Position of the source item in the input list.
    pub item: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_id: Option<String>,
    pub kind: BuildFindingKind,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildOutput {
    pub records: Vec<LifecycleRecord>,
    /// Ids of records that stopped short of a full chain.
    pub incomplete: Vec<String>,
    pub findings: Vec<BuildFinding>,
}

impl BuildOutput {
    fn absorb(&mut self, item: ItemOutcome) {
        if let Some(r) = item.record {
            if item.incomplete {
                self.incomplete.push(r.id.clone());
            }
            self.records.push(r);
        }
        self.findings.extend(item.findings);
    }
}

#[derive(Default)]
struct ItemOutcome {
    record: Option<LifecycleRecord>,
    incomplete: bool,
    findings: Vec<BuildFinding>,
}

/// Stable id from a route prefix, the item position and its content.
pub fn record_id(prefix: &str, index: usize, content: &str) -> String {
    let digest = Sha256::digest(content.as_bytes());
    format!("{prefix}-{:04}-{}", index + 1, &hex::encode(digest)[..8])
}

fn call(backend: &dyn Backend, template: &str, input: &str, opts: &RenderOptions) -> Result<String, String> {
    let prompt = PromptRegistry::builtin()
        .render_with(template, input, opts)
        .map_err(|e| e.to_string())?;
    backend.generate(&prompt).map(|g| g.text).map_err(|e| e.to_string())
}

fn backend_failure(item: usize, id: &str, template: &str, err: String) -> BuildFinding {
    BuildFinding {
        item,
        record_id: Some(id.to_string()),
        kind: BuildFindingKind::BackendFailure,
        message: format!("{template}: {err}"),
    }
}

/// Runs `f` over every item, `parallelism` items at a time, and collects the
/// outcomes in input order.
fn for_each_item<T: Sync>(items: &[T], parallelism: usize, f: impl Fn(usize, &T) -> ItemOutcome + Sync) -> BuildOutput {
    let mut slots: Vec<Option<ItemOutcome>> = (0..items.len()).map(|_| None).collect();
    if parallelism <= 1 || items.len() <= 1 {
        for (i, item) in items.iter().enumerate() {
            slots[i] = Some(f(i, item));
        }
    } else {
        let next = std::sync::atomic::AtomicUsize::new(0);
        let results = std::sync::Mutex::new(&mut slots);
        std::thread::scope(|s| {
            for _ in 0..parallelism.min(items.len()) {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                    if i >= items.len() {
                        break;
                    }
                    let out = f(i, &items[i]);
                    results.lock().unwrap_or_else(|e| e.into_inner())[i] = Some(out);
                });
            }
        });
    }
    let mut output = BuildOutput::default();
    for slot in slots.into_iter().flatten() {
        output.absorb(slot);
    }
    output
}

/// Document route. Per description: intent, requirement and SCXML from the
/// description, then code from the supplied pseudocode. Calls stop at the
/// first backend failure and the partial record is kept.
pub fn build_from_document(sources: &[DocumentSource], backend: &dyn Backend, parallelism: usize) -> BuildOutput {
    let opts = RenderOptions::default();
    for_each_item(sources, parallelism, |i, src| {
        let id = record_id("doc", i, &src.fsm_description);
        let mut record = LifecycleRecord::new(&id, Source::Document);
        record.fsm_description = Some(src.fsm_description.clone());
        let mut out = ItemOutcome::default();
        for stage in [Stage::Intent, Stage::Requirement, Stage::Scxml] {
            let template = format!("from_document/{stage}");
            match call(backend, &template, &src.fsm_description, &opts) {
                Ok(text) => record.set_artifact(stage, &extract_artifact(stage, &text)),
                Err(e) => {
                    out.findings.push(backend_failure(i, &id, &template, e));
                    out.incomplete = true;
                    out.record = Some(record);
                    return out;
                }
            }
        }
        match &src.pseudocode {
            Some(pseudo) => {
                record.set_artifact(Stage::Pseudocode, pseudo);
                match call(backend, "from_document/code", pseudo, &opts) {
                    Ok(text) => record.set_artifact(Stage::Code, &extract_artifact(Stage::Code, &text)),
                    Err(e) => {
                        out.findings.push(backend_failure(i, &id, "from_document/code", e));
                        out.incomplete = true;
                    }
                }
            }
            None => {
                out.findings.push(BuildFinding {
                    item: i,
                    record_id: Some(id.clone()),
                    kind: BuildFindingKind::MissingPseudocode,
                    message: "no pseudocode supplied; code was not generated".into(),
                });
                out.incomplete = true;
            }
        }
        out.record = Some(record);
        out
    })
}

/// Code route. Per program: an FSM description from the code, then intent,
/// requirement and SCXML from the description, then pseudocode from the code.
/// Programs that do not parse are skipped with a finding.
pub fn build_from_code(
    programs: &[String],
    backend: &dyn Backend,
    pseudocode_sample: Option<&str>,
    parallelism: usize,
) -> BuildOutput {
    let opts = RenderOptions {
        pseudocode_sample: pseudocode_sample.map(str::to_string),
        ..RenderOptions::default()
    };
    for_each_item(programs, parallelism, |i, program| {
        let mut out = ItemOutcome::default();
        if let Err(e) = pylang::parse_module(program) {
            out.findings.push(BuildFinding {
                item: i,
                record_id: None,
                kind: BuildFindingKind::UnparsableProgram,
                message: e.to_string(),
            });
            return out;
        }
        let id = record_id("code", i, program);
        let mut record = LifecycleRecord::new(&id, Source::Code).with(Stage::Code, program);
        let fail = |out: &mut ItemOutcome, record: LifecycleRecord, template: &str, e: String| {
            out.findings.push(backend_failure(i, &id, template, e));
            out.incomplete = true;
            out.record = Some(record);
        };
        let fsm = match call(backend, "from_code/fsm_description", program, &opts) {
            Ok(t) => t.trim().to_string(),
            Err(e) => {
                fail(&mut out, record, "from_code/fsm_description", e);
                return out;
            }
        };
        record.fsm_description = Some(fsm.clone());
        for stage in [Stage::Intent, Stage::Requirement, Stage::Scxml] {
            let template = format!("from_code/{stage}");
            match call(backend, &template, &fsm, &opts) {
                Ok(text) => record.set_artifact(stage, &extract_artifact(stage, &text)),
                Err(e) => {
                    fail(&mut out, record, &template, e);
                    return out;
                }
            }
        }
        match call(backend, "from_code/pseudocode", program, &opts) {
            Ok(text) => record.set_artifact(Stage::Pseudocode, &extract_artifact(Stage::Pseudocode, &text)),
            Err(e) => {
                fail(&mut out, record, "from_code/pseudocode", e);
                return out;
            }
        }
        out.record = Some(record);
        out
    })
}

/// The five-field object exchanged with the seed-evolution prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedSample {
    pub raw: String,
    pub detail: String,
    pub fsm: String,
    pub pseudocode: String,
    pub code: String,
}

impl SeedSample {
    /// The seed's FSM description, or its SCXML when it has none.
    pub fn from_record(r: &LifecycleRecord) -> Self {
        let get = |s: Stage| r.artifact(s).unwrap_or_default().to_string();
        SeedSample {
            raw: get(Stage::Intent),
            detail: get(Stage::Requirement),
            fsm: r.fsm_description.clone().unwrap_or_else(|| get(Stage::Scxml)),
            pseudocode: get(Stage::Pseudocode),
            code: get(Stage::Code),
        }
    }

    pub fn into_record(self, id: String) -> LifecycleRecord {
        let mut r = LifecycleRecord::new(id, Source::Seed)
            .with(Stage::Intent, &self.raw)
            .with(Stage::Requirement, &self.detail)
            .with(Stage::Pseudocode, &self.pseudocode)
            .with(Stage::Code, &extract_artifact(Stage::Code, &self.code));
        r.fsm_description = Some(self.fsm);
        r
    }
}

/// Finds the JSON object in a completion: the whole text, a fenced block, or
/// the span from the first `{` to the last `}`.
fn parse_seed_json(text: &str) -> Result<SeedSample, serde_json::Error> {
    let trimmed = text.trim();
    let first_err = match serde_json::from_str(trimmed) {
        Ok(s) => return Ok(s),
        Err(e) => e,
    };
    if let (Some(a), Some(b)) = (trimmed.find('{'), trimmed.rfind('}')) {
        if a < b {
            if let Ok(s) = serde_json::from_str(&trimmed[a..=b]) {
                return Ok(s);
            }
        }
    }
    Err(first_err)
}

/// Seed route. Seeds are sampled round-robin, one backend call per new
/// record. Evolved records carry an FSM description but no SCXML until
/// [`synthesize_scxml`] runs, and are pending review.
pub fn evolve_from_seeds(seeds: &[LifecycleRecord], backend: &dyn Backend, count: usize) -> BuildOutput {
    let mut output = BuildOutput::default();
    if seeds.is_empty() {
        return output;
    }
    let opts = RenderOptions::default();
    for i in 0..count {
        let seed = &seeds[i % seeds.len()];
        let input = serde_json::to_string(&SeedSample::from_record(seed)).expect("seed serializes");
        match call(backend, "from_seeds/evolved", &input, &opts) {
            Ok(text) => match parse_seed_json(&text) {
                Ok(sample) => {
                    let id = record_id("seed", i, &text);
                    output.incomplete.push(id.clone());
                    output.records.push(sample.into_record(id));
                }
                Err(e) => output.findings.push(BuildFinding {
                    item: i,
                    record_id: None,
                    kind: BuildFindingKind::JsonParseError,
                    message: e.to_string(),
                }),
            },
            Err(e) => output.findings.push(BuildFinding {
                item: i,
                record_id: None,
                kind: BuildFindingKind::BackendFailure,
                message: format!("from_seeds/evolved: {e}"),
            }),
        }
    }
    output
}

/// Fills missing SCXML from each record's FSM description with the code-route
/// SCXML prompt. Returns findings for records that could not be filled.
pub fn synthesize_scxml(records: &mut [LifecycleRecord], backend: &dyn Backend) -> Vec<BuildFinding> {
    let mut findings = Vec::new();
    for (i, r) in records.iter_mut().enumerate() {
        if r.filled(Stage::Scxml).is_some() {
            continue;
        }
        let Some(fsm) = r.fsm_description.clone() else { continue };
        match call(backend, "from_code/scxml", &fsm, &RenderOptions::default()) {
            Ok(text) => r.set_artifact(Stage::Scxml, &extract_artifact(Stage::Scxml, &text)),
            Err(e) => findings.push(backend_failure(i, &r.id, "from_code/scxml", e)),
        }
    }
    findings
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::ScriptedBackend;

    const CHART: &str =
        "<scxml xmlns=\"http://www.w3.org/2005/07/scxml\" version=\"1.0\" initial=\"a\"><state id=\"a\"/></scxml>";

    #[test]
    fn document_route_four_calls() {
        let b = ScriptedBackend::new([
            "Keep the door shut.",
            "The door controller ...",
            CHART,
            "```python\nx = 1\n```",
        ]);
        let src = DocumentSource {
            fsm_description: "States: open, closed".into(),
            pseudocode: Some("SET x TO 1".into()),
        };
        let out = build_from_document(&[src], &b, 1);
        assert_eq!(b.call_count(), 4);
        assert_eq!(out.records.len(), 1);
        let r = &out.records[0];
        assert!(r.is_complete());
        assert_eq!(r.code.as_deref(), Some("x = 1"));
        assert_eq!(r.source, Source::Document);
        assert!(out.incomplete.is_empty());
        assert!(build_from_document(&[], &b, 1).records.is_empty());
    }

    #[test]
    fn document_route_failure_keeps_partial() {
        let b = ScriptedBackend::new(["intent", "req", "x", "y"]).fail_on_call(2);
        let out = build_from_document(&[DocumentSource::from("fsm")], &b, 1);
        let r = &out.records[0];
        assert_eq!(r.intent.as_deref(), Some("intent"));
        assert_eq!(r.requirement, None);
        assert_eq!(out.incomplete, vec![r.id.clone()]);
        assert_eq!(out.findings[0].kind, BuildFindingKind::BackendFailure);
    }

    #[test]
    fn code_route_order() {
        let b = ScriptedBackend::echo();
        let progs = vec!["x = 1\n".to_string(), "y = 2\n".to_string()];
        let out = build_from_code(&progs, &b, Some("BEGIN END"), 1);
        let ids: Vec<String> = b.received().iter().map(|p| p.template_id.clone()).collect();
        assert_eq!(ids.len(), 10);
        assert_eq!(
            &ids[..5],
            [
                "from_code/fsm_description",
                "from_code/intent",
                "from_code/requirement",
                "from_code/scxml",
                "from_code/pseudocode"
            ]
        );
        assert!(b.received()[4].text.contains("BEGIN END"));
        assert_eq!(out.records.len(), 2);
        assert!(out.records.iter().all(LifecycleRecord::is_complete));
    }

    #[test]
    fn code_route_skips_unparsable() {
        let b = ScriptedBackend::echo();
        let out = build_from_code(&["def (:".to_string()], &b, None, 1);
        assert!(out.records.is_empty());
        assert_eq!(out.findings.len(), 1);
        assert_eq!(out.findings[0].kind, BuildFindingKind::UnparsableProgram);
        assert_eq!(b.call_count(), 0);
    }

    fn seed() -> LifecycleRecord {
        let mut r = LifecycleRecord::new("s1", Source::Document)
            .with(Stage::Intent, "i")
            .with(Stage::Requirement, "r")
            .with(Stage::Scxml, CHART)
            .with(Stage::Pseudocode, "p")
            .with(Stage::Code, "c = 1");
        r.fsm_description = Some("f".into());
        r
    }

    #[test]
    fn seed_route() {
        let json = r#"{"raw":"Heat water.","detail":"d","fsm":"states","pseudocode":"p","code":"x = 1"}"#;
        let b = ScriptedBackend::new([format!("Here you go:\n{json}\n"), "not json".to_string()]);
        let out = evolve_from_seeds(&[seed()], &b, 2);
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.records[0].source, Source::Seed);
        assert_eq!(out.records[0].intent.as_deref(), Some("Heat water."));
        assert_eq!(out.records[0].fsm_description.as_deref(), Some("states"));
        assert_eq!(out.findings.len(), 1);
        assert_eq!(out.findings[0].kind, BuildFindingKind::JsonParseError);

        let mut records = out.records;
        let sb = ScriptedBackend::new([CHART]);
        assert!(synthesize_scxml(&mut records, &sb).is_empty());
        assert_eq!(sb.received()[0].input, "states");
        assert!(records[0].is_complete());
    }

    #[test]
    fn seed_round_robin_calls() {
        let b = ScriptedBackend::echo();
        let mut s2 = seed();
        s2.id = "s2".into();
        s2.intent = Some("other".into());
        evolve_from_seeds(&[seed(), s2], &b, 3);
        assert_eq!(b.call_count(), 3);
        assert_eq!(b.received()[0].input, b.received()[2].input);
        assert_ne!(b.received()[0].input, b.received()[1].input);
    }

    #[test]
    fn parallel_matches_sequential_with_keyed_backend() {
        let progs: Vec<String> = (0..6).map(|i| format!("v{i} = {i}\n")).collect();
        let a = build_from_code(&progs, &ScriptedBackend::echo(), None, 1);
        let b = build_from_code(&progs, &ScriptedBackend::echo(), None, 3);
        assert_eq!(a, b);
    }
}
