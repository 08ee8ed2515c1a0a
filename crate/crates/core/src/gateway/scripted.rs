use std::collections::{BTreeSet, HashMap, VecDeque};
use std::sync::Mutex;

use super::{Backend, GatewayError, GenerationResult};
use crate::artifact::{LifecycleRecord, Stage};
use crate::prompts::RenderedPrompt;

enum Script {
    Queue(VecDeque<String>),
    Echo,
    Keyed(HashMap<(String, String), String>),
}

struct Inner {
    script: Script,
    calls: usize,
    received: Vec<RenderedPrompt>,
}

/// Deterministic backend for tests and offline replay. Every prompt it
/// receives is recorded verbatim.
pub struct ScriptedBackend {
    name: String,
    fail_on: BTreeSet<usize>,
    inner: Mutex<Inner>,
}

/// Key under which replay responses are stored.
pub fn replay_key(template_id: &str, input: &str) -> (String, String) {
    (template_id.to_string(), input.to_string())
}

impl ScriptedBackend {
    fn with_script(script: Script) -> Self {
        ScriptedBackend {
            name: "scripted".into(),
            fail_on: BTreeSet::new(),
            inner: Mutex::new(Inner {
                script,
                calls: 0,
                received: Vec::new(),
            }),
        }
    }

    /// Returns `responses` in order, one per call.
    pub fn new<S: Into<String>>(responses: impl IntoIterator<Item = S>) -> Self {
        Self::with_script(Script::Queue(responses.into_iter().map(Into::into).collect()))
    }

    /// Answers every prompt with its own INPUT section.
    pub fn echo() -> Self {
        Self::with_script(Script::Echo).named("echo")
    }

    /// Answers by (template id, input) lookup.
    pub fn keyed(map: HashMap<(String, String), String>) -> Self {
        Self::with_script(Script::Keyed(map))
    }

    /// Replays the stage transitions of `records`: each pipeline and dataset
    /// prompt whose input equals a record artifact answers with the artifact
    /// that follows it in that record.
    pub fn replay(records: &[LifecycleRecord]) -> Self {
        let mut map = HashMap::new();
        for r in records {
            let intent = r.filled(Stage::Intent);
            for stage in Stage::GENERATED {
                let Some(out) = r.filled(stage) else { continue };
                if let Some(prev) = stage.predecessor().and_then(|p| r.filled(p)) {
                    map.insert(replay_key(&format!("multi_step/{stage}"), prev), out.to_string());
                }
                if let Some(intent) = intent {
                    map.insert(replay_key(&format!("one_step/{stage}"), intent), out.to_string());
                }
            }
            if let Some(fsm) = r.fsm_description.as_deref() {
                for (mode, stage) in [
                    ("from_document", Stage::Intent),
                    ("from_document", Stage::Requirement),
                    ("from_document", Stage::Scxml),
                    ("from_code", Stage::Intent),
                    ("from_code", Stage::Requirement),
                    ("from_code", Stage::Scxml),
                ] {
                    if let Some(out) = r.filled(stage) {
                        map.insert(replay_key(&format!("{mode}/{stage}"), fsm), out.to_string());
                    }
                }
                if let Some(code) = r.filled(Stage::Code) {
                    map.insert(replay_key("from_code/fsm_description", code), fsm.to_string());
                }
            }
            if let (Some(pseudo), Some(code)) = (r.filled(Stage::Pseudocode), r.filled(Stage::Code)) {
                map.insert(replay_key("from_document/code", pseudo), code.to_string());
                map.insert(replay_key("from_code/pseudocode", code), pseudo.to_string());
            }
        }
        Self::keyed(map).named("replay")
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Makes the given 1-based call fail.
    pub fn fail_on_call(mut self, call: usize) -> Self {
        self.fail_on.insert(call);
        self
    }

    /// Prompts received so far, in call order.
    pub fn received(&self) -> Vec<RenderedPrompt> {
        self.lock().received.clone()
    }

    pub fn call_count(&self) -> usize {
        self.lock().calls
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }
}

/// Builds a scripted backend returning `responses` in order.
pub fn scripted_backend<S: Into<String>>(responses: impl IntoIterator<Item = S>) -> ScriptedBackend {
    ScriptedBackend::new(responses)
}

impl Backend for ScriptedBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn generate(&self, prompt: &RenderedPrompt) -> Result<GenerationResult, GatewayError> {
        let mut inner = self.lock();
        inner.calls += 1;
        let call = inner.calls;
        inner.received.push(prompt.clone());
        if self.fail_on.contains(&call) {
            return Err(GatewayError::InjectedFailure {
                backend: self.name.clone(),
                call,
            });
        }
        let text = match &mut inner.script {
            Script::Queue(q) => q.pop_front().ok_or_else(|| GatewayError::ScriptExhausted {
                backend: self.name.clone(),
                call,
            })?,
            Script::Echo => prompt.input.clone(),
            Script::Keyed(map) => map
                .get(&replay_key(&prompt.template_id, &prompt.input))
                .cloned()
                .ok_or_else(|| GatewayError::KeyNotScripted {
                    backend: self.name.clone(),
                    template_id: prompt.template_id.clone(),
                })?,
        };
        if text.trim().is_empty() {
            return Err(GatewayError::EmptyCompletion(self.name.clone()));
        }
        Ok(GenerationResult {
            text,
            backend: self.name.clone(),
            latency_ms: 0,
            attempts: 1,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::artifact::Source;
    use crate::prompts::PromptRegistry;

    fn prompt(id: &str, input: &str) -> RenderedPrompt {
        PromptRegistry::builtin().render(id, input).unwrap()
    }

    #[test]
    fn fifo_then_exhausted() {
        let b = scripted_backend(["A", "B"]);
        assert_eq!(b.generate(&prompt("multi_step/code", "x")).unwrap().text, "A");
        assert_eq!(b.generate(&prompt("multi_step/code", "x")).unwrap().text, "B");
        assert!(matches!(
            b.generate(&prompt("multi_step/code", "x")),
            Err(GatewayError::ScriptExhausted { call: 3, .. })
        ));
        let empty = scripted_backend(Vec::<String>::new());
        assert!(matches!(
            empty.generate(&prompt("multi_step/code", "x")),
            Err(GatewayError::ScriptExhausted { .. })
        ));
    }

    #[test]
    fn records_exact_prompt() {
        let b = scripted_backend(["x"]);
        let p = prompt("one_step/scxml", "a  b\n\tc");
        b.generate(&p).unwrap();
        assert_eq!(b.received(), vec![p]);
    }

    #[test]
    fn echo_returns_input() {
        let b = ScriptedBackend::echo();
        assert_eq!(
            b.generate(&prompt("multi_step/scxml", "req\nline")).unwrap().text,
            "req\nline"
        );
    }

    #[test]
    fn failure_injection() {
        let b = scripted_backend(["A", "B", "C"]).fail_on_call(2);
        assert!(b.generate(&prompt("multi_step/code", "")).is_ok());
        assert!(matches!(
            b.generate(&prompt("multi_step/code", "")),
            Err(GatewayError::InjectedFailure { call: 2, .. })
        ));
        assert_eq!(b.generate(&prompt("multi_step/code", "")).unwrap().text, "B");
    }

    #[test]
    fn replay_follows_chain() {
        let r = LifecycleRecord::new("r1", Source::Seed)
            .with(Stage::Intent, "i")
            .with(Stage::Requirement, "r")
            .with(Stage::Scxml, "s")
            .with(Stage::Pseudocode, "p")
            .with(Stage::Code, "c");
        let b = ScriptedBackend::replay(&[r]);
        assert_eq!(b.generate(&prompt("multi_step/requirement", "i")).unwrap().text, "r");
        assert_eq!(b.generate(&prompt("multi_step/pseudocode", "s")).unwrap().text, "p");
        assert_eq!(b.generate(&prompt("one_step/code", "i")).unwrap().text, "c");
        assert!(matches!(
            b.generate(&prompt("multi_step/code", "other")),
            Err(GatewayError::KeyNotScripted { .. })
        ));
    }
}
