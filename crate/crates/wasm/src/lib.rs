//! wasm-bindgen entry points for the static demo page in `www/`.
//!
//! Every export takes and returns plain strings; structured results are JSON
//! text the page parses itself. The `*_json` functions hold the logic so they
//! can be tested natively.

use wasm_bindgen::prelude::*;

use lifegen_core::artifact::Stage;
use lifegen_core::metrics::{score_pair, MetricConfig};
use lifegen_core::prompts::{PromptMode, PromptRegistry};
use lifegen_core::scxml;

const MAX_SIM_STEPS: usize = 10_000;

fn to_json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("values serialize")
}

pub fn validate_scxml_json(text: &str) -> String {
    to_json(&scxml::check(text))
}

/// Simulates `events` (comma or whitespace separated). A chart with error
/// findings is refused.
pub fn simulate_scxml_json(text: &str, events: &str) -> Result<String, String> {
    let report = scxml::check(text);
    if report.has_errors() {
        let msgs: Vec<String> = report.errors().map(ToString::to_string).collect();
        return Err(msgs.join("\n"));
    }
    let chart = scxml::parse_scxml(text).map_err(|e| format!("{} parse error(s)", e.len()))?;
    let events: Vec<String> = events
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|e| !e.is_empty())
        .map(str::to_string)
        .collect();
    match scxml::simulate(&chart, &events, MAX_SIM_STEPS) {
        Ok(trace) | Err(scxml::SimError::StepLimitExceeded { trace, .. }) => Ok(to_json(&trace)),
        Err(e) => Err(e.to_string()),
    }
}

pub fn score_pair_json(stage: &str, candidate: &str, reference: &str) -> Result<String, String> {
    let stage: Stage = stage
        .parse()
        .map_err(|e: lifegen_core::artifact::UnknownStage| e.to_string())?;
    let scores = score_pair(candidate, reference, stage, &MetricConfig::default(), None).map_err(|e| e.to_string())?;
    Ok(to_json(&scores))
}

pub fn render_prompt_text(id: &str, input: &str) -> Result<String, String> {
    PromptRegistry::builtin()
        .render(id, input)
        .map(|p| p.text)
        .map_err(|e| e.to_string())
}

pub fn list_prompts_json(mode: &str) -> Result<String, String> {
    let mode: PromptMode = mode
        .parse()
        .map_err(|e: lifegen_core::prompts::PromptError| e.to_string())?;
    Ok(to_json(&PromptRegistry::builtin().list_templates(mode)))
}

fn js<T>(r: Result<T, String>) -> Result<T, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = validateScxml)]
pub fn validate_scxml(text: &str) -> String {
    validate_scxml_json(text)
}

#[wasm_bindgen(js_name = simulateScxml)]
pub fn simulate_scxml(text: &str, events: &str) -> Result<String, JsError> {
    js(simulate_scxml_json(text, events))
}

#[wasm_bindgen(js_name = scorePair)]
pub fn score(stage: &str, candidate: &str, reference: &str) -> Result<String, JsError> {
    js(score_pair_json(stage, candidate, reference))
}

#[wasm_bindgen(js_name = renderPrompt)]
pub fn render_prompt(id: &str, input: &str) -> Result<String, JsError> {
    js(render_prompt_text(id, input))
}

#[wasm_bindgen(js_name = listPrompts)]
pub fn list_prompts(mode: &str) -> Result<String, JsError> {
    js(list_prompts_json(mode))
}
