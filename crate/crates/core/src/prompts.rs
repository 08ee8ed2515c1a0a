//! The prompt set, shipped as embedded text files and checked against a
//! sha256 manifest when the registry loads.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::artifact::Stage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptMode {
    MultiStep,
    OneStep,
    FromDocument,
    FromCode,
    FromSeeds,
}

impl PromptMode {
    pub const ALL: [PromptMode; 5] = [
        PromptMode::MultiStep,
        PromptMode::OneStep,
        PromptMode::FromDocument,
        PromptMode::FromCode,
        PromptMode::FromSeeds,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PromptMode::MultiStep => "multi_step",
            PromptMode::OneStep => "one_step",
            PromptMode::FromDocument => "from_document",
            PromptMode::FromCode => "from_code",
            PromptMode::FromSeeds => "from_seeds",
        }
    }
}

impl fmt::Display for PromptMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PromptMode {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "multi_step" | "multi" => Ok(PromptMode::MultiStep),
            "one_step" | "one" | "single" => Ok(PromptMode::OneStep),
            "from_document" | "document" => Ok(PromptMode::FromDocument),
            "from_code" | "code" => Ok(PromptMode::FromCode),
            "from_seeds" | "seeds" | "seed" => Ok(PromptMode::FromSeeds),
            _ => Err(PromptError::UnknownMode(s.to_string())),
        }
    }
}

/// What a template produces. Most templates produce a lifecycle artifact; the
/// dataset prompts also produce an FSM description or a whole evolved record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptTarget {
    Stage(Stage),
    FsmDescription,
    EvolvedRecord,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub id: String,
    pub mode: PromptMode,
    pub target: PromptTarget,
    pub instruction: String,
    pub input_label: String,
    pub output_label: String,
}

impl PromptTemplate {
    pub fn target_stage(&self) -> Option<Stage> {
        match self.target {
            PromptTarget::Stage(s) => Some(s),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub template_id: String,
    /// The filled input slot, kept for backends that key on it.
    pub input: String,
    pub text: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RenderOptions {
    /// Replaces "python"/"Python" in the instruction.
    pub target_language: Option<String>,
    /// Fills the inline "pseudocode sample" placeholder.
    pub pseudocode_sample: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("unknown prompt template `{0}`")]
    UnknownTemplate(String),
    #[error("unknown prompt mode `{0}`")]
    UnknownMode(String),
    #[error("template `{0}` is already registered")]
    DuplicateTemplate(String),
    #[error("prompt file `{0}` does not match its manifest hash")]
    ManifestMismatch(String),
    #[error("prompt manifest is malformed: {0}")]
    BadManifest(String),
}

/// Inline placeholder in the code-to-pseudocode prompt.
pub const PSEUDOCODE_SAMPLE_SLOT: &str = "pseudocode sample";

pub const MANIFEST: &str = include_str!("../prompts/MANIFEST.sha256");

struct Builtin {
    path: &'static str,
    text: &'static str,
    mode: PromptMode,
    target: PromptTarget,
    input_label: &'static str,
    output_label: &'static str,
}

macro_rules! builtin {
    ($path:literal, $mode:expr, $target:expr, $input:literal, $output:literal) => {
        Builtin {
            path: $path,
            text: include_str!(concat!("../prompts/", $path)),
            mode: $mode,
            target: $target,
            input_label: $input,
            output_label: $output,
        }
    };
}

fn builtins() -> Vec<Builtin> {
    use PromptMode::*;
    use PromptTarget::{EvolvedRecord, FsmDescription, Stage as S};
    vec![
        builtin!(
            "multi_step/requirement.txt",
            MultiStep,
            S(Stage::Requirement),
            "Initial Requirement",
            "Detailed Requirement"
        ),
        builtin!(
            "multi_step/scxml.txt",
            MultiStep,
            S(Stage::Scxml),
            "Detailed Requirement",
            "SCXML"
        ),
        builtin!(
            "multi_step/pseudocode.txt",
            MultiStep,
            S(Stage::Pseudocode),
            "SCXML",
            "Pseudocode"
        ),
        builtin!(
            "multi_step/code.txt",
            MultiStep,
            S(Stage::Code),
            "Pseudocode",
            "Python Code"
        ),
        builtin!(
            "one_step/requirement.txt",
            OneStep,
            S(Stage::Requirement),
            "Initial Requirement",
            "Detailed Requirement"
        ),
        builtin!(
            "one_step/scxml.txt",
            OneStep,
            S(Stage::Scxml),
            "Initial Requirement",
            "SCXML"
        ),
        builtin!(
            "one_step/pseudocode.txt",
            OneStep,
            S(Stage::Pseudocode),
            "Initial Requirement",
            "Pseudocode"
        ),
        builtin!(
            "one_step/code.txt",
            OneStep,
            S(Stage::Code),
            "Initial Requirement",
            "Python Code"
        ),
        builtin!(
            "from_document/intent.txt",
            FromDocument,
            S(Stage::Intent),
            "FSM Description",
            "Initial Requirement"
        ),
        builtin!(
            "from_document/requirement.txt",
            FromDocument,
            S(Stage::Requirement),
            "FSM Description",
            "Detailed Requirement"
        ),
        builtin!(
            "from_document/scxml.txt",
            FromDocument,
            S(Stage::Scxml),
            "FSM Description",
            "SCXML"
        ),
        builtin!(
            "from_document/code.txt",
            FromDocument,
            S(Stage::Code),
            "Pseudocode",
            "Python Code"
        ),
        builtin!(
            "from_code/fsm_description.txt",
            FromCode,
            FsmDescription,
            "Python Code",
            "FSM Description"
        ),
        builtin!(
            "from_code/intent.txt",
            FromCode,
            S(Stage::Intent),
            "FSM Description",
            "Initial Requirement"
        ),
        builtin!(
            "from_code/requirement.txt",
            FromCode,
            S(Stage::Requirement),
            "FSM Description",
            "Detailed Requirement"
        ),
        builtin!(
            "from_code/scxml.txt",
            FromCode,
            S(Stage::Scxml),
            "FSM Description",
            "SCXML"
        ),
        builtin!(
            "from_code/pseudocode.txt",
            FromCode,
            S(Stage::Pseudocode),
            "Python Code",
            "Pseudocode"
        ),
        builtin!(
            "from_seeds/evolved.txt",
            FromSeeds,
            EvolvedRecord,
            "Seed Data",
            "Evolved Data"
        ),
    ]
}

fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Parses `<hex>  <path>` lines.
pub fn parse_manifest(manifest: &str) -> Result<BTreeMap<String, String>, PromptError> {
    let mut out = BTreeMap::new();
    for (i, line) in manifest.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (hash, path) = line
            .split_once("  ")
            .ok_or_else(|| PromptError::BadManifest(format!("line {}: expected `<sha256>  <path>`", i + 1)))?;
        if hash.len() != 64 || !hash.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(PromptError::BadManifest(format!("line {}: bad hash", i + 1)));
        }
        out.insert(path.trim().to_string(), hash.to_ascii_lowercase());
    }
    Ok(out)
}

/// Checks that every file hashes to its manifest entry.
pub fn verify_manifest<'a>(
    manifest: &str,
    files: impl IntoIterator<Item = (&'a str, &'a str)>,
) -> Result<(), PromptError> {
    let entries = parse_manifest(manifest)?;
    for (path, text) in files {
        match entries.get(path) {
            Some(h) if *h == sha256_hex(text) => {}
            _ => return Err(PromptError::ManifestMismatch(path.to_string())),
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Default)]
pub struct PromptRegistry {
    templates: BTreeMap<String, PromptTemplate>,
}

impl PromptRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Loads the embedded prompt set after checking it against the manifest.
    pub fn load_builtin() -> Result<Self, PromptError> {
        let files = builtins();
        verify_manifest(MANIFEST, files.iter().map(|b| (b.path, b.text)))?;
        let mut reg = Self::empty();
        for b in files {
            let id = b.path.trim_end_matches(".txt").to_string();
            reg.register(PromptTemplate {
                id,
                mode: b.mode,
                target: b.target,
                instruction: b.text.trim_end_matches('\n').to_string(),
                input_label: b.input_label.to_string(),
                output_label: b.output_label.to_string(),
            })?;
        }
        Ok(reg)
    }

    /// Shared registry over the embedded prompt set.
    pub fn builtin() -> &'static PromptRegistry {
        static REG: OnceLock<PromptRegistry> = OnceLock::new();
        REG.get_or_init(|| PromptRegistry::load_builtin().expect("embedded prompts match their manifest"))
    }

    pub fn register(&mut self, template: PromptTemplate) -> Result<(), PromptError> {
        let clash = self.templates.contains_key(&template.id)
            || self
                .templates
                .values()
                .any(|t| t.mode == template.mode && t.target == template.target);
        if clash {
            return Err(PromptError::DuplicateTemplate(template.id));
        }
        self.templates.insert(template.id.clone(), template);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Result<&PromptTemplate, PromptError> {
        self.templates
            .get(id)
            .ok_or_else(|| PromptError::UnknownTemplate(id.to_string()))
    }

    /// Template for `stage` in a pipeline mode.
    pub fn for_stage(&self, mode: PromptMode, stage: Stage) -> Result<&PromptTemplate, PromptError> {
        self.templates
            .values()
            .find(|t| t.mode == mode && t.target == PromptTarget::Stage(stage))
            .ok_or_else(|| PromptError::UnknownTemplate(format!("{mode}/{stage}")))
    }

    /// Ids for `mode`, ordered by target (stage order, then FSM description
    /// and evolved records).
    pub fn list_templates(&self, mode: PromptMode) -> Vec<&str> {
        let mut ts: Vec<&PromptTemplate> = self.templates.values().filter(|t| t.mode == mode).collect();
        ts.sort_by_key(|t| match t.target {
            PromptTarget::FsmDescription => (0, 0),
            PromptTarget::Stage(s) => (1, s.ordinal()),
            PromptTarget::EvolvedRecord => (2, 0),
        });
        ts.into_iter().map(|t| t.id.as_str()).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &PromptTemplate> {
        self.templates.values()
    }

    pub fn render(&self, id: &str, input: &str) -> Result<RenderedPrompt, PromptError> {
        self.render_with(id, input, &RenderOptions::default())
    }

    pub fn render_with(&self, id: &str, input: &str, opts: &RenderOptions) -> Result<RenderedPrompt, PromptError> {
        let t = self.get(id)?;
        let mut instruction = t.instruction.clone();
        if let Some(sample) = &opts.pseudocode_sample {
            instruction = instruction.replace(PSEUDOCODE_SAMPLE_SLOT, sample);
        }
        if let Some(lang) = &opts.target_language {
            instruction = instruction
                .replace("python", &lang.to_lowercase())
                .replace("Python", &capitalize(lang));
        }
        Ok(RenderedPrompt {
            template_id: t.id.clone(),
            input: input.to_string(),
            text: format!("INSTRUCTION: {instruction}\nINPUT: {input}\nOUTPUT:"),
        })
    }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

/// Splits a rendered prompt back into (instruction, input).
pub fn split_rendered(text: &str) -> Option<(&str, &str)> {
    let rest = text.strip_prefix("INSTRUCTION: ")?;
    let (instruction, rest) = rest.split_once("\nINPUT: ")?;
    let input = rest.strip_suffix("\nOUTPUT:")?;
    Some((instruction, input))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reg() -> &'static PromptRegistry {
        PromptRegistry::builtin()
    }

    #[test]
    fn multi_step_scxml_wording() {
        let p = reg().render("multi_step/scxml", "req text").unwrap();
        assert!(p.text.starts_with(
            "INSTRUCTION: Generate a state machine design description in SCXML format based on the following detailed requirement description."
        ));
        assert!(p.text.ends_with("\nINPUT: req text\nOUTPUT:"));
    }

    #[test]
    fn one_step_code_wording() {
        let p = reg().render("one_step/code", "raw req").unwrap();
        assert!(p.text.contains(
            "Generate an executable python program based on the following original requirement description."
        ));
    }

    #[test]
    fn empty_input_keeps_instruction() {
        let t = reg().get("multi_step/requirement").unwrap();
        let p = reg().render("multi_step/requirement", "").unwrap();
        assert_eq!(p.text, format!("INSTRUCTION: {}\nINPUT: \nOUTPUT:", t.instruction));
        assert_eq!(split_rendered(&p.text), Some((t.instruction.as_str(), "")));
    }

    #[test]
    fn listing_counts() {
        assert_eq!(
            reg().list_templates(PromptMode::MultiStep),
            vec![
                "multi_step/requirement",
                "multi_step/scxml",
                "multi_step/pseudocode",
                "multi_step/code"
            ]
        );
        assert_eq!(reg().list_templates(PromptMode::OneStep).len(), 4);
        assert_eq!(reg().list_templates(PromptMode::FromSeeds), vec!["from_seeds/evolved"]);
        assert_eq!(
            reg().list_templates(PromptMode::FromCode)[0],
            "from_code/fsm_description"
        );
        assert_eq!(reg().iter().count(), 18);
    }

    #[test]
    fn every_render_contains_instruction() {
        for t in reg().iter() {
            let p = reg().render(&t.id, "some input\nwith lines").unwrap();
            assert!(p.text.contains(&t.instruction));
        }
    }

    #[test]
    fn unknown_and_duplicate() {
        assert_eq!(
            reg().render("nope", "x"),
            Err(PromptError::UnknownTemplate("nope".into()))
        );
        let mut r = reg().clone();
        let mut t = r.get("multi_step/code").unwrap().clone();
        t.id = "other".into();
        assert!(matches!(r.register(t), Err(PromptError::DuplicateTemplate(_))));
    }

    #[test]
    fn tampered_file_detected() {
        let text = include_str!("../prompts/multi_step/code.txt");
        assert!(verify_manifest(MANIFEST, [("multi_step/code.txt", text)]).is_ok());
        let edited = text.replace("python", "Python");
        assert_eq!(
            verify_manifest(MANIFEST, [("multi_step/code.txt", edited.as_str())]),
            Err(PromptError::ManifestMismatch("multi_step/code.txt".into()))
        );
    }

    #[test]
    fn options() {
        let opts = RenderOptions {
            target_language: Some("rust".into()),
            pseudocode_sample: Some("BEGIN END".into()),
        };
        let p = reg().render_with("from_code/pseudocode", "src", &opts).unwrap();
        assert!(p.text.contains("example is as follows: BEGIN END, The rust program"));
        assert!(!p.text.contains("python"));
        let p = reg().render_with("from_code/fsm_description", "src", &opts).unwrap();
        assert!(p.text.contains("serial number.\"  Note that"));
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("multi".parse::<PromptMode>().unwrap(), PromptMode::MultiStep);
        assert_eq!("one-step".parse::<PromptMode>().unwrap(), PromptMode::OneStep);
        assert!("x".parse::<PromptMode>().is_err());
    }
}
