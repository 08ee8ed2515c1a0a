use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Backend, ScriptedBackend};
use crate::artifact::{read_jsonl, DatasetIoError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    RemoteChat,
    Scripted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScriptMode {
    #[default]
    Fifo,
    Echo,
    Replay,
}

fn default_temperature() -> f64 {
    0.0
}
fn default_max_tokens() -> u32 {
    2048
}
fn default_timeout() -> f64 {
    120.0
}
fn default_retries() -> u32 {
    3
}
fn default_concurrency() -> usize {
    4
}
fn default_backoff() -> u64 {
    500
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub name: String,
    pub kind: BackendKind,
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default)]
    pub model_name: String,
    /// Environment variable holding the bearer token.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default)]
    pub top_p: Option<f64>,
    #[serde(default = "default_max_tokens")]
    pub max_output_tokens: u32,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff")]
    pub backoff_ms: u64,
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
    #[serde(default)]
    pub mode: ScriptMode,
    /// Fixed responses for `fifo` mode.
    #[serde(default)]
    pub responses: Vec<String>,
    /// JSONL record file for `replay` mode.
    #[serde(default)]
    pub records: Option<PathBuf>,
}

impl BackendConfig {
    pub fn scripted(name: &str, mode: ScriptMode) -> Self {
        BackendConfig {
            name: name.into(),
            kind: BackendKind::Scripted,
            endpoint: None,
            model_name: name.into(),
            api_key_env: None,
            temperature: default_temperature(),
            top_p: None,
            max_output_tokens: default_max_tokens(),
            timeout_secs: default_timeout(),
            max_retries: default_retries(),
            backoff_ms: default_backoff(),
            concurrency: default_concurrency(),
            mode,
            responses: Vec::new(),
            records: None,
        }
    }

    pub fn remote(name: &str, endpoint: &str, model_name: &str) -> Self {
        BackendConfig {
            kind: BackendKind::RemoteChat,
            endpoint: Some(endpoint.into()),
            model_name: model_name.into(),
            ..Self::scripted(name, ScriptMode::Fifo)
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(self.name.clone(), m.to_string()));
        if self.name.trim().is_empty() {
            return bad("name is empty");
        }
        if self.temperature < 0.0 || !self.temperature.is_finite() {
            return bad("temperature must be >= 0");
        }
        if self.max_output_tokens == 0 {
            return bad("max_output_tokens must be > 0");
        }
        if self.kind == BackendKind::RemoteChat {
            if self.endpoint.as_deref().is_none_or(|e| e.trim().is_empty()) {
                return bad("remote_chat requires an endpoint");
            }
            if self.model_name.trim().is_empty() {
                return bad("remote_chat requires a model_name");
            }
        }
        if self.kind == BackendKind::Scripted && self.mode == ScriptMode::Replay && self.records.is_none() {
            return bad("replay mode requires a records file");
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read backend config {0}: {1}")]
    Io(PathBuf, #[source] std::io::Error),
    #[error("invalid backend config {0}: {1}")]
    Parse(PathBuf, String),
    #[error("backend `{0}`: {1}")]
    Invalid(String, String),
    #[error("unknown backend `{0}`")]
    UnknownBackend(String),
    #[error("backend `{0}` needs the `remote` feature")]
    RemoteUnavailable(String),
    #[error(transparent)]
    Records(#[from] DatasetIoError),
}

#[derive(Debug, Default, Deserialize)]
struct ConfigFile {
    #[serde(default)]
    backend: Vec<BackendConfig>,
}

/// The set of named backends available to a command. `echo` is always
/// present.
#[derive(Debug, Clone, Default)]
pub struct BackendSet {
    configs: BTreeMap<String, BackendConfig>,
}

impl BackendSet {
    pub fn with_defaults() -> Self {
        let mut set = BackendSet::default();
        set.insert(BackendConfig::scripted("echo", ScriptMode::Echo));
        set
    }

    pub fn insert(&mut self, config: BackendConfig) {
        self.configs.insert(config.name.clone(), config);
    }

    /// Parses a TOML (or JSON, by extension) config with `[[backend]]`
    /// tables. Relative record paths resolve against the file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(path.into(), e))?;
        let file: ConfigFile = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| ConfigError::Parse(path.into(), e.to_string()))?
        } else {
            toml::from_str(&text).map_err(|e| ConfigError::Parse(path.into(), e.to_string()))?
        };
        let base = path.parent().unwrap_or(Path::new("."));
        let mut set = Self::with_defaults();
        for mut c in file.backend {
            c.validate()?;
            if let Some(r) = &c.records {
                if r.is_relative() {
                    c.records = Some(base.join(r));
                }
            }
            set.insert(c);
        }
        Ok(set)
    }

    pub fn names(&self) -> Vec<&str> {
        self.configs.keys().map(String::as_str).collect()
    }

    pub fn get(&self, name: &str) -> Result<&BackendConfig, ConfigError> {
        self.configs
            .get(name)
            .ok_or_else(|| ConfigError::UnknownBackend(name.to_string()))
    }

    pub fn build(&self, name: &str) -> Result<Arc<dyn Backend>, ConfigError> {
        build_backend(self.get(name)?)
    }
}

pub fn build_backend(c: &BackendConfig) -> Result<Arc<dyn Backend>, ConfigError> {
    c.validate()?;
    match c.kind {
        BackendKind::Scripted => {
            let b = match c.mode {
                ScriptMode::Fifo => ScriptedBackend::new(c.responses.clone()),
                ScriptMode::Echo => ScriptedBackend::echo(),
                ScriptMode::Replay => {
                    let path = c.records.as_ref().expect("validated");
                    ScriptedBackend::replay(&read_jsonl(path)?)
                }
            };
            Ok(Arc::new(b.named(c.name.clone())))
        }
        #[cfg(feature = "remote")]
        BackendKind::RemoteChat => Ok(Arc::new(super::RemoteChatBackend::new(c.clone()))),
        #[cfg(not(feature = "remote"))]
        BackendKind::RemoteChat => Err(ConfigError::RemoteUnavailable(c.name.clone())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_toml_with_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("backends.toml");
        std::fs::write(
            &path,
            r#"
[[backend]]
name = "gpt"
kind = "remote_chat"
endpoint = "http://localhost:1/v1/chat/completions"
model_name = "gpt-4o"
api_key_env = "OPENAI_API_KEY"

[[backend]]
name = "fixed"
kind = "scripted"
responses = ["a", "b"]
"#,
        )
        .unwrap();
        let set = BackendSet::load(&path).unwrap();
        assert_eq!(set.names(), vec!["echo", "fixed", "gpt"]);
        let gpt = set.get("gpt").unwrap();
        assert_eq!(gpt.temperature, 0.0);
        assert_eq!(gpt.concurrency, 4);
        assert_eq!(set.build("fixed").unwrap().name(), "fixed");
        assert!(matches!(set.build("nope"), Err(ConfigError::UnknownBackend(_))));
    }

    #[test]
    fn remote_requires_endpoint_and_model() {
        let mut c = BackendConfig::remote("r", "http://x", "m");
        assert!(c.validate().is_ok());
        c.endpoint = None;
        assert!(c.validate().is_err());
        let mut c = BackendConfig::remote("r", "http://x", "");
        c.model_name.clear();
        assert!(c.validate().is_err());
    }
}
