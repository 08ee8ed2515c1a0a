use std::path::Path;

use anyhow::Context;

use lifegen_core::artifact::Stage;
use lifegen_core::gateway::BackendSet;

pub const DEFAULT_BACKENDS_FILE: &str = "lifegen.toml";

pub fn read_text(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

/// Splits a comma-separated flag value, dropping empty items.
pub fn list_arg(s: &str) -> Vec<String> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(str::to_string)
        .collect()
}

pub fn stage_list(s: &str) -> anyhow::Result<Vec<Stage>> {
    list_arg(s)
        .iter()
        .map(|p| p.parse::<Stage>().map_err(Into::into))
        .collect()
}

pub fn load_backends(path: Option<&Path>) -> anyhow::Result<BackendSet> {
    match path {
        Some(p) => Ok(BackendSet::load(p)?),
        None if Path::new(DEFAULT_BACKENDS_FILE).is_file() => Ok(BackendSet::load(Path::new(DEFAULT_BACKENDS_FILE))?),
        None => Ok(BackendSet::with_defaults()),
    }
}
