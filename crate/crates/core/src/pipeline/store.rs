use std::collections::HashMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use super::{RunState, RunStatus};
use crate::artifact::Stage;

pub const STATE_FILE: &str = "state.json";
pub const TRANSCRIPT_FILE: &str = "transcript.jsonl";

/// File name of a stage's artifact inside a run directory.
pub fn artifact_file_name(stage: Stage) -> String {
    let ext = match stage {
        Stage::Scxml => "scxml",
        Stage::Code => "py",
        _ => "txt",
    };
    format!("{}-{}.{ext}", stage.ordinal(), stage.as_str())
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("run `{0}` not found")]
    NotFound(String),
    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("corrupt state file {path}: {message}")]
    Corrupt { path: PathBuf, message: String },
}

/// One directory per run under `root`: `state.json`, one file per artifact,
/// and `transcript.jsonl`.
#[derive(Clone)]
pub struct RunStore {
    root: PathBuf,
    locks: Arc<Mutex<HashMap<String, Arc<Mutex<()>>>>>,
}

impl RunStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|source| StoreError::Io {
            path: root.clone(),
            source,
        })?;
        Ok(RunStore {
            root,
            locks: Arc::default(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn run_dir(&self, run_id: &str) -> PathBuf {
        self.root.join(run_id)
    }

    pub fn transcript_path(&self, run_id: &str) -> PathBuf {
        self.run_dir(run_id).join(TRANSCRIPT_FILE)
    }

    pub fn exists(&self, run_id: &str) -> bool {
        self.run_dir(run_id).join(STATE_FILE).is_file()
    }

    /// Per-run mutex serializing writers.
    pub fn lock(&self, run_id: &str) -> Arc<Mutex<()>> {
        let mut locks = self.locks.lock().unwrap_or_else(|e| e.into_inner());
        locks.entry(run_id.to_string()).or_default().clone()
    }

    /// Writes the state file atomically and mirrors artifacts to files.
    pub fn save(&self, state: &RunState) -> Result<(), StoreError> {
        let dir = self.run_dir(&state.run_id);
        let io_err = |path: &Path| {
            let path = path.to_path_buf();
            move |source| StoreError::Io { path, source }
        };
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        write_if_changed(&dir.join("0-intent.txt"), &state.input_intent).map_err(io_err(&dir))?;
        for stage in Stage::GENERATED {
            let path = dir.join(artifact_file_name(stage));
            match state.artifacts.get(&stage) {
                Some(text) => write_if_changed(&path, text).map_err(io_err(&path))?,
                None if path.exists() => fs::remove_file(&path).map_err(io_err(&path))?,
                None => {}
            }
        }
        let mut json = serde_json::to_string_pretty(state).expect("run state serializes");
        json.push('\n');
        let tmp = dir.join(".state.json.tmp");
        fs::write(&tmp, json).map_err(io_err(&tmp))?;
        let dest = dir.join(STATE_FILE);
        fs::rename(&tmp, &dest).map_err(io_err(&dest))
    }

    pub fn load(&self, run_id: &str) -> Result<RunState, StoreError> {
        if run_id.is_empty() || run_id.contains(['/', '\\']) || run_id.starts_with('.') {
            return Err(StoreError::NotFound(run_id.to_string()));
        }
        let path = self.run_dir(run_id).join(STATE_FILE);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(StoreError::NotFound(run_id.to_string())),
            Err(source) => return Err(StoreError::Io { path, source }),
        };
        serde_json::from_str(&text).map_err(|e| StoreError::Corrupt {
            path,
            message: e.to_string(),
        })
    }

    /// All runs, most recently updated first (ties by id).
    pub fn list(&self, status: Option<RunStatus>) -> Result<Vec<RunState>, StoreError> {
        let entries = fs::read_dir(&self.root).map_err(|source| StoreError::Io {
            path: self.root.clone(),
            source,
        })?;
        let mut runs = Vec::new();
        for entry in entries.flatten() {
            let name = entry.file_name().to_string_lossy().into_owned();
            if !entry.path().join(STATE_FILE).is_file() {
                continue;
            }
            let run = self.load(&name)?;
            if status.is_none_or(|s| run.status == s) {
                runs.push(run);
            }
        }
        runs.sort_by(|a, b| b.updated_at.cmp(&a.updated_at).then_with(|| a.run_id.cmp(&b.run_id)));
        Ok(runs)
    }
}

fn write_if_changed(path: &Path, text: &str) -> io::Result<()> {
    if fs::read(path).is_ok_and(|old| old == text.as_bytes()) {
        return Ok(());
    }
    fs::write(path, text)
}
