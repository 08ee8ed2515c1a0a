use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::Args;

use lifegen_core::artifact::{read_jsonl, Stage};
use lifegen_core::dataset::DatasetManifest;
use lifegen_core::gateway::BackendSet;
use lifegen_core::pipeline::{Pipeline, RunRequest, RunSpec, RunState, RunStatus, RunStore, DEFAULT_GATES};

use crate::dataset::RECORDS_FILE;
use crate::util::{read_text, stage_list};

#[derive(Args)]
pub struct RunArgs {
    /// File holding the intent text.
    #[arg(long, conflicts_with_all = ["intent", "manifest"])]
    intent_file: Option<PathBuf>,
    #[arg(long, conflicts_with = "manifest")]
    intent: Option<String>,
    /// Run every record of one split of this manifest, linking each run to
    /// its record id.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Records file for --manifest; defaults to records.jsonl beside it.
    #[arg(long, requires = "manifest")]
    records: Option<PathBuf>,
    #[arg(long, default_value = "test", value_parser = ["test", "train", "all"])]
    split: String,
    /// multi, one or gated.
    #[arg(long, default_value = "multi")]
    mode: String,
    #[arg(long, default_value = "code")]
    target_stage: Stage,
    #[arg(long, default_value = "echo")]
    backend: String,
    /// Gate before these stages, comma-separated. Given without a value it
    /// gates before requirement and scxml.
    #[arg(long, num_args = 0..=1, default_missing_value = "")]
    gate: Option<String>,
    #[arg(long, default_value = "runs")]
    store: PathBuf,
    #[arg(long, default_value_t = 4)]
    parallel: usize,
    /// Print full run states as JSON lines.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
pub struct ResumeArgs {
    run_id: String,
    /// Replacement text for the checkpoint artifact.
    #[arg(long)]
    artifact: Option<PathBuf>,
    /// Backend to continue with; defaults to the one the run started with.
    #[arg(long)]
    backend: Option<String>,
    #[arg(long, default_value = "runs")]
    store: PathBuf,
    #[arg(long)]
    json: bool,
}

fn spec_of(args: &RunArgs) -> anyhow::Result<RunSpec> {
    let gates = match &args.gate {
        None => None,
        Some(g) if g.trim().is_empty() => Some(DEFAULT_GATES.to_vec()),
        Some(g) => Some(stage_list(g)?),
    };
    Ok(match args.mode.as_str() {
        "multi" | "multi_step" | "multi-step" => RunSpec::gated(gates.unwrap_or_default()),
        "gated" => RunSpec::gated(gates.unwrap_or_else(|| DEFAULT_GATES.to_vec())),
        "one" | "one_step" | "one-step" | "single" => {
            if gates.is_some() {
                bail!("--gate applies to multi-step runs only");
            }
            RunSpec::OneStep {
                target: args.target_stage,
            }
        }
        other => bail!("unknown mode `{other}` (expected multi, one or gated)"),
    })
}

fn manifest_requests(manifest_path: &Path, records: Option<&Path>, split: &str) -> anyhow::Result<Vec<RunRequest>> {
    let manifest = DatasetManifest::read(manifest_path)?;
    let records_path = match records {
        Some(p) => p.to_path_buf(),
        None => manifest_path.parent().unwrap_or(Path::new(".")).join(RECORDS_FILE),
    };
    let records = read_jsonl(&records_path)?;
    let wanted: Vec<&String> = match split {
        "test" => manifest.split.test_ids.iter().collect(),
        "train" => manifest.split.train_ids.iter().collect(),
        _ => manifest
            .split
            .train_ids
            .iter()
            .chain(&manifest.split.test_ids)
            .collect(),
    };
    wanted
        .into_iter()
        .map(|id| {
            let r = records
                .iter()
                .find(|r| &r.id == id)
                .with_context(|| format!("record `{id}` is in the manifest but not in {}", records_path.display()))?;
            let intent = r
                .filled(Stage::Intent)
                .with_context(|| format!("record `{id}` has no intent"))?;
            Ok(RunRequest {
                intent: intent.to_string(),
                record_id: Some(id.clone()),
            })
        })
        .collect()
}

fn print_state(s: &RunState, json: bool) -> anyhow::Result<()> {
    let mut out = std::io::stdout().lock();
    if json {
        writeln!(out, "{}", serde_json::to_string(s)?)?;
        return Ok(());
    }
    let mut line = format!("{}\t{}", s.run_id, s.status.as_str());
    if let Some(c) = s.checkpoint_stage {
        line.push_str(&format!("\tcheckpoint={c}"));
    }
    if let Some(e) = &s.error {
        line.push_str(&format!("\terror={e}"));
    }
    writeln!(out, "{line}")?;
    Ok(())
}

pub fn run(args: RunArgs, backends: &BackendSet) -> anyhow::Result<ExitCode> {
    let spec = spec_of(&args)?;
    let requests = if let Some(m) = &args.manifest {
        manifest_requests(m, args.records.as_deref(), &args.split)?
    } else {
        let intent = match (&args.intent_file, &args.intent) {
            (Some(f), _) => read_text(f)?,
            (None, Some(t)) => t.clone(),
            (None, None) => bail!("give --intent-file, --intent or --manifest"),
        };
        vec![RunRequest::from(intent.as_str())]
    };
    let backend = backends.build(&args.backend)?;
    let pipeline = Pipeline::new(RunStore::open(&args.store)?);
    let mut failed = 0;
    for result in pipeline.batch_run(&requests, &spec, backend.as_ref(), args.parallel) {
        match result {
            Ok(s) => {
                if s.status == RunStatus::Failed {
                    failed += 1;
                }
                print_state(&s, args.json)?;
            }
            Err(e) => {
                failed += 1;
                eprintln!("error: {e}");
            }
        }
    }
    Ok(if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

pub fn resume(args: ResumeArgs, backends: &BackendSet) -> anyhow::Result<ExitCode> {
    let pipeline = Pipeline::new(RunStore::open(&args.store)?);
    let state = pipeline.load(&args.run_id)?;
    let backend = backends.build(args.backend.as_deref().unwrap_or(&state.backend))?;
    let edited = args.artifact.as_deref().map(read_text).transpose()?;
    let s = pipeline.resume(&args.run_id, edited.as_deref(), backend.as_ref())?;
    print_state(&s, args.json)?;
    Ok(if s.status == RunStatus::Failed {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    })
}
