use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Subcommand};

use lifegen_core::artifact::{read_jsonl, validate_record, write_jsonl, LifecycleRecord, Stage};
use lifegen_core::dataset::{
    ablate_stage, accepted_records, append_decision, audit_leakage, build_from_code, build_from_document, dedup,
    evolve_from_seeds, export_instruction_pairs, read_decisions, read_instruction_pairs, review_status, split,
    subsample, synthesize_scxml, BuildOutput, DatasetManifest, DocumentSource, ReviewDecision, ReviewStatus, Verdict,
    FRACTION_LADDER,
};
use lifegen_core::gateway::BackendSet;
use lifegen_core::prompts::PromptMode;

use crate::util::{list_arg, read_text};

pub const RECORDS_FILE: &str = "records.jsonl";
pub const DECISIONS_FILE: &str = "decisions.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";
const FINDINGS_FILE: &str = "build_findings.jsonl";

#[derive(Args)]
pub struct DatasetDir {
    /// Dataset directory holding records.jsonl, decisions.jsonl and
    /// manifest.json.
    #[arg(long, default_value = "dataset")]
    dataset: PathBuf,
}

impl DatasetDir {
    fn records(&self) -> PathBuf {
        self.dataset.join(RECORDS_FILE)
    }
    fn decisions(&self) -> PathBuf {
        self.dataset.join(DECISIONS_FILE)
    }
    fn manifest(&self) -> PathBuf {
        self.dataset.join(MANIFEST_FILE)
    }
    fn load_records(&self) -> anyhow::Result<Vec<LifecycleRecord>> {
        let p = self.records();
        if !p.exists() {
            bail!("{} does not exist; run `lifegen dataset build` first", p.display());
        }
        Ok(read_jsonl(&p)?)
    }
}

#[derive(Subcommand)]
pub enum DatasetCmd {
    /// Generate records from FSM documents, programs or seed records.
    Build {
        #[arg(long, value_parser = ["document", "code", "seed"])]
        route: String,
        /// document: NAME.fsm.txt files with optional NAME.pseudocode.txt;
        /// code: *.py files; seed: *.jsonl seed records.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "echo")]
        backend: String,
        /// Number of records to evolve on the seed route.
        #[arg(long)]
        count: Option<usize>,
        /// Example pseudocode shown to the code-route pseudocode prompt.
        #[arg(long)]
        pseudocode_sample: Option<PathBuf>,
        #[arg(long, default_value_t = 4)]
        parallel: usize,
        #[command(flatten)]
        dir: DatasetDir,
    },
    /// List review status, or record accept/reject decisions.
    Review {
        #[arg(long)]
        reviewer: Option<String>,
        /// Comma-separated record ids to accept.
        #[arg(long, default_value = "")]
        accept: String,
        /// Comma-separated record ids to reject.
        #[arg(long, default_value = "")]
        reject: String,
        #[arg(long)]
        reason: Option<String>,
        /// Only list records with this status.
        #[arg(long, value_parser = ["pending", "accepted", "rejected"])]
        status: Option<String>,
        #[command(flatten)]
        dir: DatasetDir,
    },
    /// Split the accepted records into train and test sets.
    Split {
        #[arg(long, default_value_t = 0.2)]
        test: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        name: Option<String>,
        #[command(flatten)]
        dir: DatasetDir,
    },
    /// Nested training subsets for the data-size ablation.
    Subsample {
        #[arg(long, default_value = "1.0,0.8,0.6,0.4,0.2")]
        fractions: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        dir: DatasetDir,
    },
    /// Write instruction pairs of the training split and audit them for
    /// test-split leakage.
    Export {
        #[arg(long, default_value = "multi")]
        mode: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        dir: DatasetDir,
    },
    /// Training pairs with one intermediate stage removed.
    Ablate {
        #[arg(long)]
        stage: Stage,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        dir: DatasetDir,
    },
}

pub fn dispatch(cmd: DatasetCmd, backends: &dyn Fn() -> anyhow::Result<BackendSet>) -> anyhow::Result<ExitCode> {
    match cmd {
        DatasetCmd::Build {
            route,
            input,
            backend,
            count,
            pseudocode_sample,
            parallel,
            dir,
        } => build(
            &route,
            &input,
            &backends()?,
            &backend,
            count,
            pseudocode_sample.as_deref(),
            parallel,
            &dir,
        ),
        DatasetCmd::Review {
            reviewer,
            accept,
            reject,
            reason,
            status,
            dir,
        } => review(
            reviewer,
            &list_arg(&accept),
            &list_arg(&reject),
            reason,
            status.as_deref(),
            &dir,
        ),
        DatasetCmd::Split { test, seed, name, dir } => {
            let records = dir.load_records()?;
            let decisions = read_decisions(&dir.decisions())?;
            let accepted = accepted_records(&records, &decisions);
            let name = name.unwrap_or_else(|| {
                dir.dataset
                    .file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "dataset".into())
            });
            let manifest = split(&name, &accepted, test, seed)?;
            manifest.write(&dir.manifest())?;
            println!(
                "{}: {} accepted of {} records, {} train / {} test",
                dir.manifest().display(),
                accepted.len(),
                records.len(),
                manifest.split.train_ids.len(),
                manifest.split.test_ids.len()
            );
            Ok(ExitCode::SUCCESS)
        }
        DatasetCmd::Subsample {
            fractions,
            seed,
            out,
            dir,
        } => {
            let manifest = DatasetManifest::read(&dir.manifest())?;
            let fractions: Vec<f64> = if fractions.trim().is_empty() {
                FRACTION_LADDER.to_vec()
            } else {
                list_arg(&fractions)
                    .iter()
                    .map(|f| f.parse::<f64>().with_context(|| format!("bad fraction `{f}`")))
                    .collect::<anyhow::Result<_>>()?
            };
            let subsets = subsample(&manifest.split.train_ids, &fractions, seed)?;
            let out = out.unwrap_or_else(|| dir.dataset.join("subsets.json"));
            std::fs::write(&out, serde_json::to_string_pretty(&subsets)? + "\n")?;
            for s in &subsets {
                println!("{}\t{} records", s.label(), s.ids.len());
            }
            Ok(ExitCode::SUCCESS)
        }
        DatasetCmd::Export { mode, out, dir } => export(&mode, out, &dir),
        DatasetCmd::Ablate { stage, out, dir } => {
            let manifest = DatasetManifest::read(&dir.manifest())?;
            let train: BTreeSet<&str> = manifest.split.train_ids.iter().map(String::as_str).collect();
            let records: Vec<LifecycleRecord> = dir
                .load_records()?
                .into_iter()
                .filter(|r| train.contains(r.id.as_str()))
                .collect();
            let pairs = ablate_stage(&records, stage)?;
            let out = out.unwrap_or_else(|| dir.dataset.join(format!("ablate_{stage}.jsonl")));
            let mut text = String::new();
            for p in &pairs {
                text.push_str(&serde_json::to_string(p)?);
                text.push('\n');
            }
            std::fs::write(&out, text)?;
            println!("{}: {} pairs", out.display(), pairs.len());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn sorted_files(dir: &Path, suffix: &str) -> anyhow::Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("cannot list {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.file_name().is_some_and(|n| n.to_string_lossy().ends_with(suffix)))
        .collect();
    out.sort();
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn build(
    route: &str,
    input: &Path,
    backends: &BackendSet,
    backend: &str,
    count: Option<usize>,
    pseudocode_sample: Option<&Path>,
    parallel: usize,
    dir: &DatasetDir,
) -> anyhow::Result<ExitCode> {
    let backend = backends.build(backend)?;
    let output: BuildOutput = match route {
        "document" => {
            let mut sources = Vec::new();
            for fsm in sorted_files(input, ".fsm.txt")? {
                let name = fsm
                    .file_name()
                    .expect("file")
                    .to_string_lossy()
                    .trim_end_matches(".fsm.txt")
                    .to_string();
                let pseudo = input.join(format!("{name}.pseudocode.txt"));
                sources.push(DocumentSource {
                    fsm_description: read_text(&fsm)?,
                    pseudocode: pseudo.is_file().then(|| read_text(&pseudo)).transpose()?,
                });
            }
            build_from_document(&sources, backend.as_ref(), parallel)
        }
        "code" => {
            let programs = sorted_files(input, ".py")?
                .iter()
                .map(|p| read_text(p))
                .collect::<anyhow::Result<Vec<_>>>()?;
            let sample = pseudocode_sample.map(read_text).transpose()?;
            build_from_code(&programs, backend.as_ref(), sample.as_deref(), parallel)
        }
        _ => {
            let mut seeds = Vec::new();
            for f in sorted_files(input, ".jsonl")? {
                seeds.extend(read_jsonl(&f)?);
            }
            if seeds.is_empty() {
                bail!("no seed records found in {}", input.display());
            }
            let mut out = evolve_from_seeds(&seeds, backend.as_ref(), count.unwrap_or(seeds.len()));
            let more = synthesize_scxml(&mut out.records, backend.as_ref());
            out.findings.extend(more);
            out.incomplete = out
                .records
                .iter()
                .filter(|r| !r.is_complete())
                .map(|r| r.id.clone())
                .collect();
            out
        }
    };

    std::fs::create_dir_all(&dir.dataset)?;
    let mut records = if dir.records().exists() {
        read_jsonl(&dir.records())?
    } else {
        Vec::new()
    };
    let known: BTreeSet<String> = records.iter().map(|r| r.id.clone()).collect();
    let added = output.records.iter().filter(|r| !known.contains(&r.id)).count();
    records.extend(output.records.into_iter().filter(|r| !known.contains(&r.id)));
    let (records, dropped) = dedup(records);
    write_jsonl(&dir.records(), &records)?;

    let mut findings = String::new();
    for f in &output.findings {
        findings.push_str(&serde_json::to_string(f)?);
        findings.push('\n');
        eprintln!("finding: item {} {:?}: {}", f.item, f.kind, f.message);
    }
    std::fs::write(dir.dataset.join(FINDINGS_FILE), findings)?;
    println!(
        "{}: {added} new record(s), {} incomplete, {} duplicate(s) dropped, {} finding(s)",
        dir.records().display(),
        output.incomplete.len(),
        dropped.len(),
        output.findings.len()
    );
    Ok(ExitCode::SUCCESS)
}

fn review(
    reviewer: Option<String>,
    accept: &[String],
    reject: &[String],
    reason: Option<String>,
    status: Option<&str>,
    dir: &DatasetDir,
) -> anyhow::Result<ExitCode> {
    let records = dir.load_records()?;
    if accept.is_empty() && reject.is_empty() {
        let decisions = read_decisions(&dir.decisions())?;
        for r in &records {
            let s = review_status(&r.id, &decisions);
            let label = match s {
                ReviewStatus::Pending => "pending",
                ReviewStatus::Accepted => "accepted",
                ReviewStatus::Rejected => "rejected",
            };
            if status.is_some_and(|want| want != label) {
                continue;
            }
            let errors = validate_record(r)
                .findings
                .iter()
                .filter(|f| f.severity == lifegen_core::artifact::Severity::Error)
                .count();
            let intent: String = r.filled(Stage::Intent).unwrap_or("").chars().take(60).collect();
            println!("{}\t{label}\terrors={errors}\t{}", r.id, intent.replace('\n', " "));
        }
        return Ok(ExitCode::SUCCESS);
    }
    let Some(reviewer) = reviewer else {
        bail!("--reviewer is required to record decisions")
    };
    for (ids, verdict) in [(accept, Verdict::Accepted), (reject, Verdict::Rejected)] {
        for id in ids {
            if !records.iter().any(|r| &r.id == id) {
                bail!("unknown record `{id}`");
            }
            let d = ReviewDecision {
                record_id: id.clone(),
                verdict,
                reviewer: reviewer.clone(),
                reason: reason.clone(),
            };
            append_decision(&dir.decisions(), &d)?;
            println!("{id}\t{verdict:?}");
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn export(mode: &str, out: Option<PathBuf>, dir: &DatasetDir) -> anyhow::Result<ExitCode> {
    let mode: PromptMode = mode.parse()?;
    let manifest = DatasetManifest::read(&dir.manifest())?;
    let records = dir.load_records()?;
    let out = out.unwrap_or_else(|| dir.dataset.join(format!("train_{mode}.jsonl")));
    let lines = export_instruction_pairs(&records, &manifest, mode, &out)?;
    let audit = audit_leakage(&read_instruction_pairs(&out)?, &manifest, &records);
    println!("{}: {lines} line(s)", out.display());
    if audit.passed() {
        println!("leakage audit: passed");
        Ok(ExitCode::SUCCESS)
    } else {
        println!(
            "leakage audit: FAILED ({} test id line(s), {} test content line(s))",
            audit.test_ids_found.len(),
            audit.test_content_found.len()
        );
        Ok(ExitCode::FAILURE)
    }
}
