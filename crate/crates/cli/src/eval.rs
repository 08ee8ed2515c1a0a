use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, ValueEnum};

use lifegen_core::artifact::{read_jsonl, LifecycleRecord, Stage};
use lifegen_core::dataset::DatasetManifest;
use lifegen_core::eval::{
    data_ablation_report, emit, stage_ablation_report, stagewise_report, step_delta_report, EvaluationReport,
    ReportFormat,
};
use lifegen_core::metrics::MetricConfig;
use lifegen_core::pipeline::{RunMode, RunState, RunStore};

use crate::dataset::RECORDS_FILE;
use crate::util::list_arg;

#[derive(Clone, Copy, ValueEnum)]
pub enum EvalKind {
    /// Per-stage scores of every model in the run store.
    Stagewise,
    /// One-step minus multi-step scores, from the one-step and multi-step
    /// runs of the store.
    Delta,
    /// One stage-wise table per training fraction; the run store holds one
    /// sub-store per fraction, named like `100`, `80%` or `0.6`.
    DataAblation,
    /// Code scores of the full pipeline against stage-ablated variants; the
    /// run store holds sub-stores `full` and `no-requirement`,
    /// `no-scxml`, `no-pseudocode`.
    StageAblation,
}

#[derive(Args)]
pub struct EvalArgs {
    #[arg(value_enum)]
    kind: EvalKind,
    /// Run store directory.
    #[arg(long)]
    runs: PathBuf,
    /// Dataset manifest; its test split is the reference set.
    #[arg(long)]
    refs: PathBuf,
    /// Records file with the reference artifacts; defaults to
    /// records.jsonl beside the manifest.
    #[arg(long)]
    records: Option<PathBuf>,
    #[arg(long, default_value = "reports")]
    out: PathBuf,
    #[arg(long, default_value = "md,csv,json")]
    format: String,
}

fn references(args: &EvalArgs) -> anyhow::Result<Vec<LifecycleRecord>> {
    let manifest = DatasetManifest::read(&args.refs)?;
    let path = match &args.records {
        Some(p) => p.clone(),
        None => args.refs.parent().unwrap_or(Path::new(".")).join(RECORDS_FILE),
    };
    let test: BTreeSet<&str> = manifest.split.test_ids.iter().map(String::as_str).collect();
    let refs: Vec<LifecycleRecord> = read_jsonl(&path)?
        .into_iter()
        .filter(|r| test.contains(r.id.as_str()))
        .collect();
    if refs.len() != test.len() {
        bail!(
            "{} holds {} of the {} test records named by {}",
            path.display(),
            refs.len(),
            test.len(),
            args.refs.display()
        );
    }
    Ok(refs)
}

fn load_runs(dir: &Path) -> anyhow::Result<Vec<RunState>> {
    if !dir.is_dir() {
        bail!("run store {} does not exist", dir.display());
    }
    Ok(RunStore::open(dir)?.list(None)?)
}

fn sub_stores(dir: &Path) -> anyhow::Result<Vec<(String, PathBuf)>> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).with_context(|| format!("cannot list {}", dir.display()))? {
        let p = e?.path();
        let is_store = p.is_dir()
            && std::fs::read_dir(&p)?
                .filter_map(Result::ok)
                .any(|c| c.path().join("state.json").is_file());
        if is_store {
            out.push((p.file_name().expect("dir name").to_string_lossy().into_owned(), p));
        }
    }
    out.sort();
    Ok(out)
}

fn parse_fraction(name: &str) -> anyhow::Result<f64> {
    let v: f64 = name
        .trim_end_matches('%')
        .parse()
        .with_context(|| format!("`{name}` is not a training fraction"))?;
    Ok(if name.ends_with('%') || v > 1.0 { v / 100.0 } else { v })
}

fn parse_removed(name: &str) -> anyhow::Result<Option<Stage>> {
    if name == "full" {
        return Ok(None);
    }
    let stage = name
        .trim_start_matches("no-")
        .trim_start_matches("no_")
        .trim_start_matches('-');
    Ok(Some(
        stage
            .parse()
            .with_context(|| format!("`{name}` names no ablated stage"))?,
    ))
}

pub fn run(args: EvalArgs) -> anyhow::Result<ExitCode> {
    let formats = list_arg(&args.format)
        .iter()
        .map(|f| f.parse::<ReportFormat>().map_err(anyhow::Error::msg))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let refs = references(&args)?;
    let config = MetricConfig::default();
    let report: EvaluationReport = match args.kind {
        EvalKind::Stagewise => stagewise_report(&load_runs(&args.runs)?, &refs, &config)?,
        EvalKind::Delta => {
            let (single, multi): (Vec<RunState>, Vec<RunState>) = load_runs(&args.runs)?
                .into_iter()
                .partition(|r| r.mode == RunMode::OneStep);
            let multi = stagewise_report(&multi, &refs, &config).context("multi-step runs")?;
            let single = stagewise_report(&single, &refs, &config).context("one-step runs")?;
            step_delta_report(&multi, &single)?
        }
        EvalKind::DataAblation => {
            let mut per_fraction = Vec::new();
            for (name, dir) in sub_stores(&args.runs)? {
                let r = stagewise_report(&load_runs(&dir)?, &refs, &config)
                    .with_context(|| format!("fraction `{name}`"))?;
                per_fraction.push((parse_fraction(&name)?, r));
            }
            data_ablation_report(&per_fraction)?
        }
        EvalKind::StageAblation => {
            let mut baseline = None;
            let mut variants = BTreeMap::new();
            for (name, dir) in sub_stores(&args.runs)? {
                let r =
                    stagewise_report(&load_runs(&dir)?, &refs, &config).with_context(|| format!("variant `{name}`"))?;
                match parse_removed(&name)? {
                    None => baseline = Some(r),
                    Some(stage) => {
                        variants.insert(stage, r);
                    }
                }
            }
            let baseline = baseline.with_context(|| format!("{} has no `full` run store", args.runs.display()))?;
            stage_ablation_report(&baseline, &variants)?
        }
    };
    for p in emit(&report, &formats, &args.out)? {
        println!("{}", p.display());
    }
    Ok(ExitCode::SUCCESS)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fraction_names() {
        assert_eq!(parse_fraction("100").unwrap(), 1.0);
        assert_eq!(parse_fraction("80%").unwrap(), 0.8);
        assert_eq!(parse_fraction("0.6").unwrap(), 0.6);
        assert!(parse_fraction("most").is_err());
    }

    #[test]
    fn variant_names() {
        assert_eq!(parse_removed("full").unwrap(), None);
        assert_eq!(parse_removed("no-scxml").unwrap(), Some(Stage::Scxml));
        assert_eq!(parse_removed("-RA").unwrap(), Some(Stage::Requirement));
        assert!(parse_removed("other").is_err());
    }
}
