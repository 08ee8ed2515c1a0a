use std::path::Path;
use std::sync::Arc;

use lifegen_core::artifact::{read_jsonl, Stage};
use lifegen_core::eval::{render_csv, render_json, render_markdown, stagewise_report};
use lifegen_core::gateway::{read_transcript, scripted_backend, ScriptedBackend};
use lifegen_core::metrics::MetricConfig;
use lifegen_core::pipeline::{
    prompt_input, FixedClock, Pipeline, RunRequest, RunSpec, RunStatus, RunStore, DEFAULT_GATES,
};

fn pipeline(dir: &Path) -> Pipeline {
    Pipeline::new(RunStore::open(dir).unwrap()).with_clock(Arc::new(FixedClock::epoch()))
}

#[test]
fn replayed_references_score_perfectly() {
    let records = read_jsonl(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/demo/records.jsonl")).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let p = pipeline(tmp.path());
    let backend = ScriptedBackend::replay(&records).named("oracle");
    let requests: Vec<RunRequest> = records
        .iter()
        .map(|r| RunRequest {
            intent: r.intent.clone().unwrap(),
            record_id: Some(r.id.clone()),
        })
        .collect();
    let runs: Vec<_> = p
        .batch_run(&requests, &RunSpec::multi(), &backend, 3)
        .into_iter()
        .map(Result::unwrap)
        .collect();
    assert!(runs.iter().all(|r| r.status == RunStatus::Completed));

    let report = stagewise_report(&runs, &records, &MetricConfig::default()).unwrap();
    for stage in Stage::GENERATED {
        let row = report.row("oracle", stage).unwrap();
        assert_eq!(row.n_samples, records.len());
        for (name, v) in row.values() {
            assert!((v - 1.0).abs() < 1e-9, "{stage} {name} = {v}");
        }
    }
    let again = stagewise_report(&p.store().list(None).unwrap(), &records, &MetricConfig::default()).unwrap();
    assert_eq!(render_markdown(&report), render_markdown(&again));
    assert_eq!(render_csv(&report), render_csv(&again));
    assert_eq!(render_json(&report), render_json(&again));
}

#[test]
fn edited_checkpoint_feeds_the_next_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let p = pipeline(tmp.path());
    let backend = scripted_backend([
        "requirement v1",
        "<scxml initial=\"a\"><state id=\"a\"/></scxml>",
        "pseudo",
        "code = 1",
    ]);

    let run = p.run_multi_step("Blink an LED.", &backend, DEFAULT_GATES).unwrap();
    assert_eq!(
        (run.status, run.checkpoint_stage),
        (RunStatus::AwaitingReview, Some(Stage::Intent))
    );
    assert_eq!(backend.call_count(), 0);

    let run = p.resume(&run.run_id, None, &backend).unwrap();
    assert_eq!(run.checkpoint_stage, Some(Stage::Requirement));
    assert_eq!(run.artifact(Stage::Requirement), Some("requirement v1"));

    let edited = "The LED toggles every 500 ms.";
    let run = p.resume(&run.run_id, Some(edited), &backend).unwrap();
    assert_eq!(run.status, RunStatus::Completed);
    assert_eq!(backend.call_count(), 4);
    assert_eq!(prompt_input(&backend.received()[1].text), Some(edited));
    assert!(run.scxml_findings.is_empty());

    let transcript = read_transcript(&p.store().transcript_path(&run.run_id)).unwrap();
    let seqs: Vec<u64> = transcript.iter().map(|e| e.seq).collect();
    assert_eq!(seqs, [1, 2, 3, 4]);
}

#[test]
fn backend_failure_stops_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let p = pipeline(tmp.path());
    let backend = scripted_backend(["r", "s", "p", "c"]).fail_on_call(3);
    let run = p.run_multi_step("Count visitors.", &backend, []).unwrap();
    assert_eq!(run.status, RunStatus::Failed);
    assert_eq!(run.failed_stage, Some(Stage::Pseudocode));
    assert_eq!(run.artifacts.len(), 2);
    let transcript = read_transcript(&p.store().transcript_path(&run.run_id)).unwrap();
    assert!(transcript[2].error.is_some() && transcript[2].response.is_none());
    assert!(p.resume(&run.run_id, None, &backend).is_err());
}

#[test]
fn one_step_run_makes_one_call() {
    let tmp = tempfile::tempdir().unwrap();
    let p = pipeline(tmp.path());
    let backend = scripted_backend(["```python\nx = 1\n```"]);
    let run = p.run_one_step("Set x.", Stage::Code, &backend).unwrap();
    assert_eq!(run.status, RunStatus::Completed);
    assert_eq!(backend.call_count(), 1);
    assert_eq!(prompt_input(&backend.received()[0].text), Some("Set x."));
    assert_eq!(run.extracted(Stage::Code).as_deref(), Some("x = 1"));
}
