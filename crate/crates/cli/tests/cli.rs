use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lifegen_core::artifact::{read_jsonl, Stage};
use lifegen_core::gateway::read_transcript;
use lifegen_core::pipeline::{prompt_input, RunStore};

const VALID: &str = r#"<scxml xmlns="http://www.w3.org/2005/07/scxml" version="1.0" initial="locked">
  <state id="locked"><transition event="coin" target="unlocked"/></state>
  <state id="unlocked"><transition event="push" target="locked"/></state>
</scxml>"#;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/demo")
}

fn lifegen(cwd: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lifegen"))
        .current_dir(cwd)
        .env_remove("LIFEGEN_BACKENDS")
        .args(args)
        .output()
        .expect("lifegen runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn ok(cwd: &Path, args: &[&str]) -> String {
    let o = lifegen(cwd, args);
    assert!(
        o.status.success(),
        "lifegen {args:?} failed:\n{}{}",
        stdout(&o),
        String::from_utf8_lossy(&o.stderr)
    );
    stdout(&o)
}

fn demo_backends() -> String {
    fixtures().join("lifegen.toml").display().to_string()
}

#[test]
fn scxml_validate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("ok.scxml"), VALID).unwrap();
    std::fs::write(
        dir.path().join("bad.scxml"),
        VALID.replace("target=\"locked\"", "target=\"nowhere\""),
    )
    .unwrap();
    std::fs::write(dir.path().join("broken.scxml"), "<scxml><state id=").unwrap();

    assert!(ok(dir.path(), &["scxml", "validate", "ok.scxml"]).contains("no findings"));
    let bad = lifegen(dir.path(), &["scxml", "validate", "bad.scxml"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(stdout(&bad).contains("nowhere"), "{}", stdout(&bad));
    let broken = lifegen(dir.path(), &["scxml", "validate", "broken.scxml", "--json"]);
    assert_eq!(broken.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_slice(&broken.stdout).unwrap();
    assert_eq!(report["findings"][0]["kind"], "xml_malformed");
}

#[test]
fn scxml_simulate_prints_trace() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("t.scxml"), VALID).unwrap();
    let out = ok(
        dir.path(),
        &["scxml", "simulate", "t.scxml", "--events", "coin,push,coin"],
    );
    assert_eq!(
        out,
        "locked --coin--> unlocked\nunlocked --push--> locked\nlocked --coin--> unlocked\nconfiguration: unlocked\n"
    );
}

#[test]
fn prompts_list_and_show() {
    let dir = tempfile::tempdir().unwrap();
    let list = ok(dir.path(), &["prompts", "list", "--mode", "multi"]);
    assert_eq!(list.lines().count(), 4, "{list}");
    assert!(list.contains("multi_step/code"));
    let show = ok(dir.path(), &["prompts", "show", "multi_step/scxml"]);
    assert!(show.contains("mode: multi_step"));
    let rendered = ok(
        dir.path(),
        &["prompts", "show", "multi_step/scxml", "--input", "R1. Lock."],
    );
    assert_eq!(prompt_input(&rendered), Some("R1. Lock."));
    assert_eq!(
        lifegen(dir.path(), &["prompts", "show", "nope/nope"]).status.code(),
        Some(1)
    );
}

#[test]
fn metrics_score_json() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("ref.py"), "def f(x):\n    y = x + 1\n    return y\n").unwrap();
    std::fs::write(dir.path().join("cand.py"), "def f(x):\n    z = x + 1\n    return z\n").unwrap();
    let out = ok(
        dir.path(),
        &[
            "metrics",
            "score",
            "--stage",
            "code",
            "--candidate",
            "cand.py",
            "--reference",
            "ref.py",
            "--json",
        ],
    );
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let cb = &v["codebleu"];
    for key in ["ngram", "weighted_ngram", "ast_match", "dataflow_match", "combined"] {
        assert!(cb[key].is_number(), "{key} missing from {out}");
    }
    assert_eq!(cb["ast_match"], 1.0);
    // Only the `def` line matches exactly.
    assert!((v["em"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-12);

    let same = ok(
        dir.path(),
        &[
            "metrics",
            "score",
            "--stage",
            "requirement",
            "--candidate",
            "ref.py",
            "--reference",
            "ref.py",
        ],
    );
    assert!(same.contains("rouge_l\t1.0000"), "{same}");
}

#[test]
fn gated_run_and_resume_with_edit() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(
        dir.path(),
        &[
            "run",
            "--intent",
            "Blink an LED.",
            "--mode",
            "multi",
            "--gate",
            "--backend",
            "echo",
        ],
    );
    let (run_id, rest) = out.trim().split_once('\t').unwrap();
    assert_eq!(rest, "awaiting_review\tcheckpoint=intent");

    let out = ok(dir.path(), &["resume", run_id]);
    assert!(out.contains("checkpoint=requirement"), "{out}");

    let edited = "R1. The LED shall toggle every 500 ms.\n";
    std::fs::write(dir.path().join("req.txt"), edited).unwrap();
    let out = ok(dir.path(), &["resume", run_id, "--artifact", "req.txt"]);
    assert!(out.contains("completed"), "{out}");

    let store = RunStore::open(dir.path().join("runs")).unwrap();
    let state = store.load(run_id).unwrap();
    assert_eq!(state.artifacts[&Stage::Requirement], edited);
    let calls = read_transcript(&store.transcript_path(run_id)).unwrap();
    let scxml = calls.iter().find(|c| c.template_id == "multi_step/scxml").unwrap();
    assert_eq!(prompt_input(&scxml.prompt), Some(edited));

    let again = lifegen(dir.path(), &["resume", run_id]);
    assert_eq!(again.status.code(), Some(1));
}

#[test]
fn one_step_run_rejects_gates() {
    let dir = tempfile::tempdir().unwrap();
    let o = lifegen(
        dir.path(),
        &["run", "--intent", "x", "--mode", "one", "--gate", "scxml"],
    );
    assert_eq!(o.status.code(), Some(1));
    let o = lifegen(dir.path(), &["run", "--intent", "x", "--backend", "missing"]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown backend"));
}

#[test]
fn dataset_build_review_split_export() {
    let dir = tempfile::tempdir().unwrap();
    let docs = dir.path().join("docs");
    std::fs::create_dir(&docs).unwrap();
    for (i, r) in read_jsonl(&fixtures().join("records.jsonl"))
        .unwrap()
        .iter()
        .enumerate()
    {
        std::fs::write(
            docs.join(format!("m{i:02}.fsm.txt")),
            r.fsm_description.as_deref().unwrap(),
        )
        .unwrap();
        std::fs::write(
            docs.join(format!("m{i:02}.pseudocode.txt")),
            r.pseudocode.as_deref().unwrap(),
        )
        .unwrap();
    }
    let b = demo_backends();
    let out = ok(
        dir.path(),
        &[
            "--backends",
            &b,
            "dataset",
            "build",
            "--route",
            "document",
            "--in",
            "docs",
            "--backend",
            "oracle",
        ],
    );
    assert!(out.contains("10 new record(s), 0 incomplete"), "{out}");
    // Building again adds nothing.
    let out = ok(
        dir.path(),
        &[
            "--backends",
            &b,
            "dataset",
            "build",
            "--route",
            "document",
            "--in",
            "docs",
            "--backend",
            "oracle",
        ],
    );
    assert!(out.contains("0 new record(s)"), "{out}");

    let listing = ok(dir.path(), &["dataset", "review", "--status", "pending"]);
    let ids: Vec<&str> = listing.lines().map(|l| l.split('\t').next().unwrap()).collect();
    assert_eq!(ids.len(), 10);
    let too_few = lifegen(dir.path(), &["dataset", "split"]);
    assert_eq!(too_few.status.code(), Some(1), "no record is accepted yet");

    ok(
        dir.path(),
        &[
            "dataset",
            "review",
            "--reviewer",
            "kim",
            "--accept",
            &ids[..9].join(","),
            "--reject",
            ids[9],
        ],
    );
    let dup = lifegen(
        dir.path(),
        &["dataset", "review", "--reviewer", "kim", "--accept", ids[0]],
    );
    assert_eq!(dup.status.code(), Some(1));
    assert_eq!(
        ok(dir.path(), &["dataset", "review", "--status", "accepted"])
            .lines()
            .count(),
        9
    );

    let out = ok(dir.path(), &["dataset", "split", "--test", "0.2", "--seed", "7"]);
    assert!(out.contains("9 accepted of 10 records, 7 train / 2 test"), "{out}");
    let first = std::fs::read(dir.path().join("dataset/manifest.json")).unwrap();
    ok(dir.path(), &["dataset", "split", "--test", "0.2", "--seed", "7"]);
    assert_eq!(first, std::fs::read(dir.path().join("dataset/manifest.json")).unwrap());

    let out = ok(dir.path(), &["dataset", "export", "--mode", "multi"]);
    assert!(
        out.contains("28 line(s)") && out.contains("leakage audit: passed"),
        "{out}"
    );
    let out = ok(dir.path(), &["dataset", "export", "--mode", "one"]);
    assert!(out.contains("28 line(s)"), "{out}");

    let out = ok(dir.path(), &["dataset", "subsample", "--seed", "3"]);
    assert_eq!(
        out,
        "100%\t7 records\n80%\t6 records\n60%\t4 records\n40%\t3 records\n20%\t1 records\n"
    );
    let out = ok(dir.path(), &["dataset", "ablate", "--stage", "scxml"]);
    assert!(out.contains("21 pairs"), "{out}");
    assert_eq!(
        lifegen(dir.path(), &["dataset", "ablate", "--stage", "code"])
            .status
            .code(),
        Some(1)
    );
}

fn run_demo(cwd: &Path, backends: &str, store: &str, backend: &str, extra: &[&str]) {
    let manifest = fixtures().join("manifest.json").display().to_string();
    let mut args = vec![
        "--backends",
        backends,
        "run",
        "--manifest",
        &manifest,
        "--backend",
        backend,
        "--store",
        store,
    ];
    args.extend_from_slice(extra);
    ok(cwd, &args);
}

#[test]
fn eval_reports_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let b = demo_backends();
    let manifest = fixtures().join("manifest.json").display().to_string();
    run_demo(dir.path(), &b, "runs", "demo-model", &[]);
    run_demo(dir.path(), &b, "runs", "oracle", &[]);
    for out in ["a", "b"] {
        ok(
            dir.path(),
            &["eval", "stagewise", "--runs", "runs", "--refs", &manifest, "--out", out],
        );
    }
    for f in ["stagewise.md", "stagewise.csv", "stagewise.json"] {
        let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
        assert_eq!(a, std::fs::read(dir.path().join("b").join(f)).unwrap(), "{f}");
    }
    let csv = std::fs::read_to_string(dir.path().join("a/stagewise.csv")).unwrap();
    assert!(csv.contains("oracle,code,codebleu,1.0000,10\n"), "{csv}");

    let o = lifegen(
        dir.path(),
        &["eval", "stagewise", "--runs", "nowhere", "--refs", &manifest],
    );
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn eval_delta_from_one_step_runs() {
    let dir = tempfile::tempdir().unwrap();
    let b = demo_backends();
    let manifest = fixtures().join("manifest.json").display().to_string();
    run_demo(dir.path(), &b, "runs", "oracle", &[]);
    let missing = lifegen(dir.path(), &["eval", "delta", "--runs", "runs", "--refs", &manifest]);
    assert_eq!(missing.status.code(), Some(1), "no one-step runs yet");
    for stage in ["scxml", "pseudocode", "code"] {
        run_demo(
            dir.path(),
            &b,
            "runs",
            "oracle",
            &["--mode", "one", "--target-stage", stage],
        );
    }
    ok(
        dir.path(),
        &[
            "eval", "delta", "--runs", "runs", "--refs", &manifest, "--format", "csv",
        ],
    );
    let csv = std::fs::read_to_string(dir.path().join("reports/step_delta.csv")).unwrap();
    assert_eq!(csv.lines().count(), 10);
    assert!(csv.lines().skip(1).all(|l| l.contains(",0.0000,10")), "{csv}");
    assert!(!dir.path().join("reports/step_delta.md").exists());
}

fn write_backend(path: &Path, name: &str, records: &Path) {
    let text = format!(
        "[[backend]]\nname = \"{name}\"\nkind = \"scripted\"\nmode = \"replay\"\nrecords = \"{}\"\n",
        records.display()
    );
    std::fs::write(path, text).unwrap();
}

#[test]
fn eval_ablations_from_sub_stores() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = fixtures().join("manifest.json").display().to_string();
    let good = dir.path().join("good.toml");
    let weak = dir.path().join("weak.toml");
    write_backend(&good, "m", &fixtures().join("records.jsonl"));
    write_backend(&weak, "m", &fixtures().join("model.jsonl"));
    let g = good.display().to_string();
    let w = weak.display().to_string();

    run_demo(dir.path(), &g, "stage/full", "m", &[]);
    run_demo(dir.path(), &w, "stage/no-scxml", "m", &[]);
    ok(
        dir.path(),
        &[
            "eval",
            "stage-ablation",
            "--runs",
            "stage",
            "--refs",
            &manifest,
            "--out",
            "rep",
        ],
    );
    let md = std::fs::read_to_string(dir.path().join("rep/stage_ablation.md")).unwrap();
    assert!(md.contains("| full | m | 1.0000 | 1.0000 | 1.0000 | +0.00% |"), "{md}");
    assert!(md.contains("| -AD | m |"), "{md}");

    run_demo(dir.path(), &g, "data/100", "m", &[]);
    run_demo(dir.path(), &w, "data/20", "m", &[]);
    ok(
        dir.path(),
        &[
            "eval",
            "data-ablation",
            "--runs",
            "data",
            "--refs",
            &manifest,
            "--out",
            "rep",
            "--format",
            "csv",
        ],
    );
    let csv = std::fs::read_to_string(dir.path().join("rep/data_ablation.csv")).unwrap();
    let first_20 = csv.find("m@20%").unwrap();
    assert!(csv.find("m@100%").unwrap() < first_20, "{csv}");
}
