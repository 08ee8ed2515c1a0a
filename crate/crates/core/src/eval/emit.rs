use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::{EvalError, EvaluationReport, ReportKind, RowGroup};
use crate::artifact::Stage;
use crate::metrics::stage_metrics;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ReportFormat {
    Markdown,
    Csv,
    Json,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Markdown => "md",
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
        }
    }
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(format!("unknown report format `{other}`")),
        }
    }
}

fn fmt4(v: f64) -> String {
    let s = format!("{v:.4}");
    if s == "-0.0000" {
        "0.0000".into()
    } else {
        s
    }
}

fn metric_title(name: &str) -> &str {
    match name {
        "em" => "EM",
        "bleu" => "BLEU",
        "rouge_l" => "ROUGE-L",
        "tfidf" => "TF-IDF",
        "codebleu" => "CodeBLEU",
        other => other,
    }
}

fn table_row(cells: &[String]) -> String {
    format!("| {} |\n", cells.join(" | "))
}

fn header(out: &mut String, title: &str, report: &EvaluationReport) {
    let _ = writeln!(out, "# {title}\n");
    let _ = writeln!(out, "- config fingerprint: `{}`", report.config_fingerprint);
    let _ = writeln!(out, "- test split fingerprint: `{}`", report.test_fingerprint);
    let _ = writeln!(out, "- backends: {}\n", report.backends.join(", "));
}

fn stages_in(groups: &[RowGroup]) -> Vec<Stage> {
    let set: BTreeSet<Stage> = groups.iter().flat_map(|g| g.rows.iter().map(|r| r.stage)).collect();
    set.into_iter().collect()
}

fn group_table(out: &mut String, groups: &[RowGroup], with_label: bool) {
    let stages = stages_in(groups);
    let mut head = Vec::new();
    if with_label {
        head.push("Data".to_string());
    }
    head.push("Model".into());
    for s in &stages {
        for m in stage_metrics(*s) {
            head.push(format!("{} {}", s.phase_label(), metric_title(m)));
        }
    }
    out.push_str(&table_row(&head));
    out.push_str(&table_row(&vec!["---".to_string(); head.len()]));
    for g in groups {
        let models: BTreeSet<&str> = g.rows.iter().map(|r| r.model.as_str()).collect();
        for model in models {
            let mut cells = Vec::new();
            if with_label {
                cells.push(g.label.clone());
            }
            cells.push(model.to_string());
            for s in &stages {
                let row = g.rows.iter().find(|r| r.model == model && r.stage == *s);
                for m in stage_metrics(*s) {
                    let v = row.and_then(|r| r.values().into_iter().find(|(n, _)| n == m).map(|(_, v)| v));
                    cells.push(v.map(fmt4).unwrap_or_else(|| "-".into()));
                }
            }
            out.push_str(&table_row(&cells));
        }
    }
}

pub fn render_markdown(report: &EvaluationReport) -> String {
    let mut out = String::new();
    match report.kind {
        ReportKind::Stagewise => {
            header(&mut out, "Stage-wise performance", report);
            group_table(&mut out, &report.groups, false);
        }
        ReportKind::DataAblation => {
            header(&mut out, "Training data ablation", report);
            group_table(&mut out, &report.groups, true);
        }
        ReportKind::StepDelta => {
            header(&mut out, "Single-step minus multi-step", report);
            let stages: Vec<Stage> = report
                .deltas
                .iter()
                .map(|d| d.stage)
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            let mut head = vec!["Model".to_string()];
            for s in &stages {
                for m in stage_metrics(*s) {
                    head.push(format!("{} Δ{}", s.phase_label(), metric_title(m)));
                }
            }
            out.push_str(&table_row(&head));
            out.push_str(&table_row(&vec!["---".to_string(); head.len()]));
            let models: BTreeSet<&str> = report.deltas.iter().map(|d| d.model.as_str()).collect();
            for model in models {
                let mut cells = vec![model.to_string()];
                for s in &stages {
                    let row = report.deltas.iter().find(|d| d.model == model && d.stage == *s);
                    for m in stage_metrics(*s) {
                        let v = row.and_then(|r| r.deltas.iter().find(|(n, _)| n == m).map(|(_, v)| *v));
                        cells.push(v.map(fmt4).unwrap_or_else(|| "-".into()));
                    }
                }
                out.push_str(&table_row(&cells));
            }
        }
        ReportKind::StageAblation => {
            header(&mut out, "Stage ablation (code generation)", report);
            let head: Vec<String> = ["Variant", "Model", "EM", "BLEU", "CodeBLEU", "CodeBLEU change"]
                .iter()
                .map(|s| s.to_string())
                .collect();
            out.push_str(&table_row(&head));
            out.push_str(&table_row(&vec!["---".to_string(); head.len()]));
            for r in &report.ablation {
                let change = r
                    .codebleu_change
                    .map(|c| format!("{}%", fmt_pct(c)))
                    .unwrap_or_else(|| "n/a".into());
                out.push_str(&table_row(&[
                    r.label(),
                    r.model.clone(),
                    fmt4(r.em),
                    fmt4(r.bleu),
                    fmt4(r.codebleu),
                    change,
                ]));
            }
        }
    }
    out
}

fn fmt_pct(change: f64) -> String {
    let s = format!("{:+.2}", change * 100.0);
    if s == "-0.00" {
        "+0.00".into()
    } else {
        s
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Long format, one value per line. Grouped reports qualify the model as
/// `model@group`.
pub fn render_csv(report: &EvaluationReport) -> String {
    let mut out = String::from("model,stage,metric,value,n_samples\n");
    let mut line = |model: &str, stage: Stage, metric: &str, value: f64, n: usize| {
        let _ = writeln!(out, "{},{},{},{},{}", csv_field(model), stage, metric, fmt4(value), n);
    };
    match report.kind {
        ReportKind::Stagewise | ReportKind::DataAblation => {
            for g in &report.groups {
                for r in &g.rows {
                    let model = if g.label.is_empty() {
                        r.model.clone()
                    } else {
                        format!("{}@{}", r.model, g.label)
                    };
                    for (m, v) in r.values() {
                        line(&model, r.stage, m, v, r.n_samples);
                    }
                }
            }
        }
        ReportKind::StepDelta => {
            for d in &report.deltas {
                for (m, v) in &d.deltas {
                    line(&d.model, d.stage, m, *v, d.n_samples);
                }
            }
        }
        ReportKind::StageAblation => {
            for r in &report.ablation {
                let model = format!("{}@{}", r.model, r.label());
                line(&model, Stage::Code, "em", r.em, r.n_samples);
                line(&model, Stage::Code, "bleu", r.bleu, r.n_samples);
                line(&model, Stage::Code, "codebleu", r.codebleu, r.n_samples);
                if let Some(c) = r.codebleu_change {
                    line(&model, Stage::Code, "codebleu_change", c, r.n_samples);
                }
            }
        }
    }
    out
}

pub fn render_json(report: &EvaluationReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("reports serialize");
    s.push('\n');
    s
}

/// Writes `<kind>.<ext>` for each format into `out_dir` and returns the paths
/// in format order.
pub fn emit(report: &EvaluationReport, formats: &[ReportFormat], out_dir: &Path) -> Result<Vec<PathBuf>, EvalError> {
    let io = |path: &Path, e: std::io::Error| EvalError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    std::fs::create_dir_all(out_dir).map_err(|e| io(out_dir, e))?;
    let formats: BTreeSet<ReportFormat> = formats.iter().copied().collect();
    let mut paths = Vec::new();
    for f in formats {
        let body = match f {
            ReportFormat::Markdown => render_markdown(report),
            ReportFormat::Csv => render_csv(report),
            ReportFormat::Json => render_json(report),
        };
        let path = out_dir.join(format!("{}.{}", report.kind.as_str(), f.extension()));
        std::fs::write(&path, body).map_err(|e| io(&path, e))?;
        paths.push(path);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{step_delta_report, FingerprintInputs};
    use crate::metrics::{MetricConfig, MetricRow};

    fn report() -> EvaluationReport {
        let rows = Stage::GENERATED
            .iter()
            .map(|s| {
                let has = |m: &str| stage_metrics(*s).contains(&m);
                MetricRow {
                    model: "m".into(),
                    stage: *s,
                    em: 0.5,
                    bleu: 0.25,
                    rouge_l: has("rouge_l").then_some(0.125),
                    tfidf: has("tfidf").then_some(1.0),
                    codebleu: has("codebleu").then_some(0.2971),
                    n_samples: 2,
                }
            })
            .collect();
        let inputs = FingerprintInputs {
            metrics: MetricConfig::default(),
            temperature: 0.0,
            max_output_tokens: 2048,
        };
        EvaluationReport::from_rows(rows, inputs, "t".into())
    }

    #[test]
    fn markdown_has_four_groups() {
        let md = render_markdown(&report());
        let head = md.lines().find(|l| l.starts_with("| Model")).unwrap();
        for g in ["RA EM", "AD TF-IDF", "DD ROUGE-L", "CG CodeBLEU"] {
            assert!(head.contains(g), "{head}");
        }
        assert!(!head.contains("RA TF-IDF"));
        assert!(md.contains("| 0.2971 |"));
    }

    #[test]
    fn csv_shape() {
        let csv = render_csv(&report());
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("model,stage,metric,value,n_samples"));
        assert_eq!(lines.count(), 12);
        assert!(csv.contains("m,code,codebleu,0.2971,2\n"));
    }

    #[test]
    fn delta_renders_signed() {
        let mut single = report();
        single.groups[0].rows[3].codebleu = Some(0.2411);
        let d = step_delta_report(&report(), &single).unwrap();
        assert!(render_csv(&d).contains("m,code,codebleu,-0.0560,2"));
        assert!(render_markdown(&d).contains("-0.0560"));
        assert_eq!(fmt4(-0.00001), "0.0000");
    }

    #[test]
    fn emit_is_idempotent() {
        let dir = tempfile::tempdir().unwrap();
        let formats = [ReportFormat::Json, ReportFormat::Markdown, ReportFormat::Csv];
        let a = emit(&report(), &formats, dir.path()).unwrap();
        let first: Vec<Vec<u8>> = a.iter().map(|p| std::fs::read(p).unwrap()).collect();
        let b = emit(&report(), &formats, dir.path()).unwrap();
        assert_eq!(a, b);
        let second: Vec<Vec<u8>> = b.iter().map(|p| std::fs::read(p).unwrap()).collect();
        assert_eq!(first, second);
        assert!(a[0].ends_with("stagewise.md"));
    }
}
