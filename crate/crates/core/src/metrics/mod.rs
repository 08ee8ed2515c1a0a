//! Similarity metrics over stage artifacts: exact match, BLEU, ROUGE-L,
//! TF-IDF cosine and CodeBLEU, plus per-stage aggregation.

mod bleu;
mod codebleu;
mod em;
mod rouge;
mod tfidf;

use serde::{Deserialize, Serialize};

use crate::artifact::Stage;

pub use bleu::{bleu, bleu_tokens, modified_precision, ngrams, Smoothing};
pub use codebleu::{ast_subtrees, codebleu, codebleu_with, CodeBleuBreakdown, CodeBleuConfig};
pub use em::{exact_match, EmGranularity};
pub use rouge::{lcs_len, rouge_l, rouge_l_tokens};
pub use tfidf::{tfidf_cosine, xml_terms, IdfTable};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricError {
    #[error("reference is empty")]
    EmptyReference,
    #[error("document has no terms")]
    EmptyDocument,
    #[error("IDF corpus is empty")]
    EmptyCorpus,
    #[error("reference code does not parse: {0}")]
    ReferenceUnparsable(String),
    #[error("no pairs to evaluate")]
    NoPairs,
}

/// Lowercased, Unicode-whitespace separated words.
pub fn text_tokens(text: &str) -> Vec<String> {
    text.to_lowercase().split_whitespace().map(str::to_string).collect()
}

/// Lexer tokens of Python source, falling back to whitespace words when the
/// source does not tokenize.
pub fn code_tokens(text: &str) -> Vec<String> {
    crate::pylang::code_tokens_lossy(text)
}

/// Every knob that changes metric values. Recorded with each report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    pub em_granularity: EmGranularity,
    pub bleu_max_n: usize,
    pub smoothing: Smoothing,
    pub rouge_beta: f64,
    pub codebleu: CodeBleuConfig,
    pub text_tokenizer: String,
    pub code_tokenizer: String,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            em_granularity: EmGranularity::Line,
            bleu_max_n: 4,
            smoothing: Smoothing::AddOne,
            rouge_beta: 1.2,
            codebleu: CodeBleuConfig::default(),
            text_tokenizer: "lowercase+unicode-whitespace".into(),
            code_tokenizer: "python-lexer".into(),
        }
    }
}

/// One (model, stage) row. Only the metrics of the stage's column group are
/// present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub model: String,
    pub stage: Stage,
    pub em: f64,
    pub bleu: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rouge_l: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tfidf: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub codebleu: Option<f64>,
    pub n_samples: usize,
}

impl MetricRow {
    /// (name, value) pairs in column order.
    pub fn values(&self) -> Vec<(&'static str, f64)> {
        let mut v = vec![("em", self.em), ("bleu", self.bleu)];
        if let Some(x) = self.rouge_l {
            v.push(("rouge_l", x));
        }
        if let Some(x) = self.tfidf {
            v.push(("tfidf", x));
        }
        if let Some(x) = self.codebleu {
            v.push(("codebleu", x));
        }
        v
    }
}

/// Metric names of a stage's column group.
pub fn stage_metrics(stage: Stage) -> &'static [&'static str] {
    match stage {
        Stage::Scxml => &["em", "bleu", "tfidf"],
        Stage::Code => &["em", "bleu", "codebleu"],
        _ => &["em", "bleu", "rouge_l"],
    }
}

/// Per-sample scores of one pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleScores {
    pub em: f64,
    pub bleu: f64,
    pub rouge_l: Option<f64>,
    pub tfidf: Option<f64>,
    pub codebleu: Option<CodeBleuBreakdown>,
}

/// Scores one pair with the stage's metric set. `idf` is required for the
/// SCXML stage.
pub fn score_pair(
    candidate: &str,
    reference: &str,
    stage: Stage,
    config: &MetricConfig,
    idf: Option<&IdfTable>,
) -> Result<SampleScores, MetricError> {
    let em = exact_match(candidate, reference, config.em_granularity)?;
    let (bleu, rouge_l, tfidf, codebleu) = match stage {
        Stage::Code => {
            let c = code_tokens(candidate);
            let r = code_tokens(reference);
            let b = bleu_tokens(&c, &r, config.bleu_max_n, config.smoothing)?;
            (
                b,
                None,
                None,
                Some(codebleu_with(candidate, reference, &config.codebleu)?),
            )
        }
        Stage::Scxml => {
            let c = text_tokens(candidate);
            let r = text_tokens(reference);
            let b = bleu_tokens(&c, &r, config.bleu_max_n, config.smoothing)?;
            let single;
            let idf = match idf {
                Some(t) => t,
                None => {
                    single = IdfTable::from_corpus([reference])?;
                    &single
                }
            };
            (b, None, Some(tfidf_cosine(candidate, reference, idf)?), None)
        }
        _ => {
            let c = text_tokens(candidate);
            let r = text_tokens(reference);
            let b = bleu_tokens(&c, &r, config.bleu_max_n, config.smoothing)?;
            (b, Some(rouge_l_tokens(&c, &r, config.rouge_beta)?), None, None)
        }
    };
    Ok(SampleScores {
        em,
        bleu,
        rouge_l,
        tfidf,
        codebleu,
    })
}

/// Means of per-sample scores over `pairs` for the stage's column group.
/// For the SCXML stage the IDF corpus is the set of references.
pub fn evaluate_stage(
    model: &str,
    pairs: &[(String, String)],
    stage: Stage,
    config: &MetricConfig,
) -> Result<MetricRow, MetricError> {
    if pairs.is_empty() {
        return Err(MetricError::NoPairs);
    }
    let idf = if stage == Stage::Scxml {
        Some(IdfTable::from_corpus(pairs.iter().map(|(_, r)| r.as_str()))?)
    } else {
        None
    };
    let scores = pairs
        .iter()
        .map(|(c, r)| score_pair(c, r, stage, config, idf.as_ref()))
        .collect::<Result<Vec<_>, _>>()?;
    let n = scores.len() as f64;
    let mean = |f: &dyn Fn(&SampleScores) -> Option<f64>| -> Option<f64> {
        let vals: Vec<f64> = scores.iter().filter_map(f).collect();
        (vals.len() == scores.len()).then(|| vals.iter().sum::<f64>() / n)
    };
    Ok(MetricRow {
        model: model.to_string(),
        stage,
        em: mean(&|s| Some(s.em)).unwrap_or(0.0),
        bleu: mean(&|s| Some(s.bleu)).unwrap_or(0.0),
        rouge_l: mean(&|s| s.rouge_l),
        tfidf: mean(&|s| s.tfidf),
        codebleu: mean(&|s| s.codebleu.as_ref().map(|b| b.combined)),
        n_samples: scores.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(v: &[(&str, &str)]) -> Vec<(String, String)> {
        v.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()
    }

    #[test]
    fn identical_code_pairs_score_one() {
        let code = "def f(x):\n    y = x + 1\n    return y\n";
        let row = evaluate_stage(
            "m",
            &pairs(&[(code, code), (code, code)]),
            Stage::Code,
            &MetricConfig::default(),
        )
        .unwrap();
        assert_eq!((row.em, row.bleu, row.codebleu), (1.0, 1.0, Some(1.0)));
        assert_eq!(row.rouge_l, None);
        assert_eq!(row.n_samples, 2);
    }

    #[test]
    fn single_pair_row_equals_sample() {
        let cfg = MetricConfig::default();
        let (c, r) = ("the cat sat on a mat", "the cat sat on the mat");
        let s = score_pair(c, r, Stage::Requirement, &cfg, None).unwrap();
        let row = evaluate_stage("m", &pairs(&[(c, r)]), Stage::Requirement, &cfg).unwrap();
        assert_eq!(row.bleu, s.bleu);
        assert_eq!(row.rouge_l, s.rouge_l);
        assert_eq!(row.em, s.em);
    }

    #[test]
    fn em_mean() {
        let row = evaluate_stage(
            "m",
            &pairs(&[("a", "a"), ("b", "c")]),
            Stage::Pseudocode,
            &MetricConfig {
                em_granularity: EmGranularity::Sample,
                ..MetricConfig::default()
            },
        )
        .unwrap();
        assert_eq!(row.em, 0.5);
    }

    #[test]
    fn scxml_row_has_tfidf() {
        let x = "<scxml initial=\"a\"><state id=\"a\"/></scxml>";
        let row = evaluate_stage("m", &pairs(&[(x, x)]), Stage::Scxml, &MetricConfig::default()).unwrap();
        assert_eq!(row.tfidf, Some(1.0));
        assert_eq!(
            row.values().iter().map(|v| v.0).collect::<Vec<_>>(),
            stage_metrics(Stage::Scxml)
        );
        assert_eq!(
            evaluate_stage("m", &[], Stage::Code, &MetricConfig::default()),
            Err(MetricError::NoPairs)
        );
    }
}
