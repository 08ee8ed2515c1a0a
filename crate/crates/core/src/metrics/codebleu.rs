use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::bleu::{combine, modified_precision, ngrams};
use super::{code_tokens, MetricError, Smoothing};
use crate::pylang::{self, dataflow_items, is_keyword, DataflowItem, SyntaxNode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeBleuConfig {
    /// Weights of (ngram, weighted_ngram, ast_match, dataflow_match).
    pub weights: [f64; 4],
    /// Unigram weight of reserved keywords in the weighted n-gram match.
    pub keyword_weight: f64,
    pub max_n: usize,
    pub smoothing: Smoothing,
}

impl Default for CodeBleuConfig {
    fn default() -> Self {
        CodeBleuConfig {
            weights: [0.25; 4],
            keyword_weight: 5.0,
            max_n: 4,
            smoothing: Smoothing::AddOne,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeBleuBreakdown {
    pub ngram: f64,
    pub weighted_ngram: f64,
    pub ast_match: f64,
    pub dataflow_match: f64,
    pub combined: f64,
    pub weights: [f64; 4],
    /// Set when the candidate did not parse and the structural components
    /// were scored 0.
    pub parse_fallback: bool,
}

impl CodeBleuBreakdown {
    pub fn components(&self) -> [f64; 4] {
        [self.ngram, self.weighted_ngram, self.ast_match, self.dataflow_match]
    }
}

/// Serialized subtrees rooted at every interior node. Identifier, field and
/// literal leaves become their kind; operator leaves keep their text.
pub fn ast_subtrees(root: &SyntaxNode) -> Vec<String> {
    fn sig(n: &SyntaxNode, out: &mut Vec<String>) -> String {
        if n.children.is_empty() {
            return match (n.kind, &n.text) {
                ("operator", Some(t)) => t.clone(),
                (k, _) => k.to_string(),
            };
        }
        let parts: Vec<String> = n.children.iter().map(|c| sig(c, out)).collect();
        let s = format!("({} {})", n.kind, parts.join(" "));
        out.push(s.clone());
        s
    }
    let mut out = Vec::new();
    sig(root, &mut out);
    out
}

/// |candidate ∩ reference| / |reference| over multisets; 1 when both are
/// empty.
fn multiset_match<T: Eq + std::hash::Hash>(candidate: &[T], reference: &[T]) -> f64 {
    if reference.is_empty() {
        return if candidate.is_empty() { 1.0 } else { 0.0 };
    }
    let mut counts: HashMap<&T, usize> = HashMap::new();
    for r in reference {
        *counts.entry(r).or_insert(0) += 1;
    }
    let mut hits = 0;
    for c in candidate {
        if let Some(n) = counts.get_mut(c).filter(|n| **n > 0) {
            *n -= 1;
            hits += 1;
        }
    }
    hits as f64 / reference.len() as f64
}

fn weighted_ngram(candidate: &[String], reference: &[String], config: &CodeBleuConfig) -> f64 {
    let w = |t: &str| if is_keyword(t) { config.keyword_weight } else { 1.0 };
    let cand = ngrams(candidate, 1);
    let refs = ngrams(reference, 1);
    let mut num = 0.0;
    let mut den = 0.0;
    for (g, &c) in &cand {
        let weight = w(&g[0]);
        num += weight * c.min(refs.get(g).copied().unwrap_or(0)) as f64;
        den += weight * c as f64;
    }
    let mut precisions = vec![(num, den)];
    for n in 2..=config.max_n.max(1) {
        let (m, t) = modified_precision(candidate, reference, n);
        precisions.push((m as f64, t as f64));
    }
    combine(&precisions, candidate.len(), reference.len(), config.smoothing)
}

pub fn codebleu(candidate: &str, reference: &str) -> Result<CodeBleuBreakdown, MetricError> {
    codebleu_with(candidate, reference, &CodeBleuConfig::default())
}

pub fn codebleu_with(
    candidate: &str,
    reference: &str,
    config: &CodeBleuConfig,
) -> Result<CodeBleuBreakdown, MetricError> {
    let ref_tree = pylang::parse_module(reference).map_err(|e| MetricError::ReferenceUnparsable(e.to_string()))?;
    let ref_tokens = code_tokens(reference);
    if ref_tokens.is_empty() {
        return Err(MetricError::EmptyReference);
    }
    let cand_tokens = code_tokens(candidate);
    let ngram = {
        let p: Vec<(f64, f64)> = (1..=config.max_n.max(1))
            .map(|n| {
                let (m, t) = modified_precision(&cand_tokens, &ref_tokens, n);
                (m as f64, t as f64)
            })
            .collect();
        combine(&p, cand_tokens.len(), ref_tokens.len(), config.smoothing)
    };
    let weighted = weighted_ngram(&cand_tokens, &ref_tokens, config);

    let (ast_match, dataflow_match, parse_fallback) = match pylang::parse_module(candidate) {
        Ok(cand_tree) => {
            let ast = multiset_match(&ast_subtrees(&cand_tree), &ast_subtrees(&ref_tree));
            let df: (Vec<DataflowItem>, Vec<DataflowItem>) = (dataflow_items(&cand_tree), dataflow_items(&ref_tree));
            (ast, multiset_match(&df.0, &df.1), false)
        }
        Err(_) => (0.0, 0.0, true),
    };
    let w = config.weights;
    let combined = w[0] * ngram + w[1] * weighted + w[2] * ast_match + w[3] * dataflow_match;
    Ok(CodeBleuBreakdown {
        ngram,
        weighted_ngram: weighted,
        ast_match,
        dataflow_match,
        combined,
        weights: w,
        parse_fallback,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity() {
        let src = "def f(a, b):\n    c = a * b\n    return c\n";
        let b = codebleu(src, src).unwrap();
        assert_eq!(b.components(), [1.0; 4]);
        assert_eq!(b.combined, 1.0);
        assert!(!b.parse_fallback);
    }

    #[test]
    fn renaming_keeps_dataflow() {
        let a = "def f(a, b):\n    c = a * b\n    return c\n";
        let b = "def g(p, q):\n    r = p * q\n    return r\n";
        let s = codebleu(b, a).unwrap();
        assert_eq!(s.dataflow_match, 1.0);
        assert_eq!(s.ast_match, 1.0);
        assert!(s.ngram < 1.0);
    }

    #[test]
    fn small_pair() {
        let s = codebleu("x = 1; y = x + 2", "x = 1; y = x + 1").unwrap();
        assert_eq!(s.dataflow_match, 1.0);
        // Tokens: x = 1 ; y = x + N. 9 tokens, one mismatch at the end.
        // p1 = 8/9, p2 = 7/8, p3 = 6/7, p4 = 5/6; equal lengths.
        let expected = ((8.0 / 9.0) * (7.0 / 8.0) * (6.0 / 7.0) * (5.0f64 / 6.0)).powf(0.25);
        assert!((s.ngram - expected).abs() < 1e-12);
    }

    #[test]
    fn unparsable() {
        let s = codebleu("def f(:", "x = 1\n").unwrap();
        assert!(s.parse_fallback);
        assert_eq!((s.ast_match, s.dataflow_match), (0.0, 0.0));
        assert!(matches!(
            codebleu("x", "def f(:"),
            Err(MetricError::ReferenceUnparsable(_))
        ));
    }

    #[test]
    fn keyword_weight_matters() {
        // Same unigram overlap count, but the shared token is a keyword in
        // one pair and a name in the other.
        // Weighted unigram precision: 8/9 with `pass`, 4/5 with `w`.
        let kw = codebleu("pass; q = 1", "pass; z = 1").unwrap();
        let name = codebleu("w; q = 1", "w; z = 1").unwrap();
        assert_eq!(kw.ngram, name.ngram);
        let ratio = kw.weighted_ngram / name.weighted_ngram;
        assert!((ratio - ((8.0 / 9.0) / (4.0f64 / 5.0)).powf(0.25)).abs() < 1e-12);
    }

    #[test]
    fn subtrees_hide_names_keep_operators() {
        let a = ast_subtrees(&pylang::parse_module("y = x + 1\n").unwrap());
        let b = ast_subtrees(&pylang::parse_module("q = z + 7\n").unwrap());
        assert_eq!(a, b);
        let c = ast_subtrees(&pylang::parse_module("y = x - 1\n").unwrap());
        assert_ne!(a, c);
        assert_eq!(a[0], "(binary_operator identifier + integer)");
    }
}
