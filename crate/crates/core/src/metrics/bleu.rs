use std::collections::HashMap;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use super::{text_tokens, MetricError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Smoothing {
    None,
    /// Adds 1 to numerator and denominator of orders with candidate n-grams
    /// but no matches.
    #[default]
    AddOne,
}

pub fn ngrams<T: Eq + Hash + Clone>(tokens: &[T], n: usize) -> HashMap<Vec<T>, usize> {
    let mut counts = HashMap::new();
    if n == 0 || tokens.len() < n {
        return counts;
    }
    for w in tokens.windows(n) {
        *counts.entry(w.to_vec()).or_insert(0) += 1;
    }
    counts
}

/// Clipped matches and total candidate n-grams of order `n`.
pub fn modified_precision<T: Eq + Hash + Clone>(candidate: &[T], reference: &[T], n: usize) -> (usize, usize) {
    let cand = ngrams(candidate, n);
    let refs = ngrams(reference, n);
    let matched = cand
        .iter()
        .map(|(g, &c)| c.min(refs.get(g).copied().unwrap_or(0)))
        .sum();
    let total = cand.values().sum();
    (matched, total)
}

/// Geometric mean of per-order precisions times the brevity penalty.
/// `precisions` holds (numerator, denominator) per order, already weighted.
pub(crate) fn combine(precisions: &[(f64, f64)], cand_len: usize, ref_len: usize, smoothing: Smoothing) -> f64 {
    if cand_len == 0 {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for &(num, den) in precisions {
        if den == 0.0 {
            return 0.0;
        }
        let p = if num == 0.0 {
            match smoothing {
                Smoothing::None => return 0.0,
                Smoothing::AddOne => 1.0 / (den + 1.0),
            }
        } else {
            num / den
        };
        log_sum += p.ln();
    }
    let bp = if cand_len > ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / cand_len as f64).exp()
    };
    bp * (log_sum / precisions.len() as f64).exp()
}

pub fn bleu_tokens<T: Eq + Hash + Clone>(
    candidate: &[T],
    reference: &[T],
    max_n: usize,
    smoothing: Smoothing,
) -> Result<f64, MetricError> {
    if reference.is_empty() {
        return Err(MetricError::EmptyReference);
    }
    let precisions: Vec<(f64, f64)> = (1..=max_n.max(1))
        .map(|n| {
            let (m, t) = modified_precision(candidate, reference, n);
            (m as f64, t as f64)
        })
        .collect();
    Ok(combine(&precisions, candidate.len(), reference.len(), smoothing))
}

/// BLEU over lowercased whitespace tokens.
pub fn bleu(candidate: &str, reference: &str, max_n: usize, smoothing: Smoothing) -> Result<f64, MetricError> {
    bleu_tokens(&text_tokens(candidate), &text_tokens(reference), max_n, smoothing)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity() {
        assert_eq!(bleu("a b c d e", "a b c d e", 4, Smoothing::AddOne), Ok(1.0));
        assert_eq!(bleu("a b c d", "a b c d", 4, Smoothing::None), Ok(1.0));
    }

    #[test]
    fn clipping() {
        let c = text_tokens("the the the the");
        let r = text_tokens("the cat");
        assert_eq!(modified_precision(&c, &r, 1), (1, 4));
        // p1 = 1/4; p2..p4 have no matches: 1/4, 1/3, 1/2 after add-one.
        // Candidate longer than reference, so no brevity penalty.
        let expected = (0.25f64 * 0.25 * (1.0 / 3.0) * 0.5).powf(0.25);
        let got = bleu_tokens(&c, &r, 4, Smoothing::AddOne).unwrap();
        assert!((got - expected).abs() < 1e-12);
        assert_eq!(bleu_tokens(&c, &r, 4, Smoothing::None), Ok(0.0));
    }

    #[test]
    fn brevity_penalty() {
        let c = text_tokens("a b c d");
        let r = text_tokens("a b c d e");
        let got = bleu_tokens(&c, &r, 4, Smoothing::AddOne).unwrap();
        assert!((got - (1.0f64 - 5.0 / 4.0).exp()).abs() < 1e-12);
    }

    #[test]
    fn short_and_empty() {
        assert_eq!(bleu("a b", "a b", 4, Smoothing::AddOne), Ok(0.0));
        assert_eq!(bleu("", "a b", 4, Smoothing::AddOne), Ok(0.0));
        assert_eq!(bleu("a", "", 4, Smoothing::AddOne), Err(MetricError::EmptyReference));
    }
}
