use super::{text_tokens, MetricError};

/// Longest common subsequence length, two-row dynamic programme.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn rouge_l_tokens<T: PartialEq>(candidate: &[T], reference: &[T], beta: f64) -> Result<f64, MetricError> {
    if reference.is_empty() {
        return Err(MetricError::EmptyReference);
    }
    let lcs = lcs_len(candidate, reference);
    if lcs == 0 {
        return Ok(0.0);
    }
    let p = lcs as f64 / candidate.len() as f64;
    let r = lcs as f64 / reference.len() as f64;
    let b2 = beta * beta;
    Ok((1.0 + b2) * p * r / (r + b2 * p))
}

pub fn rouge_l(candidate: &str, reference: &str, beta: f64) -> Result<f64, MetricError> {
    rouge_l_tokens(&text_tokens(candidate), &text_tokens(reference), beta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_example() {
        assert_eq!(lcs_len(&["a", "b", "c", "d"], &["a", "c", "d", "f"]), 3);
        let f = rouge_l("a b c d", "a c d f", 1.2).unwrap();
        assert!((f - 0.75).abs() < 1e-12);
    }

    #[test]
    fn identity_and_disjoint() {
        assert_eq!(rouge_l("x y z", "x y z", 1.2), Ok(1.0));
        assert_eq!(rouge_l("x y", "p q", 1.2), Ok(0.0));
        assert_eq!(rouge_l("", "p q", 1.2), Ok(0.0));
        assert_eq!(rouge_l("a", "", 1.2), Err(MetricError::EmptyReference));
    }

    #[test]
    fn recall_weighted() {
        // P = 1, R = 1/2: F = 2.44 * 0.5 / (0.5 + 1.44).
        let f = rouge_l("a", "a b", 1.2).unwrap();
        assert!((f - 2.44 * 0.5 / 1.94).abs() < 1e-12);
    }
}
