use serde::{Deserialize, Serialize};

use super::MetricError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmGranularity {
    /// 1 if the normalized texts are identical.
    Sample,
    /// Fraction of reference lines matched at the same index.
    #[default]
    Line,
    /// Fraction of reference whitespace tokens matched at the same index.
    Token,
}

impl std::str::FromStr for EmGranularity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sample" => Ok(Self::Sample),
            "line" => Ok(Self::Line),
            "token" => Ok(Self::Token),
            _ => Err(format!("unknown EM granularity `{s}`")),
        }
    }
}

/// LF line endings, trailing whitespace removed from each line, and leading
/// and trailing blank lines dropped.
fn normalized_lines(text: &str) -> Vec<String> {
    let lines: Vec<String> = text
        .replace("\r\n", "\n")
        .replace('\r', "\n")
        .split('\n')
        .map(|l| l.trim_end().to_string())
        .collect();
    let start = lines.iter().position(|l| !l.is_empty());
    let end = lines.iter().rposition(|l| !l.is_empty());
    match (start, end) {
        (Some(s), Some(e)) => lines[s..=e].to_vec(),
        _ => Vec::new(),
    }
}

fn positional(candidate: &[String], reference: &[String]) -> f64 {
    let hits = reference.iter().zip(candidate).filter(|(r, c)| r == c).count();
    hits as f64 / reference.len() as f64
}

pub fn exact_match(candidate: &str, reference: &str, granularity: EmGranularity) -> Result<f64, MetricError> {
    let ref_lines = normalized_lines(reference);
    if ref_lines.is_empty() {
        return Err(MetricError::EmptyReference);
    }
    let cand_lines = normalized_lines(candidate);
    Ok(match granularity {
        EmGranularity::Sample => f64::from(u8::from(cand_lines == ref_lines)),
        EmGranularity::Line => positional(&cand_lines, &ref_lines),
        EmGranularity::Token => {
            let words = |t: &str| t.split_whitespace().map(str::to_string).collect::<Vec<_>>();
            positional(&words(candidate), &words(reference))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_granularity() {
        assert_eq!(exact_match("a\nb", "a\nb", EmGranularity::Line), Ok(1.0));
        assert_eq!(exact_match("a\nc", "a\nb", EmGranularity::Line), Ok(0.5));
        assert_eq!(exact_match("a", "a\nb\nc\nd", EmGranularity::Line), Ok(0.25));
    }

    #[test]
    fn sample_granularity() {
        assert_eq!(exact_match("x", "y", EmGranularity::Sample), Ok(0.0));
        assert_eq!(exact_match("x  \r\n", "x", EmGranularity::Sample), Ok(1.0));
    }

    #[test]
    fn token_granularity() {
        assert_eq!(exact_match("a b x d", "a b c d", EmGranularity::Token), Ok(0.75));
    }

    #[test]
    fn empty_reference() {
        assert_eq!(
            exact_match("x", " \n\n", EmGranularity::Line),
            Err(MetricError::EmptyReference)
        );
    }
}
