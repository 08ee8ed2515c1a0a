use std::collections::{BTreeMap, BTreeSet};

use super::MetricError;
use crate::scxml::{parse_scxml, to_canonical_xml};

/// Lowercased `[alphanumeric_]+` runs of the document. Charts that parse are
/// canonicalized first so attribute order and layout do not matter; other
/// text is used as is.
pub fn xml_terms(doc: &str) -> Vec<String> {
    let text = match parse_scxml(doc) {
        Ok(chart) => to_canonical_xml(&chart),
        Err(_) => doc.to_string(),
    };
    text.to_lowercase()
        .split(|c: char| !(c.is_alphanumeric() || c == '_'))
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Document frequencies over a reference corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct IdfTable {
    n_docs: usize,
    df: BTreeMap<String, usize>,
}

impl IdfTable {
    pub fn from_corpus<'a>(docs: impl IntoIterator<Item = &'a str>) -> Result<Self, MetricError> {
        let mut n_docs = 0;
        let mut df = BTreeMap::new();
        for doc in docs {
            n_docs += 1;
            for term in xml_terms(doc).into_iter().collect::<BTreeSet<_>>() {
                *df.entry(term).or_insert(0) += 1;
            }
        }
        if n_docs == 0 {
            return Err(MetricError::EmptyCorpus);
        }
        Ok(IdfTable { n_docs, df })
    }

    /// ln((1 + N) / (1 + df)) + 1
    pub fn idf(&self, term: &str) -> f64 {
        let df = self.df.get(term).copied().unwrap_or(0);
        ((1 + self.n_docs) as f64 / (1 + df) as f64).ln() + 1.0
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }
}

fn weights(terms: &[String], idf: &IdfTable) -> BTreeMap<String, f64> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for t in terms {
        *counts.entry(t.clone()).or_insert(0) += 1;
    }
    let len = terms.len() as f64;
    counts
        .into_iter()
        .map(|(t, c)| {
            let w = c as f64 / len * idf.idf(&t);
            (t, w)
        })
        .collect()
}

pub fn tfidf_cosine(candidate: &str, reference: &str, idf: &IdfTable) -> Result<f64, MetricError> {
    let c = xml_terms(candidate);
    let r = xml_terms(reference);
    if c.is_empty() || r.is_empty() {
        return Err(MetricError::EmptyDocument);
    }
    let wc = weights(&c, idf);
    let wr = weights(&r, idf);
    let dot: f64 = wc.iter().filter_map(|(t, a)| wr.get(t).map(|b| a * b)).sum();
    let nc: f64 = wc.values().map(|a| a * a).sum();
    let nr: f64 = wr.values().map(|b| b * b).sum();
    Ok((dot / (nc * nr).sqrt()).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_disjoint() {
        let idf = IdfTable::from_corpus(["alpha beta", "gamma"]).unwrap();
        assert_eq!(tfidf_cosine("alpha beta", "alpha beta", &idf), Ok(1.0));
        assert_eq!(tfidf_cosine("alpha", "gamma", &idf), Ok(0.0));
    }

    #[test]
    fn three_document_corpus_by_hand() {
        // Corpus: "a b", "a c", "d". N = 3; df(a) = 2, df(b) = df(c) = 1.
        let idf = IdfTable::from_corpus(["a b", "a c", "d"]).unwrap();
        let ia = (4.0f64 / 3.0).ln() + 1.0;
        let ib = 2.0f64.ln() + 1.0;
        // Candidate "a b": (ia/2, ib/2, 0); reference "a c": (ia/2, 0, ib/2).
        let expected = (ia * ia / 4.0) / (ia * ia / 4.0 + ib * ib / 4.0);
        let got = tfidf_cosine("a b", "a c", &idf).unwrap();
        assert!((got - expected).abs() < 1e-12);
        assert_eq!(tfidf_cosine("a c", "a b", &idf), Ok(got));
    }

    #[test]
    fn canonical_layout_ignored() {
        let idf = IdfTable::from_corpus(["x"]).unwrap();
        let a = r#"<scxml initial="s" version="1.0"><state id="s"/></scxml>"#;
        let b = "<scxml version=\"1.0\"\n   initial=\"s\">\n  <state id=\"s\"></state>\n</scxml>";
        assert_eq!(tfidf_cosine(a, b, &idf), Ok(1.0));
    }

    #[test]
    fn errors() {
        let idf = IdfTable::from_corpus(["x"]).unwrap();
        assert_eq!(tfidf_cosine("<>", "x", &idf), Err(MetricError::EmptyDocument));
        assert_eq!(IdfTable::from_corpus([]), Err(MetricError::EmptyCorpus));
    }
}
