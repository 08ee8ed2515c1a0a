use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::DatasetError;
use crate::artifact::{LifecycleRecord, Source};

pub const MIN_SPLIT_RECORDS: usize = 5;
pub const FRACTION_LADDER: [f64; 5] = [1.0, 0.8, 0.6, 0.4, 0.2];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    pub records: usize,
    pub sources: BTreeMap<Source, usize>,
    pub split_seed: u64,
    pub split: Split,
}

impl DatasetManifest {
    pub fn is_test(&self, id: &str) -> bool {
        self.split.test_ids.iter().any(|t| t == id)
    }

    /// Hash of the sorted test ids. Reports evaluated on the same split share
    /// it.
    pub fn test_fingerprint(&self) -> String {
        test_fingerprint(&self.split.test_ids)
    }

    pub fn read(path: &Path) -> Result<Self, DatasetError> {
        let text = std::fs::read_to_string(path).map_err(|e| DatasetError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| DatasetError::Json(format!("{}: {e}", path.display())))
    }

    pub fn write(&self, path: &Path) -> Result<(), DatasetError> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        std::fs::write(path, text).map_err(|e| DatasetError::io(path, e))
    }
}

pub fn test_fingerprint(test_ids: &[String]) -> String {
    let sorted: BTreeSet<&str> = test_ids.iter().map(String::as_str).collect();
    let mut h = Sha256::new();
    for id in sorted {
        h.update(id.as_bytes());
        h.update([0]);
    }
    hex::encode(h.finalize())[..16].to_string()
}

fn rounded(fraction: f64, n: usize) -> usize {
    (fraction * n as f64).round() as usize
}

/// Shuffles the ids (sorted first, so input order does not matter) with a
/// ChaCha8 stream seeded by `seed` and takes the first round(fraction × n)
/// as the test split.
pub fn split(
    name: &str,
    records: &[LifecycleRecord],
    test_fraction: f64,
    seed: u64,
) -> Result<DatasetManifest, DatasetError> {
    if records.len() < MIN_SPLIT_RECORDS {
        return Err(DatasetError::DatasetTooSmall {
            records: records.len(),
            minimum: MIN_SPLIT_RECORDS,
        });
    }
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(DatasetError::InvalidFraction(test_fraction));
    }
    let mut ids = BTreeSet::new();
    let mut sources = BTreeMap::new();
    for r in records {
        if !r.is_complete() {
            return Err(DatasetError::IncompleteRecord(r.id.clone()));
        }
        if !ids.insert(r.id.clone()) {
            return Err(DatasetError::DuplicateId(r.id.clone()));
        }
        *sources.entry(r.source).or_insert(0) += 1;
    }
    let mut shuffled: Vec<String> = ids.into_iter().collect();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_test = rounded(test_fraction, shuffled.len());
    let mut test_ids = shuffled[..n_test].to_vec();
    let mut train_ids = shuffled[n_test..].to_vec();
    test_ids.sort();
    train_ids.sort();
    Ok(DatasetManifest {
        name: name.to_string(),
        records: records.len(),
        sources,
        split_seed: seed,
        split: Split { train_ids, test_ids },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractionSubset {
    pub fraction: f64,
    pub ids: Vec<String>,
}

impl FractionSubset {
    /// "100%", "80%", ...
    pub fn label(&self) -> String {
        fraction_label(self.fraction)
    }
}

pub fn fraction_label(fraction: f64) -> String {
    format!("{}%", (fraction * 100.0).round() as i64)
}

/// Nested subsets of the training ids: one seeded permutation, and each
/// fraction takes its round(fraction × n) prefix. Returned in descending
/// fraction order, ids sorted.
pub fn subsample(train_ids: &[String], fractions: &[f64], seed: u64) -> Result<Vec<FractionSubset>, DatasetError> {
    if let Some(&bad) = fractions.iter().find(|f| !(**f > 0.0 && **f <= 1.0)) {
        return Err(DatasetError::InvalidFraction(bad));
    }
    let mut order: Vec<String> = train_ids.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut sorted = fractions.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    sorted.dedup();
    Ok(sorted
        .into_iter()
        .map(|fraction| {
            let mut ids = order[..rounded(fraction, order.len())].to_vec();
            ids.sort();
            FractionSubset { fraction, ids }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::artifact::Stage;

    fn records(n: usize) -> Vec<LifecycleRecord> {
        (0..n)
            .map(|i| {
                let mut r = LifecycleRecord::new(format!("r{i:03}"), Source::Code);
                for s in Stage::ALL {
                    r.set_artifact(s, "x");
                }
                r
            })
            .collect()
    }

    #[test]
    fn ratio_and_disjoint() {
        let m = split("d", &records(100), 0.2, 7).unwrap();
        assert_eq!((m.split.train_ids.len(), m.split.test_ids.len()), (80, 20));
        let train: BTreeSet<_> = m.split.train_ids.iter().collect();
        assert!(m.split.test_ids.iter().all(|t| !train.contains(t)));
        assert_eq!(split("d", &records(100), 0.2, 7).unwrap(), m);
        assert_ne!(split("d", &records(100), 0.2, 8).unwrap().split, m.split);
        let small = split("d", &records(10), 0.2, 1).unwrap();
        assert_eq!((small.split.train_ids.len(), small.split.test_ids.len()), (8, 2));
    }

    #[test]
    fn input_order_irrelevant() {
        let mut rs = records(20);
        let a = split("d", &rs, 0.2, 3).unwrap();
        rs.reverse();
        assert_eq!(split("d", &rs, 0.2, 3).unwrap(), a);
    }

    #[test]
    fn too_small_and_incomplete() {
        assert!(matches!(
            split("d", &records(4), 0.2, 1),
            Err(DatasetError::DatasetTooSmall { .. })
        ));
        let mut rs = records(6);
        rs[2].code = None;
        assert_eq!(
            split("d", &rs, 0.2, 1),
            Err(DatasetError::IncompleteRecord("r002".into()))
        );
    }

    #[test]
    fn nested_fractions() {
        let ids: Vec<String> = (0..100).map(|i| format!("t{i}")).collect();
        let subs = subsample(&ids, &[0.2, 1.0, 0.6, 0.4, 0.8], 11).unwrap();
        let sizes: Vec<usize> = subs.iter().map(|s| s.ids.len()).collect();
        assert_eq!(sizes, [100, 80, 60, 40, 20]);
        for w in subs.windows(2) {
            let big: BTreeSet<_> = w[0].ids.iter().collect();
            assert!(w[1].ids.iter().all(|i| big.contains(i)));
        }
        assert_eq!(subs[0].label(), "100%");
        assert_eq!(subs[4].label(), "20%");
        assert!(subsample(&ids, &[0.0], 1).is_err());
    }
}
