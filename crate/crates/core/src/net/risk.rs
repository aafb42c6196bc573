use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::encoding::ElementDigest;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BucketCount {
    pub bucket: u64,
    pub count: u64,
}

/// Outcome of a query as reported to the user. The score is the match count.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RiskReport {
    pub match_count: u64,
    pub matched_buckets: Vec<BucketCount>,
    pub score: u64,
}

/// Aggregates matches per time bucket. Digests missing from `bucket_map`
/// count toward the score but not toward any bucket row.
pub fn risk_score(matched: &BTreeSet<ElementDigest>, bucket_map: &HashMap<ElementDigest, u64>) -> RiskReport {
    let mut per_bucket: BTreeMap<u64, u64> = BTreeMap::new();
    for d in matched {
        match bucket_map.get(d) {
            Some(&b) => *per_bucket.entry(b).or_default() += 1,
            None => log::warn!("matched digest {} has no bucket", d.to_hex()),
        }
    }
    let match_count = matched.len() as u64;
    RiskReport {
        match_count,
        matched_buckets: per_bucket.into_iter().map(|(bucket, count)| BucketCount { bucket, count }).collect(),
        score: match_count,
    }
}
