use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use super::WinoVisInstance;

/// A pair of instances whose statements look too similar.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RedundancyFlag {
    pub first: String,
    pub second: String,
    pub jaccard: f64,
}

/// Lower-cased words with punctuation removed.
pub fn token_set(text: &str) -> BTreeSet<String> {
    text.split_whitespace()
        .map(|w| {
            w.chars()
                .filter(|c| c.is_alphanumeric())
                .flat_map(char::to_lowercase)
                .collect::<String>()
        })
        .filter(|w| !w.is_empty())
        .collect()
}

/// Jaccard similarity of two token sets; 0 when both are empty.
pub fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

/// All pairs `i < j` with statement similarity at or above `threshold`.
pub fn redundancy_scan(instances: &[WinoVisInstance], threshold: f64) -> Vec<RedundancyFlag> {
    let sets: Vec<_> = instances.iter().map(|i| token_set(&i.statement)).collect();
    let mut flags = Vec::new();
    for i in 0..instances.len() {
        for j in i + 1..instances.len() {
            let score = jaccard(&sets[i], &sets[j]);
            if score >= threshold {
                flags.push(RedundancyFlag {
                    first: instances[i].id.clone(),
                    second: instances[j].id.clone(),
                    jaccard: score,
                });
            }
        }
    }
    flags
}

/// Highest-scoring pool member at or above `threshold`, if any.
pub fn redundancy_against(
    candidate: &WinoVisInstance,
    pool: &[WinoVisInstance],
    threshold: f64,
) -> Option<RedundancyFlag> {
    let set = token_set(&candidate.statement);
    pool.iter()
        .map(|p| (p, jaccard(&set, &token_set(&p.statement))))
        .filter(|(_, s)| *s >= threshold)
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(p, s)| RedundancyFlag {
            first: p.id.clone(),
            second: candidate.id.clone(),
            jaccard: s,
        })
}
