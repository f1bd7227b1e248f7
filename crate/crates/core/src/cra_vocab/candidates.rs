use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateWord {
    pub chars: Vec<u32>,
    /// Overlapping occurrence count in the corpus.
    pub count: usize,
    /// Count normalized over the returned candidate list.
    pub prob: f64,
}

fn count_ngrams(corpus: &[Vec<u32>], l_max: usize) -> BTreeMap<Vec<u32>, usize> {
    let mut counts: BTreeMap<Vec<u32>, usize> = BTreeMap::new();
    for seq in corpus {
        for start in 0..seq.len() {
            for len in 1..=l_max.min(seq.len() - start) {
                *counts.entry(seq[start..start + len].to_vec()).or_default() += 1;
            }
        }
    }
    counts
}

/// All n-grams of length `1..=l_max`, ranked by count (descending) with ties
/// broken lexicographically, truncated to `pool_size`. Every observed single
/// character is kept even when it falls outside the top `pool_size`; such
/// characters are appended in rank order.
pub fn collect_candidates(corpus: &[Vec<u32>], l_max: usize, pool_size: usize) -> Result<Vec<CandidateWord>> {
    if corpus.iter().all(|s| s.is_empty()) {
        return Err(Error::EmptyInput);
    }
    if l_max == 0 {
        return Err(Error::InvalidConfig("l_max must be at least 1".into()));
    }
    // BTreeMap iteration is already lexicographic, so a stable sort on count
    // leaves ties in lexicographic order.
    let mut ranked: Vec<(Vec<u32>, usize)> = count_ngrams(corpus, l_max).into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1));

    let mut kept: Vec<(Vec<u32>, usize)> = Vec::new();
    let mut singles_tail = Vec::new();
    for (i, (chars, count)) in ranked.into_iter().enumerate() {
        if i < pool_size {
            kept.push((chars, count));
        } else if chars.len() == 1 {
            singles_tail.push((chars, count));
        }
    }
    kept.extend(singles_tail);

    let total: usize = kept.iter().map(|(_, c)| c).sum();
    Ok(kept
        .into_iter()
        .map(|(chars, count)| CandidateWord {
            chars,
            count,
            prob: count as f64 / total as f64,
        })
        .collect())
}

/// Relative frequency of every character id in the corpus, sorted by id.
pub fn char_frequencies(corpus: &[Vec<u32>]) -> Vec<(u32, f64)> {
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    for &c in corpus.iter().flatten() {
        *counts.entry(c).or_default() += 1;
    }
    let total: usize = counts.values().sum();
    counts
        .into_iter()
        .map(|(c, n)| (c, n as f64 / total as f64))
        .collect()
}
