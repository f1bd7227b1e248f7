//! Corpus BLEU-1..4 and ROUGE-L over token-id sequences.
//!
//! BLEU is unsmoothed: a zero modified precision at any order gives 0. The
//! brevity penalty is `exp(min(0, 1 − ref_len / hyp_len))` over corpus
//! totals.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn ngram_counts(seq: &[u32], n: usize) -> HashMap<&[u32], usize> {
    let mut m = HashMap::new();
    if seq.len() >= n {
        for w in seq.windows(n) {
            *m.entry(w).or_default() += 1;
        }
    }
    m
}

/// Clipped n-gram matches and the hypothesis n-gram total for one pair.
fn modified_precision_parts(hyp: &[u32], reference: &[u32], n: usize) -> (usize, usize) {
    let h = ngram_counts(hyp, n);
    let r = ngram_counts(reference, n);
    let matched = h.iter().map(|(g, &c)| c.min(r.get(g).copied().unwrap_or(0))).sum();
    (matched, hyp.len().saturating_sub(n - 1))
}

/// Corpus-level BLEU with uniform weights over orders `1..=n`.
pub fn bleu_n(hyps: &[Vec<u32>], refs: &[Vec<u32>], n: usize) -> Result<f64> {
    if hyps.len() != refs.len() {
        return Err(Error::LengthMismatch(hyps.len(), refs.len()));
    }
    if !(1..=4).contains(&n) {
        return Err(Error::InvalidConfig(format!("BLEU order {n} outside 1..=4")));
    }
    let hyp_len: usize = hyps.iter().map(Vec::len).sum();
    let ref_len: usize = refs.iter().map(Vec::len).sum();
    if hyp_len == 0 {
        return Ok(0.0);
    }
    let mut log_sum = 0.0;
    for k in 1..=n {
        let (mut matched, mut total) = (0usize, 0usize);
        for (h, r) in hyps.iter().zip(refs) {
            let (m, t) = modified_precision_parts(h, r, k);
            matched += m;
            total += t;
        }
        if matched == 0 || total == 0 {
            return Ok(0.0);
        }
        log_sum += (matched as f64 / total as f64).ln();
    }
    let bp = (1.0 - ref_len as f64 / hyp_len as f64).min(0.0).exp();
    Ok((bp * (log_sum / n as f64).exp()).clamp(0.0, 1.0))
}

/// Length of the longest common subsequence (dynamic programming).
pub fn lcs_len(a: &[u32], b: &[u32]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for &x in a {
        for (j, &y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// LCS-based F1.
pub fn rouge_l(hyp: &[u32], reference: &[u32]) -> f64 {
    let lcs = lcs_len(hyp, reference);
    if lcs == 0 {
        return 0.0;
    }
    let p = lcs as f64 / hyp.len() as f64;
    let r = lcs as f64 / reference.len() as f64;
    2.0 * p * r / (p + r)
}

/// Position-wise token accuracy: matches at aligned positions over the
/// longer of the two lengths, pooled over the corpus.
pub fn token_accuracy(hyps: &[Vec<u32>], refs: &[Vec<u32>]) -> Result<f64> {
    if hyps.len() != refs.len() {
        return Err(Error::LengthMismatch(hyps.len(), refs.len()));
    }
    let (mut hits, mut total) = (0usize, 0usize);
    for (h, r) in hyps.iter().zip(refs) {
        hits += h.iter().zip(r).filter(|(a, b)| a == b).count();
        total += h.len().max(r.len());
    }
    Ok(if total == 0 { 1.0 } else { hits as f64 / total as f64 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceScore {
    pub index: usize,
    pub bleu: BTreeMap<usize, f64>,
    pub rouge_l: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub bleu: BTreeMap<usize, f64>,
    /// Mean sentence-level ROUGE-L F1.
    pub rouge_l: f64,
    pub token_accuracy: f64,
    pub sentences: Vec<SentenceScore>,
}

impl EvalReport {
    pub fn compute(hyps: &[Vec<u32>], refs: &[Vec<u32>]) -> Result<Self> {
        if hyps.len() != refs.len() {
            return Err(Error::LengthMismatch(hyps.len(), refs.len()));
        }
        let mut bleu = BTreeMap::new();
        for n in 1..=4 {
            bleu.insert(n, bleu_n(hyps, refs, n)?);
        }
        let mut sentences = Vec::with_capacity(hyps.len());
        for (i, (h, r)) in hyps.iter().zip(refs).enumerate() {
            let mut b = BTreeMap::new();
            for n in 1..=4 {
                b.insert(n, bleu_n(std::slice::from_ref(h), std::slice::from_ref(r), n)?);
            }
            sentences.push(SentenceScore {
                index: i,
                bleu: b,
                rouge_l: rouge_l(h, r),
            });
        }
        let rouge = if sentences.is_empty() {
            0.0
        } else {
            sentences.iter().map(|s| s.rouge_l).sum::<f64>() / sentences.len() as f64
        };
        Ok(Self {
            bleu,
            rouge_l: rouge,
            token_accuracy: token_accuracy(hyps, refs)?,
            sentences,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}
