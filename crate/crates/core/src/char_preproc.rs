//! Repeated-character preprocessing.
//!
//! Each maximal run of a character token collapses to a single token. Runs
//! longer than the sequence's average repeated-run length `alpha` are
//! additionally followed by the slow-down token, so signing speed survives
//! the collapse.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RunStats {
    /// Mean length of the maximal runs of length ≥ 2; `f64::INFINITY` when
    /// the sequence has no such run.
    pub alpha: f64,
    pub runs: Vec<(u32, usize)>,
}

pub fn runs(seq: &[u32]) -> Vec<(u32, usize)> {
    let mut out: Vec<(u32, usize)> = Vec::new();
    for &tok in seq {
        match out.last_mut() {
            Some((t, n)) if *t == tok => *n += 1,
            _ => out.push((tok, 1)),
        }
    }
    out
}

pub fn compute_alpha(seq: &[u32]) -> Result<RunStats> {
    if seq.is_empty() {
        return Err(Error::EmptyInput);
    }
    let runs = runs(seq);
    let repeated: Vec<usize> = runs.iter().map(|&(_, n)| n).filter(|&n| n >= 2).collect();
    let alpha = if repeated.is_empty() {
        f64::INFINITY
    } else {
        repeated.iter().sum::<usize>() as f64 / repeated.len() as f64
    };
    Ok(RunStats { alpha, runs })
}

pub fn collapse_runs(stats: &RunStats, s0_id: u32) -> Vec<u32> {
    let mut out = Vec::with_capacity(stats.runs.len() * 2);
    for &(tok, len) in &stats.runs {
        out.push(tok);
        if tok != s0_id && len >= 2 && (len as f64) > stats.alpha {
            out.push(s0_id);
        }
    }
    out
}

/// `compute_alpha` followed by `collapse_runs`.
pub fn preprocess(seq: &[u32], s0_id: u32) -> Result<(Vec<u32>, RunStats)> {
    let stats = compute_alpha(seq)?;
    Ok((collapse_runs(&stats, s0_id), stats))
}
