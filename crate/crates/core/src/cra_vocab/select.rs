use std::path::Path;

use log::{info, warn};
use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::candidates::{char_frequencies, collect_candidates, CandidateWord};
use super::transport::{build_problem, codebook_entropy, sinkhorn_solve};
use crate::error::{Error, Result};
use crate::vq_sign::{CharCodebook, ContextModel};

/// Full-scale vocabulary increment.
pub const FULL_SCALE_INCREMENT: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub epsilon: f64,
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-3,
            tol: 1e-9,
            max_iters: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VocabConfig {
    /// Size increment m; vocabulary r holds `r·m` tokens.
    pub m: usize,
    pub r_max: usize,
    pub l_max: usize,
    /// Candidate pool size; `None` means `4·r_max·m`.
    pub pool_size: Option<usize>,
    pub solver: SolverConfig,
    /// Forces the chosen size instead of the entropy-difference rule.
    pub override_r: Option<usize>,
}

impl Default for VocabConfig {
    fn default() -> Self {
        Self {
            m: 8,
            r_max: 8,
            l_max: 5,
            pool_size: None,
            solver: SolverConfig::default(),
            override_r: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyPoint {
    pub r: usize,
    pub token_count: usize,
    pub entropy: f64,
    /// `H_{r−1} − H_r`; absent for the first point.
    pub delta: Option<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyCurve {
    pub points: Vec<EntropyPoint>,
    pub chosen_r: usize,
}

impl EntropyCurve {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("r,token_count,entropy,delta\n");
        for p in &self.points {
            let delta = p.delta.map(|d| d.to_string()).unwrap_or_default();
            s.push_str(&format!("{},{},{},{}\n", p.r, p.token_count, p.entropy, delta));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordToken {
    pub id: u32,
    pub chars: Vec<u32>,
    pub prob: f64,
    pub embedding: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordCodebook {
    pub dim: usize,
    pub m: usize,
    pub chosen_r: usize,
    pub entropy: f64,
    pub tokens: Vec<WordToken>,
}

#[derive(Serialize, Deserialize)]
struct WordCodebookFile {
    version: u32,
    kind: String,
    dim: usize,
    m: usize,
    chosen_r: usize,
    entropy: f64,
    tokens: Vec<WordToken>,
}

impl WordCodebook {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn contains(&self, chars: &[u32]) -> bool {
        self.tokens.iter().any(|t| t.chars == chars)
    }

    /// Embeddings as a `len × dim` matrix.
    pub fn embedding_matrix(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.tokens.len(), self.dim));
        for (mut row, t) in out.rows_mut().into_iter().zip(&self.tokens) {
            if t.embedding.len() == self.dim {
                row.assign(&ndarray::ArrayView1::from(&t.embedding[..]));
            }
        }
        out
    }

    pub fn set_embeddings(&mut self, emb: &Array2<f64>) -> Result<()> {
        if emb.nrows() != self.tokens.len() {
            return Err(Error::LengthMismatch(emb.nrows(), self.tokens.len()));
        }
        self.dim = emb.ncols();
        for (t, row) in self.tokens.iter_mut().zip(emb.rows()) {
            t.embedding = row.to_vec();
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = WordCodebookFile {
            version: 1,
            kind: "word".into(),
            dim: self.dim,
            m: self.m,
            chosen_r: self.chosen_r,
            entropy: self.entropy,
            tokens: self.tokens.clone(),
        };
        std::fs::write(path, serde_json::to_string(&file)? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file: WordCodebookFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if file.version != 1 || file.kind != "word" {
            return Err(Error::Format(format!("{} is not a version-1 word codebook", path.display())));
        }
        if file.tokens.iter().enumerate().any(|(i, t)| t.id as usize != i) {
            return Err(Error::Format("word token ids must be 0..n in order".into()));
        }
        Ok(Self {
            dim: file.dim,
            m: file.m,
            chosen_r: file.chosen_r,
            entropy: file.entropy,
            tokens: file.tokens,
        })
    }
}

struct SizeResult {
    entropy: f64,
    converged: bool,
}

fn solve_size(words: &[CandidateWord], chars: &[(u32, f64)], solver: &SolverConfig) -> Result<SizeResult> {
    // Only characters some word covers can receive mass.
    let covered: Vec<(u32, f64)> = chars
        .iter()
        .copied()
        .filter(|(c, _)| words.iter().any(|w| w.chars.contains(c)))
        .collect();
    let problem = build_problem(words, &covered, solver.epsilon)?;
    let plan = sinkhorn_solve(&problem, solver.max_iters, solver.tol);
    Ok(SizeResult {
        entropy: codebook_entropy(&plan.plan, &problem),
        converged: plan.converged,
    })
}

/// `argmax_{r ≥ 2} (H_{r−1} − H_r)`, ties to the smallest r; 1 for a single point.
fn largest_drop(points: &[EntropyPoint]) -> usize {
    let mut chosen = points.first().map_or(1, |p| p.r);
    let mut best = f64::NEG_INFINITY;
    for p in points.iter().skip(1) {
        if let Some(d) = p.delta {
            if d > best {
                best = d;
                chosen = p.r;
            }
        }
    }
    chosen
}

/// Entropy curve over vocabulary sizes `r·m`, `r = 1..=r_max`, and the
/// word codebook at the chosen size (embeddings left empty).
pub fn select_vocab(corpus: &[Vec<u32>], cfg: &VocabConfig) -> Result<(EntropyCurve, WordCodebook)> {
    if cfg.m == 0 || cfg.r_max == 0 {
        return Err(Error::InvalidConfig("m and r_max must be at least 1".into()));
    }
    let pool_size = cfg.pool_size.unwrap_or(4 * cfg.r_max * cfg.m);
    let pool = collect_candidates(corpus, cfg.l_max, pool_size)?;
    let chars = char_frequencies(corpus);

    let mut r_max = cfg.r_max;
    if pool.len() < r_max * cfg.m {
        let fit = (pool.len() / cfg.m).max(1);
        warn!("only {} candidates; truncating r_max from {} to {fit}", pool.len(), cfg.r_max);
        r_max = fit;
    }

    let sizes: Vec<usize> = (1..=r_max).collect();
    let solved: Vec<Result<SizeResult>> = sizes
        .par_iter()
        .map(|&r| solve_size(&pool[..(r * cfg.m).min(pool.len())], &chars, &cfg.solver))
        .collect();

    let mut points: Vec<EntropyPoint> = Vec::with_capacity(r_max);
    for (r, res) in sizes.iter().copied().zip(solved) {
        let res = res?;
        if !res.converged {
            warn!("transport for r = {r} did not reach the marginal tolerance");
        }
        let delta = points.last().map(|p| p.entropy - res.entropy);
        points.push(EntropyPoint {
            r,
            token_count: (r * cfg.m).min(pool.len()),
            entropy: res.entropy,
            delta,
            converged: res.converged,
        });
    }

    let chosen_r = match cfg.override_r {
        Some(r) if r >= 1 && r <= r_max => r,
        Some(r) => {
            return Err(Error::InvalidConfig(format!("override r = {r} is outside 1..={r_max}")));
        }
        None => largest_drop(&points),
    };
    let chosen = &points[chosen_r - 1];
    info!("vocabulary size r = {chosen_r} ({} tokens, entropy {:.4})", chosen.token_count, chosen.entropy);

    let subset = &pool[..chosen.token_count];
    let total: f64 = subset.iter().map(|w| w.prob).sum();
    let codebook = WordCodebook {
        dim: 0,
        m: cfg.m,
        chosen_r,
        entropy: chosen.entropy,
        tokens: subset
            .iter()
            .enumerate()
            .map(|(i, w)| WordToken {
                id: i as u32,
                chars: w.chars.clone(),
                prob: w.prob / total,
                embedding: Vec::new(),
            })
            .collect(),
    };
    Ok((EntropyCurve { points, chosen_r }, codebook))
}

/// Sets every word's embedding to the final state of `g` run from zero over
/// its character embeddings.
pub fn compose_word_embeddings(
    codebook: &mut WordCodebook,
    chars: &CharCodebook,
    g: &ContextModel,
) -> Result<()> {
    if g.dim() != chars.dim() {
        return Err(Error::DimensionMismatch {
            expected: chars.dim(),
            got: g.dim(),
        });
    }
    for t in &mut codebook.tokens {
        let mut rows = Array2::zeros((t.chars.len(), chars.dim()));
        for (mut row, &c) in rows.rows_mut().into_iter().zip(&t.chars) {
            if c as usize >= chars.size() {
                return Err(Error::UnknownCharacter(c));
            }
            row.assign(&chars.embeddings.row(c as usize));
        }
        t.embedding = g.gru.final_state(rows.view()).to_vec();
    }
    codebook.dim = chars.dim();
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_size_returns_r_one() {
        let corpus = vec![vec![1, 2, 3, 1, 2], vec![2, 3]];
        let cfg = VocabConfig {
            m: 2,
            r_max: 1,
            ..Default::default()
        };
        let (curve, cb) = select_vocab(&corpus, &cfg).unwrap();
        assert_eq!(curve.chosen_r, 1);
        assert_eq!(cb.tokens.len(), 2);
        assert_eq!(curve.points.len(), 1);
    }

    #[test]
    fn override_forces_size() {
        let corpus = vec![vec![1, 2, 3, 1, 2, 4, 5, 1, 2, 3]];
        let cfg = VocabConfig {
            m: 2,
            r_max: 4,
            override_r: Some(3),
            ..Default::default()
        };
        let (curve, cb) = select_vocab(&corpus, &cfg).unwrap();
        assert_eq!(curve.chosen_r, 3);
        assert_eq!(cb.tokens.len(), 6);
        assert!(curve.to_csv().lines().count() == 5);
    }

    #[test]
    fn largest_drop_prefers_first_tie() {
        let pt = |r, e, d| EntropyPoint {
            r,
            token_count: r,
            entropy: e,
            delta: d,
            converged: true,
        };
        let pts = vec![pt(1, 1.0, None), pt(2, 1.5, Some(-0.5)), pt(3, 1.6, Some(-0.1)), pt(4, 1.7, Some(-0.1))];
        assert_eq!(largest_drop(&pts), 3);
    }
}
