//! Projection of sign-token embeddings into the text-embedding space,
//! trained by minimizing the Gaussian-kernel MMD between the projected sign
//! tokens and the text tokens.

use std::path::Path;

use log::{debug, info};
use ndarray::{Array2, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Adam, Linear, Params};

/// `f(x) = W₂ relu(W₁ x + b₁) + b₂`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionHead {
    pub l1: Linear,
    pub l2: Linear,
}

/// Activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ProjectionCache {
    input: Array2<f64>,
    pre: Array2<f64>,
    hidden: Array2<f64>,
}

impl ProjectionHead {
    /// Hidden width `max(d_in, d_out)`.
    pub fn new<R: Rng + ?Sized>(d_in: usize, d_out: usize, rng: &mut R) -> Self {
        let h = d_in.max(d_out);
        Self {
            l1: Linear::new(d_in, h, 2.0, rng),
            l2: Linear::new(h, d_out, 1.0, rng),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.l1.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.l2.output_dim()
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            l1: Linear::zeros(self.l1.input_dim(), self.l1.output_dim()),
            l2: Linear::zeros(self.l2.input_dim(), self.l2.output_dim()),
        }
    }

    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        self.forward_cached(x).0
    }

    pub fn forward_cached(&self, x: ArrayView2<'_, f64>) -> (Array2<f64>, ProjectionCache) {
        let pre = self.l1.forward(x);
        let hidden = pre.mapv(|v| v.max(0.0));
        let out = self.l2.forward(hidden.view());
        (
            out,
            ProjectionCache {
                input: x.to_owned(),
                pre,
                hidden,
            },
        )
    }

    /// Returns `(grads, d_input)` for upstream gradient `dy`.
    pub fn backward(&self, cache: &ProjectionCache, dy: ArrayView2<'_, f64>) -> (ProjectionHead, Array2<f64>) {
        let (g2, dh) = self.l2.backward(cache.hidden.view(), dy);
        let mut dpre = dh;
        dpre.zip_mut_with(&cache.pre, |g, &p| {
            if p <= 0.0 {
                *g = 0.0
            }
        });
        let (g1, dx) = self.l1.backward(cache.input.view(), dpre.view());
        (ProjectionHead { l1: g1, l2: g2 }, dx)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let head: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if head.l1.output_dim() != head.l2.input_dim() {
            return Err(Error::Format(format!("{}: inconsistent projection head", path.display())));
        }
        Ok(head)
    }
}

impl Params for ProjectionHead {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut v = self.l1.tensors();
        v.extend(self.l2.tensors());
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.l1.tensors_mut();
        v.extend(self.l2.tensors_mut());
        v
    }
}

/// Row-wise application of `f`.
pub fn project(embeddings: ArrayView2<'_, f64>, head: &ProjectionHead) -> Result<Array2<f64>> {
    if embeddings.ncols() != head.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: head.input_dim(),
            got: embeddings.ncols(),
        });
    }
    Ok(head.forward(embeddings))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelConfig {
    Fixed(f64),
    MedianHeuristic,
}

impl KernelConfig {
    /// Bandwidth for the pooled `points`; the median heuristic falls back
    /// to 1 when the median distance is zero.
    pub fn resolve(&self, points: &[ArrayView2<'_, f64>]) -> Result<f64> {
        match *self {
            KernelConfig::Fixed(s) if s > 0.0 && s.is_finite() => Ok(s),
            KernelConfig::Fixed(s) => Err(Error::InvalidConfig(format!("kernel bandwidth {s} must be positive"))),
            KernelConfig::MedianHeuristic => {
                let rows: Vec<_> = points.iter().flat_map(|p| p.rows()).collect();
                let mut d = Vec::with_capacity(rows.len() * rows.len().saturating_sub(1) / 2);
                for i in 0..rows.len() {
                    for j in i + 1..rows.len() {
                        d.push(sq_dist(rows[i], rows[j]).sqrt());
                    }
                }
                if d.is_empty() {
                    return Ok(1.0);
                }
                d.sort_by(f64::total_cmp);
                let n = d.len();
                let med = if n % 2 == 1 { d[n / 2] } else { 0.5 * (d[n / 2 - 1] + d[n / 2]) };
                Ok(if med > 0.0 { med } else { 1.0 })
            }
        }
    }
}

fn sq_dist(a: ndarray::ArrayView1<'_, f64>, b: ndarray::ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
fn kernel(d2: f64, sigma: f64) -> f64 {
    (-d2 / (2.0 * sigma * sigma)).exp()
}

/// Mean kernel value over all pairs. Values are sorted before summation so
/// the result does not depend on the order of either set.
fn mean_kernel(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>, sigma: f64) -> f64 {
    let mut vals: Vec<f64> = Vec::with_capacity(x.nrows() * y.nrows());
    for a in x.rows() {
        for b in y.rows() {
            vals.push(kernel(sq_dist(a, b), sigma));
        }
    }
    vals.sort_by(f64::total_cmp);
    vals.iter().sum::<f64>() / vals.len() as f64
}

fn check_sets(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>) -> Result<()> {
    if x.nrows() == 0 || y.nrows() == 0 {
        return Err(Error::EmptyInput);
    }
    if x.ncols() != y.ncols() {
        return Err(Error::DimensionMismatch {
            expected: y.ncols(),
            got: x.ncols(),
        });
    }
    Ok(())
}

/// Biased (V-statistic) squared MMD with a Gaussian kernel.
pub fn mmd(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>, sigma: f64) -> Result<f64> {
    check_sets(x, y)?;
    let v = mean_kernel(x, x, sigma) + mean_kernel(y, y, sigma) - 2.0 * mean_kernel(x, y, sigma);
    Ok(v.max(0.0))
}

/// [`mmd`] and its gradient with respect to the rows of `x`.
pub fn mmd_with_grad(x: ArrayView2<'_, f64>, y: ArrayView2<'_, f64>, sigma: f64) -> Result<(f64, Array2<f64>)> {
    let value = mmd(x, y, sigma)?;
    let (n, m) = (x.nrows() as f64, y.nrows() as f64);
    let s2 = sigma * sigma;
    let mut grad = Array2::zeros(x.raw_dim());
    for (a, mut g) in x.rows().into_iter().zip(grad.rows_mut()) {
        for b in x.rows() {
            let k = kernel(sq_dist(a, b), sigma);
            // each pair appears twice in the double sum
            g.scaled_add(-2.0 * k / (n * n * s2), &(&a - &b));
        }
        for b in y.rows() {
            let k = kernel(sq_dist(a, b), sigma);
            g.scaled_add(2.0 * k / (n * m * s2), &(&a - &b));
        }
    }
    Ok((value, grad))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextToken {
    pub id: u32,
    pub text: String,
    pub embedding: Vec<f64>,
}

/// Target text-token embeddings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextEmbeddingSet {
    pub dim: usize,
    pub tokens: Vec<TextToken>,
}

impl TextEmbeddingSet {
    pub fn new(dim: usize, tokens: Vec<TextToken>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::EmptyInput);
        }
        for t in &tokens {
            if t.embedding.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: t.embedding.len(),
                });
            }
            if t.embedding.iter().any(|v| !v.is_finite()) {
                return Err(Error::Format(format!("text token {} has non-finite entries", t.id)));
            }
        }
        Ok(Self { dim, tokens })
    }

    pub fn matrix(&self) -> Array2<f64> {
        let flat: Vec<f64> = self.tokens.iter().flat_map(|t| t.embedding.iter().copied()).collect();
        Array2::from_shape_vec((self.tokens.len(), self.dim), flat).expect("validated shape")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let raw: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        Self::new(raw.dim, raw.tokens)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignConfig {
    pub lr: f64,
    pub steps: usize,
    pub kernel: KernelConfig,
    /// Also move the sign-side embeddings, not only `f`.
    pub train_embeddings: bool,
}

impl Default for AlignConfig {
    fn default() -> Self {
        Self {
            lr: 0.01,
            steps: 200,
            kernel: KernelConfig::MedianHeuristic,
            train_embeddings: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignReport {
    pub sigma: f64,
    /// `L^MMD` before each step, plus the final value.
    pub history: Vec<f64>,
}

/// Bandwidth from the pooled projected sign sets and the text set.
pub fn resolve_bandwidth(
    kernel: &KernelConfig,
    levels: &[Array2<f64>],
    head: &ProjectionHead,
    text: ArrayView2<'_, f64>,
) -> Result<f64> {
    let projected: Vec<Array2<f64>> = levels.iter().filter(|l| l.nrows() > 0).map(|l| head.forward(l.view())).collect();
    let mut views: Vec<ArrayView2<'_, f64>> = projected.iter().map(|p| p.view()).collect();
    views.push(text);
    kernel.resolve(&views)
}

/// `Σ_levels MMD(f(level), text)` and gradients for `f` and every level.
/// Empty levels are skipped.
pub fn mmd_loss_and_grads(
    levels: &[Array2<f64>],
    head: &ProjectionHead,
    text: ArrayView2<'_, f64>,
    sigma: f64,
) -> Result<(f64, ProjectionHead, Vec<Array2<f64>>)> {
    let mut total = 0.0;
    let mut g_head = head.zeros_like();
    let mut g_levels = Vec::with_capacity(levels.len());
    for level in levels {
        if level.nrows() == 0 {
            g_levels.push(Array2::zeros(level.raw_dim()));
            continue;
        }
        let (proj, cache) = head.forward_cached(level.view());
        let (v, dproj) = mmd_with_grad(proj.view(), text, sigma)?;
        total += v;
        let (gh, dx) = head.backward(&cache, dproj.view());
        for (acc, g) in g_head.tensors_mut().into_iter().zip(gh.tensors()) {
            acc.iter_mut().zip(g).for_each(|(a, b)| *a += b);
        }
        g_levels.push(dx);
    }
    if levels.iter().all(|l| l.nrows() == 0) {
        return Err(Error::EmptyInput);
    }
    Ok((total, g_head, g_levels))
}

/// Minimizes the summed MMD between each projected sign level (characters,
/// words) and the text set by Adam on `f`, and on the levels themselves when
/// `train_embeddings` is set. The bandwidth is resolved once up front.
pub fn align(
    levels: &mut [Array2<f64>],
    head: &mut ProjectionHead,
    text: &TextEmbeddingSet,
    cfg: &AlignConfig,
) -> Result<AlignReport> {
    let text_m = text.matrix();
    if head.output_dim() != text.dim {
        return Err(Error::DimensionMismatch {
            expected: text.dim,
            got: head.output_dim(),
        });
    }
    let sigma = resolve_bandwidth(&cfg.kernel, levels, head, text_m.view())?;
    let mut opt_head = Adam::new(cfg.lr);
    let mut opt_levels = Adam::new(cfg.lr);
    let mut history = Vec::with_capacity(cfg.steps + 1);
    for step in 0..cfg.steps {
        let (loss, g_head, g_levels) = mmd_loss_and_grads(levels, head, text_m.view(), sigma)?;
        if !loss.is_finite() || !g_head.all_finite() {
            return Err(Error::Diverged(format!("alignment step {step}: MMD is {loss}")));
        }
        history.push(loss);
        debug!("align step {step}: mmd {loss:.6}");
        opt_head.step(head.tensors_mut(), g_head.tensors());
        if cfg.train_embeddings {
            let params: Vec<&mut [f64]> = levels.iter_mut().map(|l| l.as_slice_mut().expect("standard layout")).collect();
            let grads: Vec<&[f64]> = g_levels.iter().map(|g| g.as_slice().expect("standard layout")).collect();
            opt_levels.step(params, grads);
        }
    }
    let (final_loss, _, _) = mmd_loss_and_grads(levels, head, text_m.view(), sigma)?;
    history.push(final_loss);
    info!(
        "alignment: MMD {:.5} -> {:.5} (sigma {sigma:.4})",
        history.first().copied().unwrap_or(final_loss),
        final_loss
    );
    Ok(AlignReport { sigma, history })
}
