use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{ln_sigmoid, sigmoid};

/// Negative-sample indices into a pool of feature rows, laid out as
/// `indices[k-1][τ]` for every step size `k` and context position `τ`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Negatives {
    pub indices: Vec<Vec<Vec<usize>>>,
}

impl Negatives {
    /// Uniform draws from the pool, excluding the positive's own row
    /// (`seq_offset + τ + k`). The pool must hold at least two rows.
    pub fn sample<R: Rng + ?Sized>(
        rng: &mut R,
        seq_len: usize,
        seq_offset: usize,
        pool_len: usize,
        k_max: usize,
        n_negatives: usize,
    ) -> Self {
        let mut indices = Vec::with_capacity(k_max);
        for k in 1..=k_max {
            let per_tau = (0..seq_len.saturating_sub(k))
                .map(|tau| {
                    let positive = seq_offset + tau + k;
                    (0..n_negatives)
                        .map(|_| {
                            if pool_len < 2 {
                                return positive;
                            }
                            let mut j = rng.random_range(0..pool_len - 1);
                            if j >= positive {
                                j += 1;
                            }
                            j
                        })
                        .collect()
                })
                .collect();
            indices.push(per_tau);
        }
        Self { indices }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CpcLoss {
    pub total: f64,
    pub per_k: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct CpcGrads {
    pub heads: Vec<Array2<f64>>,
    pub contexts: Array2<f64>,
    pub z: Array2<f64>,
    pub pool: Array2<f64>,
}

fn check_inputs(
    z: ArrayView2<'_, f64>,
    contexts: ArrayView2<'_, f64>,
    heads: &[Array2<f64>],
    negatives: &Negatives,
) -> Result<()> {
    let k = heads.len();
    if z.nrows() <= k {
        return Err(Error::SequenceTooShort { len: z.nrows(), k });
    }
    if contexts.nrows() != z.nrows() {
        return Err(Error::LengthMismatch(contexts.nrows(), z.nrows()));
    }
    if negatives.indices.len() != k {
        return Err(Error::LengthMismatch(negatives.indices.len(), k));
    }
    Ok(())
}

/// Context-prediction contrastive loss summed over step sizes and positions:
///
/// `L = Σ_k Σ_τ −[ln σ(z_{τ+k}·h) + λ · mean_neg ln σ(−z̃·h)]`, `h = W_k c_τ`.
///
/// `z` holds the sequence's own feature rows (targets); `pool` holds the rows
/// negatives are drawn from.
pub fn cpc_loss(
    z: ArrayView2<'_, f64>,
    pool: ArrayView2<'_, f64>,
    contexts: ArrayView2<'_, f64>,
    heads: &[Array2<f64>],
    negatives: &Negatives,
    lambda: f64,
) -> Result<CpcLoss> {
    Ok(cpc_impl(z, pool, contexts, heads, negatives, lambda, false)?.0)
}

pub fn cpc_backward(
    z: ArrayView2<'_, f64>,
    pool: ArrayView2<'_, f64>,
    contexts: ArrayView2<'_, f64>,
    heads: &[Array2<f64>],
    negatives: &Negatives,
    lambda: f64,
) -> Result<(CpcLoss, CpcGrads)> {
    let (loss, grads) = cpc_impl(z, pool, contexts, heads, negatives, lambda, true)?;
    Ok((loss, grads.expect("gradients requested")))
}

fn cpc_impl(
    z: ArrayView2<'_, f64>,
    pool: ArrayView2<'_, f64>,
    contexts: ArrayView2<'_, f64>,
    heads: &[Array2<f64>],
    negatives: &Negatives,
    lambda: f64,
    want_grads: bool,
) -> Result<(CpcLoss, Option<CpcGrads>)> {
    check_inputs(z, contexts, heads, negatives)?;
    let t_len = z.nrows();
    let mut per_k = vec![0.0; heads.len()];
    let mut grads = want_grads.then(|| CpcGrads {
        heads: heads.iter().map(|h| Array2::zeros(h.raw_dim())).collect(),
        contexts: Array2::zeros(contexts.raw_dim()),
        z: Array2::zeros(z.raw_dim()),
        pool: Array2::zeros(pool.raw_dim()),
    });

    for (ki, head) in heads.iter().enumerate() {
        let k = ki + 1;
        let negs_k = &negatives.indices[ki];
        if negs_k.len() != t_len - k {
            return Err(Error::LengthMismatch(negs_k.len(), t_len - k));
        }
        for tau in 0..t_len - k {
            let c = contexts.row(tau);
            let h = head.dot(&c);
            let target = z.row(tau + k);
            let s_pos = target.dot(&h);
            let negs = &negs_k[tau];
            let w_neg = if negs.is_empty() { 0.0 } else { lambda / negs.len() as f64 };
            let mut term = ln_sigmoid(s_pos);
            for &j in negs {
                term += w_neg * ln_sigmoid(-pool.row(j).dot(&h));
            }
            per_k[ki] -= term;

            if let Some(g) = grads.as_mut() {
                let g_pos = sigmoid(s_pos) - 1.0;
                let mut dh: Array1<f64> = &target * g_pos;
                g.z.row_mut(tau + k).scaled_add(g_pos, &h);
                for &j in negs {
                    let neg = pool.row(j);
                    let g_neg = w_neg * sigmoid(neg.dot(&h));
                    dh.scaled_add(g_neg, &neg);
                    g.pool.row_mut(j).scaled_add(g_neg, &h);
                }
                let dh_col = dh.view().insert_axis(ndarray::Axis(1));
                let c_row = c.insert_axis(ndarray::Axis(0));
                g.heads[ki].scaled_add(1.0, &dh_col.dot(&c_row));
                g.contexts.row_mut(tau).scaled_add(1.0, &head.t().dot(&dh));
            }
        }
    }
    let total = per_k.iter().sum();
    if !f64::is_finite(total) {
        return Err(Error::Diverged(format!("context-prediction loss is {total}")));
    }
    Ok((CpcLoss { total, per_k }, grads))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VqLoss {
    pub cpc: f64,
    /// `Σ_t ‖sg(z_t) − ẑ_t‖²` (moves codebook rows only).
    pub codebook: f64,
    /// `γ Σ_t ‖z_t − sg(ẑ_t)‖²` (moves the encoder path only).
    pub commitment: f64,
    pub total: f64,
}

impl VqLoss {
    pub fn zero() -> Self {
        Self {
            cpc: 0.0,
            codebook: 0.0,
            commitment: 0.0,
            total: 0.0,
        }
    }

    pub fn accumulate(&mut self, other: &VqLoss) {
        self.cpc += other.cpc;
        self.codebook += other.codebook;
        self.commitment += other.commitment;
        self.total += other.total;
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            cpc: self.cpc * s,
            codebook: self.codebook * s,
            commitment: self.commitment * s,
            total: self.total * s,
        }
    }
}

/// `L^VQ = L^cp + Σ‖sg(z) − ẑ‖² + γ Σ‖z − sg(ẑ)‖²`. Stop-gradients do not
/// change forward values, so both quadratic terms share one distance sum.
pub fn vq_loss(z: ArrayView2<'_, f64>, quantized: ArrayView2<'_, f64>, cpc: f64, gamma: f64) -> Result<VqLoss> {
    if z.raw_dim() != quantized.raw_dim() {
        return Err(Error::LengthMismatch(z.len(), quantized.len()));
    }
    let sq: f64 = z.iter().zip(quantized.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
    let commitment = gamma * sq;
    Ok(VqLoss {
        cpc,
        codebook: sq,
        commitment,
        total: cpc + sq + commitment,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn all_zero_inputs_give_two_ln_two_per_term() {
        let z = Array2::zeros((5, 2));
        let c = Array2::zeros((5, 2));
        let heads = vec![Array2::zeros((2, 2)); 3];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let negs = Negatives::sample(&mut rng, 5, 0, 5, 3, 1);
        let loss = cpc_loss(z.view(), z.view(), c.view(), &heads, &negs, 1.0).unwrap();
        let per_term = -(0.5f64.ln() + 0.5f64.ln());
        assert!((per_term - 1.3863).abs() < 1e-4);
        // 4 + 3 + 2 positions for k = 1, 2, 3
        assert_eq!(loss.per_k.len(), 3);
        for (k, v) in loss.per_k.iter().enumerate() {
            assert!((v - per_term * (4 - k) as f64).abs() < 1e-12);
        }
        assert!((loss.total - 9.0 * per_term).abs() < 1e-12);
    }

    #[test]
    fn too_short_sequence() {
        let z = Array2::zeros((3, 2));
        let heads = vec![Array2::zeros((2, 2)); 3];
        let negs = Negatives {
            indices: vec![vec![]; 3],
        };
        let err = cpc_loss(z.view(), z.view(), z.view(), &heads, &negs, 1.0).unwrap_err();
        assert!(matches!(err, Error::SequenceTooShort { len: 3, k: 3 }));
        assert_eq!(err.to_string().starts_with("sequence too short"), true);
    }

    #[test]
    fn negatives_exclude_positive_row() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let negs = Negatives::sample(&mut rng, 6, 10, 30, 3, 20);
        for (ki, per_tau) in negs.indices.iter().enumerate() {
            for (tau, idx) in per_tau.iter().enumerate() {
                assert_eq!(idx.len(), 20);
                assert!(idx.iter().all(|&j| j < 30 && j != 10 + tau + ki + 1));
            }
        }
    }

    #[test]
    fn matched_case_reduces_to_cpc() {
        let z = array![[1.0, 2.0], [3.0, -1.0]];
        let l = vq_loss(z.view(), z.view(), 4.5, 0.25).unwrap();
        assert_eq!(l.total, 4.5);
    }

    #[test]
    fn two_element_toy_case() {
        let z = array![[1.0, 0.0], [0.0, 2.0]];
        let q = array![[0.0, 0.0], [1.0, 1.0]];
        // distances: 1 + (1 + 1) = 3
        let l = vq_loss(z.view(), q.view(), 0.5, 0.25).unwrap();
        assert!((l.codebook - 3.0).abs() < 1e-12);
        assert!((l.commitment - 0.75).abs() < 1e-12);
        assert!((l.total - 4.25).abs() < 1e-12);
    }
}
