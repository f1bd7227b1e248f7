use std::path::Path;

use ndarray::{concatenate, s, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::codebook::{CharCodebook, QuantizedSequence};
use super::context::ContextModel;
use super::loss::{cpc_backward, vq_loss, Negatives, VqLoss};
use crate::char_preproc::preprocess;
use crate::error::{Error, Result};
use crate::nn::{slice2, slice2_mut, Linear, Params};

/// Trainable sign-side front end: a feature adapter standing in for the
/// trainable tail of the visual encoder, the character codebook, and the
/// context model with its prediction heads.
#[derive(Debug, Clone, PartialEq)]
pub struct VqSign {
    pub adapter: Linear,
    pub codebook: CharCodebook,
    pub context: ContextModel,
}

/// Gradient container mirroring [`VqSign`]'s parameter order.
#[derive(Debug, Clone)]
pub struct VqGrads {
    pub adapter: Linear,
    pub codebook: Array2<f64>,
    pub context: ContextModel,
}

impl VqSign {
    pub fn init(dim: usize, codebook_size: usize, k_max: usize, seed: u64) -> Result<Self> {
        if k_max == 0 {
            return Err(Error::InvalidConfig("K must be at least 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let codebook = CharCodebook::random(codebook_size, dim, &mut rng)?;
        let context = ContextModel::new(dim, k_max, &mut rng);
        Ok(Self {
            adapter: Linear::identity(dim),
            codebook,
            context,
        })
    }

    pub fn dim(&self) -> usize {
        self.codebook.dim()
    }

    pub fn k_max(&self) -> usize {
        self.context.k_max()
    }

    /// Adapter output `z` for raw clip features.
    pub fn features(&self, raw: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if raw.ncols() != self.adapter.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.adapter.input_dim(),
                got: raw.ncols(),
            });
        }
        Ok(self.adapter.forward(raw))
    }

    pub fn quantize(&self, raw: ArrayView2<'_, f64>) -> Result<QuantizedSequence> {
        self.codebook.quantize(self.features(raw)?.view())
    }

    /// Quantized ids after repeated-character preprocessing.
    pub fn char_tokens(&self, raw: ArrayView2<'_, f64>) -> Result<Vec<u32>> {
        let q = self.quantize(raw)?;
        Ok(preprocess(&q.ids, self.codebook.s0_id())?.0)
    }

    pub fn zero_grads(&self) -> VqGrads {
        VqGrads {
            adapter: Linear::zeros(self.adapter.input_dim(), self.adapter.output_dim()),
            codebook: Array2::zeros(self.codebook.embeddings.raw_dim()),
            context: self.context.zeros_like(),
        }
    }

    /// Summed `L^VQ` over a batch and its straight-through gradients.
    ///
    /// `negatives[i]` indexes into the concatenation of all adapter outputs
    /// of the batch, in order.
    pub fn batch_loss_and_grads(
        &self,
        raw: &[ArrayView2<'_, f64>],
        negatives: &[Negatives],
        gamma: f64,
        lambda: f64,
    ) -> Result<(VqLoss, VqGrads)> {
        if raw.len() != negatives.len() {
            return Err(Error::LengthMismatch(raw.len(), negatives.len()));
        }
        let zs: Vec<Array2<f64>> = raw.iter().map(|x| self.features(*x)).collect::<Result<_>>()?;
        let views: Vec<_> = zs.iter().map(|z| z.view()).collect();
        let pool = concatenate(Axis(0), &views).map_err(|e| Error::Format(e.to_string()))?;
        let mut d_pool = Array2::<f64>::zeros(pool.raw_dim());
        let mut grads = self.zero_grads();
        let mut total = VqLoss::zero();

        let mut offset = 0;
        for (z, negs) in zs.iter().zip(negatives) {
            let t_len = z.nrows();
            let q = self.codebook.quantize(z.view())?;
            let trace = self.context.trace(q.embeddings.view());
            let (cpc, g) = cpc_backward(
                z.view(),
                pool.view(),
                trace.states.view(),
                &self.context.heads,
                negs,
                lambda,
            )?;
            let loss = vq_loss(z.view(), q.embeddings.view(), cpc.total, gamma)?;
            total.accumulate(&loss);

            for (acc, gh) in grads.context.heads.iter_mut().zip(&g.heads) {
                *acc += gh;
            }
            let back = self.context.gru.backward(&trace, g.contexts.view());
            for (acc, gp) in grads.context.gru.tensors_mut().into_iter().zip(back.grads.tensors()) {
                acc.iter_mut().zip(gp).for_each(|(a, b)| *a += b);
            }
            d_pool += &g.pool;

            let mut dz = g.z;
            // straight-through: the gradient reaching ẑ is copied onto z
            dz += &back.d_inputs;
            let diff = z - &q.embeddings;
            dz.scaled_add(2.0 * gamma, &diff);
            for (t, &id) in q.ids.iter().enumerate() {
                grads
                    .codebook
                    .row_mut(id as usize)
                    .scaled_add(-2.0, &diff.row(t));
            }
            d_pool.slice_mut(s![offset..offset + t_len, ..]).scaled_add(1.0, &dz);
            offset += t_len;
        }

        let mut offset = 0;
        for x in raw {
            let t_len = x.nrows();
            let (g, _) = self.adapter.backward(*x, d_pool.slice(s![offset..offset + t_len, ..]));
            grads.adapter.weight += &g.weight;
            grads.adapter.bias += &g.bias;
            offset += t_len;
        }
        Ok((total, grads))
    }

    pub fn save(&self, codebook_path: &Path, model_path: &Path) -> Result<()> {
        self.codebook.save(codebook_path)?;
        let file = VqModelFile {
            version: 1,
            kind: "context".into(),
            dim: self.dim(),
            k: self.k_max(),
            adapter: self.adapter.clone(),
            context: self.context.clone(),
        };
        std::fs::write(model_path, serde_json::to_string(&file)? + "\n")?;
        Ok(())
    }

    pub fn load(codebook_path: &Path, model_path: &Path) -> Result<Self> {
        let codebook = CharCodebook::load(codebook_path)?;
        let file: VqModelFile = serde_json::from_str(&std::fs::read_to_string(model_path)?)?;
        if file.version != 1 || file.kind != "context" || file.dim != codebook.dim() || file.k != file.context.k_max() {
            return Err(Error::Format(format!("{} is not a compatible context model", model_path.display())));
        }
        Ok(Self {
            adapter: file.adapter,
            codebook,
            context: file.context,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct VqModelFile {
    version: u32,
    kind: String,
    dim: usize,
    k: usize,
    adapter: Linear,
    context: ContextModel,
}

impl Params for VqSign {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut v = self.adapter.tensors();
        v.extend(self.codebook.tensors());
        v.extend(self.context.tensors());
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.adapter.tensors_mut();
        v.extend(self.codebook.tensors_mut());
        v.extend(self.context.tensors_mut());
        v
    }
}

impl Params for VqGrads {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut v = self.adapter.tensors();
        v.push(slice2(&self.codebook));
        v.extend(self.context.tensors());
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.adapter.tensors_mut();
        v.push(slice2_mut(&mut self.codebook));
        v.extend(self.context.tensors_mut());
        v
    }
}

/// Negatives for every sequence of a batch, drawn from the whole batch.
pub fn sample_batch_negatives<R: Rng + ?Sized>(
    rng: &mut R,
    lens: &[usize],
    k_max: usize,
    n_negatives: usize,
) -> Vec<Negatives> {
    let pool_len: usize = lens.iter().sum();
    let mut offset = 0;
    lens.iter()
        .map(|&len| {
            let n = Negatives::sample(rng, len, offset, pool_len, k_max, n_negatives);
            offset += len;
            n
        })
        .collect()
}

/// Fraction of rows whose code's majority label matches their own label.
pub fn cluster_purity(ids: &[u32], labels: &[u32]) -> f64 {
    use std::collections::BTreeMap;
    if ids.is_empty() {
        return 0.0;
    }
    let mut table: BTreeMap<u32, BTreeMap<u32, usize>> = BTreeMap::new();
    for (&i, &l) in ids.iter().zip(labels) {
        *table.entry(i).or_default().entry(l).or_default() += 1;
    }
    let hits: usize = table.values().map(|m| m.values().copied().max().unwrap_or(0)).sum();
    hits as f64 / ids.len() as f64
}

/// Token frequencies over the preprocessed corpus (slow-down token
/// included), indexed by character id; sums to 1 unless the corpus is empty.
pub fn codebook_usage(vq: &VqSign, raw: &[ArrayView2<'_, f64>]) -> Result<Vec<f64>> {
    let mut counts = vec![0usize; vq.codebook.size()];
    for x in raw {
        for id in vq.char_tokens(*x)? {
            counts[id as usize] += 1;
        }
    }
    Ok(normalize_counts(&counts))
}

pub fn normalize_counts(counts: &[usize]) -> Vec<f64> {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return vec![0.0; counts.len()];
    }
    counts.iter().map(|&c| c as f64 / total as f64).collect()
}
