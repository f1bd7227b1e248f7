use log::{debug, info, warn};
use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::VqLoss;
use super::model::{sample_batch_negatives, VqSign};
use crate::error::{Error, Result};
use crate::nn::{Adam, Params};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqTrainConfig {
    pub codebook_size: usize,
    /// Commitment weight γ.
    pub gamma: f64,
    /// Weight λ of the negative term.
    pub lambda_neg: f64,
    pub n_negatives: usize,
    /// Number of future steps K.
    pub k: usize,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Re-seed unused codes on the worst-quantized features after each epoch.
    pub restart_dead_codes: bool,
    /// Seed codes `1..M` by k-means++ over the initial adapter outputs.
    pub init_from_data: bool,
}

impl Default for VqTrainConfig {
    fn default() -> Self {
        Self {
            codebook_size: 9,
            gamma: 0.25,
            lambda_neg: 1.0,
            n_negatives: 10,
            k: 3,
            lr: 0.01,
            epochs: 30,
            batch_size: 8,
            seed: 0,
            restart_dead_codes: true,
            init_from_data: true,
        }
    }
}

impl VqTrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.codebook_size < 2 {
            return bad("codebook_size must be at least 2");
        }
        if !(self.gamma >= 0.0) || !(self.lambda_neg >= 0.0) {
            return bad("gamma and lambda_neg must be non-negative");
        }
        if self.n_negatives < 1 || self.k < 1 || self.batch_size < 1 {
            return bad("n_negatives, k and batch_size must be at least 1");
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad("lr must be finite and non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VqEpochLog {
    pub epoch: usize,
    pub cpc: f64,
    pub codebook: f64,
    pub commitment: f64,
    pub total: f64,
}

/// Pretrains the front end by context prediction plus the two VQ terms.
/// Losses in the history are per-sequence means over the epoch.
pub fn train_vq_sign(corpus: &[ArrayView2<'_, f64>], cfg: &VqTrainConfig) -> Result<(VqSign, Vec<VqEpochLog>)> {
    cfg.validate()?;
    let first = corpus.first().ok_or(Error::EmptyInput)?;
    let mut vq = VqSign::init(first.ncols(), cfg.codebook_size, cfg.k, cfg.seed)?;
    if cfg.init_from_data && cfg.lr > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(2));
        kmeans_pp_init(&mut vq, corpus, &mut rng)?;
    }
    continue_training(vq, corpus, cfg)
}

/// Same as [`train_vq_sign`] but starting from the given parameters.
pub fn continue_training(
    mut vq: VqSign,
    corpus: &[ArrayView2<'_, f64>],
    cfg: &VqTrainConfig,
) -> Result<(VqSign, Vec<VqEpochLog>)> {
    cfg.validate()?;
    let usable: Vec<ArrayView2<'_, f64>> = corpus.iter().copied().filter(|x| x.nrows() > cfg.k).collect();
    if usable.is_empty() {
        return Err(match corpus.first() {
            None => Error::EmptyInput,
            Some(x) => Error::SequenceTooShort { len: x.nrows(), k: cfg.k },
        });
    }
    if usable.len() < corpus.len() {
        warn!("skipping {} sequences not longer than K = {}", corpus.len() - usable.len(), cfg.k);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut opt = Adam::new(cfg.lr);
    let mut order: Vec<usize> = (0..usable.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut sum = VqLoss::zero();
        for batch in order.chunks(cfg.batch_size) {
            let xs: Vec<_> = batch.iter().map(|&i| usable[i]).collect();
            let lens: Vec<usize> = xs.iter().map(|x| x.nrows()).collect();
            let negs = sample_batch_negatives(&mut rng, &lens, cfg.k, cfg.n_negatives);
            let (loss, grads) = vq.batch_loss_and_grads(&xs, &negs, cfg.gamma, cfg.lambda_neg)?;
            if !loss.total.is_finite() || !grads.all_finite() {
                return Err(Error::Diverged(format!("epoch {epoch}: non-finite VQ loss {}", loss.total)));
            }
            sum.accumulate(&loss);
            let scale = 1.0 / xs.len() as f64;
            let g: Vec<Vec<f64>> = grads.tensors().iter().map(|t| t.iter().map(|v| v * scale).collect()).collect();
            opt.step(vq.tensors_mut(), g.iter().map(|v| v.as_slice()).collect());
        }
        let mean = sum.scaled(1.0 / usable.len() as f64);
        let log = VqEpochLog {
            epoch,
            cpc: mean.cpc,
            codebook: mean.codebook,
            commitment: mean.commitment,
            total: mean.total,
        };
        debug!("vq epoch {epoch}: {log:?}");
        history.push(log);

        // lr = 0 freezes every parameter, including code restarts
        if cfg.restart_dead_codes && cfg.lr > 0.0 {
            let n = restart_dead_codes(&mut vq, &usable)?;
            if n > 0 {
                debug!("epoch {epoch}: restarted {n} unused codes");
            }
        }
        if !vq.all_finite() {
            return Err(Error::Diverged(format!("epoch {epoch}: non-finite parameters")));
        }
    }
    if let Some(last) = history.last() {
        info!("vq pretraining done: final mean loss {:.4}", last.total);
    }
    Ok((vq, history))
}

/// k-means++ seeding of codes `1..M` from adapter outputs: the first code
/// is a uniform draw, each further one is drawn with probability
/// proportional to the squared distance to the nearest chosen code.
/// `s0` keeps its row.
pub fn kmeans_pp_init<R: Rng + ?Sized>(vq: &mut VqSign, corpus: &[ArrayView2<'_, f64>], rng: &mut R) -> Result<()> {
    let zs: Vec<Array2<f64>> = corpus.iter().map(|x| vq.features(*x)).collect::<Result<_>>()?;
    let rows: Vec<ArrayView1<'_, f64>> = zs.iter().flat_map(|z| z.rows()).collect();
    if rows.is_empty() {
        return Err(Error::EmptyInput);
    }
    let sq = |a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>| -> f64 { a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum() };
    let mut dists = vec![f64::INFINITY; rows.len()];
    let mut pick = rng.random_range(0..rows.len());
    for code in 1..vq.codebook.size() {
        let chosen = rows[pick];
        vq.codebook.embeddings.row_mut(code).assign(&chosen);
        for (d, r) in dists.iter_mut().zip(&rows) {
            *d = d.min(sq(*r, chosen));
        }
        let total: f64 = dists.iter().sum();
        if !(total > 0.0) {
            // fewer distinct rows than codes; the rest keep their random init
            break;
        }
        let mut u = rng.random_range(0.0..total);
        pick = dists.len() - 1;
        for (i, d) in dists.iter().enumerate() {
            if u < *d {
                pick = i;
                break;
            }
            u -= d;
        }
    }
    Ok(())
}

/// Moves every code (id ≥ 1) that no feature maps to onto the feature
/// farthest from its current code, updating distances after each move.
/// Returns the number of codes moved.
pub fn restart_dead_codes(vq: &mut VqSign, corpus: &[ArrayView2<'_, f64>]) -> Result<usize> {
    let zs: Vec<Array2<f64>> = corpus.iter().map(|x| vq.features(*x)).collect::<Result<_>>()?;
    let mut used = vec![false; vq.codebook.size()];
    let mut rows: Vec<(usize, usize)> = Vec::new();
    let mut dists: Vec<f64> = Vec::new();
    for (s, z) in zs.iter().enumerate() {
        for (t, r) in z.rows().into_iter().enumerate() {
            let (id, d) = vq.codebook.nearest(r);
            used[id as usize] = true;
            rows.push((s, t));
            dists.push(d);
        }
    }
    let mut moved = 0;
    for code in 1..vq.codebook.size() {
        if used[code] {
            continue;
        }
        let Some((best, _)) = dists
            .iter()
            .enumerate()
            .filter(|(_, d)| **d > 0.0)
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
        else {
            break;
        };
        let (s, t) = rows[best];
        let target = zs[s].row(t).to_owned();
        vq.codebook.embeddings.row_mut(code).assign(&target);
        for (i, &(s2, t2)) in rows.iter().enumerate() {
            let d: f64 = zs[s2].row(t2).iter().zip(target.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < dists[i] {
                dists[i] = d;
            }
        }
        moved += 1;
    }
    Ok(moved)
}
