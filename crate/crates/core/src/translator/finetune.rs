use log::{debug, info, warn};
use ndarray::ArrayView2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::decoder::ToyDecoder;
use super::loss::{finetune_loss, sim_loss, sim_loss_grad};
use super::model::{SignGrads, SignModel};
use crate::alignment::{mmd_loss_and_grads, TextEmbeddingSet};
use crate::cra_vocab::SignToken;
use crate::error::{Error, Result};
use crate::nn::{Adam, Params};
use crate::vq_sign::{sample_batch_negatives, VqLoss};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinetuneConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Weight of the MMD term.
    pub lambda1: f64,
    /// Weight of the text cross-entropy term.
    pub lambda2: f64,
    pub gamma: f64,
    pub lambda_neg: f64,
    pub n_negatives: usize,
    pub seed: u64,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        Self {
            lr: 0.001,
            epochs: 20,
            batch_size: 8,
            lambda1: 0.5,
            lambda2: 1.0,
            gamma: 0.25,
            lambda_neg: 1.0,
            n_negatives: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinetuneStepLog {
    pub epoch: usize,
    pub step: usize,
    pub vq: f64,
    pub mmd: f64,
    pub sim: f64,
    pub total: f64,
}

/// One paired training example: clip features and reference text tokens.
#[derive(Debug, Clone, Copy)]
pub struct Pair<'a> {
    pub features: ArrayView2<'a, f64>,
    pub reference: &'a [u32],
}

/// Teacher-forced text loss of one sample and its gradients, accumulated
/// into `grads` with weight `scale`.
pub fn sim_loss_and_grads(
    model: &SignModel,
    decoder: &ToyDecoder,
    pair: Pair<'_>,
    grads: &mut SignGrads,
    scale: f64,
) -> Result<f64> {
    let tokens = model.tokens(pair.features)?;
    let emb = model.token_embeddings(&tokens);
    let (proj, cache) = model.head.forward_cached(emb.view());
    let pass = decoder.forward(proj.view(), pair.reference)?;
    let loss = sim_loss(pass.logits.view(), &pass.labels)?;
    let d_logits = sim_loss_grad(pass.logits.view(), &pass.labels)?;
    let (_, d_proj) = decoder.backward(&pass, d_logits.view());
    let (g_head, d_emb) = model.head.backward(&cache, d_proj.view());
    for (acc, g) in grads.head.tensors_mut().into_iter().zip(g_head.tensors()) {
        acc.iter_mut().zip(g).for_each(|(a, b)| *a += scale * b);
    }
    for (t, g) in tokens.iter().zip(d_emb.rows()) {
        match *t {
            SignToken::Char(c) => grads.vq.codebook.row_mut(c as usize).scaled_add(scale, &g),
            SignToken::Word(w) => grads.word_emb.row_mut(w as usize).scaled_add(scale, &g),
        }
    }
    Ok(loss)
}

/// Character- and word-level MMD against the text set, with gradients
/// accumulated into `grads` with weight `scale`.
pub fn mmd_term(model: &SignModel, text: ArrayView2<'_, f64>, grads: &mut SignGrads, scale: f64) -> Result<f64> {
    let levels = [model.vq.codebook.embeddings.clone(), model.word_emb.clone()];
    let (loss, g_head, g_levels) = mmd_loss_and_grads(&levels, &model.head, text, model.sigma)?;
    for (acc, g) in grads.head.tensors_mut().into_iter().zip(g_head.tensors()) {
        acc.iter_mut().zip(g).for_each(|(a, b)| *a += scale * b);
    }
    grads.vq.codebook.scaled_add(scale, &g_levels[0]);
    grads.word_emb.scaled_add(scale, &g_levels[1]);
    Ok(loss)
}

/// Joint fine-tuning of every sign-side parameter under
/// `L^VQ + λ₁ L^MMD + λ₂ L^sim` with the decoder held fixed.
///
/// `L^VQ` and `L^sim` are batch means; `L^MMD` is evaluated once per batch.
/// Fails if the decoder is not marked frozen or if its content hash changes.
pub fn finetune(
    model: &mut SignModel,
    decoder: &ToyDecoder,
    text: &TextEmbeddingSet,
    corpus: &[Pair<'_>],
    cfg: &FinetuneConfig,
) -> Result<Vec<FinetuneStepLog>> {
    if !decoder.frozen {
        return Err(Error::InvalidConfig("fine-tuning requires a frozen decoder".into()));
    }
    if cfg.batch_size == 0 || cfg.n_negatives == 0 {
        return Err(Error::InvalidConfig("batch_size and n_negatives must be at least 1".into()));
    }
    let hash_before = decoder.content_hash();
    let k = model.vq.k_max();
    let usable: Vec<Pair<'_>> = corpus.iter().copied().filter(|p| p.features.nrows() > k).collect();
    if usable.is_empty() {
        return Err(Error::EmptyInput);
    }
    if usable.len() < corpus.len() {
        warn!("skipping {} samples not longer than K = {k}", corpus.len() - usable.len());
    }
    let text_m = text.matrix();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = Adam::new(cfg.lr);
    let mut order: Vec<usize> = (0..usable.len()).collect();
    let mut history = Vec::new();
    let total_steps = cfg.epochs * usable.len().div_ceil(cfg.batch_size);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for (step, batch) in order.chunks(cfg.batch_size).enumerate() {
            let scale = 1.0 / batch.len() as f64;
            let xs: Vec<ArrayView2<'_, f64>> = batch.iter().map(|&i| usable[i].features).collect();
            let lens: Vec<usize> = xs.iter().map(|x| x.nrows()).collect();
            let negs = sample_batch_negatives(&mut rng, &lens, k, cfg.n_negatives);
            let (vq_sum, vq_grads): (VqLoss, _) =
                model.vq.batch_loss_and_grads(&xs, &negs, cfg.gamma, cfg.lambda_neg)?;

            let mut grads = model.zero_grads();
            for (acc, g) in grads.vq.tensors_mut().into_iter().zip(vq_grads.tensors()) {
                acc.iter_mut().zip(g).for_each(|(a, b)| *a += scale * b);
            }
            let mut sim = 0.0;
            for &i in batch {
                sim += sim_loss_and_grads(model, decoder, usable[i], &mut grads, cfg.lambda2 * scale)?;
            }
            sim *= scale;
            let mmd = mmd_term(model, text_m.view(), &mut grads, cfg.lambda1)?;
            let vq = vq_sum.total * scale;
            let total = finetune_loss(vq, mmd, sim, cfg.lambda1, cfg.lambda2);
            if !total.is_finite() || !grads.all_finite() {
                return Err(Error::Diverged(format!("fine-tune epoch {epoch} step {step}: loss {total}")));
            }
            history.push(FinetuneStepLog {
                epoch,
                step,
                vq,
                mmd,
                sim,
                total,
            });
            // linear decay to a tenth of the base rate
            opt.lr = cfg.lr * (1.0 - 0.9 * (history.len() - 1) as f64 / total_steps as f64);
            opt.step(model.tensors_mut(), grads.tensors());
        }
        if let Some(last) = history.last() {
            debug!("fine-tune epoch {epoch}: {last:?}");
        }
    }
    if decoder.content_hash() != hash_before {
        return Err(Error::Diverged("decoder parameters changed during fine-tuning".into()));
    }
    if let Some(last) = history.last() {
        info!("fine-tuning done: sim {:.4}, mmd {:.4}, vq {:.4}", last.sim, last.mmd, last.vq);
    }
    Ok(history)
}

/// Mean teacher-forced text loss over a corpus.
pub fn mean_sim_loss(model: &SignModel, decoder: &ToyDecoder, corpus: &[Pair<'_>]) -> Result<f64> {
    let mut scratch = model.zero_grads();
    let mut total = 0.0;
    for &p in corpus {
        total += sim_loss_and_grads(model, decoder, p, &mut scratch, 0.0)?;
    }
    Ok(total / corpus.len().max(1) as f64)
}
