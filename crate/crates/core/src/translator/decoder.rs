use std::path::Path;

use log::{debug, info};
use ndarray::{s, Array1, Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::loss::{sim_loss, sim_loss_grad};
use crate::alignment::{TextEmbeddingSet, TextToken};
use crate::error::{Error, Result};
use crate::nn::{slice2, slice2_mut, Adam, GruCell, GruTrace, Linear, Params};

pub const PAD: u32 = 0;
pub const BOS: u32 = 1;
pub const EOS: u32 = 2;
/// Stands in for the text prompt in front of the sign prefix.
pub const PROMPT: u32 = 3;
/// Id of the first ordinary text token.
pub const FIRST_TEXT_TOKEN: u32 = 4;

/// Small recurrent decoder standing in for a frozen language model.
///
/// Input layout: `[PROMPT] prefix… [BOS] y₀ … y_{L−1}`; the states from BOS
/// onward predict `y₀ … y_{L−1} EOS`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyDecoder {
    pub embed: Array2<f64>,
    pub gru: GruCell,
    pub out: Linear,
    pub frozen: bool,
}

#[derive(Debug, Clone)]
pub struct DecoderPass {
    pub trace: GruTrace,
    pub logits: Array2<f64>,
    /// `target ++ [EOS]`
    pub labels: Vec<u32>,
    prefix_len: usize,
    inputs_ids: Vec<Option<u32>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationOutput {
    /// Generated tokens, without the terminating EOS.
    pub ids: Vec<u32>,
    /// Logits of every decoding step, including the one that produced EOS.
    pub logits: Vec<Vec<f64>>,
    pub stopped_at_eos: bool,
}

impl ToyDecoder {
    pub fn new<R: Rng + ?Sized>(vocab_size: usize, d_text: usize, rng: &mut R) -> Result<Self> {
        if vocab_size <= FIRST_TEXT_TOKEN as usize {
            return Err(Error::InvalidConfig("decoder vocabulary needs at least one text token".into()));
        }
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        Ok(Self {
            embed: Array2::from_shape_simple_fn((vocab_size, d_text), || normal.sample(rng)),
            gru: GruCell::new(d_text, d_text, rng),
            out: Linear::new(d_text, vocab_size, 1.0, rng),
            frozen: false,
        })
    }

    pub fn vocab_size(&self) -> usize {
        self.embed.nrows()
    }

    pub fn dim(&self) -> usize {
        self.embed.ncols()
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            embed: Array2::zeros(self.embed.raw_dim()),
            gru: GruCell::zeros(self.gru.input_dim(), self.gru.hidden_dim()),
            out: Linear::zeros(self.out.input_dim(), self.out.output_dim()),
            frozen: false,
        }
    }

    fn check_prefix(&self, prefix: ArrayView2<'_, f64>) -> Result<()> {
        if prefix.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: prefix.ncols(),
            });
        }
        Ok(())
    }

    fn check_token(&self, t: u32) -> Result<()> {
        if t as usize >= self.vocab_size() {
            return Err(Error::Format(format!("text token {t} outside vocabulary of {}", self.vocab_size())));
        }
        Ok(())
    }

    /// Teacher-forced pass over `prefix` and `target`.
    pub fn forward(&self, prefix: ArrayView2<'_, f64>, target: &[u32]) -> Result<DecoderPass> {
        self.check_prefix(prefix)?;
        for &t in target {
            self.check_token(t)?;
        }
        let n = prefix.nrows();
        let mut ids: Vec<Option<u32>> = vec![Some(PROMPT)];
        ids.extend(std::iter::repeat_n(None, n));
        ids.push(Some(BOS));
        ids.extend(target.iter().map(|&t| Some(t)));

        let mut inputs = Array2::zeros((ids.len(), self.dim()));
        for (t, id) in ids.iter().enumerate() {
            match id {
                Some(tok) => inputs.row_mut(t).assign(&self.embed.row(*tok as usize)),
                None => inputs.row_mut(t).assign(&prefix.row(t - 1)),
            }
        }
        let trace = self.gru.forward(inputs.view(), None);
        let read = trace.states.slice(s![1 + n.., ..]);
        let logits = self.out.forward(read);
        let mut labels = target.to_vec();
        labels.push(EOS);
        Ok(DecoderPass {
            trace,
            logits,
            labels,
            prefix_len: n,
            inputs_ids: ids,
        })
    }

    /// Gradients for upstream `d_logits`: parameter gradients and the
    /// gradient with respect to the prefix rows.
    pub fn backward(&self, pass: &DecoderPass, d_logits: ArrayView2<'_, f64>) -> (ToyDecoder, Array2<f64>) {
        let n = pass.prefix_len;
        let read = pass.trace.states.slice(s![1 + n.., ..]);
        let (g_out, d_read) = self.out.backward(read, d_logits);
        let mut d_states = Array2::zeros(pass.trace.states.raw_dim());
        d_states.slice_mut(s![1 + n.., ..]).assign(&d_read);
        let back = self.gru.backward(&pass.trace, d_states.view());
        let mut grads = self.zeros_like();
        grads.gru = back.grads;
        grads.out = g_out;
        for (t, id) in pass.inputs_ids.iter().enumerate() {
            if let Some(tok) = id {
                grads.embed.row_mut(*tok as usize).scaled_add(1.0, &back.d_inputs.row(t));
            }
        }
        let d_prefix = back.d_inputs.slice(s![1..1 + n, ..]).to_owned();
        (grads, d_prefix)
    }

    /// Greedy decoding after `[PROMPT] prefix [BOS]`.
    pub fn generate(&self, prefix: ArrayView2<'_, f64>, max_len: usize) -> Result<GenerationOutput> {
        self.check_prefix(prefix)?;
        let mut h = Array1::zeros(self.dim());
        h = self.gru.step(self.embed.row(PROMPT as usize), h.view());
        for row in prefix.rows() {
            h = self.gru.step(row, h.view());
        }
        h = self.gru.step(self.embed.row(BOS as usize), h.view());
        let mut ids = Vec::new();
        let mut logits = Vec::new();
        let mut stopped_at_eos = false;
        while ids.len() < max_len {
            let l = self.out.weight.dot(&h) + &self.out.bias;
            let best = l
                .iter()
                .enumerate()
                .fold((0usize, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc })
                .0 as u32;
            logits.push(l.to_vec());
            if best == EOS {
                stopped_at_eos = true;
                break;
            }
            ids.push(best);
            h = self.gru.step(self.embed.row(best as usize), h.view());
        }
        Ok(GenerationOutput {
            ids,
            logits,
            stopped_at_eos,
        })
    }

    /// SHA-256 over the little-endian bytes of every parameter.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        for t in self.tensors() {
            for v in t {
                hasher.update(v.to_le_bytes());
            }
        }
        hex::encode(hasher.finalize())
    }

    /// Embedding rows of the ordinary text tokens.
    pub fn text_embeddings(&self) -> Result<TextEmbeddingSet> {
        let tokens = (FIRST_TEXT_TOKEN as usize..self.vocab_size())
            .map(|id| TextToken {
                id: id as u32,
                text: format!("w{}", id as u32 - FIRST_TEXT_TOKEN),
                embedding: self.embed.row(id).to_vec(),
            })
            .collect();
        TextEmbeddingSet::new(self.dim(), tokens)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = DecoderFile {
            version: 1,
            kind: "decoder".into(),
            hash: self.content_hash(),
            decoder: self.clone(),
        };
        std::fs::write(path, serde_json::to_string(&file)? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file: DecoderFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if file.version != 1 || file.kind != "decoder" {
            return Err(Error::Format(format!("{} is not a version-1 decoder", path.display())));
        }
        if file.decoder.content_hash() != file.hash {
            return Err(Error::Format(format!("{}: decoder content hash mismatch", path.display())));
        }
        Ok(file.decoder)
    }
}

#[derive(Serialize, Deserialize)]
struct DecoderFile {
    version: u32,
    kind: String,
    hash: String,
    decoder: ToyDecoder,
}

impl Params for ToyDecoder {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut v = vec![slice2(&self.embed)];
        v.extend(self.gru.tensors());
        v.extend(self.out.tensors());
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = vec![slice2_mut(&mut self.embed)];
        v.extend(self.gru.tensors_mut());
        v.extend(self.out.tensors_mut());
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoderConfig {
    pub d_text: usize,
    pub steps: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Std of the Gaussian noise added to prefix rows.
    pub noise_sigma: f64,
    /// Probability of a PAD row after each prefix row.
    pub pad_prob: f64,
    pub sentence_len_range: (usize, usize),
    pub seed: u64,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        Self {
            d_text: 32,
            steps: 6000,
            batch_size: 16,
            lr: 0.01,
            noise_sigma: 0.1,
            pad_prob: 0.0,
            sentence_len_range: (1, 6),
            seed: 0,
        }
    }
}

/// Noisy copy of `words`' embeddings with occasional PAD rows.
fn copy_prefix<R: Rng + ?Sized>(dec: &ToyDecoder, words: &[u32], cfg: &DecoderConfig, rng: &mut R) -> Array2<f64> {
    let noise = Normal::new(0.0, cfg.noise_sigma.max(0.0)).expect("finite sigma");
    let coin = Uniform::new(0.0, 1.0).expect("unit interval");
    let mut rows: Vec<Array1<f64>> = Vec::new();
    let mut push = |tok: u32, rng: &mut R| {
        let mut r = dec.embed.row(tok as usize).to_owned();
        if cfg.noise_sigma > 0.0 {
            r.mapv_inplace(|v| v + noise.sample(rng));
        }
        rows.push(r);
    };
    for &w in words {
        push(w, rng);
        if coin.sample(rng) < cfg.pad_prob {
            push(PAD, rng);
        }
    }
    crate::nn::stack_rows(&rows, dec.dim())
}

/// Trains a fresh decoder on a text-only copy task: the prefix is a noisy
/// copy of the sentence's own embeddings (held fixed within each step) and
/// the target is the sentence. Returns the decoder, frozen, and the mean
/// loss per step.
pub fn pretrain_decoder(n_text_tokens: usize, cfg: &DecoderConfig) -> Result<(ToyDecoder, Vec<f64>)> {
    let (lmin, lmax) = cfg.sentence_len_range;
    if n_text_tokens == 0 || lmin < 1 || lmin > lmax || cfg.batch_size == 0 {
        return Err(Error::InvalidConfig("decoder pretraining needs text tokens and a valid length range".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut dec = ToyDecoder::new(FIRST_TEXT_TOKEN as usize + n_text_tokens, cfg.d_text, &mut rng)?;
    let mut opt = Adam::new(cfg.lr);
    let mut history = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        let mut grads = dec.zeros_like();
        let mut loss = 0.0;
        for _ in 0..cfg.batch_size {
            let len = rng.random_range(lmin..=lmax);
            let words: Vec<u32> = (0..len)
                .map(|_| FIRST_TEXT_TOKEN + rng.random_range(0..n_text_tokens as u32))
                .collect();
            let prefix = copy_prefix(&dec, &words, cfg, &mut rng);
            let pass = dec.forward(prefix.view(), &words)?;
            loss += sim_loss(pass.logits.view(), &pass.labels)?;
            let d_logits = sim_loss_grad(pass.logits.view(), &pass.labels)?;
            let (g, _) = dec.backward(&pass, d_logits.view());
            for (acc, gt) in grads.tensors_mut().into_iter().zip(g.tensors()) {
                acc.iter_mut().zip(gt).for_each(|(a, b)| *a += b / cfg.batch_size as f64);
            }
        }
        loss /= cfg.batch_size as f64;
        if !loss.is_finite() || !grads.all_finite() {
            return Err(Error::Diverged(format!("decoder step {step}: loss {loss}")));
        }
        history.push(loss);
        if step % 500 == 0 {
            debug!("decoder step {step}: loss {loss:.4}");
        }
        // linear decay to a tenth of the base rate
        opt.lr = cfg.lr * (1.0 - 0.9 * step as f64 / cfg.steps as f64);
        opt.step(dec.tensors_mut(), grads.tensors());
    }
    dec.frozen = true;
    info!("decoder pretraining done: final loss {:.4}", history.last().copied().unwrap_or(f64::NAN));
    Ok((dec, history))
}

/// Fraction of copy-task sentences the decoder reproduces exactly.
pub fn copy_accuracy(dec: &ToyDecoder, cfg: &DecoderConfig, n: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_text = dec.vocab_size() - FIRST_TEXT_TOKEN as usize;
    let mut hits = 0;
    for _ in 0..n {
        let len = rng.random_range(cfg.sentence_len_range.0..=cfg.sentence_len_range.1);
        let words: Vec<u32> = (0..len)
            .map(|_| FIRST_TEXT_TOKEN + rng.random_range(0..n_text as u32))
            .collect();
        let prefix = copy_prefix(dec, &words, cfg, &mut rng);
        if dec.generate(prefix.view(), 2 * len + 2)?.ids == words {
            hits += 1;
        }
    }
    Ok(hits as f64 / n.max(1) as f64)
}
