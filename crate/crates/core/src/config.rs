//! Pipeline configuration: one flat JSON object with namespaced keys such as
//! `"vq.gamma"`. Unknown keys are rejected; missing keys take defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::alignment::{AlignConfig, KernelConfig};
use crate::cra_vocab::{SolverConfig, VocabConfig};
use crate::error::{Error, Result};
use crate::translator::{DecoderConfig, FinetuneConfig};
use crate::vq_sign::VqTrainConfig;

/// Environment variable that overrides `seed`.
pub const SEED_ENV: &str = "SIGNTOK_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,

    /// Artifact directory; relative paths resolve against the config file.
    #[serde(rename = "paths.artifacts")]
    pub artifacts: PathBuf,

    #[serde(rename = "clip.len")]
    pub clip_len: usize,
    #[serde(rename = "clip.stride")]
    pub clip_stride: usize,

    #[serde(rename = "synth.n_chars")]
    pub synth_n_chars: usize,
    #[serde(rename = "synth.n_words")]
    pub synth_n_words: usize,
    #[serde(rename = "synth.word_len_min")]
    pub synth_word_len_min: usize,
    #[serde(rename = "synth.word_len_max")]
    pub synth_word_len_max: usize,
    #[serde(rename = "synth.sentence_len_min")]
    pub synth_sentence_len_min: usize,
    #[serde(rename = "synth.sentence_len_max")]
    pub synth_sentence_len_max: usize,
    #[serde(rename = "synth.noise_sigma")]
    pub synth_noise_sigma: f64,
    #[serde(rename = "synth.repeat_min")]
    pub synth_repeat_min: usize,
    #[serde(rename = "synth.repeat_max")]
    pub synth_repeat_max: usize,
    #[serde(rename = "synth.n_train")]
    pub synth_n_train: usize,
    #[serde(rename = "synth.n_test")]
    pub synth_n_test: usize,

    /// Feature dimension d.
    #[serde(rename = "model.d")]
    pub d: usize,
    /// Character codebook size M, slow-down token included.
    #[serde(rename = "model.codebook_size")]
    pub codebook_size: usize,
    #[serde(rename = "model.d_text")]
    pub d_text: usize,

    #[serde(rename = "vq.gamma")]
    pub vq_gamma: f64,
    #[serde(rename = "vq.lambda_neg")]
    pub vq_lambda_neg: f64,
    #[serde(rename = "vq.n_negatives")]
    pub vq_n_negatives: usize,
    #[serde(rename = "vq.k")]
    pub vq_k: usize,
    #[serde(rename = "vq.lr")]
    pub vq_lr: f64,
    #[serde(rename = "vq.epochs")]
    pub vq_epochs: usize,
    #[serde(rename = "vq.batch_size")]
    pub vq_batch_size: usize,
    #[serde(rename = "vq.restart_dead_codes")]
    pub vq_restart_dead_codes: bool,
    #[serde(rename = "vq.init_from_data")]
    pub vq_init_from_data: bool,

    #[serde(rename = "vocab.m")]
    pub vocab_m: usize,
    #[serde(rename = "vocab.r_max")]
    pub vocab_r_max: usize,
    #[serde(rename = "vocab.l_max")]
    pub vocab_l_max: usize,
    /// `null` means `4 · r_max · m`.
    #[serde(rename = "vocab.pool_size")]
    pub vocab_pool_size: Option<usize>,
    #[serde(rename = "vocab.epsilon")]
    pub vocab_epsilon: f64,
    #[serde(rename = "vocab.tol")]
    pub vocab_tol: f64,
    #[serde(rename = "vocab.max_iters")]
    pub vocab_max_iters: usize,

    #[serde(rename = "align.lr")]
    pub align_lr: f64,
    #[serde(rename = "align.steps")]
    pub align_steps: usize,
    /// Fixed kernel bandwidth; `null` selects the median heuristic.
    #[serde(rename = "align.kernel_sigma")]
    pub align_kernel_sigma: Option<f64>,
    #[serde(rename = "align.train_embeddings")]
    pub align_train_embeddings: bool,

    #[serde(rename = "decoder.steps")]
    pub decoder_steps: usize,
    #[serde(rename = "decoder.batch_size")]
    pub decoder_batch_size: usize,
    #[serde(rename = "decoder.lr")]
    pub decoder_lr: f64,
    #[serde(rename = "decoder.noise_sigma")]
    pub decoder_noise_sigma: f64,
    #[serde(rename = "decoder.pad_prob")]
    pub decoder_pad_prob: f64,

    #[serde(rename = "finetune.lr")]
    pub finetune_lr: f64,
    #[serde(rename = "finetune.epochs")]
    pub finetune_epochs: usize,
    #[serde(rename = "finetune.batch_size")]
    pub finetune_batch_size: usize,
    #[serde(rename = "finetune.lambda1")]
    pub finetune_lambda1: f64,
    #[serde(rename = "finetune.lambda2")]
    pub finetune_lambda2: f64,

    #[serde(rename = "translate.max_len")]
    pub translate_max_len: usize,
    #[serde(rename = "translate.prompt_template")]
    pub prompt_template: String,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            artifacts: PathBuf::from("artifacts"),
            clip_len: crate::ingest::DEFAULT_CLIP_LEN,
            clip_stride: crate::ingest::DEFAULT_CLIP_STRIDE,
            synth_n_chars: 16,
            synth_n_words: 20,
            synth_word_len_min: 2,
            synth_word_len_max: 3,
            synth_sentence_len_min: 2,
            synth_sentence_len_max: 4,
            synth_noise_sigma: 0.05,
            synth_repeat_min: 1,
            synth_repeat_max: 2,
            synth_n_train: 300,
            synth_n_test: 60,
            d: 16,
            codebook_size: 17,
            d_text: 32,
            vq_gamma: 0.25,
            vq_lambda_neg: 1.0,
            vq_n_negatives: 10,
            vq_k: 3,
            vq_lr: 0.01,
            vq_epochs: 15,
            vq_batch_size: 8,
            vq_restart_dead_codes: true,
            vq_init_from_data: true,
            vocab_m: 8,
            vocab_r_max: 8,
            vocab_l_max: 5,
            vocab_pool_size: None,
            vocab_epsilon: 1e-3,
            vocab_tol: 1e-9,
            vocab_max_iters: 10_000,
            align_lr: 0.01,
            align_steps: 200,
            align_kernel_sigma: None,
            align_train_embeddings: false,
            decoder_steps: 6000,
            decoder_batch_size: 16,
            decoder_lr: 0.01,
            decoder_noise_sigma: 0.1,
            decoder_pad_prob: 0.0,
            finetune_lr: 0.006,
            finetune_epochs: 80,
            finetune_batch_size: 8,
            finetune_lambda1: 0.5,
            finetune_lambda2: 1.0,
            translate_max_len: 12,
            prompt_template: crate::translator::DEFAULT_PROMPT_TEMPLATE.to_string(),
        }
    }
}

/// Full-scale values for keys whose desk defaults differ, plus notes on
/// chosen defaults; printed next to `--print-defaults` output.
pub const ANNOTATIONS: &[(&str, &str)] = &[
    ("clip.len", "full-scale value: 13 frames per clip"),
    ("clip.stride", "full-scale value: 4 frames between clip starts"),
    ("model.d", "full-scale value: 1024 (desk scale: 16)"),
    ("model.codebook_size", "full-scale value: 256 (desk scale: 17)"),
    ("vq.gamma", "full-scale value: 0.25"),
    ("vq.k", "full-scale value: 3"),
    ("vq.lr", "full-scale value: 0.01"),
    ("vq.lambda_neg", "no reference value; chosen default"),
    ("vq.n_negatives", "no reference value; chosen default"),
    ("vocab.m", "full-scale value: 32 (desk scale: 8)"),
    ("vocab.epsilon", "no reference value; chosen default"),
    ("finetune.lr", "full-scale value: 0.001 (desk scale: 0.006)"),
    ("finetune.epochs", "full-scale value: 20 (desk scale: 80)"),
    ("finetune.lambda1", "full-scale value: 0.5"),
    ("finetune.lambda2", "full-scale value: 1"),
    ("translate.prompt_template", "placeholder; supply your own prompt"),
];

impl PipelineConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Reads, validates, applies the seed override, and resolves a relative
    /// artifact directory against the config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingArtifact(path.to_path_buf()));
        }
        let mut cfg = Self::from_json(&std::fs::read_to_string(path)?)?;
        cfg.apply_env_seed()?;
        if cfg.artifacts.is_relative() {
            let base = path.parent().unwrap_or(Path::new("."));
            cfg.artifacts = base.join(&cfg.artifacts);
        }
        Ok(cfg)
    }

    pub fn apply_env_seed(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.seed = v
                .trim()
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("{SEED_ENV}={v} is not an unsigned integer")))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.clip_len == 0 || self.clip_stride == 0 || self.clip_stride > self.clip_len {
            return bad("clip geometry needs 1 <= clip.stride <= clip.len");
        }
        if self.d == 0 || self.d_text == 0 {
            return bad("model.d and model.d_text must be positive");
        }
        if self.codebook_size < 2 {
            return bad("model.codebook_size must be at least 2");
        }
        if self.synth_word_len_min < 1 || self.synth_word_len_min > self.synth_word_len_max || self.synth_word_len_max > 4 {
            return bad("synth word lengths must satisfy 1 <= min <= max <= 4");
        }
        if self.synth_sentence_len_min < 1 || self.synth_sentence_len_min > self.synth_sentence_len_max {
            return bad("synth sentence lengths must satisfy 1 <= min <= max");
        }
        if self.synth_repeat_min < 1 || self.synth_repeat_min > self.synth_repeat_max {
            return bad("synth repeats must satisfy 1 <= min <= max");
        }
        if self.vocab_m == 0 || self.vocab_r_max == 0 || self.vocab_l_max == 0 {
            return bad("vocab.m, vocab.r_max and vocab.l_max must be positive");
        }
        if let Some(s) = self.align_kernel_sigma {
            if !(s > 0.0 && s.is_finite()) {
                return bad("align.kernel_sigma must be positive");
            }
        }
        for (name, v) in [
            ("vq.lr", self.vq_lr),
            ("align.lr", self.align_lr),
            ("decoder.lr", self.decoder_lr),
            ("finetune.lr", self.finetune_lr),
            ("synth.noise_sigma", self.synth_noise_sigma),
            ("decoder.noise_sigma", self.decoder_noise_sigma),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be finite and non-negative")));
            }
        }
        if !(0.0..=1.0).contains(&self.decoder_pad_prob) {
            return bad("decoder.pad_prob must lie in [0, 1]");
        }
        self.vq().validate()
    }

    pub fn vq(&self) -> VqTrainConfig {
        VqTrainConfig {
            codebook_size: self.codebook_size,
            gamma: self.vq_gamma,
            lambda_neg: self.vq_lambda_neg,
            n_negatives: self.vq_n_negatives,
            k: self.vq_k,
            lr: self.vq_lr,
            epochs: self.vq_epochs,
            batch_size: self.vq_batch_size,
            seed: self.seed.wrapping_add(10),
            restart_dead_codes: self.vq_restart_dead_codes,
            init_from_data: self.vq_init_from_data,
        }
    }

    pub fn vocab(&self, override_r: Option<usize>) -> VocabConfig {
        VocabConfig {
            m: self.vocab_m,
            r_max: self.vocab_r_max,
            l_max: self.vocab_l_max,
            pool_size: self.vocab_pool_size,
            solver: SolverConfig {
                epsilon: self.vocab_epsilon,
                tol: self.vocab_tol,
                max_iters: self.vocab_max_iters,
            },
            override_r,
        }
    }

    pub fn align(&self) -> AlignConfig {
        AlignConfig {
            lr: self.align_lr,
            steps: self.align_steps,
            kernel: self.align_kernel_sigma.map_or(KernelConfig::MedianHeuristic, KernelConfig::Fixed),
            train_embeddings: self.align_train_embeddings,
        }
    }

    pub fn decoder(&self) -> DecoderConfig {
        DecoderConfig {
            d_text: self.d_text,
            steps: self.decoder_steps,
            batch_size: self.decoder_batch_size,
            lr: self.decoder_lr,
            noise_sigma: self.decoder_noise_sigma,
            pad_prob: self.decoder_pad_prob,
            sentence_len_range: (self.synth_sentence_len_min, self.synth_sentence_len_max),
            seed: self.seed.wrapping_add(30),
        }
    }

    pub fn finetune(&self) -> FinetuneConfig {
        FinetuneConfig {
            lr: self.finetune_lr,
            epochs: self.finetune_epochs,
            batch_size: self.finetune_batch_size,
            lambda1: self.finetune_lambda1,
            lambda2: self.finetune_lambda2,
            gamma: self.vq_gamma,
            lambda_neg: self.vq_lambda_neg,
            n_negatives: self.vq_n_negatives,
            seed: self.seed.wrapping_add(50),
        }
    }
}
