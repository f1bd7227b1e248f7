//! Stage orchestration over an artifact directory.
//!
//! Every stage reads its inputs from earlier stages' files, writes its own,
//! and returns a one-line summary. Outputs are byte-identical for identical
//! inputs and seed.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::info;
use ndarray::{Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::alignment::{align, ProjectionHead, TextEmbeddingSet};
use crate::char_preproc::preprocess;
use crate::config::PipelineConfig;
use crate::cra_vocab::{compose_word_embeddings, select_vocab, WordCodebook};
use crate::error::{Error, Result};
use crate::eval_metrics::EvalReport;
use crate::ingest::{
    encode_clips, generate_synthetic_corpus, load_corpus, plan_clips, random_word_table, rows_to_matrix,
    save_corpus, IdentityEncoder, SynthCorpus, SynthSpec,
};
use crate::translator::{
    finetune, pretrain_decoder, serialize_prompt, translate, Pair, PromptPayload, SignModel, ToyDecoder,
    FIRST_TEXT_TOKEN,
};
use crate::vq_sign::{codebook_usage, train_vq_sign, VqSign};

/// File layout under the artifact directory.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub root: PathBuf,
}

impl Artifacts {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn train_corpus(&self) -> PathBuf {
        self.root.join("corpus").join("train")
    }
    pub fn test_corpus(&self) -> PathBuf {
        self.root.join("corpus").join("test")
    }
    pub fn char_codebook(&self) -> PathBuf {
        self.root.join("char_codebook.json")
    }
    pub fn context_model(&self) -> PathBuf {
        self.root.join("context_model.json")
    }
    pub fn vq_log(&self) -> PathBuf {
        self.root.join("vq_train_log.csv")
    }
    pub fn word_codebook(&self) -> PathBuf {
        self.root.join("word_codebook.json")
    }
    pub fn preprocess_log(&self) -> PathBuf {
        self.root.join("preprocess.csv")
    }
    pub fn entropy_curve(&self) -> PathBuf {
        self.root.join("entropy_curve.csv")
    }
    pub fn decoder(&self) -> PathBuf {
        self.root.join("decoder.json")
    }
    pub fn decoder_log(&self) -> PathBuf {
        self.root.join("decoder_train_log.csv")
    }
    pub fn text_embeddings(&self) -> PathBuf {
        self.root.join("text_embeddings.json")
    }
    pub fn aligned_char_codebook(&self) -> PathBuf {
        self.root.join("aligned_char_codebook.json")
    }
    pub fn aligned_word_codebook(&self) -> PathBuf {
        self.root.join("aligned_word_codebook.json")
    }
    pub fn projection(&self) -> PathBuf {
        self.root.join("projection.json")
    }
    pub fn align_log(&self) -> PathBuf {
        self.root.join("align_log.csv")
    }
    pub fn final_dir(&self) -> PathBuf {
        self.root.join("final")
    }
    pub fn finetune_log(&self) -> PathBuf {
        self.final_dir().join("finetune_log.csv")
    }
    pub fn report(&self) -> PathBuf {
        self.root.join("report.json")
    }
    pub fn predictions(&self) -> PathBuf {
        self.root.join("predictions.jsonl")
    }
}

fn require(path: &Path) -> Result<&Path> {
    if path.exists() {
        Ok(path)
    } else {
        Err(Error::MissingArtifact(path.to_path_buf()))
    }
}

fn load_split(dir: &Path) -> Result<(SynthSpec, SynthCorpus)> {
    require(&dir.join("spec.json"))?;
    require(&dir.join("samples.jsonl"))?;
    load_corpus(dir)
}

fn feature_views(corpus: &SynthCorpus) -> Vec<ArrayView2<'_, f64>> {
    corpus.samples.iter().map(|s| s.features.values.view()).collect()
}

fn load_vq(a: &Artifacts, codebook: &Path) -> Result<VqSign> {
    VqSign::load(require(codebook)?, require(&a.context_model())?)
}

/// Train/test corpora over one shared synthetic language.
pub fn synth_specs(cfg: &PipelineConfig) -> Result<(SynthSpec, SynthSpec)> {
    let word_table = random_word_table(
        cfg.synth_n_words,
        cfg.synth_n_chars,
        (cfg.synth_word_len_min, cfg.synth_word_len_max),
        cfg.seed.wrapping_add(1),
    )?;
    let text_map = word_table.keys().map(|&w| (w, w + FIRST_TEXT_TOKEN)).collect();
    let train = SynthSpec {
        n_char_prototypes: cfg.synth_n_chars,
        dim: cfg.d,
        word_table,
        sentence_len_range: (cfg.synth_sentence_len_min, cfg.synth_sentence_len_max),
        noise_sigma: cfg.synth_noise_sigma,
        repeat_range: (cfg.synth_repeat_min, cfg.synth_repeat_max),
        text_map,
        n_samples: cfg.synth_n_train,
        seed: cfg.seed,
        sample_seed: cfg.seed.wrapping_add(2),
    };
    let test = SynthSpec {
        n_samples: cfg.synth_n_test,
        sample_seed: cfg.seed.wrapping_add(3),
        ..train.clone()
    };
    Ok((train, test))
}

pub fn run_synth_data(cfg: &PipelineConfig) -> Result<String> {
    let a = Artifacts::new(&cfg.artifacts);
    let (train_spec, test_spec) = synth_specs(cfg)?;
    let train = generate_synthetic_corpus(&train_spec)?;
    let test = generate_synthetic_corpus(&test_spec)?;
    save_corpus(&a.train_corpus(), &train_spec, &train)?;
    save_corpus(&a.test_corpus(), &test_spec, &test)?;
    Ok(format!(
        "synth-data: {} train / {} test samples, {} words over {} characters",
        train.samples.len(),
        test.samples.len(),
        train_spec.word_table.len(),
        train_spec.n_char_prototypes
    ))
}

pub fn run_pretrain_vq(cfg: &PipelineConfig) -> Result<String> {
    let a = Artifacts::new(&cfg.artifacts);
    let (_, train) = load_split(&a.train_corpus())?;
    let xs = feature_views(&train);
    let (mut vq, history) = train_vq_sign(&xs, &cfg.vq())?;
    vq.codebook.freq = codebook_usage(&vq, &xs)?;
    vq.save(&a.char_codebook(), &a.context_model())?;
    let mut csv = String::from("epoch,cpc,codebook,commitment,total\n");
    for h in &history {
        writeln!(csv, "{},{},{},{},{}", h.epoch, h.cpc, h.codebook, h.commitment, h.total).expect("string write");
    }
    std::fs::write(a.vq_log(), csv)?;
    let used = vq.codebook.freq.iter().filter(|&&f| f > 0.0).count();
    Ok(format!(
        "pretrain-vq: {} epochs, final loss {:.4}, {used}/{} codes used",
        history.len(),
        history.last().map_or(f64::NAN, |h| h.total),
        vq.codebook.size()
    ))
}

fn char_corpus(vq: &VqSign, corpus: &SynthCorpus) -> Result<Vec<Vec<u32>>> {
    corpus.samples.iter().map(|s| vq.char_tokens(s.features.values.view())).collect()
}

/// Quantizes the training split with the pretrained front end and records
/// each sequence's repeated-run length alpha and its collapsed length.
pub fn run_preprocess(cfg: &PipelineConfig) -> Result<String> {
    let a = Artifacts::new(&cfg.artifacts);
    let (_, train) = load_split(&a.train_corpus())?;
    let vq = load_vq(&a, &a.char_codebook())?;
    let mut csv = String::from("sample,alpha,quantized_len,preprocessed_len\n");
    let mut alphas = Vec::new();
    for (i, s) in train.samples.iter().enumerate() {
        let q = vq.quantize(s.features.values.view())?;
        let (out, stats) = preprocess(&q.ids, vq.codebook.s0_id())?;
        info!("sample {i}: alpha {}", stats.alpha);
        writeln!(csv, "{i},{},{},{}", stats.alpha, q.ids.len(), out.len()).expect("string write");
        if stats.alpha.is_finite() {
            alphas.push(stats.alpha);
        }
    }
    std::fs::write(a.preprocess_log(), csv)?;
    let mean = alphas.iter().sum::<f64>() / alphas.len().max(1) as f64;
    Ok(format!(
        "preprocess: {} sequences, {} with repeats, mean alpha {mean:.3}",
        train.samples.len(),
        alphas.len()
    ))
}

pub fn run_build_vocab(cfg: &PipelineConfig, override_r: Option<usize>) -> Result<String> {
    let a = Artifacts::new(&cfg.artifacts);
    let vq = load_vq(&a, &a.char_codebook())?;
    let (_, train) = load_split(&a.train_corpus())?;
    let chars = char_corpus(&vq, &train)?;
    let (curve, mut words) = select_vocab(&chars, &cfg.vocab(override_r))?;
    compose_word_embeddings(&mut words, &vq.codebook, &vq.context)?;
    words.save(&a.word_codebook())?;
    std::fs::write(a.entropy_curve(), curve.to_csv())?;
    Ok(format!(
        "build-vocab: chosen r = {} ({} word tokens, entropy {:.4})",
        curve.chosen_r,
        words.len(),
        words.entropy
    ))
}

fn n_text_tokens(spec: &SynthSpec) -> usize {
    spec.text_map
        .values()
        .map(|&t| (t + 1).saturating_sub(FIRST_TEXT_TOKEN) as usize)
        .max()
        .unwrap_or(0)
}

pub fn run_pretrain_decoder(cfg: &PipelineConfig) -> Result<String> {
    let a = Artifacts::new(&cfg.artifacts);
    let (spec, _) = load_split(&a.train_corpus())?;
    let (dec, history) = pretrain_decoder(n_text_tokens(&spec), &cfg.decoder())?;
    dec.save(&a.decoder())?;
    dec.text_embeddings()?.save(&a.text_embeddings())?;
    let mut csv = String::from("step,loss\n");
    for (i, l) in history.iter().enumerate() {
        writeln!(csv, "{i},{l}").expect("string write");
    }
    std::fs::write(a.decoder_log(), csv)?;
    Ok(format!(
        "pretrain-decoder: {} steps, final loss {:.4}, hash {}",
        history.len(),
        history.last().copied().unwrap_or(f64::NAN),
        &dec.content_hash()[..12]
    ))
}

pub fn run_align(cfg: &PipelineConfig) -> Result<String> {
    let a = Artifacts::new(&cfg.artifacts);
    let mut vq = load_vq(&a, &a.char_codebook())?;
    let mut words = WordCodebook::load(require(&a.word_codebook())?)?;
    let text = TextEmbeddingSet::load(require(&a.text_embeddings())?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(40));
    let mut head = ProjectionHead::new(vq.dim(), text.dim, &mut rng);
    let mut levels = vec![vq.codebook.embeddings.clone(), words.embedding_matrix()];
    let report = align(&mut levels, &mut head, &text, &cfg.align())?;

    vq.codebook.embeddings = levels[0].clone();
    if !words.is_empty() {
        words.set_embeddings(&levels[1])?;
    }
    vq.codebook.save(&a.aligned_char_codebook())?;
    words.save(&a.aligned_word_codebook())?;
    let model = SignModel::new(vq, words, head, report.sigma)?;
    model.save_projection(&a.projection())?;
    let mut csv = String::from("step,mmd\n");
    for (i, l) in report.history.iter().enumerate() {
        writeln!(csv, "{i},{l}").expect("string write");
    }
    std::fs::write(a.align_log(), csv)?;
    Ok(format!(
        "align: MMD {:.5} -> {:.5} (sigma {:.4})",
        report.history.first().copied().unwrap_or(f64::NAN),
        report.history.last().copied().unwrap_or(f64::NAN),
        report.sigma
    ))
}

/// Loads the sign model from the files written by `align` (or by
/// `finetune`, when `final_model` is set).
pub fn load_sign_model(a: &Artifacts, final_model: bool) -> Result<SignModel> {
    let (char_path, word_path, proj_path, ctx_path) = if final_model {
        let d = a.final_dir();
        (
            d.join("char_codebook.json"),
            d.join("word_codebook.json"),
            d.join("projection.json"),
            d.join("context_model.json"),
        )
    } else {
        (a.aligned_char_codebook(), a.aligned_word_codebook(), a.projection(), a.context_model())
    };
    let vq = VqSign::load(require(&char_path)?, require(&ctx_path)?)?;
    let words = WordCodebook::load(require(&word_path)?)?;
    let (head, sigma) = SignModel::load_projection(require(&proj_path)?)?;
    SignModel::new(vq, words, head, sigma)
}

fn load_decoder(a: &Artifacts) -> Result<ToyDecoder> {
    let dec = ToyDecoder::load(require(&a.decoder())?)?;
    if !dec.frozen {
        return Err(Error::Format("decoder artifact is not frozen".into()));
    }
    Ok(dec)
}

pub fn run_finetune(cfg: &PipelineConfig) -> Result<String> {
    let a = Artifacts::new(&cfg.artifacts);
    let mut model = load_sign_model(&a, false)?;
    let decoder = load_decoder(&a)?;
    let text = TextEmbeddingSet::load(require(&a.text_embeddings())?)?;
    let (_, train) = load_split(&a.train_corpus())?;
    let pairs: Vec<Pair<'_>> = train
        .samples
        .iter()
        .map(|s| Pair {
            features: s.features.values.view(),
            reference: &s.reference,
        })
        .collect();
    let hash = decoder.content_hash();
    let history = finetune(&mut model, &decoder, &text, &pairs, &cfg.finetune())?;

    let d = a.final_dir();
    std::fs::create_dir_all(&d)?;
    model.vq.save(&d.join("char_codebook.json"), &d.join("context_model.json"))?;
    model.word_codebook().save(&d.join("word_codebook.json"))?;
    model.save_projection(&d.join("projection.json"))?;
    let mut csv = String::from("epoch,step,vq,mmd,sim,total\n");
    for h in &history {
        writeln!(csv, "{},{},{},{},{},{}", h.epoch, h.step, h.vq, h.mmd, h.sim, h.total).expect("string write");
    }
    std::fs::write(a.finetune_log(), csv)?;
    let last = history.last();
    Ok(format!(
        "finetune: {} steps, final sim {:.4}, decoder hash {} unchanged",
        history.len(),
        last.map_or(f64::NAN, |h| h.sim),
        &hash[..12]
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub source_id: String,
    pub reference: Vec<u32>,
    pub hypothesis: Vec<u32>,
}

/// Translates the held-out corpus with the fine-tuned model.
pub fn evaluate(cfg: &PipelineConfig) -> Result<(EvalReport, Vec<Prediction>)> {
    let a = Artifacts::new(&cfg.artifacts);
    let model = load_sign_model(&a, true)?;
    let decoder = load_decoder(&a)?;
    let (_, test) = load_split(&a.test_corpus())?;
    let mut preds = Vec::with_capacity(test.samples.len());
    for s in &test.samples {
        let out = translate(s.features.values.view(), &model, &decoder, cfg.translate_max_len)?;
        preds.push(Prediction {
            source_id: s.features.source_id.clone(),
            reference: s.reference.clone(),
            hypothesis: out.ids,
        });
    }
    let hyps: Vec<Vec<u32>> = preds.iter().map(|p| p.hypothesis.clone()).collect();
    let refs: Vec<Vec<u32>> = preds.iter().map(|p| p.reference.clone()).collect();
    Ok((EvalReport::compute(&hyps, &refs)?, preds))
}

pub fn run_eval(cfg: &PipelineConfig) -> Result<String> {
    let a = Artifacts::new(&cfg.artifacts);
    let (report, preds) = evaluate(cfg)?;
    report.save(&a.report())?;
    let mut lines = String::new();
    for p in &preds {
        lines.push_str(&serde_json::to_string(p)?);
        lines.push('\n');
    }
    std::fs::write(a.predictions(), lines)?;
    info!("evaluated {} sentences", preds.len());
    Ok(format!(
        "eval: BLEU-1 {:.4} BLEU-4 {:.4} ROUGE-L {:.4} token accuracy {:.4}",
        report.bleu[&1], report.bleu[&4], report.rouge_l, report.token_accuracy
    ))
}

/// Input of the `encode` stage: either clip features or raw frames (cut
/// into clips with the configured geometry and mean-pooled).
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncodeInput {
    #[serde(default)]
    pub features: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub frames: Option<Vec<Vec<f64>>>,
}

pub fn encode_input_features(cfg: &PipelineConfig, input: &EncodeInput) -> Result<Array2<f64>> {
    match (&input.features, &input.frames) {
        (Some(f), None) => {
            if f.is_empty() {
                return Err(Error::EmptyInput);
            }
            rows_to_matrix(f)
        }
        (None, Some(fr)) => {
            if fr.is_empty() {
                return Err(Error::EmptyInput);
            }
            let frames = rows_to_matrix(fr)?;
            let plan = plan_clips(frames.nrows(), cfg.clip_len, cfg.clip_stride)?;
            let enc = IdentityEncoder { dim: frames.ncols() };
            Ok(encode_clips("input", frames.view(), &plan, &enc, cfg.d)?.values)
        }
        _ => Err(Error::Format("encode input needs exactly one of \"features\" or \"frames\"".into())),
    }
}

/// Feature file to prompt payload using the fine-tuned model.
pub fn run_encode(cfg: &PipelineConfig, input: &Path, output: &Path) -> Result<String> {
    let a = Artifacts::new(&cfg.artifacts);
    let model = load_sign_model(&a, true)?;
    let parsed: EncodeInput = serde_json::from_str(&std::fs::read_to_string(require(input)?)?)?;
    let features = encode_input_features(cfg, &parsed)?;
    let sentence = model.encode(features.view())?;
    let payload: PromptPayload = serialize_prompt(&sentence, &cfg.prompt_template);
    std::fs::write(output, payload.to_json()? + "\n")?;
    Ok(format!(
        "encode: {} clips -> {} sign tokens ({} words)",
        features.nrows(),
        sentence.ids.len(),
        sentence
            .tokens
            .iter()
            .filter(|t| matches!(t, crate::cra_vocab::SignToken::Word(_)))
            .count()
    ))
}

/// Runs every training stage and the evaluation in order.
pub fn run_all(cfg: &PipelineConfig) -> Result<Vec<String>> {
    Ok(vec![
        run_synth_data(cfg)?,
        run_pretrain_vq(cfg)?,
        run_build_vocab(cfg, None)?,
        run_pretrain_decoder(cfg)?,
        run_align(cfg)?,
        run_finetune(cfg)?,
        run_eval(cfg)?,
    ])
}
