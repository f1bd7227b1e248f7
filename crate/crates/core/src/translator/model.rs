use std::path::Path;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::decoder::{GenerationOutput, ToyDecoder};
use crate::alignment::ProjectionHead;
use crate::cra_vocab::{segment, sign_token_ids, SignToken, WordCodebook};
use crate::error::{Error, Result};
use crate::nn::{slice2, slice2_mut, Params};
use crate::vq_sign::{VqGrads, VqSign};

/// Every trainable sign-side parameter: the VQ front end, free word
/// embeddings, and the projection into the text space.
#[derive(Debug, Clone, PartialEq)]
pub struct SignModel {
    pub vq: VqSign,
    /// Word compositions; embeddings are kept in `word_emb`.
    pub words: WordCodebook,
    pub word_emb: Array2<f64>,
    pub head: ProjectionHead,
    /// Kernel bandwidth fixed at alignment time.
    pub sigma: f64,
}

/// Gradient container with the tensor order of [`SignModel`].
#[derive(Debug, Clone)]
pub struct SignGrads {
    pub vq: VqGrads,
    pub word_emb: Array2<f64>,
    pub head: ProjectionHead,
}

/// A segmented sign sentence with its raw and projected embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct SignSentence {
    pub tokens: Vec<SignToken>,
    /// Flat ids: characters `0..M`, words `M + index`.
    pub ids: Vec<u32>,
    /// Sign-space rows (`n × d`).
    pub embeddings: Array2<f64>,
    /// Rows after the projection head (`n × d_text`).
    pub projected: Array2<f64>,
}

impl SignModel {
    pub fn new(vq: VqSign, words: WordCodebook, head: ProjectionHead, sigma: f64) -> Result<Self> {
        if words.tokens.iter().any(|t| t.embedding.len() != vq.dim()) {
            return Err(Error::DimensionMismatch {
                expected: vq.dim(),
                got: words.dim,
            });
        }
        if head.input_dim() != vq.dim() {
            return Err(Error::DimensionMismatch {
                expected: vq.dim(),
                got: head.input_dim(),
            });
        }
        let mut word_emb = words.embedding_matrix();
        if words.is_empty() {
            word_emb = Array2::zeros((0, vq.dim()));
        }
        Ok(Self {
            vq,
            words,
            word_emb,
            head,
            sigma,
        })
    }

    pub fn zero_grads(&self) -> SignGrads {
        SignGrads {
            vq: self.vq.zero_grads(),
            word_emb: Array2::zeros(self.word_emb.raw_dim()),
            head: self.head.zeros_like(),
        }
    }

    /// Word codebook with embeddings copied from `word_emb`.
    pub fn word_codebook(&self) -> WordCodebook {
        let mut w = self.words.clone();
        if !w.is_empty() {
            w.set_embeddings(&self.word_emb).expect("row count matches");
        }
        w
    }

    /// Quantize, preprocess and segment one feature sequence.
    pub fn tokens(&self, raw: ArrayView2<'_, f64>) -> Result<Vec<SignToken>> {
        if raw.nrows() == 0 {
            return Err(Error::EmptyInput);
        }
        let chars = self.vq.char_tokens(raw)?;
        Ok(segment(&chars, &self.words))
    }

    /// Sign-space embedding rows of a token sequence.
    pub fn token_embeddings(&self, tokens: &[SignToken]) -> Array2<f64> {
        let mut out = Array2::zeros((tokens.len(), self.vq.dim()));
        for (mut row, t) in out.rows_mut().into_iter().zip(tokens) {
            match *t {
                SignToken::Char(c) => row.assign(&self.vq.codebook.embeddings.row(c as usize)),
                SignToken::Word(w) => row.assign(&self.word_emb.row(w as usize)),
            }
        }
        out
    }

    pub fn encode(&self, raw: ArrayView2<'_, f64>) -> Result<SignSentence> {
        let tokens = self.tokens(raw)?;
        let embeddings = self.token_embeddings(&tokens);
        let projected = self.head.forward(embeddings.view());
        Ok(SignSentence {
            ids: sign_token_ids(&tokens, self.vq.codebook.size()),
            tokens,
            embeddings,
            projected,
        })
    }

    /// Writes the projection head and bandwidth as one JSON blob.
    pub fn save_projection(&self, path: &Path) -> Result<()> {
        let file = ProjectionFile {
            version: 1,
            kind: "projection".into(),
            sigma: self.sigma,
            head: self.head.clone(),
        };
        std::fs::write(path, serde_json::to_string(&file)? + "\n")?;
        Ok(())
    }

    pub fn load_projection(path: &Path) -> Result<(ProjectionHead, f64)> {
        let file: ProjectionFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if file.version != 1 || file.kind != "projection" || !(file.sigma > 0.0) {
            return Err(Error::Format(format!("{} is not a version-1 projection file", path.display())));
        }
        Ok((file.head, file.sigma))
    }
}

#[derive(Serialize, Deserialize)]
struct ProjectionFile {
    version: u32,
    kind: String,
    sigma: f64,
    head: ProjectionHead,
}

impl Params for SignModel {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut v = self.vq.tensors();
        v.push(slice2(&self.word_emb));
        v.extend(self.head.tensors());
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.vq.tensors_mut();
        v.push(slice2_mut(&mut self.word_emb));
        v.extend(self.head.tensors_mut());
        v
    }
}

impl Params for SignGrads {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut v = self.vq.tensors();
        v.push(slice2(&self.word_emb));
        v.extend(self.head.tensors());
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.vq.tensors_mut();
        v.push(slice2_mut(&mut self.word_emb));
        v.extend(self.head.tensors_mut());
        v
    }
}

/// Greedy translation of one feature sequence.
pub fn translate(
    raw: ArrayView2<'_, f64>,
    model: &SignModel,
    decoder: &ToyDecoder,
    max_len: usize,
) -> Result<GenerationOutput> {
    let sentence = model.encode(raw)?;
    decoder.generate(sentence.projected.view(), max_len)
}

/// Placeholder used when no prompt template is configured.
pub const DEFAULT_PROMPT_TEMPLATE: &str = "Translate the following sign sentence into text.";

/// Payload for an external generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptPayload {
    pub version: u32,
    pub prompt_text: String,
    pub sign_tokens: Vec<u32>,
    pub embeddings: Vec<Vec<f64>>,
}

impl PromptPayload {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

pub fn serialize_prompt(sentence: &SignSentence, template: &str) -> PromptPayload {
    PromptPayload {
        version: 1,
        prompt_text: template.to_string(),
        sign_tokens: sentence.ids.clone(),
        embeddings: sentence.projected.rows().into_iter().map(|r| r.to_vec()).collect(),
    }
}
