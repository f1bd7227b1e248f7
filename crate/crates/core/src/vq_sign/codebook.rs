use std::path::Path;

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::rows_to_matrix;
use crate::nn::{slice2, slice2_mut, Params};

/// Reserved id of the slow-down token; row 0 of every character codebook.
pub const S0_ID: u32 = 0;
/// Full-scale character codebook size.
pub const FULL_SCALE_CODEBOOK_SIZE: usize = 256;

/// Character-level codebook. Row 0 is the slow-down token and never takes
/// part in nearest-neighbour matching.
#[derive(Debug, Clone, PartialEq)]
pub struct CharCodebook {
    pub embeddings: Array2<f64>,
    /// Usage frequency per token after preprocessing (zeros until measured).
    pub freq: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedSequence {
    pub ids: Vec<u32>,
    pub embeddings: Array2<f64>,
}

impl CharCodebook {
    pub fn new(embeddings: Array2<f64>) -> Result<Self> {
        if embeddings.nrows() < 2 {
            return Err(Error::InvalidConfig("a character codebook needs at least 2 rows".into()));
        }
        if embeddings.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format("codebook contains non-finite values".into()));
        }
        let m = embeddings.nrows();
        Ok(Self {
            embeddings,
            freq: vec![0.0; m],
        })
    }

    /// Standard normal entries scaled by `1/√d`.
    pub fn random<R: Rng + ?Sized>(size: usize, dim: usize, rng: &mut R) -> Result<Self> {
        let scale = 1.0 / (dim as f64).sqrt();
        let emb = Array2::from_shape_simple_fn((size, dim), || {
            let v: f64 = StandardNormal.sample(rng);
            v * scale
        });
        Self::new(emb)
    }

    pub fn size(&self) -> usize {
        self.embeddings.nrows()
    }

    pub fn dim(&self) -> usize {
        self.embeddings.ncols()
    }

    pub fn s0_id(&self) -> u32 {
        S0_ID
    }

    /// Nearest row (squared Euclidean) among ids `1..M`; ties go to the lowest id.
    pub fn nearest(&self, z: ndarray::ArrayView1<'_, f64>) -> (u32, f64) {
        let mut best = (1u32, f64::INFINITY);
        for (i, row) in self.embeddings.rows().into_iter().enumerate().skip(1) {
            let d: f64 = row.iter().zip(z.iter()).map(|(a, b)| (b - a) * (b - a)).sum();
            if d < best.1 {
                best = (i as u32, d);
            }
        }
        best
    }

    pub fn quantize(&self, z: ArrayView2<'_, f64>) -> Result<QuantizedSequence> {
        if z.nrows() == 0 {
            return Err(Error::EmptyInput);
        }
        if z.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: z.ncols(),
            });
        }
        let ids: Vec<u32> = z.rows().into_iter().map(|r| self.nearest(r).0).collect();
        let mut embeddings = Array2::zeros(z.raw_dim());
        for (mut dst, &id) in embeddings.rows_mut().into_iter().zip(&ids) {
            dst.assign(&self.embeddings.row(id as usize));
        }
        Ok(QuantizedSequence { ids, embeddings })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = CodebookFile {
            version: 1,
            kind: "char".into(),
            dim: self.dim(),
            s0_id: S0_ID,
            tokens: self
                .embeddings
                .rows()
                .into_iter()
                .enumerate()
                .map(|(i, r)| CharTokenRecord {
                    id: i as u32,
                    embedding: r.to_vec(),
                    freq: self.freq[i],
                })
                .collect(),
        };
        std::fs::write(path, serde_json::to_string(&file)? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file: CodebookFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if file.version != 1 || file.kind != "char" || file.s0_id != S0_ID {
            return Err(Error::Format(format!("{} is not a version-1 char codebook", path.display())));
        }
        for (i, t) in file.tokens.iter().enumerate() {
            if t.id as usize != i || t.embedding.len() != file.dim {
                return Err(Error::Format("char codebook tokens must be dense and ordered".into()));
            }
        }
        let rows: Vec<Vec<f64>> = file.tokens.iter().map(|t| t.embedding.clone()).collect();
        let mut cb = Self::new(rows_to_matrix(&rows)?)?;
        cb.freq = file.tokens.iter().map(|t| t.freq).collect();
        Ok(cb)
    }
}

impl Params for CharCodebook {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![slice2(&self.embeddings)]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![slice2_mut(&mut self.embeddings)]
    }
}

#[derive(Serialize, Deserialize)]
struct CodebookFile {
    version: u32,
    kind: String,
    dim: usize,
    s0_id: u32,
    tokens: Vec<CharTokenRecord>,
}

#[derive(Serialize, Deserialize)]
struct CharTokenRecord {
    id: u32,
    embedding: Vec<f64>,
    freq: f64,
}
