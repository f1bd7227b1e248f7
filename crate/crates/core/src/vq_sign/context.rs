use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::nn::{slice2, slice2_mut, GruCell, GruTrace, Params};

/// Autoregressive summarizer `g` plus one linear prediction head per step size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextModel {
    pub gru: GruCell,
    /// `heads[k-1]` maps a context state to the prediction for step `k`.
    pub heads: Vec<Array2<f64>>,
}

impl ContextModel {
    pub fn new<R: Rng + ?Sized>(dim: usize, k_max: usize, rng: &mut R) -> Self {
        let gru = GruCell::new(dim, dim, rng);
        let normal = Normal::new(0.0, 1.0 / (dim as f64).sqrt()).expect("finite std");
        let heads = (0..k_max)
            .map(|_| Array2::from_shape_simple_fn((dim, dim), || normal.sample(rng)))
            .collect();
        Self { gru, heads }
    }

    pub fn dim(&self) -> usize {
        self.gru.hidden_dim()
    }

    pub fn k_max(&self) -> usize {
        self.heads.len()
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            gru: GruCell::zeros(self.gru.input_dim(), self.gru.hidden_dim()),
            heads: self.heads.iter().map(|h| Array2::zeros(h.raw_dim())).collect(),
        }
    }

    /// `c_τ` for every τ, starting from the zero state. Row τ depends only on
    /// rows `0..=τ` of `quantized`.
    pub fn context_states(&self, quantized: ArrayView2<'_, f64>) -> Array2<f64> {
        self.gru.forward(quantized, None).states
    }

    pub fn trace(&self, quantized: ArrayView2<'_, f64>) -> GruTrace {
        self.gru.forward(quantized, None)
    }
}

impl Params for ContextModel {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut v = self.gru.tensors();
        v.extend(self.heads.iter().map(slice2));
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.gru.tensors_mut();
        v.extend(self.heads.iter_mut().map(slice2_mut));
        v
    }
}
