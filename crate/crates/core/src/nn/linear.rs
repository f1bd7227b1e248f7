use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{slice1, slice1_mut, slice2, slice2_mut, Params};

/// Affine map `y = W x + b` applied row-wise to `n × in` inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    /// `out × in`
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Linear {
    pub fn zeros(input_dim: usize, output_dim: usize) -> Self {
        Self {
            weight: Array2::zeros((output_dim, input_dim)),
            bias: Array1::zeros(output_dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            weight: Array2::eye(dim),
            bias: Array1::zeros(dim),
        }
    }

    /// Gaussian weights with variance `gain / in`, zero bias.
    pub fn new<R: Rng + ?Sized>(input_dim: usize, output_dim: usize, gain: f64, rng: &mut R) -> Self {
        let std = (gain / input_dim.max(1) as f64).sqrt();
        let normal = Normal::new(0.0, std).expect("finite std");
        Self {
            weight: Array2::from_shape_simple_fn((output_dim, input_dim), || normal.sample(rng)),
            bias: Array1::zeros(output_dim),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.nrows()
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        x.dot(&self.weight.t()) + &self.bias
    }

    /// Returns `(grads, d_x)` for upstream gradient `dy` (`n × out`).
    pub fn backward(&self, x: ArrayView2<f64>, dy: ArrayView2<f64>) -> (Linear, Array2<f64>) {
        let grads = Linear {
            weight: dy.t().dot(&x),
            bias: dy.sum_axis(Axis(0)),
        };
        (grads, dy.dot(&self.weight))
    }
}

impl Params for Linear {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![slice2(&self.weight), slice1(&self.bias)]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![slice2_mut(&mut self.weight), slice1_mut(&mut self.bias)]
    }
}
