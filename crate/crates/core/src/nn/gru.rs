use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use super::{sigmoid, slice1, slice1_mut, slice2, slice2_mut, Params};

/// Gated recurrent cell (Cho et al. formulation):
///
/// ```text
/// r  = σ(W_r x + U_r h + b_r)
/// u  = σ(W_u x + U_u h + b_u)
/// n  = tanh(W_n x + U_n (r ⊙ h) + b_n)
/// h' = (1 − u) ⊙ n + u ⊙ h
/// ```
///
/// The same struct doubles as its own gradient container.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GruCell {
    pub w_r: Array2<f64>,
    pub u_r: Array2<f64>,
    pub b_r: Array1<f64>,
    pub w_u: Array2<f64>,
    pub u_u: Array2<f64>,
    pub b_u: Array1<f64>,
    pub w_n: Array2<f64>,
    pub u_n: Array2<f64>,
    pub b_n: Array1<f64>,
}

/// Cached activations of a forward pass over a sequence.
#[derive(Debug, Clone)]
pub struct GruTrace {
    pub inputs: Array2<f64>,
    pub h_prev: Array2<f64>,
    pub r: Array2<f64>,
    pub u: Array2<f64>,
    pub n: Array2<f64>,
    /// `states[t]` is the hidden state after consuming `inputs[t]`.
    pub states: Array2<f64>,
}

#[derive(Debug, Clone)]
pub struct GruBackward {
    pub grads: GruCell,
    pub d_inputs: Array2<f64>,
    pub d_h0: Array1<f64>,
}

impl GruCell {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        let m = |r, c| Array2::zeros((r, c));
        Self {
            w_r: m(hidden_dim, input_dim),
            u_r: m(hidden_dim, hidden_dim),
            b_r: Array1::zeros(hidden_dim),
            w_u: m(hidden_dim, input_dim),
            u_u: m(hidden_dim, hidden_dim),
            b_u: Array1::zeros(hidden_dim),
            w_n: m(hidden_dim, input_dim),
            u_n: m(hidden_dim, hidden_dim),
            b_n: Array1::zeros(hidden_dim),
        }
    }

    /// Uniform(−1/√h, 1/√h) initialization for every tensor.
    pub fn new<R: Rng + ?Sized>(input_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (hidden_dim as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound).expect("valid bounds");
        let mut cell = Self::zeros(input_dim, hidden_dim);
        for t in cell.tensors_mut() {
            for v in t.iter_mut() {
                *v = dist.sample(rng);
            }
        }
        cell
    }

    pub fn input_dim(&self) -> usize {
        self.w_r.ncols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_r.nrows()
    }

    fn gates(
        &self,
        x: ArrayView1<f64>,
        h: ArrayView1<f64>,
    ) -> (Array1<f64>, Array1<f64>, Array1<f64>, Array1<f64>) {
        let r = (self.w_r.dot(&x) + self.u_r.dot(&h) + &self.b_r).mapv(sigmoid);
        let u = (self.w_u.dot(&x) + self.u_u.dot(&h) + &self.b_u).mapv(sigmoid);
        let rh = &r * &h;
        let n = (self.w_n.dot(&x) + self.u_n.dot(&rh) + &self.b_n).mapv(f64::tanh);
        let next = (1.0 - &u) * &n + &u * &h;
        (r, u, n, next)
    }

    pub fn step(&self, x: ArrayView1<f64>, h: ArrayView1<f64>) -> Array1<f64> {
        self.gates(x, h).3
    }

    /// Runs the cell over every row of `inputs`, starting from `h0`
    /// (zero state when `None`).
    pub fn forward(&self, inputs: ArrayView2<f64>, h0: Option<ArrayView1<f64>>) -> GruTrace {
        let (t_len, hd) = (inputs.nrows(), self.hidden_dim());
        let mut trace = GruTrace {
            inputs: inputs.to_owned(),
            h_prev: Array2::zeros((t_len, hd)),
            r: Array2::zeros((t_len, hd)),
            u: Array2::zeros((t_len, hd)),
            n: Array2::zeros((t_len, hd)),
            states: Array2::zeros((t_len, hd)),
        };
        let mut h = h0.map_or_else(|| Array1::zeros(hd), |v| v.to_owned());
        for t in 0..t_len {
            let (r, u, n, next) = self.gates(inputs.row(t), h.view());
            trace.h_prev.row_mut(t).assign(&h);
            trace.r.row_mut(t).assign(&r);
            trace.u.row_mut(t).assign(&u);
            trace.n.row_mut(t).assign(&n);
            trace.states.row_mut(t).assign(&next);
            h = next;
        }
        trace
    }

    /// Final state after consuming every row of `inputs` from the zero state.
    pub fn final_state(&self, inputs: ArrayView2<f64>) -> Array1<f64> {
        let mut h = Array1::zeros(self.hidden_dim());
        for x in inputs.rows() {
            h = self.step(x, h.view());
        }
        h
    }

    /// Backpropagation through time. `d_states[t]` is the external gradient
    /// of the loss with respect to `trace.states[t]`.
    pub fn backward(&self, trace: &GruTrace, d_states: ArrayView2<f64>) -> GruBackward {
        let t_len = trace.states.nrows();
        assert_eq!(d_states.nrows(), t_len);
        let mut grads = Self::zeros(self.input_dim(), self.hidden_dim());
        let mut d_inputs = Array2::zeros((t_len, self.input_dim()));
        let mut carry = Array1::<f64>::zeros(self.hidden_dim());

        for t in (0..t_len).rev() {
            let dh = &d_states.row(t) + &carry;
            let (x, h) = (trace.inputs.row(t), trace.h_prev.row(t));
            let (r, u, n) = (trace.r.row(t), trace.u.row(t), trace.n.row(t));

            let dn = &dh * &(1.0 - &u);
            let du = &dh * &(&h - &n);
            let mut dh_prev = &dh * &u;

            let da_n = &dn * &(1.0 - &n * &n);
            let rh = &r * &h;
            outer_acc(&mut grads.w_n, &da_n, x);
            outer_acc(&mut grads.u_n, &da_n, rh.view());
            grads.b_n += &da_n;
            let mut dx = self.w_n.t().dot(&da_n);
            let d_rh = self.u_n.t().dot(&da_n);
            let dr = &d_rh * &h;
            dh_prev += &(&d_rh * &r);

            let da_u = &du * &(&u * &(1.0 - &u));
            outer_acc(&mut grads.w_u, &da_u, x);
            outer_acc(&mut grads.u_u, &da_u, h);
            grads.b_u += &da_u;
            dx += &self.w_u.t().dot(&da_u);
            dh_prev += &self.u_u.t().dot(&da_u);

            let da_r = &dr * &(&r * &(1.0 - &r));
            outer_acc(&mut grads.w_r, &da_r, x);
            outer_acc(&mut grads.u_r, &da_r, h);
            grads.b_r += &da_r;
            dx += &self.w_r.t().dot(&da_r);
            dh_prev += &self.u_r.t().dot(&da_r);

            d_inputs.row_mut(t).assign(&dx);
            carry = dh_prev;
        }
        GruBackward {
            grads,
            d_inputs,
            d_h0: carry,
        }
    }
}

fn outer_acc(m: &mut Array2<f64>, col: &Array1<f64>, row: ArrayView1<f64>) {
    let c = col.view().insert_axis(Axis(1));
    let r = row.insert_axis(Axis(0));
    m.scaled_add(1.0, &c.dot(&r));
}

impl Params for GruCell {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![
            slice2(&self.w_r),
            slice2(&self.u_r),
            slice1(&self.b_r),
            slice2(&self.w_u),
            slice2(&self.u_u),
            slice1(&self.b_u),
            slice2(&self.w_n),
            slice2(&self.u_n),
            slice1(&self.b_n),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            slice2_mut(&mut self.w_r),
            slice2_mut(&mut self.u_r),
            slice1_mut(&mut self.b_r),
            slice2_mut(&mut self.w_u),
            slice2_mut(&mut self.u_u),
            slice1_mut(&mut self.b_u),
            slice2_mut(&mut self.w_n),
            slice2_mut(&mut self.u_n),
            slice1_mut(&mut self.b_n),
        ]
    }
}

impl GruTrace {
    pub fn len(&self) -> usize {
        self.states.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn last_state(&self) -> Option<ArrayView1<'_, f64>> {
        (!self.is_empty()).then(|| self.states.row(self.len() - 1))
    }

    pub fn states_upto(&self, t: usize) -> ArrayView2<'_, f64> {
        self.states.slice(s![..t, ..])
    }
}
