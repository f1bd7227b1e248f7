use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::candidates::CandidateWord;
use crate::error::{Error, Result};
use crate::nn::log_sum_exp;

/// Words × characters transport problem. `cost[[j, i]] = −ln P(s_i | w_j)`,
/// `+∞` where word `j` does not contain character `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportProblem {
    pub cost: Array2<f64>,
    pub row_marginals: Array1<f64>,
    pub col_marginals: Array1<f64>,
    /// Character id of every column.
    pub col_ids: Vec<u32>,
    /// Allowed marginal violation.
    pub epsilon: f64,
}

impl TransportProblem {
    pub fn new(cost: Array2<f64>, row_marginals: Array1<f64>, col_marginals: Array1<f64>, epsilon: f64) -> Result<Self> {
        let (w, c) = cost.dim();
        if w == 0 || c == 0 {
            return Err(Error::EmptyInput);
        }
        if row_marginals.len() != w {
            return Err(Error::LengthMismatch(row_marginals.len(), w));
        }
        if col_marginals.len() != c {
            return Err(Error::LengthMismatch(col_marginals.len(), c));
        }
        if cost.iter().any(|&v| v.is_nan() || v < 0.0 || v == f64::NEG_INFINITY) {
            return Err(Error::InvalidConfig("costs must be non-negative or +inf".into()));
        }
        for m in [&row_marginals, &col_marginals] {
            if m.iter().any(|&v| !(v >= 0.0 && v.is_finite())) || (m.sum() - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidConfig("marginals must be distributions".into()));
            }
        }
        if cost.rows().into_iter().any(|r| r.iter().all(|v| v.is_infinite())) {
            return Err(Error::InvalidConfig("every word needs at least one finite cost".into()));
        }
        if !(epsilon >= 0.0) {
            return Err(Error::InvalidConfig("epsilon must be non-negative".into()));
        }
        Ok(Self {
            cost,
            row_marginals,
            col_marginals,
            col_ids: (0..c as u32).collect(),
            epsilon,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        self.cost.dim()
    }

    /// Largest absolute row or column marginal violation of `plan`.
    pub fn violation(&self, plan: &Array2<f64>) -> f64 {
        let rows = plan.sum_axis(ndarray::Axis(1));
        let cols = plan.sum_axis(ndarray::Axis(0));
        let r = rows.iter().zip(&self.row_marginals).map(|(a, b)| (a - b).abs());
        let c = cols.iter().zip(&self.col_marginals).map(|(a, b)| (a - b).abs());
        r.chain(c).fold(0.0, f64::max)
    }
}

fn normalized(values: impl Iterator<Item = f64>) -> Result<Array1<f64>> {
    let v: Array1<f64> = values.collect();
    let s = v.sum();
    if !(s > 0.0) {
        return Err(Error::InvalidConfig("marginal has no mass".into()));
    }
    Ok(v / s)
}

/// Builds the problem for a candidate subset against characters
/// `(id, frequency)`. Both marginals are renormalized to sum to one.
/// `P(s|w)` is the multiplicity of `s` in `w` over `len(w)`.
pub fn build_problem(words: &[CandidateWord], chars: &[(u32, f64)], epsilon: f64) -> Result<TransportProblem> {
    if words.is_empty() || chars.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut cost = Array2::from_elem((words.len(), chars.len()), f64::INFINITY);
    for (j, w) in words.iter().enumerate() {
        let len = w.chars.len() as f64;
        for &c in &w.chars {
            let i = chars
                .iter()
                .position(|&(id, _)| id == c)
                .ok_or(Error::UnknownCharacter(c))?;
            let mult = w.chars.iter().filter(|&&x| x == c).count() as f64;
            cost[[j, i]] = -(mult / len).ln();
        }
    }
    let rows = normalized(words.iter().map(|w| w.prob))?;
    let cols = normalized(chars.iter().map(|&(_, p)| p))?;
    let mut problem = TransportProblem::new(cost, rows, cols, epsilon)?;
    problem.col_ids = chars.iter().map(|&(id, _)| id).collect();
    Ok(problem)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan {
    pub plan: Array2<f64>,
    /// `Σ P ln P + ⟨P, D⟩` of the plan.
    pub objective: f64,
    /// Largest marginal violation of the plan.
    pub violation: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Dual objective after each iteration; non-decreasing.
    pub dual_history: Vec<f64>,
}

/// `Σ P ln P + ⟨P, D⟩` with `0 ln 0 = 0` and `0 · ∞ = 0`.
pub fn transport_objective(plan: &Array2<f64>, cost: &Array2<f64>) -> f64 {
    plan.iter()
        .zip(cost)
        .filter(|(&p, _)| p > 0.0)
        .map(|(&p, &d)| p * p.ln() + p * d)
        .sum()
}

/// Vocabulary entropy read off a plan: `H(P) − ⟨P, D⟩`.
///
/// When `P(w, s) = P(w) P(s|w)` this equals the Shannon entropy of `P(w)`.
pub fn codebook_entropy(plan: &Array2<f64>, problem: &TransportProblem) -> f64 {
    -transport_objective(plan, &problem.cost)
}

fn plan_from_potentials(f: &Array1<f64>, g: &Array1<f64>, cost: &Array2<f64>) -> Array2<f64> {
    Array2::from_shape_fn(cost.dim(), |(j, i)| {
        let e = f[j] + g[i] - cost[[j, i]];
        if e == f64::NEG_INFINITY || e.is_nan() {
            0.0
        } else {
            e.exp()
        }
    })
}

fn dual_value(problem: &TransportProblem, f: &Array1<f64>, g: &Array1<f64>, plan: &Array2<f64>) -> f64 {
    let dot = |m: &Array1<f64>, p: &Array1<f64>| -> f64 {
        m.iter().zip(p).filter(|(&w, _)| w > 0.0).map(|(w, v)| w * v).sum()
    };
    dot(&problem.row_marginals, f) + dot(&problem.col_marginals, g) + 1.0 - plan.sum()
}

/// Minimizes `Σ P ln P + ⟨P, D⟩` over plans with the given marginals by
/// log-domain Sinkhorn scaling with kernel `exp(−D)`.
///
/// Stops once the marginal violation, or its change between iterations,
/// drops below `tol`. The plan with the smallest violation seen is
/// returned; `converged` reports whether it is within `epsilon`.
pub fn sinkhorn_solve(problem: &TransportProblem, max_iters: usize, tol: f64) -> TransportPlan {
    let (w, c) = problem.shape();
    let ln_a = problem.row_marginals.mapv(f64::ln);
    let ln_b = problem.col_marginals.mapv(f64::ln);
    let mut f = Array1::<f64>::zeros(w);
    let mut g = Array1::<f64>::zeros(c);
    let mut best: Option<(f64, Array2<f64>)> = None;
    let mut dual_history = Vec::new();
    let mut prev_violation = f64::INFINITY;
    let mut iterations = 0;

    // A potential is −∞ when its marginal is zero or nothing can reach it.
    let update = |ln_m: f64, lse: f64| -> f64 {
        if ln_m == f64::NEG_INFINITY || lse == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            ln_m - lse
        }
    };

    for it in 0..max_iters {
        iterations = it + 1;
        for j in 0..w {
            let lse = log_sum_exp((0..c).map(|i| g[i] - problem.cost[[j, i]]));
            f[j] = update(ln_a[j], lse);
        }
        for i in 0..c {
            let lse = log_sum_exp((0..w).map(|j| f[j] - problem.cost[[j, i]]));
            g[i] = update(ln_b[i], lse);
        }
        let plan = plan_from_potentials(&f, &g, &problem.cost);
        let violation = problem.violation(&plan);
        dual_history.push(dual_value(problem, &f, &g, &plan));
        let improved = best.as_ref().is_none_or(|(v, _)| violation < *v);
        if improved {
            best = Some((violation, plan));
        }
        if violation < tol || (prev_violation - violation).abs() < tol {
            break;
        }
        prev_violation = violation;
    }

    let (violation, plan) = best.unwrap_or_else(|| {
        let p = plan_from_potentials(&f, &g, &problem.cost);
        (problem.violation(&p), p)
    });
    TransportPlan {
        objective: transport_objective(&plan, &problem.cost),
        converged: violation <= problem.epsilon,
        violation,
        iterations,
        dual_history,
        plan,
    }
}
