use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::nn::log_sum_exp;

fn check(logits: ArrayView2<'_, f64>, gt: &[u32]) -> Result<()> {
    if logits.nrows() != gt.len() {
        return Err(Error::LengthMismatch(logits.nrows(), gt.len()));
    }
    if gt.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(&t) = gt.iter().find(|&&t| t as usize >= logits.ncols()) {
        return Err(Error::Format(format!("label {t} outside {} logits", logits.ncols())));
    }
    Ok(())
}

/// Mean cross-entropy (natural log) of `gt` under row-wise softmax of `logits`.
pub fn sim_loss(logits: ArrayView2<'_, f64>, gt: &[u32]) -> Result<f64> {
    check(logits, gt)?;
    let total: f64 = logits
        .rows()
        .into_iter()
        .zip(gt)
        .map(|(row, &y)| log_sum_exp(row.iter().copied()) - row[y as usize])
        .sum();
    Ok(total / gt.len() as f64)
}

/// Gradient of [`sim_loss`] with respect to `logits`.
pub fn sim_loss_grad(logits: ArrayView2<'_, f64>, gt: &[u32]) -> Result<Array2<f64>> {
    check(logits, gt)?;
    let scale = 1.0 / gt.len() as f64;
    let mut g = Array2::zeros(logits.raw_dim());
    for ((row, mut out), &y) in logits.rows().into_iter().zip(g.rows_mut()).zip(gt) {
        let lse = log_sum_exp(row.iter().copied());
        for (o, &v) in out.iter_mut().zip(row.iter()) {
            *o = (v - lse).exp() * scale;
        }
        out[y as usize] -= scale;
    }
    Ok(g)
}

/// `L^ft = L^VQ + λ₁ L^MMD + λ₂ L^sim`.
pub fn finetune_loss(l_vq: f64, l_mmd: f64, l_sim: f64, lambda1: f64, lambda2: f64) -> f64 {
    l_vq + lambda1 * l_mmd + lambda2 * l_sim
}
