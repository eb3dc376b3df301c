use crate::error::{Error, Result};
use crate::kernels::sigmoid;
use crate::tensor::Tensor;

/// Probabilities are clamped to `[EPS, 1 - EPS]` before taking logs.
pub const EPS: f64 = 1e-12;

fn clamp_probability(q: f64) -> f64 {
    q.clamp(EPS, 1.0 - EPS)
}

/// `-[y ln q + (1 - y) ln(1 - q)]` with `q` clamped away from 0 and 1.
pub fn binary_cross_entropy(q: f64, y: f64) -> f64 {
    let q = clamp_probability(q);
    -(y * q.ln() + (1.0 - y) * (1.0 - q).ln())
}

/// Mean BCE over a batch of logits and the gradient with respect to each
/// logit, `(sigmoid(z) - y) / B`.
pub fn bce_with_logits(logits: &[f64], labels: &[f64]) -> Result<(f64, Vec<f64>)> {
    if logits.len() != labels.len() {
        return Err(Error::shape(format!(
            "{} logits for {} labels",
            logits.len(),
            labels.len()
        )));
    }
    if logits.is_empty() {
        return Err(Error::EmptyInput("empty batch".into()));
    }
    let n = logits.len() as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(logits.len());
    for (&z, &y) in logits.iter().zip(labels) {
        let q = sigmoid(z);
        loss += binary_cross_entropy(q, y);
        grad.push((q - y) / n);
    }
    Ok((loss / n, grad))
}

/// Mean absolute elementwise difference.
pub fn mae_loss(pred: &Tensor, target: &Tensor) -> Result<f64> {
    target.expect_shape(pred.shape())?;
    let sum: f64 = pred.data().iter().zip(target.data()).map(|(p, t)| (p - t).abs()).sum();
    Ok(sum / pred.len() as f64)
}

/// `sign(pred - target) / N`, with `sign(0) = 0`.
pub fn mae_loss_grad(pred: &Tensor, target: &Tensor) -> Result<Tensor> {
    target.expect_shape(pred.shape())?;
    let n = pred.len() as f64;
    let values = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(p, t)| {
            let d = p - t;
            if d > 0.0 {
                1.0 / n
            } else if d < 0.0 {
                -1.0 / n
            } else {
                0.0
            }
        })
        .collect();
    Tensor::new(pred.shape().to_vec(), values)
}
