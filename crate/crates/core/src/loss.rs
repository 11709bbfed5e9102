//! Binary cross-entropy on sigmoid probabilities.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Predictions are clamped to `[PRED_CLAMP, 1 - PRED_CLAMP]` before taking logs.
pub const PRED_CLAMP: f32 = 1e-7;

/// Mean binary cross-entropy and its gradient with respect to `pred`.
///
/// `loss = -(1/N) Σ [t ln p + (1 - t) ln(1 - p)]` and
/// `dloss/dp = (1/N) (p - t) / (p (1 - p))`, both evaluated at the clamped `p`.
pub fn bce_loss(pred: &Tensor, target: &Tensor) -> Result<(f32, Tensor)> {
    if pred.shape() != target.shape() {
        return Err(Error::ShapeMismatch(format!(
            "bce_loss: prediction {:?} vs target {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    if let Some(t) = target.data().iter().find(|&&t| t != 0.0 && t != 1.0) {
        return Err(Error::InvalidArgument(format!(
            "bce_loss targets must be 0 or 1, found {t}"
        )));
    }
    let n = pred.shape()[0] as f64;
    let mut loss = 0.0f64;
    let mut grad = Vec::with_capacity(pred.len());
    for (&p, &t) in pred.data().iter().zip(target.data()) {
        let p = p.clamp(PRED_CLAMP, 1.0 - PRED_CLAMP) as f64;
        let t = t as f64;
        loss -= t * p.ln() + (1.0 - t) * (1.0 - p).ln();
        grad.push(((p - t) / (p * (1.0 - p)) / n) as f32);
    }
    Ok(((loss / n) as f32, Tensor::from_vec(pred.shape(), grad)?))
}
