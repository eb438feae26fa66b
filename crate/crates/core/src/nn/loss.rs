use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::params::Parameterized;
use crate::tensor::Tensor;

/// Probability floor inside the cross-entropy logarithm.
pub const CE_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    CrossEntropy,
    Mse,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSpec {
    pub kind: LossKind,
    pub l2: f64,
}

impl LossSpec {
    pub fn new(kind: LossKind, l2: f64) -> Result<Self> {
        if !(l2 >= 0.0) {
            return Err(Error::Config(format!("l2 coefficient must be >= 0, got {l2}")));
        }
        Ok(LossSpec { kind, l2 })
    }

    /// Data loss plus `λ·Σw²` over `params` (when given).
    ///
    /// Cross-entropy is averaged over rows (samples); MSE over all elements.
    pub fn evaluate(
        &self,
        prediction: &Tensor,
        target: &Tensor,
        params: Option<&dyn Parameterized>,
    ) -> Result<f64> {
        if prediction.len() != target.len() || prediction.cols() != target.cols() {
            return Err(Error::shape(format!(
                "prediction {:?} vs target {:?}",
                prediction.shape(),
                target.shape()
            )));
        }
        let data = match self.kind {
            LossKind::CrossEntropy => {
                cross_entropy(prediction.values(), target.values(), prediction.cols())
            }
            LossKind::Mse => mse(prediction.values(), target.values()),
        };
        let reg = match params {
            Some(p) if self.l2 > 0.0 => self.l2 * p.l2_norm_sq(),
            _ => 0.0,
        };
        Ok(data + reg)
    }
}

/// Mean over rows of `-Σ t·ln(clamp(p, ε, 1))`.
pub fn cross_entropy(probs: &[f64], targets: &[f64], cols: usize) -> f64 {
    let rows = probs.len() / cols.max(1);
    let total: f64 = probs
        .iter()
        .zip(targets)
        .filter(|(_, &t)| t != 0.0)
        .map(|(&p, &t)| -t * p.clamp(CE_EPSILON, 1.0).ln())
        .sum();
    total / rows.max(1) as f64
}

/// Cross-entropy against integer labels, averaged over rows.
pub fn cross_entropy_labels(probs: &[f64], labels: &[u8], cols: usize) -> f64 {
    let total: f64 = probs
        .chunks(cols)
        .zip(labels)
        .map(|(row, &y)| -row[y as usize].clamp(CE_EPSILON, 1.0).ln())
        .sum();
    total / labels.len().max(1) as f64
}

/// Gradient of the mean softmax cross-entropy w.r.t. the logits: `(p − onehot)/n`.
pub fn softmax_cross_entropy_grad(probs: &[f64], labels: &[u8], cols: usize) -> Vec<f64> {
    let n = labels.len().max(1) as f64;
    let mut d = probs.to_vec();
    for (row, &y) in d.chunks_mut(cols).zip(labels) {
        row[y as usize] -= 1.0;
        row.iter_mut().for_each(|v| *v /= n);
    }
    d
}

pub fn mse(pred: &[f64], target: &[f64]) -> f64 {
    if pred.is_empty() {
        return 0.0;
    }
    pred.iter()
        .zip(target)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / pred.len() as f64
}

pub fn mse_grad(pred: &[f64], target: &[f64]) -> Vec<f64> {
    let n = pred.len().max(1) as f64;
    pred.iter().zip(target).map(|(p, t)| 2.0 * (p - t) / n).collect()
}

pub fn one_hot(labels: &[u8], classes: usize) -> Tensor {
    let mut t = Tensor::zeros(&[labels.len(), classes]);
    for (i, &y) in labels.iter().enumerate() {
        t.values_mut()[i * classes + y as usize] = 1.0;
    }
    t
}
