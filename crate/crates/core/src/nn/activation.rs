use serde::{Deserialize, Serialize};

use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Sigmoid,
    Tanh,
    Relu,
    /// Normalizes along the last axis.
    Softmax,
}

impl Activation {
    pub fn apply(self, x: &Tensor) -> Tensor {
        let mut out = x.clone();
        self.apply_in_place(out.values_mut(), x.cols());
        out
    }

    /// `cols` is the class-axis extent; only used by softmax.
    pub fn apply_in_place(self, values: &mut [f64], cols: usize) {
        match self {
            Activation::Sigmoid => values.iter_mut().for_each(|v| *v = sigmoid(*v)),
            Activation::Tanh => values.iter_mut().for_each(|v| *v = v.tanh()),
            Activation::Relu => values.iter_mut().for_each(|v| *v = v.max(0.0)),
            Activation::Softmax => softmax_rows(values, cols),
        }
    }

    /// Derivative expressed through the activation output `y`.
    /// Not defined for softmax (its Jacobian is handled with the loss).
    pub fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Softmax => panic!("softmax derivative is not elementwise"),
        }
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn softmax_rows(values: &mut [f64], cols: usize) {
    if cols == 0 {
        return;
    }
    for row in values.chunks_mut(cols) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        row.iter_mut().for_each(|v| *v /= sum);
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let mut out = logits.to_vec();
    softmax_rows(&mut out, logits.len());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn relu_examples() {
        let y = Activation::Relu.apply(&Tensor::vector(vec![-2.0, 0.0, 3.0]));
        assert_eq!(y.values(), &[0.0, 0.0, 3.0]);
    }

    #[test]
    fn softmax_uniform() {
        let y = Activation::Softmax.apply(&Tensor::vector(vec![0.0; 5]));
        for v in y.values() {
            assert!((v - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn sigmoid_zero() {
        let y = Activation::Sigmoid.apply(&Tensor::vector(vec![0.0]));
        assert_eq!(y.values(), &[0.5]);
    }

    #[test]
    fn softmax_is_stable_for_huge_logits() {
        let y = softmax(&[1000.0, 1000.0, -1000.0]);
        assert!((y[0] - 0.5).abs() < 1e-12 && y[2] >= 0.0);
    }

    proptest! {
        #[test]
        fn softmax_sums_to_one_and_is_shift_invariant(
            logits in proptest::collection::vec(-30.0f64..30.0, 2..8),
            shift in -50.0f64..50.0,
        ) {
            let p = softmax(&logits);
            let s: f64 = p.iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-9);
            prop_assert!(p.iter().all(|&v| v > 0.0 && v <= 1.0));
            let shifted: Vec<f64> = logits.iter().map(|v| v + shift).collect();
            let q = softmax(&shifted);
            for (a, b) in p.iter().zip(&q) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            let argmax = |v: &[f64]| v.iter().enumerate().fold(0, |best, (i, x)| if *x > v[best] { i } else { best });
            prop_assert_eq!(argmax(&p), argmax(&q));
        }
    }
}
