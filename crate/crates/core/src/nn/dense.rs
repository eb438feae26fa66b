use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::params::Parameterized;
use crate::tensor::{gemm, Tensor};

/// Fully-connected affine map `y = x·W + b` with `W` stored `[in, out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Tensor,
    pub bias: Tensor,
}

/// Uniform in `[-1/√fan_in, 1/√fan_in]`.
pub fn init_uniform<R: Rng>(rng: &mut R, shape: &[usize], fan_in: usize) -> Tensor {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    Tensor::from_fn(shape, |_| rng.gen_range(-bound..=bound))
}

impl DenseLayer {
    pub fn new<R: Rng>(input: usize, output: usize, rng: &mut R) -> Self {
        DenseLayer {
            weights: init_uniform(rng, &[input, output], input),
            bias: Tensor::zeros(&[output]),
        }
    }

    pub fn from_parts(weights: Tensor, bias: Tensor) -> Result<Self> {
        if weights.rank() != 2 || bias.rank() != 1 || weights.shape()[1] != bias.len() {
            return Err(Error::shape(format!(
                "dense weights {:?} incompatible with bias {:?}",
                weights.shape(),
                bias.shape()
            )));
        }
        Ok(DenseLayer { weights, bias })
    }

    pub fn zeros_like(&self) -> Self {
        DenseLayer {
            weights: Tensor::zeros(self.weights.shape()),
            bias: Tensor::zeros(self.bias.shape()),
        }
    }

    pub fn input_size(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn output_size(&self) -> usize {
        self.weights.shape()[1]
    }

    /// Single-vector forward pass.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        if x.len() != self.input_size() {
            return Err(Error::shape(format!(
                "dense input has {} values, layer expects {}",
                x.len(),
                self.input_size()
            )));
        }
        Ok(Tensor::vector(self.forward_batch(x.values(), 1)))
    }

    /// Row-major batch `[n, in] → [n, out]`.
    pub fn forward_batch(&self, x: &[f64], n: usize) -> Vec<f64> {
        let (i, o) = (self.input_size(), self.output_size());
        debug_assert_eq!(x.len(), n * i);
        let mut y = Vec::with_capacity(n * o);
        for _ in 0..n {
            y.extend_from_slice(self.bias.values());
        }
        gemm(n, i, o, x, false, self.weights.values(), false, 1.0, &mut y);
        y
    }

    /// Accumulates parameter gradients into `grads` and returns `dL/dx`.
    pub fn backward_batch(&self, x: &[f64], n: usize, dy: &[f64], grads: &mut DenseLayer) -> Vec<f64> {
        let (i, o) = (self.input_size(), self.output_size());
        gemm(i, n, o, x, true, dy, false, 1.0, grads.weights.values_mut());
        let db = grads.bias.values_mut();
        for row in dy.chunks(o) {
            for (g, d) in db.iter_mut().zip(row) {
                *g += d;
            }
        }
        let mut dx = vec![0.0; n * i];
        gemm(n, o, i, dy, false, self.weights.values(), true, 0.0, &mut dx);
        dx
    }
}

impl Parameterized for DenseLayer {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &Tensor)) {
        f("w", &self.weights);
        f("b", &self.bias);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        f("w", &mut self.weights);
        f("b", &mut self.bias);
    }
}

/// Visits a sub-layer under `prefix.` so composite models get dotted names.
pub(crate) fn visit_nested<P: Parameterized + ?Sized>(
    prefix: &str,
    layer: &P,
    f: &mut dyn FnMut(&str, &Tensor),
) {
    layer.visit_params(&mut |name, t| f(&format!("{prefix}.{name}"), t));
}

pub(crate) fn visit_nested_mut<P: Parameterized + ?Sized>(
    prefix: &str,
    layer: &mut P,
    f: &mut dyn FnMut(&str, &mut Tensor),
) {
    layer.visit_params_mut(&mut |name, t| f(&format!("{prefix}.{name}"), t));
}
