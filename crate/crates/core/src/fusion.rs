//! Feature fusion: the temporal and spatial features are concatenated and
//! passed through a purely affine autoencoder; its latent code is the fused
//! feature handed to the tree classifier.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::dense::{visit_nested, visit_nested_mut, DenseLayer};
use crate::nn::loss::{mse, mse_grad};
use crate::nn::params::Parameterized;
use crate::nn::{seeded_rng, OptimizerState};
use crate::data::BatchCycler;
use crate::tensor::Tensor;

pub const TEMPORAL_DIM: usize = 64;
pub const SPATIAL_DIM: usize = 120;
pub const STACKED_DIM: usize = TEMPORAL_DIM + SPATIAL_DIM;
pub const LATENT_DIM: usize = 800;

/// `[xt, xs]` for the standard 64 + 120 feature sizes.
pub fn stack_features(xt: &[f64], xs: &[f64]) -> Result<Vec<f64>> {
    if xt.len() != TEMPORAL_DIM || xs.len() != SPATIAL_DIM {
        return Err(Error::shape(format!(
            "expected {TEMPORAL_DIM} temporal and {SPATIAL_DIM} spatial features, got {} and {}",
            xt.len(),
            xs.len()
        )));
    }
    Ok(stack(xt, xs))
}

/// Concatenation of any two feature vectors, temporal first.
pub fn stack(xt: &[f64], xs: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(xt.len() + xs.len());
    out.extend_from_slice(xt);
    out.extend_from_slice(xs);
    out
}

/// Row-wise concatenation of two feature batches.
pub fn stack_rows(xt: &[f64], t_dim: usize, xs: &[f64], s_dim: usize, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n * (t_dim + s_dim));
    for j in 0..n {
        out.extend_from_slice(&xt[j * t_dim..(j + 1) * t_dim]);
        out.extend_from_slice(&xs[j * s_dim..(j + 1) * s_dim]);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AutoencoderConfig {
    pub latent: usize,
    pub iterations: usize,
    pub learning_rate: f64,
    /// Rows per step; `None` trains on the full feature set every step.
    pub batch_size: Option<usize>,
}

impl Default for AutoencoderConfig {
    fn default() -> Self {
        AutoencoderConfig {
            latent: LATENT_DIM,
            iterations: 400,
            learning_rate: 0.002,
            batch_size: None,
        }
    }
}

/// `h = x·W_en + b_en`, `x̂ = h·W_de + b_de`; no nonlinearity anywhere.
#[derive(Debug, Clone, PartialEq)]
pub struct Autoencoder {
    pub encoder: DenseLayer,
    pub decoder: DenseLayer,
}

impl Autoencoder {
    pub fn new<R: rand::Rng>(input: usize, latent: usize, rng: &mut R) -> Self {
        Autoencoder {
            encoder: DenseLayer::new(input, latent, rng),
            decoder: DenseLayer::new(latent, input, rng),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Autoencoder {
            encoder: self.encoder.zeros_like(),
            decoder: self.decoder.zeros_like(),
        }
    }

    pub fn input_size(&self) -> usize {
        self.encoder.input_size()
    }

    pub fn latent_size(&self) -> usize {
        self.encoder.output_size()
    }

    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.encoder.forward(&Tensor::vector(x.to_vec()))?.into_values())
    }

    pub fn decode(&self, h: &[f64]) -> Result<Vec<f64>> {
        Ok(self.decoder.forward(&Tensor::vector(h.to_vec()))?.into_values())
    }

    pub fn encode_batch(&self, x: &[f64], n: usize) -> Result<Vec<f64>> {
        if x.len() != n * self.input_size() {
            return Err(Error::shape(format!(
                "autoencoder expects rows of {}, got {} values for {n} rows",
                self.input_size(),
                x.len()
            )));
        }
        Ok(self.encoder.forward_batch(x, n))
    }

    /// Reconstruction MSE over a batch and its gradient.
    pub fn loss_and_grad(&self, x: &[f64], n: usize) -> (f64, Autoencoder) {
        let h = self.encoder.forward_batch(x, n);
        let y = self.decoder.forward_batch(&h, n);
        let loss = mse(&y, x);
        let dy = mse_grad(&y, x);
        let mut g = self.zeros_like();
        let dh = self.decoder.backward_batch(&h, n, &dy, &mut g.decoder);
        self.encoder.backward_batch(x, n, &dh, &mut g.encoder);
        (loss, g)
    }

    pub fn reconstruction_error(&self, x: &[f64], n: usize) -> f64 {
        let h = self.encoder.forward_batch(x, n);
        mse(&self.decoder.forward_batch(&h, n), x)
    }
}

impl Parameterized for Autoencoder {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &Tensor)) {
        visit_nested("enc", &self.encoder, f);
        visit_nested("dec", &self.decoder, f);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        visit_nested_mut("enc", &mut self.encoder, f);
        visit_nested_mut("dec", &mut self.decoder, f);
    }
}

/// Fits the autoencoder to `n` stacked feature rows of width `dim` with RMSProp.
/// Returns the model and the per-iteration reconstruction loss.
pub fn train(features: &[f64], n: usize, dim: usize, config: &AutoencoderConfig, seed: u64) -> Result<(Autoencoder, Vec<f64>)> {
    if n == 0 {
        return Err(Error::Empty("feature set"));
    }
    if features.len() != n * dim {
        return Err(Error::shape(format!("{} values do not form {n} rows of {dim}", features.len())));
    }
    let mut rng = seeded_rng(seed);
    let mut ae = Autoencoder::new(dim, config.latent, &mut rng);
    let mut opt = OptimizerState::rmsprop(config.learning_rate);
    let mut trace = Vec::with_capacity(config.iterations);
    let mut cycler = config
        .batch_size
        .filter(|&b| b < n)
        .map(|b| BatchCycler::new(n, b, seed ^ 0xae));
    let mut buf = Vec::new();
    for _ in 0..config.iterations {
        let (loss, grads) = match cycler.as_mut() {
            Some(c) => {
                let idx = c.next_batch();
                buf.clear();
                for &i in &idx {
                    buf.extend_from_slice(&features[i * dim..(i + 1) * dim]);
                }
                ae.loss_and_grad(&buf, idx.len())
            }
            None => ae.loss_and_grad(features, n),
        };
        trace.push(loss);
        opt.step(&mut ae, &grads)?;
    }
    Ok((ae, trace))
}
