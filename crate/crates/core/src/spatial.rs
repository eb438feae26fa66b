//! Convolutional feature branch over the channel axis of one sample:
//! conv `[1,1]` depth 2 → max-pool 2 → conv `[1,2]` depth 4 → max-pool 2 →
//! flatten → dense 120 (the spatial feature) → softmax output.
//!
//! Samples whose channel count is not a multiple of 4 are zero-padded on the
//! right so both pooling stages see even lengths.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{BatchCycler, Dataset};
use crate::error::{Error, Result};
use crate::nn::activation::softmax_rows;
use crate::nn::dense::{init_uniform, visit_nested, visit_nested_mut, DenseLayer};
use crate::nn::loss::{cross_entropy_labels, softmax_cross_entropy_grad};
use crate::nn::params::{add_l2_grad, Parameterized};
use crate::nn::{seeded_rng, OptimizerState};
use crate::temporal::BranchOutput;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpatialNetConfig {
    pub conv1_depth: usize,
    pub conv2_width: usize,
    pub conv2_depth: usize,
    pub pool: usize,
    /// Width of the fully-connected layer whose activations are the spatial feature.
    pub features: usize,
    pub classes: usize,
    pub iterations: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub l2: f64,
}

impl Default for SpatialNetConfig {
    fn default() -> Self {
        SpatialNetConfig {
            conv1_depth: 2,
            conv2_width: 2,
            conv2_depth: 4,
            pool: 2,
            features: 120,
            classes: 5,
            iterations: 2500,
            batch_size: 7000,
            learning_rate: 0.004,
            l2: 0.001,
        }
    }
}

/// 1-D convolution along the spatial axis with same-shape zero padding.
/// Weights are `[width, in_depth, out_depth]`. For even widths the extra
/// padding goes on the right.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub weights: Tensor,
    pub bias: Tensor,
    pub stride: usize,
}

impl ConvLayer {
    pub fn new<R: Rng>(width: usize, in_depth: usize, out_depth: usize, rng: &mut R) -> Self {
        ConvLayer {
            weights: init_uniform(rng, &[width, in_depth, out_depth], width * in_depth),
            bias: Tensor::zeros(&[out_depth]),
            stride: 1,
        }
    }

    pub fn from_parts(weights: Tensor, bias: Tensor, stride: usize) -> Result<Self> {
        if weights.rank() != 3 || bias.rank() != 1 || weights.shape()[2] != bias.len() || stride == 0 {
            return Err(Error::shape(format!(
                "conv weights {:?}, bias {:?}, stride {stride} are inconsistent",
                weights.shape(),
                bias.shape()
            )));
        }
        Ok(ConvLayer { weights, bias, stride })
    }

    pub fn zeros_like(&self) -> Self {
        ConvLayer {
            weights: Tensor::zeros(self.weights.shape()),
            bias: Tensor::zeros(self.bias.shape()),
            stride: self.stride,
        }
    }

    pub fn width(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn in_depth(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn out_depth(&self) -> usize {
        self.weights.shape()[2]
    }

    pub fn output_len(&self, len: usize) -> usize {
        len.div_ceil(self.stride)
    }

    fn left_pad(&self, len: usize) -> usize {
        let out = self.output_len(len);
        let total = ((out - 1) * self.stride + self.width()).saturating_sub(len);
        total / 2
    }

    /// `[1, len, in_depth] → [1, len′, out_depth]` for one sample.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let s = x.shape();
        if s.len() != 3 || s[0] != 1 || s[2] != self.in_depth() {
            return Err(Error::shape(format!(
                "conv expects [1, K, {}], got {:?}",
                self.in_depth(),
                s
            )));
        }
        let y = self.forward_batch(x.values(), 1, s[1]);
        Tensor::new(vec![1, self.output_len(s[1]), self.out_depth()], y)
    }

    /// Batch of `n` samples, each `[len, in_depth]` flattened depth-fastest.
    pub fn forward_batch(&self, x: &[f64], n: usize, len: usize) -> Vec<f64> {
        let (w, di, d_o) = (self.width(), self.in_depth(), self.out_depth());
        let out_len = self.output_len(len);
        let left = self.left_pad(len) as isize;
        let wt = self.weights.values();
        let mut y = Vec::with_capacity(n * out_len * d_o);
        for j in 0..n {
            let xs = &x[j * len * di..(j + 1) * len * di];
            for p in 0..out_len {
                let start = y.len();
                y.extend_from_slice(self.bias.values());
                let acc = &mut y[start..];
                for t in 0..w {
                    let q = (p * self.stride + t) as isize - left;
                    if q < 0 || q >= len as isize {
                        continue;
                    }
                    let xq = &xs[q as usize * di..(q as usize + 1) * di];
                    for (i, &xv) in xq.iter().enumerate() {
                        let row = &wt[(t * di + i) * d_o..(t * di + i + 1) * d_o];
                        for (a, wv) in acc.iter_mut().zip(row) {
                            *a += xv * wv;
                        }
                    }
                }
            }
        }
        y
    }

    /// Accumulates parameter gradients and returns `dL/dx`.
    pub fn backward_batch(&self, x: &[f64], n: usize, len: usize, dy: &[f64], grads: &mut ConvLayer) -> Vec<f64> {
        let (w, di, d_o) = (self.width(), self.in_depth(), self.out_depth());
        let out_len = self.output_len(len);
        let left = self.left_pad(len) as isize;
        let wt = self.weights.values();
        let mut dx = vec![0.0; n * len * di];
        for j in 0..n {
            let xs = &x[j * len * di..(j + 1) * len * di];
            for p in 0..out_len {
                let g = &dy[(j * out_len + p) * d_o..(j * out_len + p + 1) * d_o];
                for (b, gv) in grads.bias.values_mut().iter_mut().zip(g) {
                    *b += gv;
                }
                for t in 0..w {
                    let q = (p * self.stride + t) as isize - left;
                    if q < 0 || q >= len as isize {
                        continue;
                    }
                    let q = q as usize;
                    for i in 0..di {
                        let xv = xs[q * di + i];
                        let base = (t * di + i) * d_o;
                        let gw = &mut grads.weights.values_mut()[base..base + d_o];
                        let mut acc = 0.0;
                        for o in 0..d_o {
                            gw[o] += xv * g[o];
                            acc += wt[base + o] * g[o];
                        }
                        dx[(j * len + q) * di + i] += acc;
                    }
                }
            }
        }
        dx
    }
}

impl Parameterized for ConvLayer {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &Tensor)) {
        f("w", &self.weights);
        f("b", &self.bias);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        f("w", &mut self.weights);
        f("b", &mut self.bias);
    }
}

/// Non-overlapping max pooling (window = stride) along the spatial axis.
/// Returns the pooled values and, per output, the flat input index that won;
/// ties go to the first maximum.
pub fn maxpool_batch(x: &[f64], n: usize, len: usize, depth: usize, window: usize) -> Result<(Vec<f64>, Vec<usize>)> {
    if window == 0 || len % window != 0 {
        return Err(Error::shape(format!(
            "max-pool window {window} does not divide spatial length {len}"
        )));
    }
    let out_len = len / window;
    let mut y = Vec::with_capacity(n * out_len * depth);
    let mut idx = Vec::with_capacity(n * out_len * depth);
    for j in 0..n {
        for p in 0..out_len {
            for d in 0..depth {
                let mut best = (j * len + p * window) * depth + d;
                for t in 1..window {
                    let k = (j * len + p * window + t) * depth + d;
                    if x[k] > x[best] {
                        best = k;
                    }
                }
                y.push(x[best]);
                idx.push(best);
            }
        }
    }
    Ok((y, idx))
}

/// `[1, K, d] → [1, K/window, d]` for one sample.
pub fn maxpool(x: &Tensor, window: usize) -> Result<Tensor> {
    let s = x.shape();
    if s.len() != 3 || s[0] != 1 {
        return Err(Error::shape(format!("max-pool expects [1, K, d], got {s:?}")));
    }
    let (y, _) = maxpool_batch(x.values(), 1, s[1], s[2], window)?;
    Tensor::new(vec![1, s[1] / window, s[2]], y)
}

pub fn maxpool_backward(dy: &[f64], winners: &[usize], input_len: usize) -> Vec<f64> {
    let mut dx = vec![0.0; input_len];
    for (g, &k) in dy.iter().zip(winners) {
        dx[k] += g;
    }
    dx
}

fn relu_in_place(v: &mut [f64]) {
    v.iter_mut().for_each(|x| *x = x.max(0.0));
}

fn relu_mask(dy: &mut [f64], y: &[f64]) {
    for (d, v) in dy.iter_mut().zip(y) {
        if *v <= 0.0 {
            *d = 0.0;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpatialNet {
    pub conv1: ConvLayer,
    pub conv2: ConvLayer,
    pub fc: DenseLayer,
    pub output: DenseLayer,
    channels: usize,
    pool: usize,
}

/// Activations kept for backpropagation, all flattened per batch.
struct SpatialTrace {
    input: Vec<f64>,
    a1: Vec<f64>,
    p1: Vec<f64>,
    w1: Vec<usize>,
    a2: Vec<f64>,
    p2: Vec<f64>,
    w2: Vec<usize>,
    features: Vec<f64>,
    logits: Vec<f64>,
}

/// Spatial extents after each stage for one sample, from padded input to logits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpatialShapes {
    pub input: [usize; 3],
    pub conv1: [usize; 3],
    pub pool1: [usize; 3],
    pub conv2: [usize; 3],
    pub pool2: [usize; 3],
    pub flatten: usize,
    pub features: usize,
    pub classes: usize,
}

impl SpatialNet {
    pub fn new<R: Rng>(channels: usize, config: &SpatialNetConfig, rng: &mut R) -> Self {
        let pool = config.pool.max(1);
        let padded = padded_len(channels, pool * pool);
        let conv1 = ConvLayer::new(1, 1, config.conv1_depth, rng);
        let conv2 = ConvLayer::new(config.conv2_width, config.conv1_depth, config.conv2_depth, rng);
        let flat = padded / (pool * pool) * config.conv2_depth;
        SpatialNet {
            conv1,
            conv2,
            fc: DenseLayer::new(flat, config.features, rng),
            output: DenseLayer::new(config.features, config.classes, rng),
            channels,
            pool,
        }
    }

    pub fn zeros_like(&self) -> Self {
        SpatialNet {
            conv1: self.conv1.zeros_like(),
            conv2: self.conv2.zeros_like(),
            fc: self.fc.zeros_like(),
            output: self.output.zeros_like(),
            channels: self.channels,
            pool: self.pool,
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn feature_size(&self) -> usize {
        self.fc.output_size()
    }

    pub fn classes(&self) -> usize {
        self.output.output_size()
    }

    fn padded(&self) -> usize {
        padded_len(self.channels, self.pool * self.pool)
    }

    pub fn shapes(&self) -> SpatialShapes {
        let k = self.padded();
        let (d1, d2) = (self.conv1.out_depth(), self.conv2.out_depth());
        let k1 = self.conv1.output_len(k);
        let k2 = self.conv2.output_len(k1 / self.pool);
        SpatialShapes {
            input: [1, k, 1],
            conv1: [1, k1, d1],
            pool1: [1, k1 / self.pool, d1],
            conv2: [1, k2, d2],
            pool2: [1, k2 / self.pool, d2],
            flatten: k2 / self.pool * d2,
            features: self.feature_size(),
            classes: self.classes(),
        }
    }

    fn check_batch(&self, x: &[f64], n: usize) -> Result<()> {
        if n == 0 || x.len() != n * self.channels {
            return Err(Error::shape(format!(
                "spatial branch expects n ≥ 1 rows of {} channels, got {} values for n = {n}",
                self.channels,
                x.len()
            )));
        }
        Ok(())
    }

    fn forward_trace(&self, x: &[f64], n: usize) -> SpatialTrace {
        let k = self.padded();
        let mut input = Vec::with_capacity(n * k);
        for row in x.chunks(self.channels) {
            input.extend_from_slice(row);
            input.resize(input.len() + k - self.channels, 0.0);
        }
        let mut a1 = self.conv1.forward_batch(&input, n, k);
        relu_in_place(&mut a1);
        let k1 = self.conv1.output_len(k);
        let (p1, w1) = maxpool_batch(&a1, n, k1, self.conv1.out_depth(), self.pool).expect("padded length pools evenly");
        let l1 = k1 / self.pool;
        let mut a2 = self.conv2.forward_batch(&p1, n, l1);
        relu_in_place(&mut a2);
        let k2 = self.conv2.output_len(l1);
        let (p2, w2) = maxpool_batch(&a2, n, k2, self.conv2.out_depth(), self.pool).expect("padded length pools evenly");
        let mut features = self.fc.forward_batch(&p2, n);
        relu_in_place(&mut features);
        let logits = self.output.forward_batch(&features, n);
        SpatialTrace {
            input,
            a1,
            p1,
            w1,
            a2,
            p2,
            w2,
            features,
            logits,
        }
    }

    fn outputs(&self, x: &[f64], n: usize) -> BranchOutput {
        let t = self.forward_trace(x, n);
        BranchOutput {
            logits: Tensor::new(vec![n, self.classes()], t.logits).unwrap(),
            features: Tensor::new(vec![n, self.feature_size()], t.features).unwrap(),
        }
    }

    /// Batch `[n, channels]` forward; samples are independent.
    pub fn forward(&self, batch: &Tensor) -> Result<BranchOutput> {
        let n = batch.rows();
        self.check_batch(batch.values(), n)?;
        Ok(self.outputs(batch.values(), n))
    }

    pub fn forward_rows(&self, samples: &[f64], n: usize) -> Result<BranchOutput> {
        self.check_batch(samples, n)?;
        Ok(self.outputs(samples, n))
    }

    /// Spatial feature of one sample.
    pub fn extract(&self, sample: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_rows(sample, 1)?.features.into_values())
    }

    /// Mean cross-entropy (plus `l2·Σw²`) and its gradient for one batch.
    pub fn loss_and_grad(&self, x: &[f64], labels: &[u8], l2: f64) -> (f64, SpatialNet) {
        let n = labels.len();
        let classes = self.classes();
        let t = self.forward_trace(x, n);
        let mut probs = t.logits.clone();
        softmax_rows(&mut probs, classes);
        let loss = cross_entropy_labels(&probs, labels, classes) + l2 * self.l2_norm_sq();

        let mut g = self.zeros_like();
        let dlogits = softmax_cross_entropy_grad(&probs, labels, classes);
        let mut dfeat = self.output.backward_batch(&t.features, n, &dlogits, &mut g.output);
        relu_mask(&mut dfeat, &t.features);
        let dp2 = self.fc.backward_batch(&t.p2, n, &dfeat, &mut g.fc);
        let mut da2 = maxpool_backward(&dp2, &t.w2, t.a2.len());
        relu_mask(&mut da2, &t.a2);
        let l1 = t.p1.len() / (n * self.conv1.out_depth());
        let dp1 = self.conv2.backward_batch(&t.p1, n, l1, &da2, &mut g.conv2);
        let mut da1 = maxpool_backward(&dp1, &t.w1, t.a1.len());
        relu_mask(&mut da1, &t.a1);
        self.conv1.backward_batch(&t.input, n, self.padded(), &da1, &mut g.conv1);
        add_l2_grad(self, &mut g, l2);
        (loss, g)
    }
}

impl Parameterized for SpatialNet {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &Tensor)) {
        visit_nested("conv1", &self.conv1, f);
        visit_nested("conv2", &self.conv2, f);
        visit_nested("fc", &self.fc, f);
        visit_nested("out", &self.output, f);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        visit_nested_mut("conv1", &mut self.conv1, f);
        visit_nested_mut("conv2", &mut self.conv2, f);
        visit_nested_mut("fc", &mut self.fc, f);
        visit_nested_mut("out", &mut self.output, f);
    }
}

/// Smallest multiple of `multiple` that is ≥ `len`.
pub fn padded_len(len: usize, multiple: usize) -> usize {
    len.div_ceil(multiple) * multiple
}

/// Trains the branch with Adam on mini-batches of `min(batch_size, n)` rows.
pub fn train(data: &Dataset, config: &SpatialNetConfig, seed: u64) -> Result<(SpatialNet, Vec<f64>)> {
    if data.is_empty() {
        return Err(Error::Empty("training set"));
    }
    data.check_labels(config.classes)?;
    let mut rng = seeded_rng(seed);
    let mut net = SpatialNet::new(data.channels(), config, &mut rng);
    let mut batches = BatchCycler::new(data.len(), config.batch_size, rng.gen());
    let mut opt = OptimizerState::adam(config.learning_rate);
    let mut trace = Vec::with_capacity(config.iterations);
    for _ in 0..config.iterations {
        let idx = batches.next_batch();
        let (x, y) = data.gather(&idx);
        let (loss, grads) = net.loss_and_grad(&x, &y, config.l2);
        trace.push(loss);
        opt.step(&mut net, &grads)?;
    }
    Ok((net, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::{gradient_check, DEFAULT_STEP};
    use crate::nn::params::{flatten, load_flat};
    use proptest::prelude::*;
    use rand::Rng;

    fn conv(width: usize, din: usize, dout: usize, w: Vec<f64>, b: Vec<f64>) -> ConvLayer {
        ConvLayer::from_parts(Tensor::new(vec![width, din, dout], w).unwrap(), Tensor::vector(b), 1).unwrap()
    }

    fn sample(values: Vec<f64>, depth: usize) -> Tensor {
        let k = values.len() / depth;
        Tensor::new(vec![1, k, depth], values).unwrap()
    }

    #[test]
    fn first_conv_shape() {
        let c = ConvLayer::new(1, 1, 2, &mut seeded_rng(0));
        let y = c.forward(&sample(vec![0.5; 64], 1)).unwrap();
        assert_eq!(y.shape(), &[1, 64, 2]);
    }

    #[test]
    fn unit_filter_is_identity() {
        let c = conv(1, 1, 1, vec![1.0], vec![0.0]);
        let x = sample(vec![3.0, -1.0, 2.5], 1);
        assert_eq!(c.forward(&x).unwrap().values(), x.values());
    }

    #[test]
    fn even_filter_pads_right() {
        // [1,2,3] ⊛ [1,1] with one trailing zero: [1+2, 2+3, 3+0]
        let c = conv(2, 1, 1, vec![1.0, 1.0], vec![0.0]);
        let y = c.forward(&sample(vec![1.0, 2.0, 3.0], 1)).unwrap();
        assert_eq!(y.values(), &[3.0, 5.0, 3.0]);
    }

    #[test]
    fn depth_mismatch_rejected() {
        let c = conv(1, 2, 1, vec![1.0, 1.0], vec![0.0]);
        assert!(matches!(c.forward(&sample(vec![1.0, 2.0, 3.0], 1)), Err(Error::Shape(_))));
    }

    #[test]
    fn pool_examples() {
        let y = maxpool(&sample(vec![1.0, 3.0, 2.0, 0.0], 1), 2).unwrap();
        assert_eq!(y.values(), &[3.0, 2.0]);
        let y = maxpool(&sample(vec![0.7; 64 * 2], 2), 2).unwrap();
        assert_eq!(y.shape(), &[1, 32, 2]);
        assert!(y.values().iter().all(|&v| v == 0.7));
        assert!(matches!(maxpool(&sample(vec![1.0; 5], 1), 2), Err(Error::Shape(_))));
    }

    #[test]
    fn pool_ties_route_to_first() {
        let (_, w) = maxpool_batch(&[2.0, 2.0, 1.0, 1.0], 1, 4, 1, 2).unwrap();
        assert_eq!(w, vec![0, 2]);
        assert_eq!(maxpool_backward(&[1.0, 1.0], &w, 4), vec![1.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn shape_chain_for_64_channels() {
        let net = SpatialNet::new(64, &SpatialNetConfig::default(), &mut seeded_rng(0));
        let s = net.shapes();
        assert_eq!(s.input, [1, 64, 1]);
        assert_eq!(s.conv1, [1, 64, 2]);
        assert_eq!(s.pool1, [1, 32, 2]);
        assert_eq!(s.conv2, [1, 32, 4]);
        assert_eq!(s.pool2, [1, 16, 4]);
        assert_eq!((s.flatten, s.features, s.classes), (64, 120, 5));
        let out = net.forward(&Tensor::new(vec![1, 64], vec![0.1; 64]).unwrap()).unwrap();
        assert_eq!(out.features.shape(), &[1, 120]);
        assert_eq!(out.logits.shape(), &[1, 5]);
    }

    #[test]
    fn fourteen_channels_pad_to_sixteen() {
        let net = SpatialNet::new(14, &SpatialNetConfig::default(), &mut seeded_rng(0));
        assert_eq!(net.shapes().input, [1, 16, 1]);
        assert_eq!(net.shapes().flatten, 16);
        assert_eq!(net.extract(&[1.0; 14]).unwrap().len(), 120);
        assert!(net.extract(&[1.0; 16]).is_err());
    }

    #[test]
    fn zero_sample_with_zero_biases_gives_zero_feature() {
        let net = SpatialNet::new(64, &SpatialNetConfig::default(), &mut seeded_rng(3));
        assert!(net.extract(&[0.0; 64]).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let net = SpatialNet::new(8, &SpatialNetConfig::default(), &mut seeded_rng(4));
        let x: Vec<f64> = (0..24).map(|i| (i as f64 * 0.7).sin()).collect();
        let mut p = net.forward(&Tensor::new(vec![3, 8], x).unwrap()).unwrap().logits.into_values();
        softmax_rows(&mut p, 5);
        for row in p.chunks(5) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn conv_pool_gradients_match_finite_differences() {
        let config = SpatialNetConfig {
            features: 6,
            ..SpatialNetConfig::default()
        };
        for seed in 0..100 {
            let mut rng = seeded_rng(seed);
            let mut net = SpatialNet::new(8, &config, &mut rng);
            // nonzero biases keep ReLU inputs off the kink at exactly 0
            let params: Vec<f64> = (0..flatten(&net).len()).map(|_| rng.gen_range(-0.5..0.5)).collect();
            load_flat(&mut net, &params);
            let x: Vec<f64> = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let labels = [rng.gen_range(0..5u8), rng.gen_range(0..5u8)];
            let report = gradient_check(&net, DEFAULT_STEP, |m| m.loss_and_grad(&x, &labels, 0.001));
            assert!(report.passes(1e-4), "seed {seed}: {report:?}");
        }
    }

    #[test]
    fn learns_separable_data() {
        let data = crate::data::synthetic::blobs(400, 8, 5, 4.0, 11);
        let config = SpatialNetConfig {
            features: 32,
            iterations: 1000,
            learning_rate: 0.01,
            ..SpatialNetConfig::default()
        };
        let (net, trace) = train(&data, &config, 2).unwrap();
        assert!(trace.last().unwrap() < &trace[0]);
        let out = net.forward_rows(data.samples(), data.len()).unwrap();
        let correct = (0..data.len())
            .filter(|&i| crate::nn::argmax(out.logits.row(i)) == data.label(i) as usize)
            .count();
        assert!(correct as f64 / data.len() as f64 >= 0.95, "accuracy {correct}/400");
    }

    #[test]
    fn learning_rate_zero_leaves_parameters() {
        let data = crate::data::synthetic::separable(40, 8, 5, 3);
        let config = SpatialNetConfig {
            iterations: 4,
            learning_rate: 0.0,
            ..SpatialNetConfig::default()
        };
        let (net, _) = train(&data, &config, 5).unwrap();
        let fresh = SpatialNet::new(8, &config, &mut seeded_rng(5));
        assert_eq!(flatten(&net), flatten(&fresh));
    }

    #[test]
    fn training_is_seed_deterministic() {
        let data = crate::data::synthetic::separable(50, 8, 5, 1);
        let config = SpatialNetConfig {
            features: 8,
            iterations: 10,
            ..SpatialNetConfig::default()
        };
        let (a, ta) = train(&data, &config, 9).unwrap();
        let (b, tb) = train(&data, &config, 9).unwrap();
        assert_eq!(flatten(&a), flatten(&b));
        assert_eq!(ta, tb);
    }

    proptest! {
        #[test]
        fn pool_commutes_with_positive_scaling(
            v in proptest::collection::vec(-10.0f64..10.0, 8),
            alpha in 0.01f64..100.0,
        ) {
            let x = sample(v.clone(), 2);
            let scaled = sample(v.iter().map(|x| alpha * x).collect(), 2);
            let a = maxpool(&scaled, 2).unwrap();
            let b = maxpool(&x, 2).unwrap();
            for (p, q) in a.values().iter().zip(b.values()) {
                prop_assert!((p - alpha * q).abs() <= 1e-12 * p.abs().max(1.0));
            }
        }

        #[test]
        fn unit_filter_output_ignores_padding(v in proptest::collection::vec(-5.0f64..5.0, 1..12), w in -2.0f64..2.0) {
            let c = conv(1, 1, 1, vec![w], vec![0.0]);
            let y = c.forward(&sample(v.clone(), 1)).unwrap();
            let expect: Vec<f64> = v.iter().map(|x| x * w).collect();
            prop_assert_eq!(y.values(), &expect[..]);
        }
    }
}
