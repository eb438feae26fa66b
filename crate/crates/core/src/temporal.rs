//! Recurrent feature branch: three dense `tanh` layers, two LSTM layers and a
//! softmax output. The 64-wide output of the second LSTM layer is the temporal
//! feature.
//!
//! The recurrence runs along the sample order of a batch: entry `j` sees the
//! hidden and cell state left by entry `j − 1`. State starts at zero for every
//! batch and for every inference call.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{BatchCycler, Dataset};
use crate::error::{Error, Result};
use crate::nn::activation::{sigmoid, softmax_rows};
use crate::nn::dense::{init_uniform, visit_nested, visit_nested_mut, DenseLayer};
use crate::nn::loss::{cross_entropy_labels, softmax_cross_entropy_grad};
use crate::nn::params::{add_l2_grad, Parameterized};
use crate::nn::{seeded_rng, OptimizerState};
use crate::tensor::{gemm, Tensor};

pub const DENSE_LAYERS: usize = 3;
pub const LSTM_LAYERS: usize = 2;

// Gate blocks inside the 4h-wide pre-activation, in this order.
const GATE_INPUT: usize = 0;
const GATE_FORGET: usize = 1;
const GATE_OUTPUT: usize = 2;
const GATE_MODULATION: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TemporalNetConfig {
    pub hidden: usize,
    pub classes: usize,
    pub iterations: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub l2: f64,
}

impl Default for TemporalNetConfig {
    fn default() -> Self {
        TemporalNetConfig {
            hidden: 64,
            classes: 5,
            iterations: 2500,
            batch_size: 7000,
            learning_rate: 0.005,
            l2: 0.004,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmCellState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmCellState {
    pub fn zeros(hidden: usize) -> Self {
        LstmCellState {
            h: vec![0.0; hidden],
            c: vec![0.0; hidden],
        }
    }
}

/// One LSTM layer. `wx` is `[in, 4h]`, `wh` is `[h, 4h]`, `b` is `[4h]`; the
/// 4h axis holds the input, forget, output and modulation gates in that order.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayer {
    pub wx: Tensor,
    pub wh: Tensor,
    pub b: Tensor,
}

struct LstmTrace {
    /// Activated gates, `[n, 4h]`.
    gates: Vec<f64>,
    c: Vec<f64>,
    h: Vec<f64>,
}

impl LstmLayer {
    pub fn new<R: Rng>(input: usize, hidden: usize, rng: &mut R) -> Self {
        LstmLayer {
            wx: init_uniform(rng, &[input, 4 * hidden], input),
            wh: init_uniform(rng, &[hidden, 4 * hidden], hidden),
            b: Tensor::zeros(&[4 * hidden]),
        }
    }

    pub fn zeros_like(&self) -> Self {
        LstmLayer {
            wx: Tensor::zeros(self.wx.shape()),
            wh: Tensor::zeros(self.wh.shape()),
            b: Tensor::zeros(self.b.shape()),
        }
    }

    pub fn input_size(&self) -> usize {
        self.wx.shape()[0]
    }

    pub fn hidden_size(&self) -> usize {
        self.wh.shape()[0]
    }

    /// Single step of the cell.
    pub fn cell_forward(&self, x: &[f64], prev: &LstmCellState) -> Result<LstmCellState> {
        let h = self.hidden_size();
        if x.len() != self.input_size() || prev.h.len() != h || prev.c.len() != h {
            return Err(Error::shape(format!(
                "lstm cell expects input {} and state {h}, got {} / {} / {}",
                self.input_size(),
                x.len(),
                prev.h.len(),
                prev.c.len()
            )));
        }
        let mut z = self.b.values().to_vec();
        gemm(1, x.len(), 4 * h, x, false, self.wx.values(), false, 1.0, &mut z);
        gemm(1, h, 4 * h, &prev.h, false, self.wh.values(), false, 1.0, &mut z);
        let mut next = LstmCellState::zeros(h);
        for k in 0..h {
            let i = sigmoid(z[GATE_INPUT * h + k]);
            let f = sigmoid(z[GATE_FORGET * h + k]);
            let o = sigmoid(z[GATE_OUTPUT * h + k]);
            let m = z[GATE_MODULATION * h + k].tanh();
            next.c[k] = f * prev.c[k] + i * m;
            next.h[k] = o * next.c[k].tanh();
        }
        Ok(next)
    }

    /// Runs `n` rows. With `chained`, each row continues from the previous row's
    /// state and the first from `init` (zero when `None`); otherwise every row
    /// starts from zero.
    fn forward_sequence(&self, x: &[f64], n: usize, chained: bool, init: Option<&LstmCellState>) -> LstmTrace {
        let h = self.hidden_size();
        let g4 = 4 * h;
        let mut gates = Vec::with_capacity(n * g4);
        for _ in 0..n {
            gates.extend_from_slice(self.b.values());
        }
        gemm(n, self.input_size(), g4, x, false, self.wx.values(), false, 1.0, &mut gates);
        let mut c = vec![0.0; n * h];
        let mut hs = vec![0.0; n * h];
        for j in 0..n {
            let (done, rest) = gates.split_at_mut(j * g4);
            let z = &mut rest[..g4];
            let _ = done;
            if chained && j > 0 {
                gemm(1, h, g4, &hs[(j - 1) * h..j * h], false, self.wh.values(), false, 1.0, z);
            } else if let (true, Some(s)) = (chained, init) {
                gemm(1, h, g4, &s.h, false, self.wh.values(), false, 1.0, z);
            }
            for k in 0..h {
                let i = sigmoid(z[GATE_INPUT * h + k]);
                let f = sigmoid(z[GATE_FORGET * h + k]);
                let o = sigmoid(z[GATE_OUTPUT * h + k]);
                let m = z[GATE_MODULATION * h + k].tanh();
                z[GATE_INPUT * h + k] = i;
                z[GATE_FORGET * h + k] = f;
                z[GATE_OUTPUT * h + k] = o;
                z[GATE_MODULATION * h + k] = m;
                let c_prev = match (chained, j, init) {
                    (true, 0, Some(s)) => s.c[k],
                    (true, j, _) if j > 0 => c[(j - 1) * h + k],
                    _ => 0.0,
                };
                let cj = f * c_prev + i * m;
                c[j * h + k] = cj;
                hs[j * h + k] = o * cj.tanh();
            }
        }
        LstmTrace { gates, c, h: hs }
    }

    /// Backpropagation through time over the batch order.
    fn backward_sequence(
        &self,
        x: &[f64],
        n: usize,
        trace: &LstmTrace,
        dh_out: &[f64],
        chained: bool,
        init: Option<&LstmCellState>,
        grads: &mut LstmLayer,
    ) -> Vec<f64> {
        let h = self.hidden_size();
        let g4 = 4 * h;
        let mut dz = vec![0.0; n * g4];
        let mut dh_rec = vec![0.0; h];
        let mut dc_next = vec![0.0; h];
        for j in (0..n).rev() {
            let gates = &trace.gates[j * g4..(j + 1) * g4];
            let dzj = &mut dz[j * g4..(j + 1) * g4];
            for k in 0..h {
                let i = gates[GATE_INPUT * h + k];
                let f = gates[GATE_FORGET * h + k];
                let o = gates[GATE_OUTPUT * h + k];
                let m = gates[GATE_MODULATION * h + k];
                let tc = trace.c[j * h + k].tanh();
                let dh = dh_out[j * h + k] + dh_rec[k];
                let d_o = dh * tc;
                let dc = dc_next[k] + dh * o * (1.0 - tc * tc);
                let c_prev = match (chained, j, init) {
                    (true, 0, Some(s)) => s.c[k],
                    (true, j, _) if j > 0 => trace.c[(j - 1) * h + k],
                    _ => 0.0,
                };
                dzj[GATE_INPUT * h + k] = dc * m * i * (1.0 - i);
                dzj[GATE_FORGET * h + k] = dc * c_prev * f * (1.0 - f);
                dzj[GATE_OUTPUT * h + k] = d_o * o * (1.0 - o);
                dzj[GATE_MODULATION * h + k] = dc * i * (1.0 - m * m);
                dc_next[k] = if chained { dc * f } else { 0.0 };
            }
            if chained && j > 0 {
                // dh_{j-1} += dz_j · Whᵀ
                gemm(1, g4, h, dzj, false, self.wh.values(), true, 0.0, &mut dh_rec);
            } else {
                dh_rec.iter_mut().for_each(|v| *v = 0.0);
            }
        }
        let input = self.input_size();
        gemm(input, n, g4, x, true, &dz, false, 1.0, grads.wx.values_mut());
        if chained && n > 1 {
            gemm(h, n - 1, g4, &trace.h[..(n - 1) * h], true, &dz[g4..], false, 1.0, grads.wh.values_mut());
        }
        if let (true, Some(s)) = (chained, init) {
            gemm(h, 1, g4, &s.h, true, &dz[..g4], false, 1.0, grads.wh.values_mut());
        }
        for row in dz.chunks(g4) {
            for (g, d) in grads.b.values_mut().iter_mut().zip(row) {
                *g += d;
            }
        }
        let mut dx = vec![0.0; n * input];
        gemm(n, g4, input, &dz, false, self.wx.values(), true, 0.0, &mut dx);
        dx
    }
}

impl Parameterized for LstmLayer {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &Tensor)) {
        f("wx", &self.wx);
        f("wh", &self.wh);
        f("b", &self.b);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        f("wx", &mut self.wx);
        f("wh", &mut self.wh);
        f("b", &mut self.b);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemporalNet {
    pub dense: Vec<DenseLayer>,
    pub lstm: Vec<LstmLayer>,
    pub output: DenseLayer,
}

/// Logits `[n, classes]` and temporal features `[n, hidden]`.
#[derive(Debug, Clone)]
pub struct BranchOutput {
    pub logits: Tensor,
    pub features: Tensor,
}

struct TemporalTrace {
    dense_out: Vec<Vec<f64>>,
    lstm: Vec<LstmTrace>,
    probs: Vec<f64>,
}

impl TemporalNet {
    pub fn new<R: Rng>(channels: usize, config: &TemporalNetConfig, rng: &mut R) -> Self {
        let h = config.hidden;
        let dense = (0..DENSE_LAYERS)
            .map(|i| DenseLayer::new(if i == 0 { channels } else { h }, h, rng))
            .collect();
        let lstm = (0..LSTM_LAYERS).map(|_| LstmLayer::new(h, h, rng)).collect();
        TemporalNet {
            dense,
            lstm,
            output: DenseLayer::new(h, config.classes, rng),
        }
    }

    pub fn zeros_like(&self) -> Self {
        TemporalNet {
            dense: self.dense.iter().map(DenseLayer::zeros_like).collect(),
            lstm: self.lstm.iter().map(LstmLayer::zeros_like).collect(),
            output: self.output.zeros_like(),
        }
    }

    pub fn channels(&self) -> usize {
        self.dense[0].input_size()
    }

    pub fn feature_size(&self) -> usize {
        self.lstm[LSTM_LAYERS - 1].hidden_size()
    }

    pub fn classes(&self) -> usize {
        self.output.output_size()
    }

    fn check_batch(&self, x: &[f64], n: usize) -> Result<()> {
        if n == 0 || x.len() != n * self.channels() {
            return Err(Error::shape(format!(
                "temporal branch expects n ≥ 1 rows of {} channels, got {} values for n = {n}",
                self.channels(),
                x.len()
            )));
        }
        Ok(())
    }

    fn forward_trace(&self, x: &[f64], n: usize, chained: bool) -> TemporalTrace {
        let mut dense_out: Vec<Vec<f64>> = Vec::with_capacity(DENSE_LAYERS);
        for (i, layer) in self.dense.iter().enumerate() {
            let input = if i == 0 { x } else { &dense_out[i - 1] };
            let mut y = layer.forward_batch(input, n);
            y.iter_mut().for_each(|v| *v = v.tanh());
            dense_out.push(y);
        }
        let mut lstm: Vec<LstmTrace> = Vec::with_capacity(LSTM_LAYERS);
        for (i, layer) in self.lstm.iter().enumerate() {
            let input = if i == 0 { &dense_out[DENSE_LAYERS - 1] } else { &lstm[i - 1].h };
            lstm.push(layer.forward_sequence(input, n, chained, None));
        }
        let mut probs = self.output.forward_batch(&lstm[LSTM_LAYERS - 1].h, n);
        softmax_rows(&mut probs, self.classes());
        TemporalTrace { dense_out, lstm, probs }
    }

    fn outputs(&self, x: &[f64], n: usize, chained: bool) -> BranchOutput {
        let trace = self.forward_trace(x, n, chained);
        let features = trace.lstm.into_iter().last().unwrap().h;
        let logits = self.output.forward_batch(&features, n);
        BranchOutput {
            logits: Tensor::new(vec![n, self.classes()], logits).unwrap(),
            features: Tensor::new(vec![n, self.feature_size()], features).unwrap(),
        }
    }

    /// Batch forward with the recurrent state chained across rows.
    pub fn forward(&self, batch: &Tensor) -> Result<BranchOutput> {
        let n = batch.rows();
        self.check_batch(batch.values(), n)?;
        Ok(self.outputs(batch.values(), n, true))
    }

    /// Independent forward of every row, each from a zero state.
    pub fn forward_independent(&self, samples: &[f64], n: usize) -> Result<BranchOutput> {
        self.check_batch(samples, n)?;
        Ok(self.outputs(samples, n, false))
    }

    /// Temporal feature of one sample, from a fresh zero state.
    pub fn extract(&self, sample: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_independent(sample, 1)?.features.into_values())
    }

    /// Mean cross-entropy (plus `l2·Σw²`) and its gradient for one batch.
    pub fn loss_and_grad(&self, x: &[f64], labels: &[u8], chained: bool, l2: f64) -> (f64, TemporalNet) {
        let n = labels.len();
        let trace = self.forward_trace(x, n, chained);
        let classes = self.classes();
        let loss = cross_entropy_labels(&trace.probs, labels, classes) + l2 * self.l2_norm_sq();
        let mut grads = self.zeros_like();
        let dlogits = softmax_cross_entropy_grad(&trace.probs, labels, classes);
        let mut dh = self
            .output
            .backward_batch(&trace.lstm[LSTM_LAYERS - 1].h, n, &dlogits, &mut grads.output);
        for i in (0..LSTM_LAYERS).rev() {
            let input = if i == 0 { &trace.dense_out[DENSE_LAYERS - 1] } else { &trace.lstm[i - 1].h };
            dh = self.lstm[i].backward_sequence(input, n, &trace.lstm[i], &dh, chained, None, &mut grads.lstm[i]);
        }
        for i in (0..DENSE_LAYERS).rev() {
            let y = &trace.dense_out[i];
            for (d, yv) in dh.iter_mut().zip(y) {
                *d *= 1.0 - yv * yv;
            }
            let input = if i == 0 { x } else { &trace.dense_out[i - 1] };
            dh = self.dense[i].backward_batch(input, n, &dh, &mut grads.dense[i]);
        }
        add_l2_grad(self, &mut grads, l2);
        (loss, grads)
    }
}

impl Parameterized for TemporalNet {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &Tensor)) {
        for (i, l) in self.dense.iter().enumerate() {
            visit_nested(&format!("dense{i}"), l, f);
        }
        for (i, l) in self.lstm.iter().enumerate() {
            visit_nested(&format!("lstm{i}"), l, f);
        }
        visit_nested("out", &self.output, f);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        for (i, l) in self.dense.iter_mut().enumerate() {
            visit_nested_mut(&format!("dense{i}"), l, f);
        }
        for (i, l) in self.lstm.iter_mut().enumerate() {
            visit_nested_mut(&format!("lstm{i}"), l, f);
        }
        visit_nested_mut("out", &mut self.output, f);
    }
}

/// One LSTM layer over a chained sequence starting from `initial`, read out
/// by a dense softmax layer. Small enough to gradient-check exhaustively.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmFragment {
    pub lstm: LstmLayer,
    pub readout: DenseLayer,
    pub initial: LstmCellState,
}

impl LstmFragment {
    pub fn new<R: Rng>(input: usize, hidden: usize, classes: usize, rng: &mut R) -> Self {
        LstmFragment {
            lstm: LstmLayer::new(input, hidden, rng),
            readout: DenseLayer::new(hidden, classes, rng),
            initial: LstmCellState::zeros(hidden),
        }
    }

    /// Mean cross-entropy over the sequence `x` (`labels.len()` steps) and its gradient.
    pub fn loss_and_grad(&self, x: &[f64], labels: &[u8]) -> (f64, LstmFragment) {
        let n = labels.len();
        let classes = self.readout.output_size();
        let trace = self.lstm.forward_sequence(x, n, true, Some(&self.initial));
        let mut probs = self.readout.forward_batch(&trace.h, n);
        softmax_rows(&mut probs, classes);
        let loss = cross_entropy_labels(&probs, labels, classes);
        let mut grads = LstmFragment {
            lstm: self.lstm.zeros_like(),
            readout: self.readout.zeros_like(),
            initial: self.initial.clone(),
        };
        let dlogits = softmax_cross_entropy_grad(&probs, labels, classes);
        let dh = self.readout.backward_batch(&trace.h, n, &dlogits, &mut grads.readout);
        self.lstm
            .backward_sequence(x, n, &trace, &dh, true, Some(&self.initial), &mut grads.lstm);
        (loss, grads)
    }
}

impl Parameterized for LstmFragment {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &Tensor)) {
        visit_nested("lstm", &self.lstm, f);
        visit_nested("out", &self.readout, f);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        visit_nested_mut("lstm", &mut self.lstm, f);
        visit_nested_mut("out", &mut self.readout, f);
    }
}

/// Trains the branch with Adam on mini-batches of `min(batch_size, n)` rows.
/// Returns the model and the per-iteration loss.
pub fn train(data: &Dataset, config: &TemporalNetConfig, seed: u64) -> Result<(TemporalNet, Vec<f64>)> {
    if data.is_empty() {
        return Err(Error::Empty("training set"));
    }
    data.check_labels(config.classes)?;
    let mut rng = seeded_rng(seed);
    let mut net = TemporalNet::new(data.channels(), config, &mut rng);
    let mut batches = BatchCycler::new(data.len(), config.batch_size, rng.gen());
    let mut opt = OptimizerState::adam(config.learning_rate);
    let mut trace = Vec::with_capacity(config.iterations);
    for _ in 0..config.iterations {
        let idx = batches.next_batch();
        let (x, y) = data.gather(&idx);
        let (loss, grads) = net.loss_and_grad(&x, &y, true, config.l2);
        trace.push(loss);
        opt.step(&mut net, &grads)?;
    }
    Ok((net, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::{gradient_check, DEFAULT_STEP};
    use crate::nn::params::flatten;

    fn small_config(hidden: usize) -> TemporalNetConfig {
        TemporalNetConfig {
            hidden,
            ..TemporalNetConfig::default()
        }
    }

    /// Scalar re-implementation of one cell step, for a 1-unit layer.
    fn scalar_cell(x: f64, h: f64, c: f64, wx: [f64; 4], wh: [f64; 4], b: [f64; 4]) -> (f64, f64) {
        let s = |v: f64| 1.0 / (1.0 + (-v).exp());
        let i = s(x * wx[0] + h * wh[0] + b[0]);
        let f = s(x * wx[1] + h * wh[1] + b[1]);
        let o = s(x * wx[2] + h * wh[2] + b[2]);
        let m = (x * wx[3] + h * wh[3] + b[3]).tanh();
        let c2 = f * c + i * m;
        (o * c2.tanh(), c2)
    }

    #[test]
    fn zero_parameters_give_zero_state() {
        let layer = LstmLayer {
            wx: Tensor::zeros(&[3, 8]),
            wh: Tensor::zeros(&[2, 8]),
            b: Tensor::zeros(&[8]),
        };
        let out = layer.cell_forward(&[0.3, -2.0, 5.0], &LstmCellState::zeros(2)).unwrap();
        assert_eq!(out.h, vec![0.0, 0.0]);
        assert_eq!(out.c, vec![0.0, 0.0]);
    }

    #[test]
    fn saturated_gates_preserve_cell_state() {
        let h = 3;
        let mut b = vec![0.0; 4 * h];
        for k in 0..h {
            b[GATE_INPUT * h + k] = -50.0;
            b[GATE_FORGET * h + k] = 50.0;
        }
        let mut rng = seeded_rng(4);
        let layer = LstmLayer {
            wx: init_uniform(&mut rng, &[2, 4 * h], 2),
            wh: init_uniform(&mut rng, &[h, 4 * h], h),
            b: Tensor::vector(b),
        };
        let mut state = LstmCellState {
            h: vec![0.1, -0.2, 0.3],
            c: vec![0.7, -1.3, 2.0],
        };
        let c0 = state.c.clone();
        for step in 0..5 {
            state = layer.cell_forward(&[step as f64, -1.0], &state).unwrap();
            for (a, b) in state.c.iter().zip(&c0) {
                assert!((a - b).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn one_unit_cell_matches_scalar_oracle() {
        let wx = [0.4, -0.7, 1.1, 0.25];
        let wh = [-0.3, 0.9, 0.2, -1.4];
        let b = [0.05, 0.5, -0.1, 0.3];
        let layer = LstmLayer {
            wx: Tensor::new(vec![1, 4], wx.to_vec()).unwrap(),
            wh: Tensor::new(vec![1, 4], wh.to_vec()).unwrap(),
            b: Tensor::vector(b.to_vec()),
        };
        let (mut h, mut c) = (0.2, -0.6);
        let mut state = LstmCellState { h: vec![h], c: vec![c] };
        for x in [0.9, -1.7, 0.3] {
            state = layer.cell_forward(&[x], &state).unwrap();
            (h, c) = scalar_cell(x, h, c, wx, wh, b);
            assert!((state.h[0] - h).abs() < 1e-12);
            assert!((state.c[0] - c).abs() < 1e-12);
        }
    }

    #[test]
    fn sequence_forward_agrees_with_cell_steps() {
        let mut rng = seeded_rng(11);
        let layer = LstmLayer::new(3, 4, &mut rng);
        let x: Vec<f64> = (0..15).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let trace = layer.forward_sequence(&x, 5, true, None);
        let mut state = LstmCellState::zeros(4);
        for j in 0..5 {
            state = layer.cell_forward(&x[j * 3..(j + 1) * 3], &state).unwrap();
            for k in 0..4 {
                assert!((trace.h[j * 4 + k] - state.h[k]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn single_sample_shapes() {
        let net = TemporalNet::new(64, &TemporalNetConfig::default(), &mut seeded_rng(0));
        let out = net.forward(&Tensor::new(vec![1, 64], vec![0.5; 64]).unwrap()).unwrap();
        assert_eq!(out.features.shape(), &[1, 64]);
        assert_eq!(out.logits.shape(), &[1, 5]);
        assert_eq!(net.extract(&[0.5; 64]).unwrap().len(), 64);
    }

    #[test]
    fn state_carries_over_between_batch_entries() {
        let net = TemporalNet::new(8, &small_config(16), &mut seeded_rng(1));
        let row: Vec<f64> = (0..8).map(|i| i as f64 * 0.3 - 1.0).collect();
        let batch = Tensor::new(vec![2, 8], [row.clone(), row].concat()).unwrap();
        let out = net.forward(&batch).unwrap();
        assert_ne!(out.logits.row(0), out.logits.row(1));
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let net = TemporalNet::new(8, &small_config(16), &mut seeded_rng(2));
        let x: Vec<f64> = (0..40).map(|i| (i as f64).cos()).collect();
        let out = net.forward(&Tensor::new(vec![5, 8], x).unwrap()).unwrap();
        let mut p = out.logits.into_values();
        softmax_rows(&mut p, 5);
        for row in p.chunks(5) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn channel_mismatch_rejected() {
        let net = TemporalNet::new(8, &small_config(4), &mut seeded_rng(0));
        assert!(net.extract(&[0.0; 7]).is_err());
    }

    /// 2-step, 4-unit fragment continuing from a random state, so the
    /// recurrent weights see a nonzero previous output at both steps.
    fn random_fragment(seed: u64) -> (LstmFragment, Vec<f64>, [u8; 2]) {
        let mut rng = seeded_rng(seed);
        let mut frag = LstmFragment::new(3, 4, 5, &mut rng);
        frag.initial.h = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        frag.initial.c = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let labels = [rng.gen_range(0..5u8), rng.gen_range(0..5u8)];
        (frag, x, labels)
    }

    #[test]
    fn bptt_matches_finite_differences() {
        for seed in 0..100 {
            let (frag, x, labels) = random_fragment(seed);
            let report = gradient_check(&frag, DEFAULT_STEP, |m| m.loss_and_grad(&x, &labels));
            assert!(report.passes(1e-4), "seed {seed}: {report:?}");
        }
    }

    #[test]
    fn zero_initial_state_fragment_gradients() {
        // From a zero state the recurrent weights only act at step 2, which
        // leaves some of their gradients near 1e-8 where step-1e-5 differences
        // are dominated by rounding; a wider step isolates the analytic check.
        for seed in 0..20 {
            let (mut frag, x, labels) = random_fragment(seed);
            frag.initial = LstmCellState::zeros(4);
            let report = gradient_check(&frag, 1e-3, |m| m.loss_and_grad(&x, &labels));
            assert!(report.passes(1e-4), "seed {seed}: {report:?}");
        }
    }

    #[test]
    fn full_branch_gradients() {
        for seed in 0..10 {
            let mut rng = seeded_rng(seed);
            let net = TemporalNet::new(3, &small_config(4), &mut rng);
            let x: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let labels = [rng.gen_range(0..5u8), rng.gen_range(0..5u8)];
            let report = gradient_check(&net, 1e-3, |m| m.loss_and_grad(&x, &labels, true, 0.004));
            assert!(report.passes(1e-4), "seed {seed}: {report:?}");
        }
    }

    #[test]
    fn learning_rate_zero_leaves_parameters() {
        let data = crate::data::synthetic::separable(60, 6, 5, 3);
        let config = TemporalNetConfig {
            hidden: 8,
            iterations: 5,
            learning_rate: 0.0,
            ..TemporalNetConfig::default()
        };
        let (net, trace) = train(&data, &config, 7).unwrap();
        let mut rng = seeded_rng(7);
        let fresh = TemporalNet::new(6, &config, &mut rng);
        assert_eq!(flatten(&net), flatten(&fresh));
        assert_eq!(trace.len(), 5);
        assert!(trace.iter().all(|l| l.is_finite()));
    }

    #[test]
    fn empty_training_set_rejected() {
        let data = Dataset::new(4, vec![], vec![]).unwrap();
        assert!(matches!(train(&data, &TemporalNetConfig::default(), 0), Err(Error::Empty(_))));
    }
}
