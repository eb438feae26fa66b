use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::params::Parameterized;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;
pub const RMSPROP_DECAY: f64 = 0.9;
pub const RMSPROP_EPSILON: f64 = 1e-10;
/// Starting value of the RMSProp squared-gradient average.
pub const RMSPROP_INITIAL_MS: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    RmsProp,
}

/// First/second moment accumulators, one buffer per parameter tensor,
/// allocated on the first step.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    kind: OptimizerKind,
    learning_rate: f64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    step: u64,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, learning_rate: f64) -> Self {
        OptimizerState {
            kind,
            learning_rate,
            first: Vec::new(),
            second: Vec::new(),
            step: 0,
        }
    }

    pub fn adam(learning_rate: f64) -> Self {
        Self::new(OptimizerKind::Adam, learning_rate)
    }

    pub fn rmsprop(learning_rate: f64) -> Self {
        Self::new(OptimizerKind::RmsProp, learning_rate)
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies one update. Rejects the whole step, leaving parameters untouched,
    /// if any gradient entry is non-finite.
    pub fn step<P: Parameterized>(&mut self, params: &mut P, grads: &P) -> Result<()> {
        let mut flat_grads: Vec<(String, Vec<f64>)> = Vec::new();
        let mut bad = None;
        grads.visit_params(&mut |name, g| {
            if bad.is_none() && !g.is_finite() {
                bad = Some(name.to_string());
            }
            flat_grads.push((name.to_string(), g.values().to_vec()));
        });
        if let Some(path) = bad {
            return Err(Error::Training {
                path,
                reason: "non-finite gradient".into(),
            });
        }
        if self.first.is_empty() {
            self.first = flat_grads.iter().map(|(_, g)| vec![0.0; g.len()]).collect();
            let init = match self.kind {
                OptimizerKind::Adam => 0.0,
                OptimizerKind::RmsProp => RMSPROP_INITIAL_MS,
            };
            self.second = flat_grads.iter().map(|(_, g)| vec![init; g.len()]).collect();
        }
        let mut shape_err = None;
        let mut idx = 0;
        params.visit_params_mut(&mut |name, p| {
            if idx >= flat_grads.len() || flat_grads[idx].1.len() != p.len() {
                shape_err.get_or_insert_with(|| name.to_string());
            }
            idx += 1;
        });
        if let Some(path) = shape_err.or_else(|| (idx != flat_grads.len()).then(String::new)) {
            return Err(Error::Training {
                path,
                reason: "gradient shape does not mirror parameter shape".into(),
            });
        }

        self.step += 1;
        let t = self.step as i32;
        let lr = self.learning_rate;
        let kind = self.kind;
        let bias1 = 1.0 - ADAM_BETA1.powi(t);
        let bias2 = 1.0 - ADAM_BETA2.powi(t);
        let mut idx = 0;
        let (first, second) = (&mut self.first, &mut self.second);
        params.visit_params_mut(&mut |_, p| {
            let g = &flat_grads[idx].1;
            let m = &mut first[idx];
            let v = &mut second[idx];
            match kind {
                OptimizerKind::Adam => {
                    for (((w, &g), m), v) in p.values_mut().iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                        *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                        *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                        let m_hat = *m / bias1;
                        let v_hat = *v / bias2;
                        *w -= lr * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
                    }
                }
                OptimizerKind::RmsProp => {
                    for ((w, &g), ms) in p.values_mut().iter_mut().zip(g).zip(v.iter_mut()) {
                        *ms = RMSPROP_DECAY * *ms + (1.0 - RMSPROP_DECAY) * g * g;
                        *w -= lr * g / (*ms + RMSPROP_EPSILON).sqrt();
                    }
                }
            }
            idx += 1;
        });
        Ok(())
    }
}
