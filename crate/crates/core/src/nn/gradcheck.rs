//! Central finite-difference gradient checking.

use crate::nn::params::{flat_names, flatten, load_flat, Parameterized};

pub const DEFAULT_STEP: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter scalar with the largest error.
    pub worst: Option<String>,
    /// Analytic and numeric values at `worst`.
    pub worst_values: (f64, f64),
    pub checked: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_rel_error < tolerance
    }
}

/// `|a − n| / max(|a|, |n|, 1e−8)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compares the analytic gradient returned by `objective` against central
/// differences of its loss, perturbing every parameter of `model` by `±step`.
///
/// `objective` returns `(loss, gradient)` where the gradient has the model's own
/// parameter layout.
pub fn gradient_check<P, F>(model: &P, step: f64, mut objective: F) -> GradCheckReport
where
    P: Parameterized + Clone,
    F: FnMut(&P) -> (f64, P),
{
    let (_, grads) = objective(model);
    let analytic = flatten(&grads);
    let base = flatten(model);
    let names = flat_names(model);
    let mut probe = model.clone();
    let mut flat = base.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        worst_values: (0.0, 0.0),
        checked: base.len(),
    };
    for i in 0..base.len() {
        flat[i] = base[i] + step;
        load_flat(&mut probe, &flat);
        let plus = objective(&probe).0;
        flat[i] = base[i] - step;
        load_flat(&mut probe, &flat);
        let minus = objective(&probe).0;
        flat[i] = base[i];
        let numeric = (plus - minus) / (2.0 * step);
        let err = relative_error(analytic[i], numeric);
        if err > report.max_rel_error || err.is_nan() {
            report.max_rel_error = err;
            report.worst = Some(names[i].clone());
            report.worst_values = (analytic[i], numeric);
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::dense::DenseLayer;
    use crate::nn::loss::{mse, mse_grad};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dense_with_mse_passes() {
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let layer = DenseLayer::new(4, 3, &mut rng);
            let x: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let t: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let report = gradient_check(&layer, DEFAULT_STEP, |l| {
                let y = l.forward_batch(&x, 2);
                let mut g = l.zeros_like();
                l.backward_batch(&x, 2, &mse_grad(&y, &t), &mut g);
                (mse(&y, &t), g)
            });
            assert!(report.passes(1e-5), "seed {seed}: {report:?}");
        }
    }

    #[test]
    fn wrong_gradient_is_detected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let layer = DenseLayer::new(2, 2, &mut rng);
        let x = vec![0.5, -0.3];
        let t = vec![1.0, 0.0];
        let report = gradient_check(&layer, DEFAULT_STEP, |l| {
            let y = l.forward_batch(&x, 1);
            let mut g = l.zeros_like();
            l.backward_batch(&x, 1, &mse_grad(&y, &t), &mut g);
            g.bias.values_mut()[0] *= 2.0;
            (mse(&y, &t), g)
        });
        assert!(!report.passes(1e-4));
        assert_eq!(report.worst.as_deref(), Some("b[0]"));
    }
}
