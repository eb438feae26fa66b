//! Small dense neural-network substrate shared by both feature branches and the autoencoder.

pub mod activation;
pub mod dense;
pub mod gradcheck;
pub mod loss;
pub mod optim;
pub mod params;

pub use activation::{sigmoid, softmax, Activation};
pub use dense::DenseLayer;
pub use gradcheck::{gradient_check, GradCheckReport};
pub use loss::{LossKind, LossSpec};
pub use optim::{OptimizerKind, OptimizerState};
pub use params::Parameterized;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The single RNG type used for every seeded draw in the crate.
pub type SeededRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Index of the maximum; ties resolve to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}
