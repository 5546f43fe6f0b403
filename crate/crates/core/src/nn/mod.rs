//! Minimal dense-network engine: layers, inverted dropout, reverse-mode
//! gradients, Adam with per-step exponential decay, and seeded streams.
//!
//! Everything is `f64`. Nets are immutable during inference and can be shared
//! across threads.

mod adam;
mod error;
mod layer;
mod loss;
mod matrix;
mod net;
mod rng;

pub use adam::{adam_step, AdamState, DEFAULT_BETA1, DEFAULT_BETA2, DEFAULT_EPSILON};
pub use error::{NnError, Result};
pub use layer::{Activation, DenseLayer};
pub use loss::mse;
pub use matrix::Matrix;
pub use net::{dense_backward, dense_forward, init_glorot, DenseNet, ForwardCache, Mode};
pub use rng::{Rng, Stream};
