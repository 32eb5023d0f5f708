//! Dense linear algebra and the differentiable layer kernel the models are built from.

mod gradcheck;
mod layer;
mod matrix;
mod rng;

pub use gradcheck::{grad_check, grad_check_with_step, LayerObjective, Objective, FD_STEP};
pub use layer::{sgd_step, sigmoid, Activation, DenseLayer, LayerCache, LayerGrads};
pub use matrix::{cosine, dot, norm, Matrix};
pub use rng::{derive_seed, stable_hash, SeededRng};
