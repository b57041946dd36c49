//! Minimal dense network engine: forward, cross-entropy, backprop and SGD.

mod checkpoint;
mod loss;
mod matrix;
mod model;
mod optim;

pub use checkpoint::CHECKPOINT_FORMAT_VERSION;
pub use loss::{
    confidence_penalty_logit_grad, confidence_penalty_loss, cross_entropy, entropy,
    label_smoothing_loss, label_smoothing_targets, one_hot, per_sample_ce, CrossEntropy,
    Posteriors, PROB_EPS,
};
pub(crate) use loss::{argmax, safe_ln};
pub use matrix::Matrix;
pub use model::{Activation, Cache, ForwardPass, GradNorms, Gradients, MlpModel, ModelSpec, Mode};
pub use optim::{Direction, OptimizerState, SgdConfig};
