//! Self-contained differentiable layers in 64-bit floats: dense, LSTM,
//! 3x3 convolution, 2x2 max-pooling, inverted dropout, softmax with
//! cross-entropy, He-uniform initialization, Adam, and a finite-difference
//! gradient checker.
//!
//! Everything is CPU, f64, and seeded: the same seed gives bit-identical
//! tensors, masks, and updates. Layers are free functions over explicit
//! tensors; composition and parameter naming live in the network code.

mod conv;
mod dense;
mod dropout;
mod gradcheck;
mod init;
pub(crate) mod linalg;
mod loss;
mod lstm;
mod params;
mod pool;
mod tensor;

pub use conv::{conv2d_backward, conv2d_forward};
pub use dense::{dense_backward, dense_forward, relu_backward, relu_forward};
pub use dropout::{dropout_backward, dropout_forward, DropoutMode};
pub use gradcheck::{grad_check, GradReport};
pub use init::he_uniform_init;
pub use loss::softmax_xent;
pub use lstm::{lstm_backward, lstm_forward, LstmCache, LstmGrads};
pub use params::{adam_step, AdamConfig, Grads, ParamSet};
pub use pool::{maxpool2x2_backward, maxpool2x2_forward};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch in {context}: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        context: &'static str,
        expected: Vec<usize>,
        got: Vec<usize>,
    },

    #[error("sequence must have at least one step")]
    EmptySequence,

    #[error("target index {index} out of range for {classes} classes")]
    InvalidTarget { index: usize, classes: usize },

    #[error("non-finite gradient in parameter `{param}`")]
    NonFiniteGradient { param: String },

    #[error("unknown parameter `{0}`")]
    UnknownParam(String),
}
