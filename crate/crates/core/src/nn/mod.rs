//! A small neural-network engine: tensors, layers with hand-written backward
//! passes, cross-entropy loss, optimizers, initialization and a
//! finite-difference gradient checker.

pub mod gradcheck;
pub mod init;
pub mod layers;
mod network;
mod optim;
mod rng;
mod tensor;

pub use network::{output_shape, Layer, LayerSpec, Parameter, Sequential, Trace};
pub use optim::Optimizer;
pub use rng::SplitMix64;
pub use tensor::{Scalar, Tensor};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("dropout rate {0} is outside [0, 1)")]
    InvalidRate(f64),
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("non-finite values in {0}")]
    NonFinite(&'static str),
}

/// Whether stochastic layers are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Train,
    Eval,
}
