//! Small dense network trained from scratch: forward pass, exact
//! backpropagation under MSE, Adam, a deterministic mini-batch training loop
//! and a text weights format.

mod adam;
mod check;
mod io;
mod network;
mod train;

use std::io as stdio;

use thiserror::Error;

pub use adam::{adam_update, AdamConfig, AdamState};
pub use check::{numeric_gradients, relative_error};
pub use io::{load_weights, parse_weights, save_weights, weights_to_string, WEIGHTS_MAGIC};
pub use network::{
    backward, batch_gradients, forward, loss_mse, Activation, Dense, ForwardCache, Gradients, MlpWeights, DFAOIT_DIMS,
};
pub(crate) use network::forward_into;
pub use train::{evaluate, history_csv, train, EpochStats, Precision, TrainConfig, TrainingSet};

#[derive(Debug, Error)]
pub enum MlpError {
    #[error("layer widths {found:?} do not match expected {expected:?}")]
    DimMismatch { expected: Vec<usize>, found: Vec<usize> },
    #[error("vector length {found} does not match expected {expected}")]
    InputLength { expected: usize, found: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("parameters became non-finite in epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("i/o error: {0}")]
    Io(#[from] stdio::Error),
    #[error("bad magic: expected `{}`", WEIGHTS_MAGIC)]
    BadMagic,
    #[error("line {line}: non-numeric token `{token}`")]
    NonNumeric { line: usize, token: String },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
}
