use std::io;

use crate::tensor::TensorError;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("format error: {0}")]
    Format(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("training split is empty")]
    EmptyTrain,
    #[error("{what} index {index} out of range (size {len})")]
    OutOfRange { what: &'static str, index: usize, len: usize },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("checkpoint does not match the data: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Io(#[from] io::Error),
}
