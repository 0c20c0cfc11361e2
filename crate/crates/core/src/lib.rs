//! DGRec: session-based social recommendation with recurrent session
//! encoders and graph attention over a user's friends.
//!
//! The crate is organised bottom-up:
//!
//! - [`tensor`]: dense arrays, a recording tape for reverse-mode
//!   differentiation, Adam, checkpoints and a finite-difference checker.
//! - [`ingest`]: event-log parsing, session segmentation, holdout splits.
//! - [`graphstore`]: the friendship graph and seeded neighbour sampling.
//! - [`encoder`]: the shared LSTM and friend representations.
//! - [`gat`]: attention propagation over the sampled friend tree.
//! - [`model`]: the full forward pass, objective and training loop.
//! - [`eval`]: ranking metrics, attention analysis and synthetic data.

pub mod encoder;
mod error;
pub mod eval;
pub mod gat;
pub mod graphstore;
pub mod ingest;
pub mod model;
pub mod rng;
pub mod tensor;

pub use error::Error;
pub use graphstore::{SampledNeighborhood, SocialGraph};
pub use ingest::{Dataset, ItemIndex, Session, SessionStore, UserIndex};
pub use model::{DgRec, Mode, ModelConfig};
pub use tensor::{Real, Tensor, TensorError};

pub type Result<T> = std::result::Result<T, Error>;
