//! Encoder-decoder LSTM with optional additive attention, trained with
//! teacher forcing and decoded greedily.

mod checkpoint;
mod config;
mod model;
mod network;
mod params;
mod train;

use std::path::PathBuf;

use thiserror::Error;

use crate::tensor::TensorError;

pub use checkpoint::{from_bytes, load_params, save_params, to_bytes, CHECKPOINT_VERSION, MAGIC};
pub use config::{AttentionKind, ConfigError, ModelConfig, CONFIG_KEYS};
pub use model::{DecodeResult, Encoding, Seq2Seq, Termination};
pub use network::{attend_values, lstm_step, Attention, Dropout};
pub use params::{AttentionParams, LstmParams, ModelParams, INIT_SCALE};
pub use train::{build_vocabularies, train, train_observed, LogRecord, Trained, TrainingLog};

#[derive(Debug, Error)]
pub enum Seq2SeqError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("parameter shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("parameters contain non-finite values")]
    NonFiniteParams,
    #[error("empty source sequence")]
    EmptySequence,
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("training diverged at step {step} (loss {loss})")]
    DivergedLoss { step: usize, loss: f64 },
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error("checkpoint version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
}
