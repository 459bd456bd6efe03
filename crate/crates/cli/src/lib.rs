//! Pipeline commands behind the `melodist` binary.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | internal error |
//! | 2 | usage: bad flags or missing input paths |
//! | 3 | I/O failure |
//! | 4 | invalid input data (MusicXML, corpus files, lyrics) |
//! | 5 | nothing to work on (no scores, empty corpus) |
//! | 6 | bad model configuration |
//! | 7 | training diverged |
//! | 8 | unreadable checkpoint |
//! | 9 | syllables outnumber decoded notes |

pub mod align;
pub mod commands;

use std::path::PathBuf;

use melodist_core::bleu::{BleuError, EvalError};
use melodist_core::corpus::CorpusError;
use melodist_core::musicxml::MusicXmlError;
use melodist_core::seq2seq::{ConfigError, Seq2SeqError};
use thiserror::Error;

pub use align::{align_syllables, AlignError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("{path}: {error}")]
    MusicXml { path: PathBuf, error: MusicXmlError },
    #[error("no MusicXML file could be read ({failed} failed)")]
    AllScoresFailed { failed: usize },
    #[error("no MusicXML files in {0}")]
    NoScores(PathBuf),
    #[error("{path}: line {line}: {message}")]
    BadInput {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] Seq2SeqError),
    #[error(transparent)]
    Bleu(#[from] BleuError),
    #[error("line {line}: {error}")]
    Alignment { line: usize, error: AlignError },
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Bleu(b) => CliError::Bleu(b),
            EvalError::Model(m) => CliError::Model(m),
        }
    }
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, e: std::io::Error) -> CliError {
        CliError::Io {
            path: path.into(),
            message: e.to_string(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io { .. } => 3,
            CliError::MusicXml { .. }
            | CliError::AllScoresFailed { .. }
            | CliError::BadInput { .. } => 4,
            CliError::NoScores(_) => 5,
            CliError::Corpus(e) => match e {
                CorpusError::Io { .. } => 3,
                CorpusError::EmptyCorpus | CorpusError::SplitTooSmall { .. } => 5,
                CorpusError::InvalidRatios(_) | CorpusError::BadStrategy(_) => 2,
                _ => 4,
            },
            CliError::Config(_) => 6,
            CliError::Model(e) => match e {
                Seq2SeqError::Config(_) => 6,
                Seq2SeqError::DivergedLoss { .. } => 7,
                Seq2SeqError::CorruptCheckpoint(_) | Seq2SeqError::VersionMismatch { .. } => 8,
                Seq2SeqError::Io { .. } => 3,
                Seq2SeqError::EmptyCorpus => 5,
                _ => 1,
            },
            CliError::Bleu(BleuError::EmptyInput) => 5,
            CliError::Bleu(_) => 1,
            CliError::Alignment { .. } => 9,
        }
    }
}
