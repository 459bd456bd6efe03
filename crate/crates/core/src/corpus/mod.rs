//! Parallel syllable/note-token corpus construction.

mod files;
mod segment;
mod split;
mod stats;
mod token;
mod vocab;

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::musicxml::{NoteEvent, ScoreDocument};

pub use files::{read_meta, read_split, write_meta, write_split, CorpusMeta, CORPUS_HEADER};
pub use segment::{
    segment_fixed, segment_measures, segment_silence, Strategy, DEFAULT_FIXED_LENGTH,
};
pub use split::{split_corpus, SplitRatios};
pub use stats::{compute_stats, CorpusStats};
pub use token::{parse_note_token, tokenize_note, TOKEN_GRAMMAR_VERSION};
pub use vocab::{Vocabulary, BOS, BOS_ID, EOS, EOS_ID, PAD, PAD_ID, RESERVED, UNK, UNK_ID};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CorpusError {
    #[error("rests have no note token")]
    RestNotTokenizable,
    #[error("malformed note token {0:?}")]
    BadNoteToken(String),
    #[error("unknown segmentation strategy {0:?} (expected silence, measures, fixed or fixed=K)")]
    BadStrategy(String),
    #[error("segmentation produced no sentences")]
    EmptyCorpus,
    #[error("split ratios {0} must be three nonnegative integers summing to 100")]
    InvalidRatios(String),
    #[error("corpus of {pairs} pairs is too small for a {ratios} split with nonempty parts")]
    SplitTooSmall { pairs: usize, ratios: String },
    #[error("invalid vocabulary: {0}")]
    BadVocabulary(String),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("missing partner file {0}")]
    MissingPartner(PathBuf),
    #[error("{path}:{line}: {message}")]
    BadCorpusFile {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

/// One training unit: syllables of a melodic sentence and its note tokens.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MelodicSentence {
    pub syllables: Vec<String>,
    pub note_tokens: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    pub segment: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ParallelCorpus {
    pub pairs: Vec<MelodicSentence>,
    pub provenance: Vec<Provenance>,
}

impl ParallelCorpus {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn sources(&self) -> Vec<Vec<String>> {
        self.pairs.iter().map(|p| p.syllables.clone()).collect()
    }

    pub fn targets(&self) -> Vec<Vec<String>> {
        self.pairs.iter().map(|p| p.note_tokens.clone()).collect()
    }

    pub(crate) fn select(&self, indices: &[usize]) -> ParallelCorpus {
        ParallelCorpus {
            pairs: indices.iter().map(|&i| self.pairs[i].clone()).collect(),
            provenance: indices
                .iter()
                .map(|&i| self.provenance[i].clone())
                .collect(),
        }
    }
}

/// The note stream of one ingested score, as stored in the ingest archive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoteStream {
    pub source: String,
    pub title: String,
    pub events: Vec<NoteEvent>,
}

impl NoteStream {
    pub fn from_document(source: impl Into<String>, doc: &ScoreDocument) -> Self {
        NoteStream {
            source: source.into(),
            title: doc.title.clone(),
            events: doc.note_stream.clone(),
        }
    }
}

/// Segment every stream and concatenate the sentences in input order.
pub fn build_corpus(
    streams: &[NoteStream],
    strategy: Strategy,
) -> Result<ParallelCorpus, CorpusError> {
    let per_stream: Vec<Vec<MelodicSentence>> = streams
        .par_iter()
        .map(|s| strategy.segment(&s.events))
        .collect();
    let mut corpus = ParallelCorpus::default();
    for (stream, sentences) in streams.iter().zip(per_stream) {
        for (segment, pair) in sentences.into_iter().enumerate() {
            corpus.pairs.push(pair);
            corpus.provenance.push(Provenance {
                source: stream.source.clone(),
                segment,
            });
        }
    }
    if corpus.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    Ok(corpus)
}
