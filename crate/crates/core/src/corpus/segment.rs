//! Melodic sentence segmentation strategies.
//!
//! All strategies drop rests, drop voiced notes that precede the first
//! syllable of a sentence, and keep syllable-less notes that follow a
//! syllable (melisma) with that syllable's sentence.

use std::fmt;
use std::num::NonZeroUsize;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{tokenize_note, CorpusError, MelodicSentence};
use crate::musicxml::NoteEvent;

pub const DEFAULT_FIXED_LENGTH: usize = 5;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Strategy {
    /// Split at rests and at the end of the piece.
    #[default]
    Silence,
    /// Every `k` consecutive syllables.
    Fixed(NonZeroUsize),
    /// One sentence per measure that holds a syllable.
    Measures,
}

impl Strategy {
    pub fn segment(self, stream: &[NoteEvent]) -> Vec<MelodicSentence> {
        match self {
            Strategy::Silence => segment_silence(stream),
            Strategy::Fixed(k) => segment_fixed(stream, k),
            Strategy::Measures => segment_measures(stream),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Silence => f.write_str("silence"),
            Strategy::Fixed(k) => write!(f, "fixed={k}"),
            Strategy::Measures => f.write_str("measures"),
        }
    }
}

impl FromStr for Strategy {
    type Err = CorpusError;

    /// Accepts `silence`, `measures`, `fixed` (k = 5) or `fixed=K`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || CorpusError::BadStrategy(s.to_string());
        match s {
            "silence" => Ok(Strategy::Silence),
            "measures" => Ok(Strategy::Measures),
            "fixed" => Ok(Strategy::Fixed(
                NonZeroUsize::new(DEFAULT_FIXED_LENGTH).expect("nonzero"),
            )),
            _ => {
                let k = s.strip_prefix("fixed=").ok_or_else(bad)?;
                let k: usize = k.parse().map_err(|_| bad())?;
                NonZeroUsize::new(k).map(Strategy::Fixed).ok_or_else(bad)
            }
        }
    }
}

#[derive(Default)]
struct Builder {
    syllables: Vec<String>,
    note_tokens: Vec<String>,
}

impl Builder {
    fn push(&mut self, e: &NoteEvent) {
        if let Some(s) = &e.syllable {
            self.syllables.push(s.clone());
        }
        self.note_tokens
            .push(tokenize_note(e).expect("segmenters never pass rests"));
    }

    fn finish(self) -> MelodicSentence {
        MelodicSentence {
            syllables: self.syllables,
            note_tokens: self.note_tokens,
        }
    }
}

/// Split at rests; within each run start at the first syllable and keep the
/// trailing melisma. Runs without any syllable are discarded.
pub fn segment_silence(stream: &[NoteEvent]) -> Vec<MelodicSentence> {
    stream
        .split(NoteEvent::is_rest)
        .filter_map(|run| {
            let start = run.iter().position(|e| e.syllable.is_some())?;
            let mut b = Builder::default();
            run[start..].iter().for_each(|e| b.push(e));
            Some(b.finish())
        })
        .collect()
}

/// Group every `k` consecutive syllable-bearing notes, with the melisma
/// notes that follow each of them. The last group may be shorter.
pub fn segment_fixed(stream: &[NoteEvent], k: NonZeroUsize) -> Vec<MelodicSentence> {
    let mut out = Vec::new();
    let mut current: Option<Builder> = None;
    for e in stream.iter().filter(|e| !e.is_rest()) {
        if e.syllable.is_some() {
            if current
                .as_ref()
                .is_some_and(|b| b.syllables.len() == k.get())
            {
                out.extend(current.take().map(Builder::finish));
            }
            current.get_or_insert_with(Builder::default).push(e);
        } else if let Some(b) = current.as_mut() {
            b.push(e);
        }
    }
    out.extend(current.map(Builder::finish));
    out
}

/// One sentence per measure that holds a syllable. Syllable-less notes join
/// the sentence of the preceding syllable, even across bar lines, so
/// syllable-less measures merge into the previous sentence's tail.
pub fn segment_measures(stream: &[NoteEvent]) -> Vec<MelodicSentence> {
    let mut out = Vec::new();
    let mut current: Option<(usize, Builder)> = None;
    for e in stream.iter().filter(|e| !e.is_rest()) {
        if e.syllable.is_some() {
            match current.as_mut() {
                Some((m, b)) if *m == e.measure_index => b.push(e),
                _ => {
                    out.extend(current.take().map(|(_, b)| b.finish()));
                    let mut b = Builder::default();
                    b.push(e);
                    current = Some((e.measure_index, b));
                }
            }
        } else if let Some((_, b)) = current.as_mut() {
            b.push(e);
        }
    }
    out.extend(current.map(|(_, b)| b.finish()));
    out
}
