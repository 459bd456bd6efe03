//! Attach input syllables to decoded notes.

use melodist_core::corpus::parse_note_token;
use melodist_core::musicxml::NoteEvent;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AlignError {
    #[error("AlignmentShortfall: {syllables} syllables but only {notes} decoded notes")]
    Shortfall { syllables: usize, notes: usize },
}

/// Pair syllables with notes one-to-one in order. Notes left over after the
/// last syllable carry no lyric, so they extend the last syllable as a
/// melisma. Decoded tokens that are not note tokens (reserved symbols) are
/// dropped first; their count is returned alongside the melody.
pub fn align_syllables<S: AsRef<str>>(
    syllables: &[S],
    tokens: &[String],
) -> Result<(Vec<NoteEvent>, usize), AlignError> {
    let notes: Vec<NoteEvent> = tokens
        .iter()
        .filter_map(|t| parse_note_token(t).ok())
        .collect();
    let dropped = tokens.len() - notes.len();
    if syllables.len() > notes.len() {
        return Err(AlignError::Shortfall {
            syllables: syllables.len(),
            notes: notes.len(),
        });
    }
    let melody = notes
        .into_iter()
        .enumerate()
        .map(|(i, n)| match syllables.get(i) {
            Some(s) => n.with_syllable(s.as_ref()),
            None => n,
        })
        .collect();
    Ok((melody, dropped))
}
