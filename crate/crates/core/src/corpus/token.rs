//! Note-token grammar: `STEP ("#"|"b")? "-" OCTAVE "-" TYPE "."?`.

use crate::musicxml::{Alter, NoteEvent, NoteType, Pitch, Step};

use super::CorpusError;

/// Version tag of the token grammar written into corpus metadata.
pub const TOKEN_GRAMMAR_VERSION: u32 = 1;

/// Render a pitched note as its token, e.g. `G-4-eighth` or `Bb-3-quarter.`.
pub fn tokenize_note(e: &NoteEvent) -> Result<String, CorpusError> {
    let p = e.pitch.ok_or(CorpusError::RestNotTokenizable)?;
    let accidental = match p.alter {
        Alter::Sharp => "#",
        Alter::Flat => "b",
        Alter::Natural => "",
    };
    let dot = if e.dotted { "." } else { "" };
    Ok(format!(
        "{}{}-{}-{}{}",
        p.step, accidental, p.octave, e.note_type, dot
    ))
}

/// Inverse of [`tokenize_note`]. The result has no syllable and measure 0.
pub fn parse_note_token(token: &str) -> Result<NoteEvent, CorpusError> {
    let bad = || CorpusError::BadNoteToken(token.to_string());
    let mut parts = token.splitn(3, '-');
    let (head, octave, ty) = match (parts.next(), parts.next(), parts.next()) {
        (Some(h), Some(o), Some(t)) => (h, o, t),
        _ => return Err(bad()),
    };

    let mut chars = head.chars();
    let step = chars.next().and_then(Step::from_char).ok_or_else(bad)?;
    let alter = match chars.as_str() {
        "" => Alter::Natural,
        "#" => Alter::Sharp,
        "b" => Alter::Flat,
        _ => return Err(bad()),
    };

    if octave.len() != 1 {
        return Err(bad());
    }
    let octave: u8 = octave.parse().map_err(|_| bad())?;

    let (ty, dotted) = match ty.strip_suffix('.') {
        Some(t) => (t, true),
        None => (ty, false),
    };
    let note_type: NoteType = ty.parse().map_err(|_| bad())?;
    Ok(NoteEvent::note(
        Pitch::new(step, alter, octave),
        note_type,
        dotted,
    ))
}
