//! Latin transliteration charset for choral syllables.
//!
//! Legal characters are ASCII `a-z`, `A-Z` and the apostrophe. Capital `A`
//! marks the long vowel (as in `tAb`), the apostrophe marks a glottal stop.
//! Persian consonants without a single Latin letter are written as the
//! digraphs in [`SYLLABLE_DIGRAPHS`]; they need no extra characters. This
//! set is a reconstruction from observed annotated lyrics, not a documented
//! standard.

use super::MusicXmlError;

pub const SYLLABLE_APOSTROPHE: char = '\'';

/// Two-letter spellings for consonants lacking a one-letter equivalent.
pub const SYLLABLE_DIGRAPHS: [&str; 5] = ["ch", "sh", "zh", "kh", "gh"];

fn is_legal(c: char) -> bool {
    c.is_ascii_alphabetic() || c == SYLLABLE_APOSTROPHE
}

/// Trim surrounding whitespace and check every remaining character against
/// the transliteration charset. Case is preserved.
///
/// The reported `position` is the character offset in the untrimmed input.
pub fn validate_syllable(text: &str) -> Result<String, MusicXmlError> {
    let leading = text.chars().take_while(|c| c.is_whitespace()).count();
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Err(MusicXmlError::EmptySyllable);
    }
    for (i, ch) in trimmed.chars().enumerate() {
        if !is_legal(ch) {
            return Err(MusicXmlError::IllegalCharacter {
                ch,
                code: ch as u32,
                position: leading + i,
            });
        }
    }
    Ok(trimmed.to_string())
}
