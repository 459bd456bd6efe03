//! MusicXML ingestion and emission for monophonic vocal lines.
//!
//! Only a practical subset of `score-partwise` is understood: pitch
//! (step/alter/octave), rests, note type with at most one dot, the first
//! lyric text, and measure boundaries. Everything else is skipped and
//! recorded in a [`ParseReport`] instead of failing the parse.

mod emit;
mod parse;
mod syllable;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use emit::{emit_score, emit_score_with, TimeSignature};
pub use parse::parse_score;
pub use syllable::{validate_syllable, SYLLABLE_APOSTROPHE, SYLLABLE_DIGRAPHS};

/// Number of ticks in a whole note. A dotted 64th (3 ticks) is the smallest
/// duration that must be representable.
pub const TICKS_PER_WHOLE: u32 = 128;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MusicXmlError {
    #[error("malformed XML: {0}")]
    MalformedXml(String),
    #[error("unsupported root element <{0}>, expected <score-partwise>")]
    UnsupportedRoot(String),
    #[error("score contains no usable note elements")]
    EmptyScore,
    #[error("cannot emit an empty melody")]
    EmptyMelody,
    #[error("melody element {index} is a rest; only pitched notes can be emitted")]
    RestInMelody { index: usize },
    #[error("illegal character {ch:?} (U+{code:04X}) at position {position}")]
    IllegalCharacter {
        ch: char,
        code: u32,
        position: usize,
    },
    #[error("syllable is empty after trimming")]
    EmptySyllable,
    #[error("invalid time signature {0:?}")]
    InvalidTimeSignature(String),
}

/// Diatonic step letter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Step {
    A,
    B,
    C,
    D,
    E,
    F,
    G,
}

impl Step {
    pub const ALL: [Step; 7] = [
        Step::A,
        Step::B,
        Step::C,
        Step::D,
        Step::E,
        Step::F,
        Step::G,
    ];

    pub fn as_char(self) -> char {
        match self {
            Step::A => 'A',
            Step::B => 'B',
            Step::C => 'C',
            Step::D => 'D',
            Step::E => 'E',
            Step::F => 'F',
            Step::G => 'G',
        }
    }

    pub fn from_char(c: char) -> Option<Step> {
        Some(match c {
            'A' => Step::A,
            'B' => Step::B,
            'C' => Step::C,
            'D' => Step::D,
            'E' => Step::E,
            'F' => Step::F,
            'G' => Step::G,
            _ => return None,
        })
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

/// Chromatic alteration restricted to one semitone either way.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Alter {
    Flat,
    #[default]
    Natural,
    Sharp,
}

impl Alter {
    pub fn semitones(self) -> i8 {
        match self {
            Alter::Flat => -1,
            Alter::Natural => 0,
            Alter::Sharp => 1,
        }
    }

    pub fn from_semitones(s: i8) -> Option<Alter> {
        match s {
            -1 => Some(Alter::Flat),
            0 => Some(Alter::Natural),
            1 => Some(Alter::Sharp),
            _ => None,
        }
    }
}

/// Duration class as a fraction of a whole note.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NoteType {
    Whole,
    Half,
    Quarter,
    Eighth,
    Sixteenth,
    ThirtySecond,
    SixtyFourth,
}

impl NoteType {
    pub const ALL: [NoteType; 7] = [
        NoteType::Whole,
        NoteType::Half,
        NoteType::Quarter,
        NoteType::Eighth,
        NoteType::Sixteenth,
        NoteType::ThirtySecond,
        NoteType::SixtyFourth,
    ];

    /// The MusicXML `<type>` spelling, also used in note tokens.
    pub fn as_str(self) -> &'static str {
        match self {
            NoteType::Whole => "whole",
            NoteType::Half => "half",
            NoteType::Quarter => "quarter",
            NoteType::Eighth => "eighth",
            NoteType::Sixteenth => "16th",
            NoteType::ThirtySecond => "32nd",
            NoteType::SixtyFourth => "64th",
        }
    }

    /// Undotted length in ticks ([`TICKS_PER_WHOLE`] per whole note).
    pub fn ticks(self) -> u32 {
        TICKS_PER_WHOLE >> (self as u32)
    }

    pub fn ticks_dotted(self, dotted: bool) -> u32 {
        let t = self.ticks();
        if dotted {
            t + t / 2
        } else {
            t
        }
    }
}

impl fmt::Display for NoteType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NoteType {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        NoteType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Pitch {
    pub step: Step,
    pub alter: Alter,
    /// 0..=9, octave 4 holds middle C.
    pub octave: u8,
}

impl Pitch {
    pub fn new(step: Step, alter: Alter, octave: u8) -> Self {
        debug_assert!(octave <= 9);
        Pitch {
            step,
            alter,
            octave,
        }
    }
}

/// One parsed note or rest.
///
/// A rest is a `NoteEvent` without a pitch; rests never carry a syllable.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NoteEvent {
    pub pitch: Option<Pitch>,
    pub note_type: NoteType,
    pub dotted: bool,
    pub syllable: Option<String>,
    pub measure_index: usize,
}

impl NoteEvent {
    pub fn note(pitch: Pitch, note_type: NoteType, dotted: bool) -> Self {
        NoteEvent {
            pitch: Some(pitch),
            note_type,
            dotted,
            syllable: None,
            measure_index: 0,
        }
    }

    pub fn rest(note_type: NoteType, dotted: bool) -> Self {
        NoteEvent {
            pitch: None,
            note_type,
            dotted,
            syllable: None,
            measure_index: 0,
        }
    }

    /// Attach a syllable. Has no effect on rests.
    pub fn with_syllable(mut self, syllable: impl Into<String>) -> Self {
        if self.pitch.is_some() {
            self.syllable = Some(syllable.into());
        }
        self
    }

    pub fn in_measure(mut self, measure_index: usize) -> Self {
        self.measure_index = measure_index;
        self
    }

    pub fn is_rest(&self) -> bool {
        self.pitch.is_none()
    }

    pub fn step(&self) -> Option<Step> {
        self.pitch.map(|p| p.step)
    }

    pub fn octave(&self) -> Option<u8> {
        self.pitch.map(|p| p.octave)
    }

    pub fn alter(&self) -> Option<Alter> {
        self.pitch.map(|p| p.alter)
    }

    pub fn ticks(&self) -> u32 {
        self.note_type.ticks_dotted(self.dotted)
    }

    /// The musical content compared by round-trip checks; drops `measure_index`.
    pub fn musical_tuple(&self) -> (Option<Pitch>, NoteType, bool, Option<&str>) {
        (
            self.pitch,
            self.note_type,
            self.dotted,
            self.syllable.as_deref(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Part {
    pub id: String,
    pub name: String,
    pub measures: Vec<Vec<NoteEvent>>,
    pub has_lyrics: bool,
}

/// Why an element was left out of the note stream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SkipReason {
    ChordNote,
    GraceNote,
    SecondaryVoice { voice: String },
    UnsupportedAccidental { alter: String },
    InvalidPitch { detail: String },
    MultipleDots { dots: usize },
    UnknownDuration { detail: String },
    IllegalSyllable { text: String, detail: String },
    LyricOnRest,
    Unpitched,
    Direction,
    TimeSignature,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipEntry {
    pub part_id: String,
    pub measure_index: usize,
    pub element: String,
    pub reason: SkipReason,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseReport {
    pub skipped: Vec<SkipEntry>,
}

impl ParseReport {
    pub fn count(&self, pred: impl Fn(&SkipReason) -> bool) -> usize {
        self.skipped.iter().filter(|e| pred(&e.reason)).count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreDocument {
    pub title: String,
    pub parts: Vec<Part>,
    /// Index into `parts` of the vocal line that `note_stream` was taken from.
    pub selected_part: usize,
    pub note_stream: Vec<NoteEvent>,
    pub report: ParseReport,
}
