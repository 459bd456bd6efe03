use std::fmt::{self, Write as _};
use std::str::FromStr;

use super::{Alter, MusicXmlError, NoteEvent, TICKS_PER_WHOLE};

/// Meter used only to lay generated notes out in measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeSignature {
    pub beats: u32,
    pub beat_type: u32,
}

impl TimeSignature {
    pub const COMMON: TimeSignature = TimeSignature {
        beats: 4,
        beat_type: 4,
    };

    pub fn new(beats: u32, beat_type: u32) -> Result<Self, MusicXmlError> {
        if beats == 0 || beats > 32 || !matches!(beat_type, 1 | 2 | 4 | 8 | 16) {
            return Err(MusicXmlError::InvalidTimeSignature(format!(
                "{beats}/{beat_type}"
            )));
        }
        Ok(TimeSignature { beats, beat_type })
    }

    pub fn measure_ticks(self) -> u32 {
        self.beats * TICKS_PER_WHOLE / self.beat_type
    }
}

impl Default for TimeSignature {
    fn default() -> Self {
        TimeSignature::COMMON
    }
}

impl fmt::Display for TimeSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.beats, self.beat_type)
    }
}

impl FromStr for TimeSignature {
    type Err = MusicXmlError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || MusicXmlError::InvalidTimeSignature(s.to_string());
        let (b, t) = s.split_once('/').ok_or_else(bad)?;
        let beats = b.trim().parse().map_err(|_| bad())?;
        let beat_type = t.trim().parse().map_err(|_| bad())?;
        TimeSignature::new(beats, beat_type)
    }
}

/// Emit a melody as a single-part score in 4/4.
pub fn emit_score(melody: &[NoteEvent], title: &str) -> Result<Vec<u8>, MusicXmlError> {
    emit_score_with(melody, title, TimeSignature::COMMON)
}

/// Emit a melody as a single-part `score-partwise` document.
///
/// Notes are packed into measures by cumulative duration. A measure is
/// closed as soon as it is exactly full, or early when the next note would
/// overflow it (no ties are introduced). The final measure stays underfull.
/// `measure_index` on the input events is ignored.
pub fn emit_score_with(
    melody: &[NoteEvent],
    title: &str,
    time: TimeSignature,
) -> Result<Vec<u8>, MusicXmlError> {
    if melody.is_empty() {
        return Err(MusicXmlError::EmptyMelody);
    }
    if let Some(index) = melody.iter().position(NoteEvent::is_rest) {
        return Err(MusicXmlError::RestInMelody { index });
    }

    let divisions = divisions_for(melody);
    let measures = pack_measures(melody, time.measure_ticks());

    let mut out = String::new();
    out.push_str(concat!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"no\"?>\n",
        "<!DOCTYPE score-partwise PUBLIC \"-//Recordare//DTD MusicXML 3.1 Partwise//EN\" ",
        "\"http://www.musicxml.org/dtds/partwise.dtd\">\n",
        "<score-partwise version=\"3.1\">\n",
    ));
    // Writing into a String cannot fail.
    let _ = writeln!(
        out,
        "  <work>\n    <work-title>{}</work-title>\n  </work>",
        xml_escape(title)
    );
    out.push_str(concat!(
        "  <part-list>\n",
        "    <score-part id=\"P1\">\n",
        "      <part-name>Voice</part-name>\n",
        "    </score-part>\n",
        "  </part-list>\n",
        "  <part id=\"P1\">\n",
    ));

    let mut flat = 0usize;
    for (mi, range) in measures.iter().enumerate() {
        let _ = writeln!(out, "    <measure number=\"{}\">", mi + 1);
        if mi == 0 {
            let _ = writeln!(
                out,
                "      <attributes>\n        <divisions>{divisions}</divisions>\n        \
                 <key>\n          <fifths>0</fifths>\n        </key>\n        \
                 <time>\n          <beats>{}</beats>\n          <beat-type>{}</beat-type>\n        </time>\n        \
                 <clef>\n          <sign>G</sign>\n          <line>2</line>\n        </clef>\n      </attributes>",
                time.beats, time.beat_type
            );
        }
        for ev in &melody[range.clone()] {
            let next_is_melisma = melody.get(flat + 1).is_some_and(|n| n.syllable.is_none());
            write_note(&mut out, ev, divisions, next_is_melisma);
            flat += 1;
        }
        out.push_str("    </measure>\n");
    }
    out.push_str("  </part>\n</score-partwise>\n");
    Ok(out.into_bytes())
}

/// Smallest of 8, 16, 32 divisions per quarter giving every note an integral duration.
fn divisions_for(melody: &[NoteEvent]) -> u32 {
    let quarter = TICKS_PER_WHOLE / 4;
    [8, 16, 32]
        .into_iter()
        .find(|d| melody.iter().all(|e| e.ticks() * d % quarter == 0))
        .unwrap_or(quarter)
}

/// Index ranges of `melody` per measure.
pub(crate) fn pack_measures(melody: &[NoteEvent], capacity: u32) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut fill = 0;
    for (i, ev) in melody.iter().enumerate() {
        let t = ev.ticks();
        if fill > 0 && fill + t > capacity {
            out.push(start..i);
            start = i;
            fill = 0;
        }
        fill += t;
        if fill >= capacity {
            out.push(start..i + 1);
            start = i + 1;
            fill = 0;
        }
    }
    if start < melody.len() {
        out.push(start..melody.len());
    }
    out
}

fn write_note(out: &mut String, ev: &NoteEvent, divisions: u32, extend: bool) {
    let pitch = ev.pitch.expect("rests are rejected before layout");
    let duration = ev.ticks() * divisions / (TICKS_PER_WHOLE / 4);
    out.push_str("      <note>\n        <pitch>\n");
    let _ = writeln!(out, "          <step>{}</step>", pitch.step);
    if pitch.alter != Alter::Natural {
        let _ = writeln!(out, "          <alter>{}</alter>", pitch.alter.semitones());
    }
    let _ = writeln!(out, "          <octave>{}</octave>", pitch.octave);
    out.push_str("        </pitch>\n");
    let _ = writeln!(out, "        <duration>{duration}</duration>");
    out.push_str("        <voice>1</voice>\n");
    let _ = writeln!(out, "        <type>{}</type>", ev.note_type);
    if ev.dotted {
        out.push_str("        <dot/>\n");
    }
    match pitch.alter {
        Alter::Sharp => out.push_str("        <accidental>sharp</accidental>\n"),
        Alter::Flat => out.push_str("        <accidental>flat</accidental>\n"),
        Alter::Natural => {}
    }
    if let Some(s) = &ev.syllable {
        out.push_str("        <lyric number=\"1\">\n          <syllabic>single</syllabic>\n");
        let _ = writeln!(out, "          <text>{}</text>", xml_escape(s));
        if extend {
            out.push_str("          <extend/>\n");
        }
        out.push_str("        </lyric>\n");
    }
    out.push_str("      </note>\n");
}

fn xml_escape(s: &str) -> String {
    let mut r = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => r.push_str("&amp;"),
            '<' => r.push_str("&lt;"),
            '>' => r.push_str("&gt;"),
            '"' => r.push_str("&quot;"),
            '\'' => r.push_str("&apos;"),
            _ => r.push(c),
        }
    }
    r
}
