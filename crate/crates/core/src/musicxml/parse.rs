use std::collections::HashMap;

use roxmltree::{Document, Node, ParsingOptions};

use super::{
    validate_syllable, Alter, MusicXmlError, NoteEvent, NoteType, ParseReport, Part, Pitch,
    ScoreDocument, SkipEntry, SkipReason, Step, TICKS_PER_WHOLE,
};

/// Parse a `score-partwise` document into a flat note stream.
///
/// The note stream comes from the first part that carries any `<lyric>`
/// element, or from part 0 when no part has lyrics. Unsupported content is
/// skipped and logged in [`ScoreDocument::report`].
pub fn parse_score(bytes: &[u8]) -> Result<ScoreDocument, MusicXmlError> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| MusicXmlError::MalformedXml(format!("invalid UTF-8: {e}")))?;
    let opts = ParsingOptions {
        allow_dtd: true,
        ..ParsingOptions::default()
    };
    let doc = Document::parse_with_options(text, opts)
        .map_err(|e| MusicXmlError::MalformedXml(e.to_string()))?;
    let root = doc.root_element();
    if root.tag_name().name() != "score-partwise" {
        return Err(MusicXmlError::UnsupportedRoot(
            root.tag_name().name().to_string(),
        ));
    }

    let title = child(root, "work")
        .and_then(|w| child_text(w, "work-title"))
        .or_else(|| child_text(root, "movement-title"))
        .unwrap_or_default();

    let mut names = HashMap::new();
    if let Some(list) = child(root, "part-list") {
        for sp in elements(list).filter(|n| n.has_tag_name("score-part")) {
            let id = sp.attribute("id").unwrap_or_default().to_string();
            names.insert(id, child_text(sp, "part-name").unwrap_or_default());
        }
    }

    let mut report = ParseReport::default();
    let parts: Vec<Part> = elements(root)
        .filter(|n| n.has_tag_name("part"))
        .map(|n| {
            let id = n.attribute("id").unwrap_or_default().to_string();
            let name = names.get(&id).cloned().unwrap_or_default();
            PartReader::new(id, &mut report).read(n, name)
        })
        .collect();
    if parts.is_empty() {
        return Err(MusicXmlError::EmptyScore);
    }

    let selected_part = parts.iter().position(|p| p.has_lyrics).unwrap_or(0);
    let note_stream: Vec<NoteEvent> = parts[selected_part]
        .measures
        .iter()
        .flatten()
        .cloned()
        .collect();
    if note_stream.is_empty() {
        return Err(MusicXmlError::EmptyScore);
    }

    Ok(ScoreDocument {
        title,
        parts,
        selected_part,
        note_stream,
        report,
    })
}

fn elements<'a, 'i>(n: Node<'a, 'i>) -> impl Iterator<Item = Node<'a, 'i>> {
    n.children().filter(|c| c.is_element())
}

fn child<'a, 'i>(n: Node<'a, 'i>, name: &str) -> Option<Node<'a, 'i>> {
    elements(n).find(|c| c.has_tag_name(name))
}

fn child_text(n: Node<'_, '_>, name: &str) -> Option<String> {
    child(n, name).map(|c| c.text().unwrap_or_default().trim().to_string())
}

struct PartReader<'r> {
    id: String,
    report: &'r mut ParseReport,
    divisions: u32,
    voice: Option<String>,
    measure_index: usize,
}

impl<'r> PartReader<'r> {
    fn new(id: String, report: &'r mut ParseReport) -> Self {
        PartReader {
            id,
            report,
            divisions: 1,
            voice: None,
            measure_index: 0,
        }
    }

    fn skip(&mut self, element: &str, reason: SkipReason) {
        self.report.skipped.push(SkipEntry {
            part_id: self.id.clone(),
            measure_index: self.measure_index,
            element: element.to_string(),
            reason,
        });
    }

    fn read(mut self, part: Node<'_, '_>, name: String) -> Part {
        let has_lyrics = part.descendants().any(|d| d.has_tag_name("lyric"));
        let mut measures = Vec::new();
        for (mi, measure) in elements(part)
            .filter(|n| n.has_tag_name("measure"))
            .enumerate()
        {
            self.measure_index = mi;
            let mut events = Vec::new();
            for el in elements(measure) {
                match el.tag_name().name() {
                    "note" => {
                        if let Some(ev) = self.read_note(el) {
                            events.push(ev);
                        }
                    }
                    "attributes" => self.read_attributes(el),
                    "direction" => self.skip("direction", SkipReason::Direction),
                    _ => {}
                }
            }
            measures.push(events);
        }
        Part {
            id: self.id,
            name,
            measures,
            has_lyrics,
        }
    }

    fn read_attributes(&mut self, el: Node<'_, '_>) {
        if let Some(d) = child_text(el, "divisions").and_then(|t| t.parse::<u32>().ok()) {
            if d > 0 {
                self.divisions = d;
            }
        }
        for _ in elements(el).filter(|n| n.has_tag_name("time")) {
            self.skip("time", SkipReason::TimeSignature);
        }
    }

    fn read_note(&mut self, el: Node<'_, '_>) -> Option<NoteEvent> {
        if child(el, "grace").is_some() {
            self.skip("note", SkipReason::GraceNote);
            return None;
        }
        if child(el, "chord").is_some() {
            self.skip("note", SkipReason::ChordNote);
            return None;
        }
        if let Some(v) = child_text(el, "voice") {
            match &self.voice {
                None => self.voice = Some(v),
                Some(first) if *first != v => {
                    self.skip("note", SkipReason::SecondaryVoice { voice: v });
                    return None;
                }
                Some(_) => {}
            }
        }

        let rest = child(el, "rest");
        let pitch = match (rest, child(el, "pitch")) {
            (Some(_), _) => None,
            (None, Some(p)) => Some(self.read_pitch(p)?),
            (None, None) => {
                self.skip("note", SkipReason::Unpitched);
                return None;
            }
        };

        let dots = elements(el).filter(|n| n.has_tag_name("dot")).count();
        if dots > 1 {
            self.skip("note", SkipReason::MultipleDots { dots });
            return None;
        }
        let whole_measure_rest = rest.and_then(|r| r.attribute("measure")) == Some("yes");
        let (note_type, dotted) = match child_text(el, "type") {
            Some(t) => match t.parse::<NoteType>() {
                Ok(nt) => (nt, dots == 1),
                Err(()) => {
                    self.skip(
                        "note",
                        SkipReason::UnknownDuration {
                            detail: format!("type {t:?}"),
                        },
                    );
                    return None;
                }
            },
            None if whole_measure_rest => (NoteType::Whole, false),
            None => self.infer_type(el)?,
        };

        let mut event = NoteEvent {
            pitch,
            note_type,
            dotted,
            syllable: None,
            measure_index: self.measure_index,
        };
        if let Some(text) = lyric_text(el) {
            if event.is_rest() {
                self.skip("lyric", SkipReason::LyricOnRest);
            } else {
                match validate_syllable(&text) {
                    Ok(s) => event.syllable = Some(s),
                    Err(MusicXmlError::EmptySyllable) => {}
                    Err(e) => self.skip(
                        "lyric",
                        SkipReason::IllegalSyllable {
                            text,
                            detail: e.to_string(),
                        },
                    ),
                }
            }
        }
        Some(event)
    }

    fn read_pitch(&mut self, p: Node<'_, '_>) -> Option<Pitch> {
        let step_text = child_text(p, "step").unwrap_or_default();
        let step = step_text
            .chars()
            .next()
            .filter(|_| step_text.len() == 1)
            .and_then(Step::from_char);
        let Some(step) = step else {
            self.skip(
                "note",
                SkipReason::InvalidPitch {
                    detail: format!("step {step_text:?}"),
                },
            );
            return None;
        };

        let alter = match child_text(p, "alter") {
            None => Alter::Natural,
            Some(a) => {
                let semis = a
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.fract() == 0.0 && v.abs() <= 1.0)
                    .and_then(|v| Alter::from_semitones(v as i8));
                match semis {
                    Some(s) => s,
                    None => {
                        self.skip("note", SkipReason::UnsupportedAccidental { alter: a });
                        return None;
                    }
                }
            }
        };

        let oct_text = child_text(p, "octave").unwrap_or_default();
        match oct_text.parse::<u8>() {
            Ok(octave) if octave <= 9 => Some(Pitch::new(step, alter, octave)),
            _ => {
                self.skip(
                    "note",
                    SkipReason::InvalidPitch {
                        detail: format!("octave {oct_text:?}"),
                    },
                );
                None
            }
        }
    }

    /// Recover a missing `<type>` from `<duration>` and the current divisions.
    fn infer_type(&mut self, el: Node<'_, '_>) -> Option<(NoteType, bool)> {
        let duration = child_text(el, "duration").and_then(|d| d.parse::<u64>().ok());
        let found = duration.and_then(|d| {
            // ticks = d / divisions quarters * (TICKS_PER_WHOLE / 4)
            let num = d * u64::from(TICKS_PER_WHOLE) / 4;
            if num % u64::from(self.divisions) != 0 {
                return None;
            }
            let ticks = num / u64::from(self.divisions);
            NoteType::ALL.into_iter().find_map(|t| {
                [false, true]
                    .into_iter()
                    .find(|&dot| u64::from(t.ticks_dotted(dot)) == ticks)
                    .map(|dot| (t, dot))
            })
        });
        if found.is_none() {
            self.skip(
                "note",
                SkipReason::UnknownDuration {
                    detail: format!("duration {:?} at divisions {}", duration, self.divisions),
                },
            );
        }
        found
    }
}

/// Text of the first verse's lyric: `number="1"` if present, else the first.
fn lyric_text(note: Node<'_, '_>) -> Option<String> {
    let lyrics: Vec<_> = elements(note).filter(|n| n.has_tag_name("lyric")).collect();
    let lyric = lyrics
        .iter()
        .find(|l| l.attribute("number") == Some("1"))
        .or_else(|| lyrics.first())?;
    child(*lyric, "text").map(|t| t.text().unwrap_or_default().to_string())
}
