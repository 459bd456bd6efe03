#![allow(dead_code)]

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use melodist_core::corpus::{parse_note_token, MelodicSentence, ParallelCorpus, Provenance};
use melodist_core::musicxml::NoteType;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SYLLABLES: [&str; 12] = [
    "go", "le", "san", "gam", "me", "se", "Af", "tAb", "na", "tA", "bi", "sar",
];
pub const NOTES: [&str; 12] = [
    "G-4-eighth",
    "A-4-eighth",
    "B-4-quarter",
    "A-4-half",
    "C-5-quarter",
    "B-4-eighth",
    "F#-4-quarter",
    "E-4-half",
    "D-5-eighth",
    "Bb-4-quarter.",
    "G-4-16th",
    "C-4-whole",
];

/// Sentences whose notes follow from their syllables: each syllable has a
/// fixed note, and "gam" is always sung with a two-note melisma.
pub fn songbook(sentences: usize, seed: u64) -> Vec<(Vec<String>, Vec<String>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..sentences)
        .map(|_| {
            let len = rng.random_range(3..=6);
            let mut syl = Vec::new();
            let mut notes = Vec::new();
            for _ in 0..len {
                let i = rng.random_range(0..SYLLABLES.len());
                syl.push(SYLLABLES[i].to_string());
                notes.push(NOTES[i].to_string());
                if SYLLABLES[i] == "gam" {
                    notes.push("G-4-eighth".to_string());
                }
            }
            (syl, notes)
        })
        .collect()
}

pub fn as_corpus(rows: &[(Vec<String>, Vec<String>)]) -> ParallelCorpus {
    ParallelCorpus {
        pairs: rows
            .iter()
            .map(|(s, n)| MelodicSentence {
                syllables: s.clone(),
                note_tokens: n.clone(),
            })
            .collect(),
        provenance: (0..rows.len())
            .map(|i| Provenance {
                source: "songbook".into(),
                segment: i,
            })
            .collect(),
    }
}

/// Quarter = 16 divisions.
fn duration(t: NoteType, dotted: bool) -> u32 {
    let base = t.ticks() / 2;
    if dotted {
        base * 3 / 2
    } else {
        base
    }
}

/// A one-part score with a quarter rest after every sentence. Melisma notes
/// carry no lyric.
pub fn score_xml(title: &str, sentences: &[(Vec<String>, Vec<String>)]) -> String {
    let mut x = String::new();
    x.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<score-partwise version=\"3.1\">\n");
    let _ = writeln!(x, "<work><work-title>{title}</work-title></work>");
    x.push_str("<part-list><score-part id=\"P1\"><part-name>Voice</part-name></score-part></part-list>\n<part id=\"P1\">\n");
    for (m, (syl, notes)) in sentences.iter().enumerate() {
        let _ = writeln!(x, "<measure number=\"{}\">", m + 1);
        if m == 0 {
            x.push_str("<attributes><divisions>16</divisions></attributes>\n");
        }
        let mut s = syl.iter();
        for (k, tok) in notes.iter().enumerate() {
            let e = parse_note_token(tok).expect("fixture tokens are valid");
            let p = e.pitch.expect("pitched");
            // A syllable starts on every note except melisma continuations.
            let melisma = k > 0 && notes[k] == "G-4-eighth" && notes[k - 1] == "A-4-half";
            x.push_str("<note><pitch>");
            let _ = write!(x, "<step>{}</step>", p.step.as_char());
            if p.alter.semitones() != 0 {
                let _ = write!(x, "<alter>{}</alter>", p.alter.semitones());
            }
            let _ = write!(x, "<octave>{}</octave></pitch>", p.octave);
            let _ = write!(
                x,
                "<duration>{}</duration><voice>1</voice><type>{}</type>",
                duration(e.note_type, e.dotted),
                e.note_type.as_str()
            );
            if e.dotted {
                x.push_str("<dot/>");
            }
            if !melisma {
                if let Some(text) = s.next() {
                    let _ = write!(x, "<lyric number=\"1\"><syllabic>single</syllabic><text>{text}</text></lyric>");
                }
            }
            x.push_str("</note>\n");
        }
        x.push_str("<note><rest/><duration>16</duration><voice>1</voice><type>quarter</type></note>\n</measure>\n");
    }
    x.push_str("</part>\n</score-partwise>\n");
    x
}

/// Write `files` scores of `per_file` sentences each into `dir`.
pub fn write_songbook_scores(
    dir: &Path,
    files: usize,
    per_file: usize,
    seed: u64,
) -> Vec<(Vec<String>, Vec<String>)> {
    fs::create_dir_all(dir).unwrap();
    let all = songbook(files * per_file, seed);
    for (i, chunk) in all.chunks(per_file).enumerate() {
        fs::write(
            dir.join(format!("song{i:02}.musicxml")),
            score_xml(&format!("Song {i}"), chunk),
        )
        .unwrap();
    }
    all
}

pub fn melodist(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_melodist"))
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Ingest a freshly written songbook and build a corpus directory.
pub fn prepared_corpus(root: &Path, files: usize, per_file: usize) -> PathBuf {
    let scores = root.join("scores");
    write_songbook_scores(&scores, files, per_file, 5);
    let archive = root.join("streams.jsonl");
    let o = melodist(&["ingest", path_str(&scores), "--out", path_str(&archive)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let corpus = root.join("corpus");
    let o = melodist(&["corpus", path_str(&archive), "--out", path_str(&corpus)]);
    assert!(o.status.success(), "{}", stderr(&o));
    corpus
}

pub const SMALL_CONFIG: &str = "num_units=16\nnum_layers=1\nkeep_prob=1.0\nmax_epochs=2\nsteps_per_epoch=40\nmax_decode_len=12\n";
