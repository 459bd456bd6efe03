use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::ParallelCorpus;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub sentence_count: usize,
    pub total_syllables: usize,
    pub total_notes: usize,
    pub mean_syllables_per_sentence: f64,
    pub mean_notes_per_sentence: f64,
    pub unique_syllables: usize,
    pub unique_notes: usize,
    /// unique syllables / total syllable tokens
    pub syllable_vocab_variety: f64,
    /// unique notes / total note tokens
    pub note_vocab_variety: f64,
}

/// Corpus size and vocabulary variety. Returns `None` for an empty corpus.
pub fn compute_stats(c: &ParallelCorpus) -> Option<CorpusStats> {
    if c.is_empty() {
        return None;
    }
    let n = c.len();
    let mut syl_types = HashSet::new();
    let mut note_types = HashSet::new();
    let (mut syl_total, mut note_total) = (0usize, 0usize);
    for p in &c.pairs {
        syl_total += p.syllables.len();
        note_total += p.note_tokens.len();
        syl_types.extend(p.syllables.iter().map(String::as_str));
        note_types.extend(p.note_tokens.iter().map(String::as_str));
    }
    Some(CorpusStats {
        sentence_count: n,
        total_syllables: syl_total,
        total_notes: note_total,
        mean_syllables_per_sentence: syl_total as f64 / n as f64,
        mean_notes_per_sentence: note_total as f64 / n as f64,
        unique_syllables: syl_types.len(),
        unique_notes: note_types.len(),
        syllable_vocab_variety: syl_types.len() as f64 / syl_total as f64,
        note_vocab_variety: note_types.len() as f64 / note_total as f64,
    })
}

impl fmt::Display for CorpusStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: [(&str, String); 7] = [
            (
                "Number of extracted sentences",
                self.sentence_count.to_string(),
            ),
            (
                "The average syllables per sentence",
                format!("{:.2}", self.mean_syllables_per_sentence),
            ),
            (
                "Average notes per sentence",
                format!("{:.2}", self.mean_notes_per_sentence),
            ),
            ("Unique syllables", self.unique_syllables.to_string()),
            ("Unique notes", self.unique_notes.to_string()),
            (
                "Vocabulary variety of syllables",
                format!("{:.3}", self.syllable_vocab_variety),
            ),
            (
                "Vocabulary diversity of notes",
                format!("{:.3}", self.note_vocab_variety),
            ),
        ];
        for (label, value) in rows {
            writeln!(f, "{label:<36}{value:>8}")?;
        }
        Ok(())
    }
}
