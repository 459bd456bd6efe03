//! Corpus BLEU over whole note tokens, plus a unigram-frequency baseline.

use std::collections::HashMap;
use std::fmt;
use std::hash::Hash;

use serde::Serialize;
use thiserror::Error;

use crate::corpus::{ParallelCorpus, BOS, EOS};
use crate::seq2seq::{Seq2Seq, Seq2SeqError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BleuError {
    #[error("no sentences to score")]
    EmptyInput,
    #[error("{hypotheses} hypotheses but {references} references")]
    LengthMismatch {
        hypotheses: usize,
        references: usize,
    },
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Bleu(#[from] BleuError),
    #[error(transparent)]
    Model(#[from] Seq2SeqError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BleuReport {
    /// In `[0, 1]`.
    pub bleu: f64,
    /// Modified precision for n = 1..=max_n.
    pub precisions: Vec<f64>,
    /// Clipped matches per order.
    pub matches: Vec<usize>,
    /// Hypothesis n-gram count per order.
    pub totals: Vec<usize>,
    /// 0 when every hypothesis is empty.
    pub brevity_penalty: f64,
    pub hyp_len: usize,
    pub ref_len: usize,
}

impl fmt::Display for BleuReport {
    /// Scores shown ×100, e.g. `BLEU = 77.88 100.0/100.0/100.0/100.0 (BP = 0.7788, hyp_len = 4, ref_len = 5)`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ps: Vec<String> = self
            .precisions
            .iter()
            .map(|p| format!("{:.1}", p * 100.0))
            .collect();
        write!(
            f,
            "BLEU = {:.2} {} (BP = {:.4}, hyp_len = {}, ref_len = {})",
            self.bleu * 100.0,
            ps.join("/"),
            self.brevity_penalty,
            self.hyp_len,
            self.ref_len
        )
    }
}

fn ngram_counts<S: Eq + Hash>(tokens: &[S], n: usize) -> HashMap<&[S], usize> {
    let mut m = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *m.entry(w).or_insert(0) += 1;
        }
    }
    m
}

/// Clipped matches and hypothesis n-gram count for one sentence pair.
fn clipped<S: Eq + Hash>(hyp: &[S], reference: &[S], n: usize) -> (usize, usize) {
    let h = ngram_counts(hyp, n);
    let r = ngram_counts(reference, n);
    let matches = h
        .iter()
        .map(|(g, &c)| c.min(r.get(g).copied().unwrap_or(0)))
        .sum();
    (matches, hyp.len().saturating_sub(n - 1))
}

fn brevity_penalty(hyp_len: usize, ref_len: usize) -> f64 {
    if hyp_len == 0 {
        0.0
    } else if hyp_len < ref_len {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    } else {
        1.0
    }
}

fn combine(precisions: &[f64], bp: f64) -> f64 {
    if precisions.contains(&0.0) {
        return 0.0;
    }
    let mean_log = precisions.iter().map(|p| p.ln()).sum::<f64>() / precisions.len() as f64;
    bp * mean_log.exp()
}

/// Unsmoothed corpus BLEU with one reference per hypothesis.
pub fn corpus_bleu<S: Eq + Hash>(
    hypotheses: &[Vec<S>],
    references: &[Vec<S>],
    max_n: usize,
) -> Result<BleuReport, BleuError> {
    if hypotheses.len() != references.len() {
        return Err(BleuError::LengthMismatch {
            hypotheses: hypotheses.len(),
            references: references.len(),
        });
    }
    if hypotheses.is_empty() || max_n == 0 {
        return Err(BleuError::EmptyInput);
    }
    let mut matches = vec![0; max_n];
    let mut totals = vec![0; max_n];
    for (h, r) in hypotheses.iter().zip(references) {
        for n in 1..=max_n {
            let (m, t) = clipped(h, r, n);
            matches[n - 1] += m;
            totals[n - 1] += t;
        }
    }
    let precisions: Vec<f64> = matches
        .iter()
        .zip(&totals)
        .map(|(&m, &t)| if t == 0 { 0.0 } else { m as f64 / t as f64 })
        .collect();
    let hyp_len = hypotheses.iter().map(Vec::len).sum();
    let ref_len = references.iter().map(Vec::len).sum();
    let bp = brevity_penalty(hyp_len, ref_len);
    Ok(BleuReport {
        bleu: combine(&precisions, bp),
        precisions,
        matches,
        totals,
        brevity_penalty: bp,
        hyp_len,
        ref_len,
    })
}

/// Single-pair BLEU. With `smoothed`, orders n ≥ 2 add one to both match
/// and total counts. Meant for inspecting individual outputs.
pub fn sentence_bleu<S: Eq + Hash>(
    hyp: &[S],
    reference: &[S],
    max_n: usize,
    smoothed: bool,
) -> f64 {
    let precisions: Vec<f64> = (1..=max_n)
        .map(|n| {
            let (m, t) = clipped(hyp, reference, n);
            let add = usize::from(smoothed && n >= 2);
            let (m, t) = (m + add, t + add);
            if t == 0 {
                0.0
            } else {
                m as f64 / t as f64
            }
        })
        .collect();
    combine(&precisions, brevity_penalty(hyp.len(), reference.len()))
}

/// Greedy-decode every source and score against its note sequence.
pub fn evaluate_model(
    model: &Seq2Seq,
    corpus: &ParallelCorpus,
    max_len: usize,
) -> Result<BleuReport, EvalError> {
    if corpus.is_empty() {
        return Err(BleuError::EmptyInput.into());
    }
    let hyps = model.decode_corpus(corpus, max_len)?;
    let refs: Vec<Vec<String>> = corpus
        .targets()
        .into_iter()
        .map(|r| r.into_iter().filter(|t| t != BOS && t != EOS).collect())
        .collect();
    Ok(corpus_bleu(&hyps, &refs, 4)?)
}

/// Emits the most frequent training note token, repeated to the length
/// the training notes-per-syllable ratio predicts for the input.
#[derive(Debug, Clone, PartialEq)]
pub struct UnigramBaseline {
    pub token: String,
    pub notes_per_syllable: f64,
}

impl UnigramBaseline {
    pub fn fit(train: &ParallelCorpus) -> Option<UnigramBaseline> {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        let (mut syl, mut notes) = (0usize, 0usize);
        for p in &train.pairs {
            syl += p.syllables.len();
            notes += p.note_tokens.len();
            for t in &p.note_tokens {
                *counts.entry(t).or_insert(0) += 1;
            }
        }
        let (token, _) = counts
            .into_iter()
            .max_by(|a, b| a.1.cmp(&b.1).then_with(|| b.0.cmp(a.0)))?;
        Some(UnigramBaseline {
            token: token.to_string(),
            notes_per_syllable: notes as f64 / syl.max(1) as f64,
        })
    }

    pub fn decode<S>(&self, syllables: &[S]) -> Vec<String> {
        let n = ((syllables.len() as f64 * self.notes_per_syllable).round() as usize).max(1);
        vec![self.token.clone(); n]
    }

    pub fn evaluate(&self, corpus: &ParallelCorpus) -> Result<BleuReport, BleuError> {
        let hyps: Vec<Vec<String>> = corpus
            .pairs
            .iter()
            .map(|p| self.decode(&p.syllables))
            .collect();
        corpus_bleu(&hyps, &corpus.targets(), 4)
    }
}
