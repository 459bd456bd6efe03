use rayon::prelude::*;
use serde::Serialize;

use super::config::ModelConfig;
use super::network::{self, Bound, Decoder, Dropout};
use super::params::ModelParams;
use super::Seq2SeqError;
use crate::corpus::{ParallelCorpus, Vocabulary, BOS, BOS_ID, EOS, EOS_ID};
use crate::tensor::{Graph, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Eos,
    MaxLen,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecodeResult {
    /// Emitted ids, without the closing `</s>`.
    pub ids: Vec<usize>,
    pub tokens: Vec<String>,
    /// One row of weights over source positions per decoder step, including
    /// the step that produced `</s>`. Empty without attention.
    pub attention: Vec<Vec<f64>>,
    pub terminated_by: Termination,
}

/// Per-position top-layer states and the final state of each layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoding {
    pub states: Vec<Tensor>,
    pub final_h: Vec<Tensor>,
    pub final_c: Vec<Tensor>,
}

/// A network together with the vocabularies it was built for.
#[derive(Debug, Clone, PartialEq)]
pub struct Seq2Seq {
    pub config: ModelConfig,
    pub params: ModelParams,
    pub src_vocab: Vocabulary,
    pub tgt_vocab: Vocabulary,
}

fn argmax_lowest(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

impl Seq2Seq {
    /// Fresh seeded model. Vocabulary sizes in `config` are taken from the
    /// vocabularies.
    pub fn new(
        mut config: ModelConfig,
        src_vocab: Vocabulary,
        tgt_vocab: Vocabulary,
    ) -> Result<Seq2Seq, Seq2SeqError> {
        config.src_vocab_size = src_vocab.len();
        config.tgt_vocab_size = tgt_vocab.len();
        config.validate()?;
        let params = ModelParams::init(&config, config.seed);
        Ok(Seq2Seq {
            config,
            params,
            src_vocab,
            tgt_vocab,
        })
    }

    /// Assemble from existing parameters, checking every shape.
    pub fn from_parts(
        config: ModelConfig,
        params: ModelParams,
        src_vocab: Vocabulary,
        tgt_vocab: Vocabulary,
    ) -> Result<Seq2Seq, Seq2SeqError> {
        config.validate()?;
        if src_vocab.len() != config.src_vocab_size || tgt_vocab.len() != config.tgt_vocab_size {
            return Err(Seq2SeqError::ShapeMismatch(
                "vocabulary sizes differ from config".into(),
            ));
        }
        let expected = ModelParams::zeros(&config);
        if expected.names() != params.names() {
            return Err(Seq2SeqError::ShapeMismatch(
                "parameter layout differs from config".into(),
            ));
        }
        for ((name, e), p) in expected
            .names()
            .iter()
            .zip(expected.tensors())
            .zip(params.tensors())
        {
            if e.shape() != p.shape() {
                return Err(Seq2SeqError::ShapeMismatch(format!(
                    "{name}: expected {:?}, got {:?}",
                    e.shape(),
                    p.shape()
                )));
            }
        }
        if !params.is_finite() {
            return Err(Seq2SeqError::NonFiniteParams);
        }
        Ok(Seq2Seq {
            config,
            params,
            src_vocab,
            tgt_vocab,
        })
    }

    pub fn encode_ids(&self, src: &[usize]) -> Result<Encoding, Seq2SeqError> {
        if src.is_empty() {
            return Err(Seq2SeqError::EmptySequence);
        }
        let mut g = Graph::new();
        let b = Bound::new(&mut g, &self.params);
        let enc = network::encode(&mut g, &b, src, &mut None)?;
        Ok(Encoding {
            states: enc.states.iter().map(|&v| g.value(v).clone()).collect(),
            final_h: enc.last.h.iter().map(|&v| g.value(v).clone()).collect(),
            final_c: enc.last.c.iter().map(|&v| g.value(v).clone()).collect(),
        })
    }

    /// Teacher-forced mean per-token cross-entropy, no dropout.
    pub fn loss_ids(&self, src: &[usize], tgt: &[usize]) -> Result<f64, Seq2SeqError> {
        if src.is_empty() {
            return Err(Seq2SeqError::EmptySequence);
        }
        let mut g = Graph::new();
        let b = Bound::new(&mut g, &self.params);
        let l = network::loss(&mut g, &b, src, tgt, &mut None)?;
        Ok(g.value(l).item())
    }

    pub fn loss_and_grads(
        &self,
        src: &[usize],
        tgt: &[usize],
        dropout: Option<&mut Dropout>,
    ) -> Result<(f64, ModelParams), Seq2SeqError> {
        if src.is_empty() {
            return Err(Seq2SeqError::EmptySequence);
        }
        let mut g = Graph::new();
        let b = Bound::new(&mut g, &self.params);
        let mut dropout = dropout;
        let l = network::loss(&mut g, &b, src, tgt, &mut dropout)?;
        let grads = b.gradients(&g, l, &self.params)?;
        Ok((g.value(l).item(), grads))
    }

    /// Token-weighted mean loss over a corpus (each sentence counts its
    /// note tokens plus `</s>`).
    pub fn mean_token_loss(&self, corpus: &ParallelCorpus) -> Result<f64, Seq2SeqError> {
        let mut total = 0.0;
        let mut count = 0usize;
        for p in &corpus.pairs {
            let src = self.src_vocab.encode(&p.syllables);
            let tgt = self.tgt_vocab.encode(&p.note_tokens);
            let n = tgt.len() + 1;
            total += self.loss_ids(&src, &tgt)? * n as f64;
            count += n;
        }
        if count == 0 {
            return Err(Seq2SeqError::EmptyCorpus);
        }
        Ok(total / count as f64)
    }

    pub fn greedy_decode_ids(
        &self,
        src: &[usize],
        max_len: usize,
    ) -> Result<DecodeResult, Seq2SeqError> {
        if src.is_empty() {
            return Err(Seq2SeqError::EmptySequence);
        }
        let mut g = Graph::new();
        let b = Bound::new(&mut g, &self.params);
        let enc = network::encode(&mut g, &b, src, &mut None)?;
        let mut dec = Decoder::start(&mut g, &b, enc)?;
        let mut ids = Vec::new();
        let mut attention = Vec::new();
        let mut prev = BOS_ID;
        let mut terminated_by = Termination::MaxLen;
        while ids.len() < max_len {
            let (logits, alpha) = dec.step(&mut g, &b, prev, &mut None)?;
            if let Some(a) = alpha {
                attention.push(g.value(a).data().to_vec());
            }
            let next = argmax_lowest(g.value(logits).data());
            if next == EOS_ID {
                terminated_by = Termination::Eos;
                break;
            }
            ids.push(next);
            prev = next;
        }
        let tokens = ids
            .iter()
            .map(|&i| self.tgt_vocab.token(i).unwrap_or_default().to_string())
            .collect();
        Ok(DecodeResult {
            ids,
            tokens,
            attention,
            terminated_by,
        })
    }

    /// Decode a syllable sequence. Unknown syllables map to `<unk>`.
    pub fn greedy_decode<S: AsRef<str>>(
        &self,
        syllables: &[S],
        max_len: usize,
    ) -> Result<DecodeResult, Seq2SeqError> {
        self.greedy_decode_ids(&self.src_vocab.encode(syllables), max_len)
    }

    /// Greedy hypotheses for every source sentence, in corpus order, with
    /// `<s>` and `</s>` removed. Sentences are decoded in parallel.
    pub fn decode_corpus(
        &self,
        corpus: &ParallelCorpus,
        max_len: usize,
    ) -> Result<Vec<Vec<String>>, Seq2SeqError> {
        corpus
            .pairs
            .par_iter()
            .map(|p| {
                let r = self.greedy_decode(&p.syllables, max_len)?;
                Ok(r.tokens
                    .into_iter()
                    .filter(|t| t != BOS && t != EOS)
                    .collect())
            })
            .collect()
    }
}
