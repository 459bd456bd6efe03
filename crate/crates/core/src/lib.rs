//! Lyric-to-melody translation toolkit.
//!
//! Syllable sequences and note-token sequences are treated as the source
//! and target languages of a translation task:
//!
//! - [`musicxml`] reads vocal lines from MusicXML and writes melodies back.
//! - [`corpus`] segments note streams into melodic sentences and builds the
//!   parallel corpus, vocabularies, statistics and splits.
//! - [`tensor`] is a small f64 reverse-mode autodiff engine.
//! - [`seq2seq`] is the LSTM encoder/decoder with additive attention,
//!   trained with SGD and decoded greedily.
//! - [`bleu`] scores decoded note sequences.

pub mod bleu;
pub mod corpus;
pub mod musicxml;
pub mod seq2seq;
pub mod tensor;
