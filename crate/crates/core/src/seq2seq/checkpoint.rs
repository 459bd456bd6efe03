//! Named-tensor checkpoint container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic    8 bytes  "MLDYCKPT"
//! version  u32
//! metadata u32 count, then (key, value) strings
//! tensors  u32 count, then name string, u32 rank, u64 dims, f64 values
//! ```
//!
//! A string is a u32 byte length followed by UTF-8. Metadata holds the
//! model config as `key=value` text and both vocabularies, one token per
//! line. Bytes after the last tensor make the file corrupt.

use std::fs;
use std::path::Path;

use super::config::ModelConfig;
use super::model::Seq2Seq;
use super::params::ModelParams;
use super::Seq2SeqError;
use crate::corpus::Vocabulary;
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 8] = b"MLDYCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len() as u32);
    out.extend_from_slice(s.as_bytes());
}

pub fn to_bytes(model: &Seq2Seq) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, CHECKPOINT_VERSION);

    let meta = [
        ("config", model.config.to_kv_text()),
        ("src_vocab", model.src_vocab.tokens().join("\n")),
        ("tgt_vocab", model.tgt_vocab.tokens().join("\n")),
    ];
    put_u32(&mut out, meta.len() as u32);
    for (k, v) in &meta {
        put_str(&mut out, k);
        put_str(&mut out, v);
    }

    let names = model.params.names();
    let tensors = model.params.tensors();
    put_u32(&mut out, tensors.len() as u32);
    for (name, t) in names.iter().zip(tensors) {
        put_str(&mut out, name);
        put_u32(&mut out, t.shape().len() as u32);
        for &d in t.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

fn corrupt(msg: impl Into<String>) -> Seq2SeqError {
    Seq2SeqError::CorruptCheckpoint(msg.into())
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], Seq2SeqError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| corrupt(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, Seq2SeqError> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64, Seq2SeqError> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn string(&mut self) -> Result<String, Seq2SeqError> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| corrupt("string is not UTF-8"))
    }
}

fn vocab(text: &str) -> Result<Vocabulary, Seq2SeqError> {
    Vocabulary::from_tokens(text.split('\n').map(str::to_string).collect())
        .map_err(|e| corrupt(format!("vocabulary: {e}")))
}

pub fn from_bytes(buf: &[u8]) -> Result<Seq2Seq, Seq2SeqError> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Seq2SeqError::VersionMismatch {
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }

    let (mut config_text, mut src, mut tgt) = (None, None, None);
    for _ in 0..r.u32()? {
        let key = r.string()?;
        let value = r.string()?;
        match key.as_str() {
            "config" => config_text = Some(value),
            "src_vocab" => src = Some(value),
            "tgt_vocab" => tgt = Some(value),
            other => return Err(corrupt(format!("unknown metadata key {other:?}"))),
        }
    }
    let missing = |k: &str| corrupt(format!("missing metadata {k}"));
    let mut config = ModelConfig::default();
    config
        .apply_text(&config_text.ok_or_else(|| missing("config"))?)
        .map_err(|e| corrupt(format!("config: {e}")))?;
    config.validate().map_err(|e| corrupt(e.to_string()))?;
    let src_vocab = vocab(&src.ok_or_else(|| missing("src_vocab"))?)?;
    let tgt_vocab = vocab(&tgt.ok_or_else(|| missing("tgt_vocab"))?)?;

    let mut params = ModelParams::zeros(&config);
    let names = params.names();
    let count = r.u32()? as usize;
    if count != names.len() {
        return Err(corrupt(format!(
            "expected {} tensors, found {count}",
            names.len()
        )));
    }
    for (expected, slot) in names.iter().zip(params.tensors_mut()) {
        let name = r.string()?;
        if &name != expected {
            return Err(corrupt(format!("expected tensor {expected}, found {name}")));
        }
        let rank = r.u32()? as usize;
        if rank > 3 {
            return Err(corrupt(format!("{name}: rank {rank}")));
        }
        let shape = (0..rank)
            .map(|_| r.u64().map(|d| d as usize))
            .collect::<Result<Vec<_>, _>>()?;
        if shape != slot.shape() {
            return Err(corrupt(format!(
                "{name}: shape {shape:?}, expected {:?}",
                slot.shape()
            )));
        }
        let data = r
            .take(slot.len() * 8)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        *slot = Tensor::new(shape, data).map_err(|e| corrupt(e.to_string()))?;
    }
    if r.pos != buf.len() {
        return Err(corrupt(format!("{} trailing bytes", buf.len() - r.pos)));
    }
    Seq2Seq::from_parts(config, params, src_vocab, tgt_vocab).map_err(|e| corrupt(e.to_string()))
}

pub fn save_params(model: &Seq2Seq, path: &Path) -> Result<(), Seq2SeqError> {
    fs::write(path, to_bytes(model)).map_err(|e| Seq2SeqError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn load_params(path: &Path) -> Result<Seq2Seq, Seq2SeqError> {
    let buf = fs::read(path).map_err(|e| Seq2SeqError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    from_bytes(&buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seq2seq::AttentionKind;

    fn model(attention: AttentionKind) -> Seq2Seq {
        let src = Vocabulary::build(&[vec!["go", "le"]]);
        let tgt = Vocabulary::build(&[vec!["G-4-eighth", "A-4-half"]]);
        let cfg = ModelConfig {
            num_units: 4,
            num_layers: 2,
            attention,
            seed: 21,
            ..ModelConfig::default()
        };
        Seq2Seq::new(cfg, src, tgt).unwrap()
    }

    #[test]
    fn round_trip_is_bit_identical() {
        for att in [AttentionKind::Standard, AttentionKind::None] {
            let mut m = model(att);
            m.params.proj_b.data_mut()[0] = -0.0;
            m.params.proj_b.data_mut()[1] = f64::MIN_POSITIVE / 2.0;
            let bytes = to_bytes(&m);
            let back = from_bytes(&bytes).unwrap();
            assert_eq!(to_bytes(&back), bytes);
            for (a, b) in m.params.tensors().iter().zip(back.params.tensors()) {
                let ab: Vec<u64> = a.data().iter().map(|v| v.to_bits()).collect();
                let bb: Vec<u64> = b.data().iter().map(|v| v.to_bits()).collect();
                assert_eq!(ab, bb);
            }
            assert_eq!(back.config, m.config);
            assert_eq!(back.tgt_vocab, m.tgt_vocab);
        }
    }

    #[test]
    fn truncation_is_corrupt() {
        let bytes = to_bytes(&model(AttentionKind::Standard));
        for cut in [0, 4, 10, 40, bytes.len() / 2, bytes.len() - 1] {
            assert!(
                matches!(
                    from_bytes(&bytes[..cut]),
                    Err(Seq2SeqError::CorruptCheckpoint(_))
                ),
                "cut at {cut}"
            );
        }
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(matches!(
            from_bytes(&extra),
            Err(Seq2SeqError::CorruptCheckpoint(_))
        ));
    }

    #[test]
    fn version_bump_is_mismatch() {
        let mut bytes = to_bytes(&model(AttentionKind::None));
        bytes[8..12].copy_from_slice(&(CHECKPOINT_VERSION + 1).to_le_bytes());
        assert!(matches!(
            from_bytes(&bytes),
            Err(Seq2SeqError::VersionMismatch {
                found: 2,
                expected: 1
            })
        ));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let m = model(AttentionKind::Standard);
        save_params(&m, &path).unwrap();
        assert_eq!(load_params(&path).unwrap(), m);
    }
}
