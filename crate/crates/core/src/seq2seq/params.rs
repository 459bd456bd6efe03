use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{AttentionKind, ModelConfig};
use crate::tensor::Tensor;

pub const INIT_SCALE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    /// Input weights `[d_in, 4u]`, gate columns ordered i, f, g, o.
    pub w: Tensor,
    /// Recurrent weights `[u, 4u]`.
    pub u: Tensor,
    /// Bias `[4u]`.
    pub b: Tensor,
}

impl LstmParams {
    pub fn zeros(d_in: usize, units: usize) -> LstmParams {
        LstmParams {
            w: Tensor::zeros(&[d_in, 4 * units]),
            u: Tensor::zeros(&[units, 4 * units]),
            b: Tensor::zeros(&[4 * units]),
        }
    }

    pub fn units(&self) -> usize {
        self.u.shape()[0]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    pub w_enc: Tensor,
    pub w_dec: Tensor,
    /// Score vector `[u]`.
    pub v: Tensor,
    /// `[2u, u]`, applied to `[context; state]`.
    pub w_combine: Tensor,
}

impl AttentionParams {
    pub fn zeros(units: usize) -> AttentionParams {
        AttentionParams {
            w_enc: Tensor::zeros(&[units, units]),
            w_dec: Tensor::zeros(&[units, units]),
            v: Tensor::zeros(&[units]),
            w_combine: Tensor::zeros(&[2 * units, units]),
        }
    }
}

/// All trainable tensors of the network.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub src_embedding: Tensor,
    pub tgt_embedding: Tensor,
    pub encoder: Vec<LstmParams>,
    pub decoder: Vec<LstmParams>,
    pub attention: Option<AttentionParams>,
    pub proj_w: Tensor,
    pub proj_b: Tensor,
}

impl ModelParams {
    /// Every tensor zero. Callers must have validated `config`.
    pub fn zeros(config: &ModelConfig) -> ModelParams {
        let u = config.num_units;
        let feed = matches!(config.attention, AttentionKind::Standard);
        ModelParams {
            src_embedding: Tensor::zeros(&[config.src_vocab_size, u]),
            tgt_embedding: Tensor::zeros(&[config.tgt_vocab_size, u]),
            encoder: (0..config.num_layers)
                .map(|_| LstmParams::zeros(u, u))
                .collect(),
            decoder: (0..config.num_layers)
                .map(|l| LstmParams::zeros(if l == 0 && feed { 2 * u } else { u }, u))
                .collect(),
            attention: feed.then(|| AttentionParams::zeros(u)),
            proj_w: Tensor::zeros(&[u, config.tgt_vocab_size]),
            proj_b: Tensor::zeros(&[config.tgt_vocab_size]),
        }
    }

    /// Uniform(−0.1, 0.1) in canonical tensor order from a seeded stream.
    pub fn init(config: &ModelConfig, seed: u64) -> ModelParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = ModelParams::zeros(config);
        for t in p.tensors_mut() {
            *t = Tensor::uniform(t.shape(), -INIT_SCALE, INIT_SCALE, &mut rng);
        }
        p
    }

    /// Tensors in canonical order: embeddings, encoder layers, decoder
    /// layers, attention, projection.
    pub fn tensors(&self) -> Vec<&Tensor> {
        let mut out = vec![&self.src_embedding, &self.tgt_embedding];
        for l in self.encoder.iter().chain(&self.decoder) {
            out.extend([&l.w, &l.u, &l.b]);
        }
        if let Some(a) = &self.attention {
            out.extend([&a.w_enc, &a.w_dec, &a.v, &a.w_combine]);
        }
        out.extend([&self.proj_w, &self.proj_b]);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = vec![&mut self.src_embedding, &mut self.tgt_embedding];
        for l in self.encoder.iter_mut().chain(self.decoder.iter_mut()) {
            out.extend([&mut l.w, &mut l.u, &mut l.b]);
        }
        if let Some(a) = &mut self.attention {
            out.extend([&mut a.w_enc, &mut a.w_dec, &mut a.v, &mut a.w_combine]);
        }
        out.extend([&mut self.proj_w, &mut self.proj_b]);
        out
    }

    /// Names matching [`ModelParams::tensors`].
    pub fn names(&self) -> Vec<String> {
        let mut out = vec!["src_embedding".to_string(), "tgt_embedding".to_string()];
        for (side, layers) in [("encoder", &self.encoder), ("decoder", &self.decoder)] {
            for i in 0..layers.len() {
                for part in ["w", "u", "b"] {
                    out.push(format!("{side}.{i}.{part}"));
                }
            }
        }
        if self.attention.is_some() {
            for part in ["w_enc", "w_dec", "v", "w_combine"] {
                out.push(format!("attention.{part}"));
            }
        }
        out.push("projection.w".into());
        out.push("projection.b".into());
        out
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.is_finite())
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }
}
