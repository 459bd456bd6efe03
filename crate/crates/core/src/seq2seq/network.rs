//! Graph construction for the encoder, attention and decoder.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::params::{AttentionParams, LstmParams, ModelParams};
use crate::corpus::{BOS_ID, EOS_ID, PAD_ID};
use crate::tensor::{Graph, Tensor, TensorError, Var};

/// Inverted dropout on LSTM inputs. Masks are drawn from `rng` in graph
/// construction order, so a seeded stream gives reproducible training.
#[derive(Debug)]
pub struct Dropout {
    pub keep: f64,
    pub rng: ChaCha8Rng,
}

impl Dropout {
    fn apply(&mut self, g: &mut Graph, x: Var) -> Result<Var, TensorError> {
        if self.keep >= 1.0 {
            return Ok(x);
        }
        let shape = g.value(x).shape().to_vec();
        let n = g.value(x).len();
        let scale = 1.0 / self.keep;
        let mask: Vec<f64> = (0..n)
            .map(|_| {
                if self.rng.random_bool(self.keep) {
                    scale
                } else {
                    0.0
                }
            })
            .collect();
        let m = g.leaf(Tensor::new(shape, mask)?);
        g.mul(x, m)
    }
}

fn drop(g: &mut Graph, x: Var, dropout: &mut Option<&mut Dropout>) -> Result<Var, TensorError> {
    match dropout {
        Some(d) => d.apply(g, x),
        None => Ok(x),
    }
}

pub(crate) struct BoundLstm {
    w: Var,
    u: Var,
    b: Var,
}

pub(crate) struct BoundAttention {
    w_enc: Var,
    w_dec: Var,
    v: Var,
    /// `v` reshaped to a `[u, 1]` column.
    v_col: Var,
    w_combine: Var,
}

/// Parameters placed on a graph as leaves.
pub(crate) struct Bound {
    src_emb: Var,
    tgt_emb: Var,
    enc: Vec<BoundLstm>,
    dec: Vec<BoundLstm>,
    attn: Option<BoundAttention>,
    proj_w: Var,
    proj_b: Var,
    /// Leaves in canonical tensor order.
    pub(crate) leaves: Vec<Var>,
    units: usize,
}

fn bind_lstm(g: &mut Graph, p: &LstmParams) -> BoundLstm {
    BoundLstm {
        w: g.leaf(p.w.clone()),
        u: g.leaf(p.u.clone()),
        b: g.leaf(p.b.clone()),
    }
}

fn bind_attention(g: &mut Graph, p: &AttentionParams) -> BoundAttention {
    let w_enc = g.leaf(p.w_enc.clone());
    let w_dec = g.leaf(p.w_dec.clone());
    let v = g.leaf(p.v.clone());
    let v_col = g
        .reshape(v, &[p.v.len(), 1])
        .expect("v reshapes to a column");
    let w_combine = g.leaf(p.w_combine.clone());
    BoundAttention {
        w_enc,
        w_dec,
        v,
        v_col,
        w_combine,
    }
}

impl Bound {
    pub(crate) fn new(g: &mut Graph, p: &ModelParams) -> Bound {
        let src_emb = g.leaf(p.src_embedding.clone());
        let tgt_emb = g.leaf(p.tgt_embedding.clone());
        let enc: Vec<BoundLstm> = p.encoder.iter().map(|l| bind_lstm(g, l)).collect();
        let dec: Vec<BoundLstm> = p.decoder.iter().map(|l| bind_lstm(g, l)).collect();
        let attn = p.attention.as_ref().map(|a| bind_attention(g, a));
        let proj_w = g.leaf(p.proj_w.clone());
        let proj_b = g.leaf(p.proj_b.clone());

        let mut leaves = vec![src_emb, tgt_emb];
        for l in enc.iter().chain(&dec) {
            leaves.extend([l.w, l.u, l.b]);
        }
        if let Some(a) = &attn {
            leaves.extend([a.w_enc, a.w_dec, a.v, a.w_combine]);
        }
        leaves.extend([proj_w, proj_b]);
        Bound {
            src_emb,
            tgt_emb,
            enc,
            dec,
            attn,
            proj_w,
            proj_b,
            leaves,
            units: p.proj_w.shape()[0],
        }
    }

    /// Gradients of every parameter, zero where the loss does not depend on it.
    pub(crate) fn gradients(
        &self,
        g: &Graph,
        loss: Var,
        like: &ModelParams,
    ) -> Result<ModelParams, TensorError> {
        let grads = g.backward(loss)?;
        let mut out = like.clone();
        for (t, &v) in out.tensors_mut().into_iter().zip(&self.leaves) {
            *t = grads.get_or_zeros(v, t);
        }
        Ok(out)
    }
}

/// One LSTM cell update on `[1, d_in]` input and `[1, u]` state.
pub(crate) fn lstm_cell(
    g: &mut Graph,
    p: &BoundLstm,
    x: Var,
    h: Var,
    c: Var,
) -> Result<(Var, Var), TensorError> {
    let u = g.value(h).last_dim();
    let xw = g.matmul(x, p.w)?;
    let hu = g.matmul(h, p.u)?;
    let z = g.add(xw, hu)?;
    let z = g.add(z, p.b)?;
    let zi = g.slice_last(z, 0, u)?;
    let zf = g.slice_last(z, u, u)?;
    let zg = g.slice_last(z, 2 * u, u)?;
    let zo = g.slice_last(z, 3 * u, u)?;
    let i = g.sigmoid(zi)?;
    let f = g.sigmoid(zf)?;
    let gg = g.tanh(zg)?;
    let o = g.sigmoid(zo)?;
    let fc = g.mul(f, c)?;
    let ig = g.mul(i, gg)?;
    let c_new = g.add(fc, ig)?;
    let tc = g.tanh(c_new)?;
    let h_new = g.mul(o, tc)?;
    Ok((h_new, c_new))
}

/// Per-layer recurrent state.
#[derive(Clone)]
pub(crate) struct State {
    pub h: Vec<Var>,
    pub c: Vec<Var>,
}

pub(crate) struct Encoded {
    /// Top-layer hidden state per source position.
    pub states: Vec<Var>,
    pub last: State,
}

fn zero_state(g: &mut Graph, layers: usize, u: usize) -> State {
    let h = (0..layers)
        .map(|_| g.leaf(Tensor::zeros(&[1, u])))
        .collect();
    let c = (0..layers)
        .map(|_| g.leaf(Tensor::zeros(&[1, u])))
        .collect();
    State { h, c }
}

fn run_stack(
    g: &mut Graph,
    layers: &[BoundLstm],
    mut input: Var,
    state: &mut State,
    dropout: &mut Option<&mut Dropout>,
) -> Result<Var, TensorError> {
    for (l, p) in layers.iter().enumerate() {
        let x = drop(g, input, dropout)?;
        let (h, c) = lstm_cell(g, p, x, state.h[l], state.c[l])?;
        state.h[l] = h;
        state.c[l] = c;
        input = h;
    }
    Ok(input)
}

pub(crate) fn encode(
    g: &mut Graph,
    b: &Bound,
    ids: &[usize],
    dropout: &mut Option<&mut Dropout>,
) -> Result<Encoded, TensorError> {
    let mut state = zero_state(g, b.enc.len(), b.units);
    let mut states = Vec::with_capacity(ids.len());
    for &id in ids {
        let e = g.embedding_gather(b.src_emb, &[id])?;
        states.push(run_stack(g, &b.enc, e, &mut state, dropout)?);
    }
    Ok(Encoded {
        states,
        last: state,
    })
}

/// Encoder states stacked as `[T, u]` with their precomputed key projection.
pub(crate) struct Memory {
    states: Var,
    keys: Var,
    len: usize,
}

pub(crate) fn memory(
    g: &mut Graph,
    a: &BoundAttention,
    states: &[Var],
) -> Result<Memory, TensorError> {
    let stacked = g.concat_rows(states)?;
    let keys = g.matmul(stacked, a.w_enc)?;
    Ok(Memory {
        states: stacked,
        keys,
        len: states.len(),
    })
}

/// Returns `(α [1, T], context [1, u], attention vector [1, u])`.
pub(crate) fn attend(
    g: &mut Graph,
    a: &BoundAttention,
    mem: &Memory,
    s: Var,
) -> Result<(Var, Var, Var), TensorError> {
    let u = g.value(s).last_dim();
    let sd = g.matmul(s, a.w_dec)?;
    let sd = g.reshape(sd, &[u])?;
    let pre = g.add(mem.keys, sd)?;
    let act = g.tanh(pre)?;
    let scores = g.matmul(act, a.v_col)?;
    let scores = g.reshape(scores, &[1, mem.len])?;
    let alpha = g.softmax(scores)?;
    let context = g.matmul(alpha, mem.states)?;
    let cs = g.concat(&[context, s])?;
    let combined = g.matmul(cs, a.w_combine)?;
    let vector = g.tanh(combined)?;
    Ok((alpha, context, vector))
}

/// Decoder recurrence with optional attention and input feeding.
pub(crate) struct Decoder {
    state: State,
    feed: Option<Var>,
    memory: Option<Memory>,
}

impl Decoder {
    pub(crate) fn start(g: &mut Graph, b: &Bound, enc: Encoded) -> Result<Decoder, TensorError> {
        let (feed, memory) = match &b.attn {
            Some(a) => (
                Some(g.leaf(Tensor::zeros(&[1, b.units]))),
                Some(memory(g, a, &enc.states)?),
            ),
            None => (None, None),
        };
        Ok(Decoder {
            state: enc.last,
            feed,
            memory,
        })
    }

    /// Consume `prev` and return `(logits [1, V_tgt], α)`.
    pub(crate) fn step(
        &mut self,
        g: &mut Graph,
        b: &Bound,
        prev: usize,
        dropout: &mut Option<&mut Dropout>,
    ) -> Result<(Var, Option<Var>), TensorError> {
        let e = g.embedding_gather(b.tgt_emb, &[prev])?;
        let input = match self.feed {
            Some(a_prev) => g.concat(&[e, a_prev])?,
            None => e,
        };
        let top = run_stack(g, &b.dec, input, &mut self.state, dropout)?;
        let (out, alpha) = match (&b.attn, &self.memory) {
            (Some(a), Some(mem)) => {
                let (alpha, _, vector) = attend(g, a, mem, top)?;
                self.feed = Some(vector);
                (vector, Some(alpha))
            }
            _ => (top, None),
        };
        let logits = g.matmul(out, b.proj_w)?;
        let logits = g.add(logits, b.proj_b)?;
        Ok((logits, alpha))
    }
}

/// Teacher-forced mean cross-entropy of `tgt` framed as `<s> tgt` → `tgt </s>`.
pub(crate) fn loss(
    g: &mut Graph,
    b: &Bound,
    src: &[usize],
    tgt: &[usize],
    dropout: &mut Option<&mut Dropout>,
) -> Result<Var, TensorError> {
    let enc = encode(g, b, src, dropout)?;
    let mut dec = Decoder::start(g, b, enc)?;
    let inputs: Vec<usize> = std::iter::once(BOS_ID).chain(tgt.iter().copied()).collect();
    let targets: Vec<usize> = tgt.iter().copied().chain(std::iter::once(EOS_ID)).collect();
    let mut rows = Vec::with_capacity(inputs.len());
    for &prev in &inputs {
        rows.push(dec.step(g, b, prev, dropout)?.0);
    }
    let logits = g.concat_rows(&rows)?;
    let mask: Vec<bool> = targets.iter().map(|&t| t != PAD_ID).collect();
    g.cross_entropy(logits, &targets, &mask)
}

/// Single cell update on concrete tensors.
pub fn lstm_step(
    x: &Tensor,
    h_prev: &Tensor,
    c_prev: &Tensor,
    p: &LstmParams,
) -> Result<(Tensor, Tensor), TensorError> {
    let mut g = Graph::new();
    let bl = bind_lstm(&mut g, p);
    let (x, h, c) = (
        g.leaf(x.clone()),
        g.leaf(h_prev.clone()),
        g.leaf(c_prev.clone()),
    );
    let (h, c) = lstm_cell(&mut g, &bl, x, h, c)?;
    Ok((g.value(h).clone(), g.value(c).clone()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Attention {
    pub weights: Tensor,
    pub context: Tensor,
    pub vector: Tensor,
}

/// Attention over encoder states `[T, u]` for decoder state `[1, u]`.
pub fn attend_values(
    states: &Tensor,
    s: &Tensor,
    p: &AttentionParams,
) -> Result<Attention, TensorError> {
    let mut g = Graph::new();
    let a = bind_attention(&mut g, p);
    let rows = states.shape()[0];
    let u = states.last_dim();
    let st: Vec<Var> = (0..rows)
        .map(|r| g.leaf(Tensor::row(states.data()[r * u..(r + 1) * u].to_vec())))
        .collect();
    let mem = memory(&mut g, &a, &st)?;
    let s = g.leaf(s.clone());
    let (alpha, ctx, vec) = attend(&mut g, &a, &mem, s)?;
    Ok(Attention {
        weights: g.value(alpha).clone(),
        context: g.value(ctx).clone(),
        vector: g.value(vec).clone(),
    })
}
