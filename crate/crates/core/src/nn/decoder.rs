use candle_core::{Module, Tensor};
use candle_nn::Linear;

use super::layers::{causal_mask, linear, Attention, FeedForward, LayerNorm};
use super::text::position_table;
use super::ParamStore;
use crate::error::Result;
use crate::graph::EventKind;

/// Event embeddings: `[type; source label; destination label; event label]`.
///
/// Label segments come from a label-embedding table whose row 0 is the empty
/// label (a zero vector); arguments a kind does not carry point at row 0, so
/// their segments are exactly zero.
#[derive(Debug, Clone)]
pub struct EventEmbedder {
    types: Tensor,
}

/// One input event with its arguments resolved to label-table rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EventRow {
    pub kind: u32,
    pub src: u32,
    pub dst: u32,
    pub label: u32,
}

impl EventEmbedder {
    pub fn new(ps: &mut ParamStore, h_tau: usize) -> Result<Self> {
        Ok(Self {
            types: ps.uniform("event.types", &[EventKind::COUNT, h_tau], 1.0)?,
        })
    }

    /// `(rows, H_tau + 3H)` embeddings against `labels` `(U, H)`.
    pub fn forward(&self, rows: &[EventRow], labels: &Tensor) -> Result<Tensor> {
        let device = labels.device();
        let column = |f: fn(&EventRow) -> u32| -> candle_core::Result<Tensor> {
            let ids: Vec<u32> = rows.iter().map(f).collect();
            Tensor::new(ids.as_slice(), device)
        };
        Ok(Tensor::cat(
            &[
                self.types.index_select(&column(|r| r.kind)?, 0)?,
                labels.index_select(&column(|r| r.src)?, 0)?,
                labels.index_select(&column(|r| r.dst)?, 0)?,
                labels.index_select(&column(|r| r.label)?, 0)?,
            ],
            1,
        )?)
    }
}

/// Decoder block: causal self-attention over the event sequence, one
/// cross-attention per memory, then a feed-forward layer; each sub-layer is
/// pre-normalized and residual.
#[derive(Debug, Clone)]
pub struct Decoder {
    input: Linear,
    self_norm: LayerNorm,
    self_attn: Attention,
    cross: Vec<(LayerNorm, Attention)>,
    ffn_norm: LayerNorm,
    ffn: FeedForward,
    h: usize,
}

pub const MEMORIES: usize = 4;

impl Decoder {
    pub fn new(ps: &mut ParamStore, event_dim: usize, h: usize, heads: usize) -> Result<Self> {
        let mut cross = Vec::with_capacity(MEMORIES);
        for i in 0..MEMORIES {
            cross.push((
                LayerNorm::new(ps, &format!("decoder.cross{i}_norm"), h)?,
                Attention::new(ps, &format!("decoder.cross{i}"), h, heads)?,
            ));
        }
        Ok(Self {
            input: linear(ps, "decoder.input", event_dim, h, true)?,
            self_norm: LayerNorm::new(ps, "decoder.self_norm", h)?,
            self_attn: Attention::new(ps, "decoder.self", h, heads)?,
            cross,
            ffn_norm: LayerNorm::new(ps, "decoder.ffn_norm", h)?,
            ffn: FeedForward::new(ps, "decoder.ffn", h, h, h)?,
            h,
        })
    }

    /// Projects `(B, P, event_dim)` embeddings, adds positions and runs the
    /// causal self-attention sub-layer. `mask` `(B, P)` marks real events.
    pub fn self_attend(&self, events: &Tensor, mask: &Tensor) -> Result<Tensor> {
        let len = events.dim(1)?;
        let x = self.input.forward(events)?;
        let x = x.broadcast_add(&position_table(len, self.h, &x)?)?;
        let causal = causal_mask(len, x.dtype(), x.device())?;
        let pair = causal.unsqueeze(0)?.broadcast_mul(&mask.unsqueeze(1)?)?;
        let y = self.self_norm.forward(&x)?;
        Ok((&x + self.self_attn.forward(&y, &y, &pair)?)?)
    }

    /// Cross-attention over the four memories, in order, then the
    /// feed-forward sub-layer. `x` is `(S, Q, H)`; each memory is a
    /// `(S, M, H)` tensor with an `(S, M)` mask.
    pub fn cross_attend(&self, x: &Tensor, memories: &[(Tensor, Tensor)]) -> Result<Tensor> {
        assert_eq!(memories.len(), MEMORIES);
        let queries = x.dim(1)?;
        let mut x = x.clone();
        for ((norm, attn), (memory, mask)) in self.cross.iter().zip(memories) {
            let (s, m) = mask.dims2()?;
            let mask = mask.unsqueeze(1)?.broadcast_as((s, queries, m))?;
            x = (&x + attn.forward(&norm.forward(&x)?, memory, &mask)?)?;
        }
        Ok((&x + self.ffn.forward(&self.ffn_norm.forward(&x)?)?)?)
    }
}
