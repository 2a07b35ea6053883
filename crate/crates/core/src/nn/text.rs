use candle_core::{Module, Tensor};
use candle_nn::Linear;

use super::layers::{linear, Attention, FeedForward, LayerNorm};
use super::ParamStore;
use crate::embedding::positional_encoding;
use crate::error::Result;

/// Word table followed by the trainable projection to the model width.
#[derive(Debug, Clone)]
pub struct WordEmbedding {
    table: Tensor,
    proj: Linear,
}

impl WordEmbedding {
    /// `vectors` is the row-major `vocab × word_dim` table.
    pub fn new(
        ps: &mut ParamStore,
        vectors: Vec<f32>,
        vocab: usize,
        word_dim: usize,
        h: usize,
        trainable_table: bool,
    ) -> Result<Self> {
        let data = vectors.into_iter().map(f64::from).collect();
        let table = ps.from_vec("word.table", data, &[vocab, word_dim], trainable_table)?;
        Ok(Self {
            table,
            proj: linear(ps, "word.proj", word_dim, h, true)?,
        })
    }

    /// Projected vectors for a tensor of ids of any shape; adds a trailing
    /// `H` dimension.
    pub fn forward(&self, ids: &Tensor) -> Result<Tensor> {
        let mut shape = ids.dims().to_vec();
        let flat = self.table.index_select(&ids.flatten_all()?, 0)?;
        let projected = self.proj.forward(&flat)?;
        shape.push(projected.dim(1)?);
        Ok(projected.reshape(shape)?)
    }

    /// Mean projected vector per row of a `(rows, len)` id grid, counting only
    /// positions where `mask` is 1. Rows with no tokens map to zero.
    pub fn mean(&self, ids: &Tensor, mask: &Tensor) -> Result<Tensor> {
        let vectors = self.forward(ids)?;
        let summed = vectors.broadcast_mul(&mask.unsqueeze(2)?)?.sum(1)?;
        let count = mask.sum_keepdim(1)?.clamp(1.0, f64::MAX)?;
        Ok(summed.broadcast_div(&count)?)
    }
}

/// `(len, dim)` table of sinusoidal position encodings.
pub fn position_table(len: usize, dim: usize, like: &Tensor) -> Result<Tensor> {
    let data: Vec<f64> = (0..len).flat_map(|p| positional_encoding(p, dim)).collect();
    Ok(Tensor::from_vec(data, (len, dim), like.device())?.to_dtype(like.dtype())?)
}

#[derive(Debug, Clone)]
struct ConvLayer {
    norm: LayerNorm,
    /// `(H, kernel)`: one filter per channel.
    depthwise: Tensor,
    pointwise: Linear,
}

impl ConvLayer {
    /// Same-padded depthwise convolution along the sequence axis followed by a
    /// pointwise projection and a rectifier.
    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let kernel = self.depthwise.dim(1)?;
        let len = x.dim(1)?;
        let y = self.norm.forward(x)?;
        let pad = kernel / 2;
        let padded = y.pad_with_zeros(1, pad, kernel - 1 - pad)?;
        let mut acc = padded
            .narrow(1, 0, len)?
            .broadcast_mul(&self.depthwise.narrow(1, 0, 1)?.squeeze(1)?)?;
        for k in 1..kernel {
            let tap = self.depthwise.narrow(1, k, 1)?.squeeze(1)?;
            acc = (acc + padded.narrow(1, k, len)?.broadcast_mul(&tap)?)?;
        }
        Ok(self.pointwise.forward(&acc)?.relu()?)
    }
}

/// Encoder block: convolution layers, one self-attention layer and a
/// feed-forward layer, each pre-normalized and residual.
#[derive(Debug, Clone)]
pub struct TextEncoder {
    convs: Vec<ConvLayer>,
    attn_norm: LayerNorm,
    attn: Attention,
    ffn_norm: LayerNorm,
    ffn: FeedForward,
}

impl TextEncoder {
    pub fn new(ps: &mut ParamStore, h: usize, layers: usize, kernel: usize, heads: usize) -> Result<Self> {
        let mut convs = Vec::with_capacity(layers);
        for i in 0..layers {
            let name = format!("text.conv{i}");
            convs.push(ConvLayer {
                norm: LayerNorm::new(ps, &format!("{name}.norm"), h)?,
                depthwise: ps.uniform(&format!("{name}.depthwise"), &[h, kernel], 1.0 / (kernel as f64).sqrt())?,
                pointwise: linear(ps, &format!("{name}.pointwise"), h, h, true)?,
            });
        }
        Ok(Self {
            convs,
            attn_norm: LayerNorm::new(ps, "text.attn_norm", h)?,
            attn: Attention::new(ps, "text.attn", h, heads)?,
            ffn_norm: LayerNorm::new(ps, "text.ffn_norm", h)?,
            ffn: FeedForward::new(ps, "text.ffn", h, h, h)?,
        })
    }

    /// `x` is `(B, L, H)` (word vectors plus positions), `mask` `(B, L)`.
    /// Padded positions come out as zeros.
    pub fn forward(&self, x: &Tensor, mask: &Tensor) -> Result<Tensor> {
        let keep = mask.unsqueeze(2)?;
        let mut x = x.broadcast_mul(&keep)?;
        for conv in &self.convs {
            x = (&x + conv.forward(&x)?)?.broadcast_mul(&keep)?;
        }
        let y = self.attn_norm.forward(&x)?;
        let pair_mask = mask.unsqueeze(1)?.broadcast_mul(&keep)?;
        x = (&x + self.attn.forward(&y, &y, &pair_mask)?)?;
        x = (&x + self.ffn.forward(&self.ffn_norm.forward(&x)?)?)?;
        Ok(x.broadcast_mul(&keep)?)
    }
}
