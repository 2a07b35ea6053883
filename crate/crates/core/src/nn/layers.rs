use candle_core::{DType, Module, Tensor, D};
use candle_nn::Linear;

use super::ParamStore;
use crate::error::Result;

/// Affine layer initialized uniformly in `±1/sqrt(fan_in)`.
pub fn linear(ps: &mut ParamStore, name: &str, fan_in: usize, fan_out: usize, bias: bool) -> Result<Linear> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    let w = ps.uniform(&format!("{name}.weight"), &[fan_out, fan_in], bound)?;
    let b = if bias {
        Some(ps.uniform(&format!("{name}.bias"), &[fan_out], bound)?)
    } else {
        None
    };
    Ok(Linear::new(w, b))
}

/// Layer normalization over the last dimension, built from differentiable
/// primitives.
#[derive(Debug, Clone)]
pub struct LayerNorm {
    gamma: Tensor,
    beta: Tensor,
    eps: f64,
}

impl LayerNorm {
    pub fn new(ps: &mut ParamStore, name: &str, dim: usize) -> Result<Self> {
        Ok(Self {
            gamma: ps.filled(&format!("{name}.weight"), &[dim], 1.0)?,
            beta: ps.filled(&format!("{name}.bias"), &[dim], 0.0)?,
            eps: 1e-5,
        })
    }
}

impl Module for LayerNorm {
    fn forward(&self, x: &Tensor) -> candle_core::Result<Tensor> {
        let mean = x.mean_keepdim(D::Minus1)?;
        let centered = x.broadcast_sub(&mean)?;
        let var = centered.sqr()?.mean_keepdim(D::Minus1)?;
        let normed = centered.broadcast_div(&(var + self.eps)?.sqrt()?)?;
        normed.broadcast_mul(&self.gamma)?.broadcast_add(&self.beta)
    }
}

/// Two linear layers with a rectifier between.
#[derive(Debug, Clone)]
pub struct FeedForward {
    inner: Linear,
    outer: Linear,
}

impl FeedForward {
    pub fn new(ps: &mut ParamStore, name: &str, dim: usize, hidden: usize, out: usize) -> Result<Self> {
        Ok(Self {
            inner: linear(ps, &format!("{name}.0"), dim, hidden, true)?,
            outer: linear(ps, &format!("{name}.1"), hidden, out, true)?,
        })
    }
}

impl Module for FeedForward {
    fn forward(&self, x: &Tensor) -> candle_core::Result<Tensor> {
        self.outer.forward(&self.inner.forward(x)?.relu()?)
    }
}

const MASKED: f64 = -1e9;

fn masked_parts(scores: &Tensor, mask: &Tensor, dim: usize) -> candle_core::Result<(Tensor, Tensor, Tensor)> {
    let mask = mask.broadcast_as(scores.shape())?.to_dtype(scores.dtype())?;
    let shifted = ((scores * &mask)? + ((&mask - 1.0)? * -MASKED)?)?;
    let max = shifted.max_keepdim(dim)?.detach();
    let shifted = shifted.broadcast_sub(&max)?;
    let exp = (shifted.exp()? * &mask)?;
    // rows with no admissible entry get denominator 1 and so all-zero weights
    let any = mask.max_keepdim(dim)?;
    let denom = (exp.sum_keepdim(dim)? + (1.0 - any)?)?;
    Ok((shifted, exp, denom))
}

/// Softmax restricted to entries where `mask` is 1 (mask broadcasts to the
/// scores). Masked entries get weight 0; a row with no unmasked entry is all
/// zeros rather than NaN.
pub fn masked_softmax(scores: &Tensor, mask: &Tensor, dim: usize) -> Result<Tensor> {
    let (_, exp, denom) = masked_parts(scores, mask, dim)?;
    Ok(exp.broadcast_div(&denom)?)
}

/// Log of [`masked_softmax`] at unmasked entries. Values at masked entries are
/// finite but meaningless.
pub fn masked_log_softmax(scores: &Tensor, mask: &Tensor, dim: usize) -> Result<Tensor> {
    let (shifted, _, denom) = masked_parts(scores, mask, dim)?;
    Ok(shifted.broadcast_sub(&denom.log()?)?)
}

/// Scaled dot-product attention with separate query, key, value and output
/// projections.
#[derive(Debug, Clone)]
pub struct Attention {
    q: Linear,
    k: Linear,
    v: Linear,
    o: Linear,
    heads: usize,
}

impl Attention {
    pub fn new(ps: &mut ParamStore, name: &str, dim: usize, heads: usize) -> Result<Self> {
        assert!(
            heads > 0 && dim.is_multiple_of(heads),
            "dim {dim} not divisible by {heads} heads"
        );
        Ok(Self {
            q: linear(ps, &format!("{name}.q"), dim, dim, true)?,
            k: linear(ps, &format!("{name}.k"), dim, dim, true)?,
            v: linear(ps, &format!("{name}.v"), dim, dim, true)?,
            o: linear(ps, &format!("{name}.o"), dim, dim, true)?,
            heads,
        })
    }

    /// `query` is `(B, Lq, H)`, `memory` `(B, Lk, H)` and `mask` `(B, Lq, Lk)`
    /// with 1 where a query may attend. A query with nothing to attend to gets
    /// only the output bias.
    pub fn forward(&self, query: &Tensor, memory: &Tensor, mask: &Tensor) -> Result<Tensor> {
        let (b, lq, dim) = query.dims3()?;
        let lk = memory.dim(1)?;
        let dh = dim / self.heads;
        let split = |x: Tensor, len: usize| -> candle_core::Result<Tensor> {
            x.reshape((b, len, self.heads, dh))?.transpose(1, 2)?.contiguous()
        };
        let q = split(self.q.forward(query)?, lq)?;
        let k = split(self.k.forward(memory)?, lk)?;
        let v = split(self.v.forward(memory)?, lk)?;
        let scores = (q.matmul(&k.t()?)? / (dh as f64).sqrt())?;
        let weights = masked_softmax(&scores, &mask.unsqueeze(1)?, 3)?;
        let ctx = weights.matmul(&v)?.transpose(1, 2)?.reshape((b, lq, dim))?;
        Ok(self.o.forward(&ctx)?)
    }
}

/// `(len, len)` lower-triangular 0/1 matrix.
pub fn causal_mask(len: usize, dtype: DType, device: &candle_core::Device) -> Result<Tensor> {
    let data: Vec<f64> = (0..len * len)
        .map(|i| if i % len <= i / len { 1.0 } else { 0.0 })
        .collect();
    Ok(Tensor::from_vec(data, (len, len), device)?.to_dtype(dtype)?)
}
