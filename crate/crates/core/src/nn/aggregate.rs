use candle_core::{Module, Tensor};
use candle_nn::Linear;

use super::layers::{linear, masked_softmax};
use super::ParamStore;
use crate::error::Result;

/// Trilinear co-attention between two sets of vectors.
///
/// With `S = Sim(A, B)`, `S_b` the softmax of `S` over the `B` axis and `S_a`
/// over the `A` axis, the `A`-side output is
/// `Lin([A; P; A ⊙ P; A ⊙ Q])` where `P = S_b B` and `Q = S_a S_aᵀ A`.
/// The `B`-side output applies the same parameters with the roles swapped.
#[derive(Debug, Clone)]
pub struct CoAttention {
    w_a: Tensor,
    w_b: Tensor,
    w_ab: Tensor,
    proj: Linear,
}

impl CoAttention {
    pub fn new(ps: &mut ParamStore, name: &str, h: usize) -> Result<Self> {
        let bound = (6.0 / (h as f64 + 1.0)).sqrt();
        Ok(Self {
            w_a: ps.uniform(&format!("{name}.w_a"), &[h, 1], bound)?,
            w_b: ps.uniform(&format!("{name}.w_b"), &[h, 1], bound)?,
            w_ab: ps.uniform(&format!("{name}.w_ab"), &[h], bound)?,
            proj: linear(ps, &format!("{name}.proj"), 4 * h, h, true)?,
        })
    }

    /// `S[s, i, j] = w · [a_i; b_j; a_i ⊙ b_j]` for `a` `(S, m, H)` and `b`
    /// `(S, n, H)`.
    pub fn similarity(&self, a: &Tensor, b: &Tensor) -> Result<Tensor> {
        let wa = a.broadcast_matmul(&self.w_a)?;
        let wb = b.broadcast_matmul(&self.w_b)?.transpose(1, 2)?;
        let cross = a.broadcast_mul(&self.w_ab)?.matmul(&b.t()?)?;
        Ok(cross.broadcast_add(&wa)?.broadcast_add(&wb)?)
    }

    /// `A`-side output `(S, m, H)`. Masks are `(S, m)` and `(S, n)`; when `B`
    /// is fully masked `P` and `Q` are zero.
    pub fn attend(&self, a: &Tensor, a_mask: &Tensor, b: &Tensor, b_mask: &Tensor) -> Result<Tensor> {
        let sim = self.similarity(a, b)?;
        let pair = a_mask.unsqueeze(2)?.broadcast_mul(&b_mask.unsqueeze(1)?)?;
        let over_b = masked_softmax(&sim, &pair, 2)?;
        let over_a = masked_softmax(&sim, &pair, 1)?;
        let p = over_b.matmul(b)?;
        let q = over_a.matmul(&over_a.t()?)?.matmul(a)?;
        let features = Tensor::cat(&[a, &p, &(a * &p)?, &(a * &q)?], 2)?;
        Ok(self.proj.forward(&features)?)
    }

    /// Text-to-graph and graph-to-text outputs.
    pub fn coattend(
        &self,
        text: &Tensor,
        text_mask: &Tensor,
        graph: &Tensor,
        graph_mask: &Tensor,
    ) -> Result<(Tensor, Tensor)> {
        Ok((
            self.attend(text, text_mask, graph, graph_mask)?,
            self.attend(graph, graph_mask, text, text_mask)?,
        ))
    }
}
