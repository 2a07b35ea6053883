use candle_core::{DType, Module, Tensor};
use candle_nn::Linear;

use super::layers::linear;
use super::ParamStore;
use crate::error::Result;

/// Edge list of a (possibly disjoint-union) graph.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EdgeIndex {
    pub src: Vec<u32>,
    pub dst: Vec<u32>,
}

impl EdgeIndex {
    pub fn len(&self) -> usize {
        self.src.len()
    }

    pub fn is_empty(&self) -> bool {
        self.src.is_empty()
    }
}

/// Single-head graph transformer convolution with edge features.
///
/// For an edge `j -> i` with attribute `e`: query `q_i = W_q x_i`, key
/// `k_j = W_k x_j + W_e e`, value `v_j = W_v x_j + W_e e`. Each node takes a
/// softmax over the scaled scores `q_i · k_j / sqrt(d)` of its incoming edges
/// and outputs `W_r x_i + Σ_j α_ij v_j`; a node without incoming edges keeps
/// only its root term.
#[derive(Debug, Clone)]
pub struct TransformerConv {
    query: Linear,
    key: Linear,
    value: Linear,
    edge: Linear,
    root: Linear,
    dim: usize,
}

impl TransformerConv {
    pub fn new(ps: &mut ParamStore, name: &str, dim: usize) -> Result<Self> {
        Ok(Self {
            query: linear(ps, &format!("{name}.query"), dim, dim, true)?,
            key: linear(ps, &format!("{name}.key"), dim, dim, true)?,
            value: linear(ps, &format!("{name}.value"), dim, dim, true)?,
            edge: linear(ps, &format!("{name}.edge"), dim, dim, false)?,
            root: linear(ps, &format!("{name}.root"), dim, dim, true)?,
            dim,
        })
    }

    /// `nodes` is `(N, D)`, `edges` `(E, D)` aligned with `index`.
    pub fn forward(&self, nodes: &Tensor, edges: &Tensor, index: &EdgeIndex) -> Result<Tensor> {
        let root = self.root.forward(nodes)?;
        if index.is_empty() {
            return Ok(root);
        }
        let n = nodes.dim(0)?;
        let device = nodes.device();
        let src = Tensor::new(index.src.as_slice(), device)?;
        let dst = Tensor::new(index.dst.as_slice(), device)?;
        let e = self.edge.forward(edges)?;
        let q = self.query.forward(nodes)?.index_select(&dst, 0)?;
        let k = (self.key.forward(nodes)?.index_select(&src, 0)? + &e)?;
        let v = (self.value.forward(nodes)?.index_select(&src, 0)? + &e)?;
        let scores = ((q * k)?.sum(1)? / (self.dim as f64).sqrt())?;
        // per-destination max, treated as a constant for stability
        let values = scores.to_dtype(DType::F64)?.to_vec1::<f64>()?;
        let mut max = vec![f64::NEG_INFINITY; n];
        for (s, &d) in values.iter().zip(&index.dst) {
            max[d as usize] = max[d as usize].max(*s);
        }
        let shift: Vec<f64> = index.dst.iter().map(|&d| max[d as usize]).collect();
        let shift = Tensor::from_vec(shift, index.len(), device)?.to_dtype(scores.dtype())?;
        let exp = (scores - shift)?.exp()?;
        let denom = Tensor::zeros(n, exp.dtype(), device)?.index_add(&dst, &exp, 0)?;
        let alpha = (&exp / denom.index_select(&dst, 0)?)?;
        let messages = v.broadcast_mul(&alpha.unsqueeze(1)?)?;
        let agg = Tensor::zeros((n, self.dim), messages.dtype(), device)?.index_add(&dst, &messages, 0)?;
        Ok((root + agg)?)
    }
}

/// Transformer convolution, rectifier, then a projection down to `H`.
#[derive(Debug, Clone)]
pub struct GraphEncoder {
    conv: TransformerConv,
    out: Linear,
    h: usize,
}

impl GraphEncoder {
    pub fn new(ps: &mut ParamStore, attr_dim: usize, h: usize) -> Result<Self> {
        Ok(Self {
            conv: TransformerConv::new(ps, "graph.conv", attr_dim)?,
            out: linear(ps, "graph.out", attr_dim, h, true)?,
            h,
        })
    }

    /// Node embeddings `(N, H)`; `(0, H)` for an empty graph.
    pub fn forward(&self, nodes: &Tensor, edges: &Tensor, index: &EdgeIndex) -> Result<Tensor> {
        if nodes.dim(0)? == 0 {
            return Ok(Tensor::zeros((0, self.h), nodes.dtype(), nodes.device())?);
        }
        let x = self.conv.forward(nodes, edges, index)?.relu()?;
        Ok(self.out.forward(&x)?)
    }
}
