use candle_core::{Module, Tensor};
use candle_nn::Linear;

use super::layers::{linear, LayerNorm};
use super::ParamStore;
use crate::error::Result;
use crate::graph::EventKind;

/// Two (linear, layer norm, rectifier) blocks and an output projection.
#[derive(Debug, Clone)]
struct Classifier {
    l0: Linear,
    n0: LayerNorm,
    l1: Linear,
    n1: LayerNorm,
    l2: Linear,
}

impl Classifier {
    fn new(ps: &mut ParamStore, name: &str, input: usize, hidden: usize, classes: usize) -> Result<Self> {
        Ok(Self {
            l0: linear(ps, &format!("{name}.0"), input, hidden, true)?,
            n0: LayerNorm::new(ps, &format!("{name}.norm0"), hidden)?,
            l1: linear(ps, &format!("{name}.1"), hidden, hidden, true)?,
            n1: LayerNorm::new(ps, &format!("{name}.norm1"), hidden)?,
            l2: linear(ps, &format!("{name}.2"), hidden, classes, true)?,
        })
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let x = self.n0.forward(&self.l0.forward(x)?)?.relu()?;
        let x = self.n1.forward(&self.l1.forward(&x)?)?.relu()?;
        Ok(self.l2.forward(&x)?)
    }
}

fn one_hot(ids: &[u32], classes: usize, like: &Tensor) -> Result<Tensor> {
    let mut data = vec![0.0; ids.len() * classes];
    for (row, &id) in ids.iter().enumerate() {
        data[row * classes + id as usize] = 1.0;
    }
    Ok(Tensor::from_vec(data, (ids.len(), classes), like.device())?.to_dtype(like.dtype())?)
}

/// Event-type head and the first autoregressive embedding.
#[derive(Debug, Clone)]
pub struct TypeHead {
    classify: Classifier,
    from_hidden: Linear,
    auto0: Linear,
    auto1: Linear,
}

impl TypeHead {
    pub fn new(ps: &mut ParamStore, h: usize, h_auto: usize) -> Result<Self> {
        Ok(Self {
            classify: Classifier::new(ps, "head.type", h, h, EventKind::COUNT)?,
            from_hidden: linear(ps, "head.type.auto_hidden", h, h_auto, true)?,
            auto0: linear(ps, "head.type.auto0", EventKind::COUNT, h_auto, true)?,
            auto1: linear(ps, "head.type.auto1", h_auto, h_auto, true)?,
        })
    }

    /// `(S, 6)` logits from decoder states `(S, H)`.
    pub fn logits(&self, hidden: &Tensor) -> Result<Tensor> {
        self.classify.forward(hidden)
    }

    /// `Lin(h) + Lin(ReLU(Lin(onehot(kind))))`, `(S, H_auto)`.
    pub fn auto(&self, hidden: &Tensor, kinds: &[u32]) -> Result<Tensor> {
        let onehot = one_hot(kinds, EventKind::COUNT, hidden)?;
        let kind = self.auto1.forward(&self.auto0.forward(&onehot)?.relu()?)?;
        Ok((self.from_hidden.forward(hidden)? + kind)?)
    }
}

/// Source or destination node head: query-key attention over node
/// embeddings.
#[derive(Debug, Clone)]
pub struct NodeHead {
    key: Linear,
    q0: Linear,
    q1: Linear,
    auto: Linear,
}

impl NodeHead {
    pub fn new(ps: &mut ParamStore, name: &str, h: usize, h_auto: usize, h_node: usize) -> Result<Self> {
        Ok(Self {
            key: linear(ps, &format!("{name}.key"), h, h_node, true)?,
            q0: linear(ps, &format!("{name}.query0"), h_auto, h_auto, true)?,
            q1: linear(ps, &format!("{name}.query1"), h_auto, h_node, true)?,
            auto: linear(ps, &format!("{name}.auto"), h_node, h_auto, true)?,
        })
    }

    /// Keys `(S, N, H_node)`: the same projection applied to every node (a
    /// width-1 convolution over the node axis).
    pub fn keys(&self, nodes: &Tensor) -> Result<Tensor> {
        Ok(self.key.forward(nodes)?)
    }

    /// Scores `K q`, `(S, N)`.
    pub fn logits(&self, keys: &Tensor, auto: &Tensor) -> Result<Tensor> {
        let q = self.q1.forward(&self.q0.forward(auto)?.relu()?)?;
        Ok(keys.matmul(&q.unsqueeze(2)?)?.squeeze(2)?)
    }

    /// `auto + Lin(K[chosen] - k̄)` for rows where `active` is 1, `auto`
    /// unchanged elsewhere. `k̄` is the mean key over unmasked nodes.
    pub fn update(
        &self,
        auto: &Tensor,
        keys: &Tensor,
        node_mask: &Tensor,
        chosen: &[u32],
        active: &Tensor,
    ) -> Result<Tensor> {
        let n = keys.dim(1)?;
        let pick = one_hot(chosen, n, keys)?.unsqueeze(1)?;
        let picked = pick.matmul(keys)?.squeeze(1)?;
        let count = node_mask.sum_keepdim(1)?.clamp(1.0, f64::MAX)?;
        let mean = node_mask
            .unsqueeze(1)?
            .matmul(keys)?
            .squeeze(1)?
            .broadcast_div(&count)?;
        let delta = self.auto.forward(&(picked - mean)?)?;
        Ok((auto + delta.broadcast_mul(&active.unsqueeze(1)?)?)?)
    }
}

/// Label head over the label vocabulary.
#[derive(Debug, Clone)]
pub struct LabelHead {
    classify: Classifier,
}

impl LabelHead {
    pub fn new(ps: &mut ParamStore, h: usize, h_auto: usize, labels: usize) -> Result<Self> {
        Ok(Self {
            classify: Classifier::new(ps, "head.label", h_auto, h, labels)?,
        })
    }

    pub fn logits(&self, auto: &Tensor) -> Result<Tensor> {
        self.classify.forward(auto)
    }
}

/// 0/1 column of `rows` in the dtype of `like`.
pub fn indicator(rows: &[bool], like: &Tensor) -> Result<Tensor> {
    let data: Vec<f64> = rows.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    Ok(Tensor::from_vec(data, rows.len(), like.device())?.to_dtype(like.dtype())?)
}
