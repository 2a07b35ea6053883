use std::collections::HashMap;

use candle_core::{DType, Device, Tensor};
use serde::{Deserialize, Serialize};

use super::aggregate::CoAttention;
use super::decoder::{Decoder, EventEmbedder, EventRow};
use super::graph::{EdgeIndex, GraphEncoder};
use super::heads::{indicator, LabelHead, NodeHead, TypeHead};
use super::text::{position_table, TextEncoder, WordEmbedding};
use super::ParamStore;
use crate::data::{Batch, RuleTokenizer, TokenGrid, Tokenizer, Vocabularies};
use crate::embedding::{random_word_vectors, temporal_embedding, EncodingConfig};
use crate::error::{Error, Result};
use crate::graph::{ApplyMode, BeliefGraph, GraphEvent, Timestamp};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub encoding: EncodingConfig,
    pub word_dim: usize,
    pub attention_heads: usize,
    pub conv_layers: usize,
    pub conv_kernel: usize,
    /// Fine-tune the word table instead of keeping it frozen.
    pub train_word_table: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            encoding: EncodingConfig::default(),
            word_dim: 300,
            attention_heads: 1,
            conv_layers: 5,
            conv_kernel: 7,
            train_word_table: false,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        self.encoding.validate()?;
        let h = self.encoding.h;
        if self.attention_heads == 0 || !h.is_multiple_of(self.attention_heads) {
            return Err(Error::Invalid(format!(
                "h = {h} is not divisible by {} attention heads",
                self.attention_heads
            )));
        }
        if self.word_dim == 0 || self.conv_kernel == 0 {
            return Err(Error::Invalid("word_dim and conv_kernel must be positive".into()));
        }
        Ok(())
    }
}

/// Labels referenced by one forward pass. Row 0 is the empty label, whose
/// embedding is the zero vector.
#[derive(Debug, Clone)]
pub struct LabelSet {
    labels: Vec<String>,
    index: HashMap<String, u32>,
}

impl Default for LabelSet {
    fn default() -> Self {
        let mut set = Self {
            labels: Vec::new(),
            index: HashMap::new(),
        };
        set.id("");
        set
    }
}

impl LabelSet {
    pub fn id(&mut self, label: &str) -> u32 {
        if let Some(&id) = self.index.get(label) {
            return id;
        }
        let id = self.labels.len() as u32;
        self.labels.push(label.to_string());
        self.index.insert(label.to_string(), id);
        id
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Several graphs flattened into one disjoint union.
#[derive(Debug, Clone)]
pub(crate) struct GraphUnion {
    node_labels: Vec<u32>,
    node_times: Vec<Timestamp>,
    edge_labels: Vec<u32>,
    edge_times: Vec<Timestamp>,
    edges: EdgeIndex,
    offsets: Vec<usize>,
}

impl Default for GraphUnion {
    fn default() -> Self {
        Self {
            node_labels: Vec::new(),
            node_times: Vec::new(),
            edge_labels: Vec::new(),
            edge_times: Vec::new(),
            edges: EdgeIndex::default(),
            offsets: vec![0],
        }
    }
}

impl GraphUnion {
    pub(crate) fn push(&mut self, graph: &BeliefGraph, labels: &mut LabelSet) {
        let base = self.node_labels.len() as u32;
        for node in graph.nodes() {
            self.node_labels.push(labels.id(&node.label));
            self.node_times.push(node.added_at);
        }
        for edge in graph.edges() {
            self.edges.src.push(base + edge.src as u32);
            self.edges.dst.push(base + edge.dst as u32);
            self.edge_labels.push(labels.id(&edge.label));
            self.edge_times.push(edge.added_at);
        }
        self.offsets.push(self.node_labels.len());
    }

    fn sizes(&self) -> impl Iterator<Item = usize> + '_ {
        self.offsets.windows(2).map(|w| w[1] - w[0])
    }
}

/// Node and edge attribute rows of one graph, aligned with its storage.
#[derive(Debug, Clone)]
pub struct AttributeMatrices {
    pub nodes: Tensor,
    pub edges: Tensor,
    pub index: EdgeIndex,
}

/// Resolves an input event's arguments to label rows, using the graph as it
/// was before the event. Arguments the kind does not carry map to row 0.
pub(crate) fn event_row(event: &GraphEvent, graph: &BeliefGraph, labels: &mut LabelSet) -> Result<EventRow> {
    let mask = event.kind.mask();
    let mut node_label = |present: bool, index: Option<usize>| -> Result<u32> {
        match (present, index) {
            (true, Some(i)) => {
                let label = graph.label(i).ok_or(crate::graph::GraphError::DanglingIndex {
                    index: i,
                    len: graph.node_count(),
                })?;
                Ok(labels.id(label))
            }
            _ => Ok(0),
        }
    };
    let src = node_label(mask.src, event.src)?;
    let dst = node_label(mask.dst, event.dst)?;
    let label = match (&event.label, mask.label) {
        (Some(l), true) => labels.id(l),
        _ => 0,
    };
    Ok(EventRow {
        kind: event.kind.id() as u32,
        src,
        dst,
        label,
    })
}

pub(crate) struct TextStates {
    obs: Tensor,
    obs_mask: Tensor,
    action: Tensor,
    action_mask: Tensor,
}

/// Everything the decoder needs for a set of snapshots: per example the input
/// event rows, and per snapshot `(example, position)` plus its graph.
#[derive(Default)]
pub(crate) struct DecodeInputs {
    pub events: Vec<Vec<EventRow>>,
    pub snapshots: Vec<(usize, usize)>,
    pub graphs: GraphUnion,
    pub labels: LabelSet,
}

pub(crate) struct Decoded {
    pub hidden: Tensor,
    pub nodes: Tensor,
    pub node_mask: Tensor,
}

/// Teacher-forcing targets per snapshot.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SnapshotTargets {
    pub kinds: Vec<u32>,
    pub src: Vec<u32>,
    pub dst: Vec<u32>,
    pub labels: Vec<u32>,
    pub src_active: Vec<bool>,
    pub dst_active: Vec<bool>,
    pub label_active: Vec<bool>,
}

/// Unnormalized head scores for every snapshot of a batch.
#[derive(Debug, Clone)]
pub struct TeacherOutputs {
    /// `(S, 6)`
    pub type_logits: Tensor,
    /// `(S, N)`, valid where `node_mask` is 1.
    pub src_logits: Tensor,
    pub dst_logits: Tensor,
    pub node_mask: Tensor,
    /// `(S, |labels|)`
    pub label_logits: Tensor,
    pub targets: SnapshotTargets,
}

/// The full graph updater: text encoder, graph encoder, aggregator, event
/// decoder and the four heads.
pub struct Model {
    config: ModelConfig,
    vocab: Vocabularies,
    params: ParamStore,
    words: WordEmbedding,
    text: TextEncoder,
    graph: GraphEncoder,
    aggregate: CoAttention,
    events: EventEmbedder,
    decoder: Decoder,
    pub(crate) type_head: TypeHead,
    pub(crate) src_head: NodeHead,
    pub(crate) dst_head: NodeHead,
    pub(crate) label_head: LabelHead,
}

impl Model {
    /// Builds a model with parameters drawn from `seed`. Without word vectors
    /// a seeded random table stands in.
    pub fn new(
        config: ModelConfig,
        vocab: Vocabularies,
        word_vectors: Option<Vec<f32>>,
        seed: u64,
        dtype: DType,
        device: &Device,
    ) -> Result<Self> {
        config.validate()?;
        let enc = &config.encoding;
        let vectors = word_vectors
            .unwrap_or_else(|| random_word_vectors(vocab.words.len(), config.word_dim, seed.wrapping_add(1)));
        if vectors.len() != vocab.words.len() * config.word_dim {
            return Err(Error::Invalid(format!(
                "word table has {} values, expected {} x {}",
                vectors.len(),
                vocab.words.len(),
                config.word_dim
            )));
        }
        let mut ps = ParamStore::new(seed, dtype, device.clone());
        let words = WordEmbedding::new(
            &mut ps,
            vectors,
            vocab.words.len(),
            config.word_dim,
            enc.h,
            config.train_word_table,
        )?;
        let text = TextEncoder::new(
            &mut ps,
            enc.h,
            config.conv_layers,
            config.conv_kernel,
            config.attention_heads,
        )?;
        let graph = GraphEncoder::new(&mut ps, enc.attr_dim(), enc.h)?;
        let aggregate = CoAttention::new(&mut ps, "aggregate", enc.h)?;
        let events = EventEmbedder::new(&mut ps, enc.h_tau)?;
        let decoder = Decoder::new(&mut ps, enc.event_dim(), enc.h, config.attention_heads)?;
        let type_head = TypeHead::new(&mut ps, enc.h, enc.h_auto)?;
        let src_head = NodeHead::new(&mut ps, "head.src", enc.h, enc.h_auto, enc.h_node)?;
        let dst_head = NodeHead::new(&mut ps, "head.dst", enc.h, enc.h_auto, enc.h_node)?;
        let label_head = LabelHead::new(&mut ps, enc.h, enc.h_auto, vocab.labels.len())?;
        Ok(Self {
            config,
            vocab,
            params: ps,
            words,
            text,
            graph,
            aggregate,
            events,
            decoder,
            type_head,
            src_head,
            dst_head,
            label_head,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn vocab(&self) -> &Vocabularies {
        &self.vocab
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn dtype(&self) -> DType {
        self.params.dtype()
    }

    pub fn device(&self) -> &Device {
        self.params.device()
    }

    fn tensor(&self, data: Vec<f64>, shape: &[usize]) -> Result<Tensor> {
        Ok(Tensor::from_vec(data, shape, self.device())?.to_dtype(self.dtype())?)
    }

    fn grid_tensors(&self, grid: &TokenGrid) -> Result<(Tensor, Tensor)> {
        let rows = grid.lengths.len();
        let ids = Tensor::from_vec(grid.ids.clone(), (rows, grid.width), self.device())?;
        let mask = grid.mask().into_iter().map(f64::from).collect();
        Ok((ids, self.tensor(mask, &[rows, grid.width])?))
    }

    fn encode_grid(&self, grid: &TokenGrid) -> Result<(Tensor, Tensor)> {
        let (ids, mask) = self.grid_tensors(grid)?;
        let x = self.words.forward(&ids)?;
        let x = x.broadcast_add(&position_table(grid.width, self.config.encoding.h, &x)?)?;
        Ok((self.text.forward(&x, &mask)?, mask))
    }

    pub(crate) fn encode_texts(&self, obs: &TokenGrid, action: &TokenGrid) -> Result<TextStates> {
        let (obs, obs_mask) = self.encode_grid(obs)?;
        let (action, action_mask) = self.encode_grid(action)?;
        Ok(TextStates {
            obs,
            obs_mask,
            action,
            action_mask,
        })
    }

    /// Contextual token representations `(L, H)`; `(0, H)` for no tokens.
    pub fn encode_text(&self, tokens: &[String]) -> Result<Tensor> {
        if tokens.is_empty() {
            return Ok(Tensor::zeros((0, self.config.encoding.h), self.dtype(), self.device())?);
        }
        let grid = TokenGrid::new(&[self.vocab.words.ids(tokens)]);
        Ok(self.encode_grid(&grid)?.0.squeeze(0)?)
    }

    /// `(U, H)` mean projected word vectors of each label in `set`.
    pub(crate) fn label_table(&self, set: &LabelSet) -> Result<Tensor> {
        let rows: Vec<Vec<u32>> = set
            .labels
            .iter()
            .map(|l| self.vocab.words.ids(&RuleTokenizer.tokenize(l)))
            .collect();
        let (ids, mask) = self.grid_tensors(&TokenGrid::new(&rows))?;
        self.words.mean(&ids, &mask)
    }

    /// Mean projected word vector of a label's tokens; zero for an empty label.
    pub fn label_embedding(&self, label: &str) -> Result<Tensor> {
        let mut set = LabelSet::default();
        let id = set.id(label);
        Ok(self.label_table(&set)?.get(id as usize)?)
    }

    /// Input embedding of `event` as seen against `graph` (the graph before
    /// the event): `[type; source label; destination label; event label]`,
    /// with the segments of arguments the kind does not carry left at zero.
    pub fn embed_event(&self, event: &GraphEvent, graph: &BeliefGraph) -> Result<Tensor> {
        let mut labels = LabelSet::default();
        let row = event_row(event, graph, &mut labels)?;
        let table = self.label_table(&labels)?;
        Ok(self.events.forward(&[row], &table)?.squeeze(0)?)
    }

    fn temporal(&self, times: &[Timestamp]) -> Result<Tensor> {
        let enc = &self.config.encoding;
        let data = times.iter().flat_map(|&t| temporal_embedding(t, enc)).collect();
        self.tensor(data, &[times.len(), enc.h_temp])
    }

    fn attributes(&self, table: &Tensor, labels: &[u32], times: &[Timestamp]) -> Result<Tensor> {
        if labels.is_empty() {
            return Ok(Tensor::zeros(
                (0, self.config.encoding.attr_dim()),
                self.dtype(),
                self.device(),
            )?);
        }
        let ids = Tensor::new(labels, self.device())?;
        Ok(Tensor::cat(&[table.index_select(&ids, 0)?, self.temporal(times)?], 1)?)
    }

    /// Node and edge attribute rows `[label embedding; temporal embedding]`.
    pub fn build_attribute_matrices(&self, graph: &BeliefGraph) -> Result<AttributeMatrices> {
        let mut labels = LabelSet::default();
        let mut union = GraphUnion::default();
        union.push(graph, &mut labels);
        let table = self.label_table(&labels)?;
        Ok(AttributeMatrices {
            nodes: self.attributes(&table, &union.node_labels, &union.node_times)?,
            edges: self.attributes(&table, &union.edge_labels, &union.edge_times)?,
            index: union.edges,
        })
    }

    /// Node embeddings `(N, H)`.
    pub fn encode_graph(&self, attrs: &AttributeMatrices) -> Result<Tensor> {
        self.graph.forward(&attrs.nodes, &attrs.edges, &attrs.index)
    }

    /// Text-to-graph and graph-to-text aggregation for one text `(L, H)` and
    /// one graph `(N, H)`.
    pub fn coattend(&self, text: &Tensor, graph: &Tensor) -> Result<(Tensor, Tensor)> {
        let h = self.config.encoding.h;
        let (l, n) = (text.dim(0)?, graph.dim(0)?);
        let pad = |t: &Tensor, len: usize| -> Result<(Tensor, Tensor)> {
            let width = len.max(1);
            let padded = if len == 0 {
                Tensor::zeros((1, h), self.dtype(), self.device())?
            } else {
                t.clone()
            };
            let mask = self.tensor(
                (0..width).map(|i| if i < len { 1.0 } else { 0.0 }).collect(),
                &[1, width],
            )?;
            Ok((padded.unsqueeze(0)?, mask))
        };
        let (t, tm) = pad(text, l)?;
        let (g, gm) = pad(graph, n)?;
        let (tg, gt) = self.aggregate.coattend(&t, &tm, &g, &gm)?;
        Ok((tg.squeeze(0)?.narrow(0, 0, l)?, gt.squeeze(0)?.narrow(0, 0, n)?))
    }

    pub(crate) fn decode(&self, text: &TextStates, inputs: &DecodeInputs) -> Result<Decoded> {
        let h = self.config.encoding.h;
        let table = self.label_table(&inputs.labels)?;
        let union = &inputs.graphs;
        let node_attrs = self.attributes(&table, &union.node_labels, &union.node_times)?;
        let edge_attrs = self.attributes(&table, &union.edge_labels, &union.edge_times)?;
        let node_emb = self.graph.forward(&node_attrs, &edge_attrs, &union.edges)?;

        let total = union.node_labels.len() as u32;
        let sizes: Vec<usize> = union.sizes().collect();
        let s = inputs.snapshots.len();
        let nmax = sizes.iter().copied().max().unwrap_or(0).max(1);
        let mut gather = Vec::with_capacity(s * nmax);
        let mut node_mask = Vec::with_capacity(s * nmax);
        for (snap, &size) in sizes.iter().enumerate() {
            let offset = union.offsets[snap] as u32;
            for j in 0..nmax {
                let real = j < size;
                gather.push(if real { offset + j as u32 } else { total });
                node_mask.push(if real { 1.0 } else { 0.0 });
            }
        }
        let table_rows = Tensor::cat(&[node_emb, Tensor::zeros((1, h), self.dtype(), self.device())?], 0)?;
        let nodes = table_rows
            .index_select(&Tensor::new(gather.as_slice(), self.device())?, 0)?
            .reshape((s, nmax, h))?;
        let node_mask = self.tensor(node_mask, &[s, nmax])?;

        let example: Vec<u32> = inputs.snapshots.iter().map(|&(b, _)| b as u32).collect();
        let example = Tensor::new(example.as_slice(), self.device())?;
        let obs = text.obs.index_select(&example, 0)?;
        let obs_mask = text.obs_mask.index_select(&example, 0)?;
        let action = text.action.index_select(&example, 0)?;
        let action_mask = text.action_mask.index_select(&example, 0)?;
        let (og, go) = self.aggregate.coattend(&obs, &obs_mask, &nodes, &node_mask)?;
        let (ag, ga) = self.aggregate.coattend(&action, &action_mask, &nodes, &node_mask)?;

        let b = inputs.events.len();
        let pmax = inputs.events.iter().map(Vec::len).max().unwrap_or(0).max(1);
        let mut rows = Vec::with_capacity(b * pmax);
        let mut event_mask = Vec::with_capacity(b * pmax);
        for seq in &inputs.events {
            for p in 0..pmax {
                rows.push(seq.get(p).copied().unwrap_or_default());
                event_mask.push(if p < seq.len() { 1.0 } else { 0.0 });
            }
        }
        let event_dim = self.config.encoding.event_dim();
        let embedded = self.events.forward(&rows, &table)?.reshape((b, pmax, event_dim))?;
        let event_mask = self.tensor(event_mask, &[b, pmax])?;
        let x = self.decoder.self_attend(&embedded, &event_mask)?;
        let at: Vec<u32> = inputs.snapshots.iter().map(|&(b, p)| (b * pmax + p) as u32).collect();
        let queries = x
            .reshape((b * pmax, h))?
            .index_select(&Tensor::new(at.as_slice(), self.device())?, 0)?
            .unsqueeze(1)?;
        let memories = [
            (og, obs_mask),
            (go, node_mask.clone()),
            (ag, action_mask),
            (ga, node_mask.clone()),
        ];
        let hidden = self.decoder.cross_attend(&queries, &memories)?.squeeze(1)?;
        Ok(Decoded {
            hidden,
            nodes,
            node_mask,
        })
    }

    /// Teacher-forced head scores for every target position of `batch`.
    ///
    /// Position `p` of an example sees input events `0..=p`, the belief graph
    /// after applying target events `1..=p`, and the ground-truth arguments of
    /// event `p + 1` chained through the heads.
    pub fn teacher_forward(&self, batch: &Batch) -> Result<TeacherOutputs> {
        let mut inputs = DecodeInputs::default();
        let mut targets = SnapshotTargets::default();
        for (b, dp) in batch.datapoints.iter().enumerate() {
            let mut graph = dp.prior_graph()?;
            let mut rows = Vec::with_capacity(dp.target_len());
            for p in 0..dp.target_len() {
                let input = &dp.target_events[p];
                rows.push(event_row(input, &graph, &mut inputs.labels)?);
                graph.apply(input, ApplyMode::Strict)?;
                inputs.graphs.push(&graph, &mut inputs.labels);
                inputs.snapshots.push((b, p));
                let next = &dp.target_events[p + 1];
                let mask = next.kind.mask();
                let node = |i: Option<usize>| -> Result<u32> {
                    match i {
                        Some(i) if i < graph.node_count() => Ok(i as u32),
                        Some(i) => Err(Error::Invalid(format!(
                            "target node {i} outside a graph of {} nodes",
                            graph.node_count()
                        ))),
                        None => Ok(0),
                    }
                };
                targets.kinds.push(next.kind.id() as u32);
                targets.src.push(if mask.src { node(next.src)? } else { 0 });
                targets.dst.push(if mask.dst { node(next.dst)? } else { 0 });
                targets.labels.push(match (&next.label, mask.label) {
                    (Some(l), true) => self.vocab.labels.id(l),
                    _ => 0,
                });
                targets.src_active.push(mask.src);
                targets.dst_active.push(mask.dst);
                targets.label_active.push(mask.label);
            }
            inputs.events.push(rows);
        }
        if inputs.snapshots.is_empty() {
            return Err(Error::Invalid("batch has no target positions".into()));
        }
        let text = self.encode_texts(&batch.obs, &batch.action)?;
        let decoded = self.decode(&text, &inputs)?;
        let h = &decoded.hidden;
        let type_logits = self.type_head.logits(h)?;
        let auto = self.type_head.auto(h, &targets.kinds)?;
        let src_keys = self.src_head.keys(&decoded.nodes)?;
        let src_logits = self.src_head.logits(&src_keys, &auto)?;
        let auto = self.src_head.update(
            &auto,
            &src_keys,
            &decoded.node_mask,
            &targets.src,
            &indicator(&targets.src_active, h)?,
        )?;
        let dst_keys = self.dst_head.keys(&decoded.nodes)?;
        let dst_logits = self.dst_head.logits(&dst_keys, &auto)?;
        let auto = self.dst_head.update(
            &auto,
            &dst_keys,
            &decoded.node_mask,
            &targets.dst,
            &indicator(&targets.dst_active, h)?,
        )?;
        let label_logits = self.label_head.logits(&auto)?;
        Ok(TeacherOutputs {
            type_logits,
            src_logits,
            dst_logits,
            node_mask: decoded.node_mask,
            label_logits,
            targets,
        })
    }
}
