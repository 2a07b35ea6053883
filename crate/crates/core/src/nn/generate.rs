use candle_core::Tensor;
use serde::Serialize;

use super::decoder::EventRow;
use super::heads::NodeHead;
use super::layers::masked_softmax;
use super::model::{event_row, DecodeInputs, Model, TextStates};
use crate::data::{TokenGrid, UNK};
use crate::error::Result;
use crate::graph::{ApplyMode, BeliefGraph, EventKind, GraphEvent, Timestamp};

/// One decoding step: the chosen event and the distributions it came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepTrace {
    pub event: GraphEvent,
    pub type_probs: Vec<f64>,
    pub src_probs: Option<Vec<f64>>,
    pub dst_probs: Option<Vec<f64>>,
    pub label_probs: Option<Vec<f64>>,
}

fn argmax(probs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = i;
        }
    }
    best
}

fn row(t: &Tensor) -> Result<Vec<f64>> {
    Ok(t.squeeze(0)?.to_dtype(candle_core::DType::F64)?.to_vec1()?)
}

impl Model {
    /// Greedily decodes the events of one game step and applies them to
    /// `graph`. Returns the events without the `start` and `end` markers.
    ///
    /// Decoding is constrained: `start` is never produced, node-referencing
    /// kinds are excluded while the graph is empty, the unknown label is never
    /// chosen, and `end` is forced once `max_events` events exist.
    pub fn generate_events(
        &self,
        obs_tokens: &[String],
        action_tokens: &[String],
        graph: &mut BeliefGraph,
        game_step: u32,
        max_events: usize,
    ) -> Result<Vec<GraphEvent>> {
        let trace = self.generate_trace(obs_tokens, action_tokens, graph, game_step, max_events)?;
        Ok(trace
            .into_iter()
            .map(|s| s.event)
            .filter(|e| !e.kind.is_marker())
            .collect())
    }

    /// Like [`Model::generate_events`] but keeps every step, including the
    /// final `end`, with its distributions.
    pub fn generate_trace(
        &self,
        obs_tokens: &[String],
        action_tokens: &[String],
        graph: &mut BeliefGraph,
        game_step: u32,
        max_events: usize,
    ) -> Result<Vec<StepTrace>> {
        let text = self.encode_pair(obs_tokens, action_tokens)?;
        let mut inputs = DecodeInputs::default();
        let start = GraphEvent::start(Timestamp::new(game_step, 0));
        let mut rows = vec![event_row(&start, graph, &mut inputs.labels)?];
        let mut trace = Vec::new();
        loop {
            let produced = rows.len() - 1;
            let allow = |k: EventKind| match k {
                EventKind::Start => false,
                EventKind::End => true,
                _ if produced >= max_events => false,
                _ => !(k.requires_nodes() && graph.node_count() == 0),
            };
            let step = self.step(&text, &mut inputs, &rows, graph, game_step, &allow, None)?;
            if step.event.kind == EventKind::End {
                trace.push(step);
                break;
            }
            rows.push(event_row(&step.event, graph, &mut inputs.labels)?);
            graph.apply(&step.event, ApplyMode::Lenient)?;
            trace.push(step);
        }
        Ok(trace)
    }

    /// The first decoding step of a game step with its kind fixed to `kind`,
    /// bypassing the kind constraints. Argument heads run exactly when the
    /// kind carries that argument.
    pub fn decode_step(
        &self,
        obs_tokens: &[String],
        action_tokens: &[String],
        graph: &BeliefGraph,
        game_step: u32,
        kind: EventKind,
    ) -> Result<StepTrace> {
        let text = self.encode_pair(obs_tokens, action_tokens)?;
        let mut inputs = DecodeInputs::default();
        let start = GraphEvent::start(Timestamp::new(game_step, 0));
        let rows = vec![event_row(&start, graph, &mut inputs.labels)?];
        self.step(&text, &mut inputs, &rows, graph, game_step, &|_| true, Some(kind))
    }

    fn encode_pair(&self, obs_tokens: &[String], action_tokens: &[String]) -> Result<TextStates> {
        let obs = TokenGrid::new(&[self.vocab().words.ids(obs_tokens)]);
        let action = TokenGrid::new(&[self.vocab().words.ids(action_tokens)]);
        self.encode_texts(&obs, &action)
    }

    #[allow(clippy::too_many_arguments)]
    fn step(
        &self,
        text: &TextStates,
        inputs: &mut DecodeInputs,
        rows: &[EventRow],
        graph: &BeliefGraph,
        game_step: u32,
        allow: &dyn Fn(EventKind) -> bool,
        forced: Option<EventKind>,
    ) -> Result<StepTrace> {
        let produced = rows.len() - 1;
        inputs.events = vec![rows.to_vec()];
        inputs.snapshots = vec![(0, produced)];
        inputs.graphs = Default::default();
        inputs.graphs.push(graph, &mut inputs.labels);
        let decoded = self.decode(text, inputs)?;
        let h = &decoded.hidden;

        let allowed: Vec<f64> = EventKind::ALL
            .iter()
            .map(|&k| if allow(k) { 1.0 } else { 0.0 })
            .collect();
        let allowed = Tensor::from_vec(allowed, (1, EventKind::ALL.len()), self.device())?.to_dtype(self.dtype())?;
        let type_probs = row(&masked_softmax(&self.type_head.logits(h)?, &allowed, 1)?)?;
        let kind = forced.unwrap_or(EventKind::ALL[argmax(&type_probs)]);
        let ts = Timestamp::new(game_step, produced as u32 + 1);
        let mut step = StepTrace {
            event: GraphEvent::end(ts),
            type_probs,
            src_probs: None,
            dst_probs: None,
            label_probs: None,
        };
        if kind == EventKind::End {
            return Ok(step);
        }

        let mask = kind.mask();
        let mut auto = self.type_head.auto(h, &[kind.id() as u32])?;
        let active = Tensor::ones(1, self.dtype(), self.device())?;
        let pick = |head: &NodeHead, auto: &mut Tensor| -> Result<(usize, Vec<f64>)> {
            let keys = head.keys(&decoded.nodes)?;
            let probs = row(&masked_softmax(&head.logits(&keys, auto)?, &decoded.node_mask, 1)?)?;
            let chosen = argmax(&probs);
            *auto = head.update(auto, &keys, &decoded.node_mask, &[chosen as u32], &active)?;
            Ok((chosen, probs))
        };
        let mut src = None;
        let mut dst = None;
        if mask.src {
            let (i, probs) = pick(&self.src_head, &mut auto)?;
            src = Some(i);
            step.src_probs = Some(probs);
        }
        if mask.dst {
            let (i, probs) = pick(&self.dst_head, &mut auto)?;
            dst = Some(i);
            step.dst_probs = Some(probs);
        }
        let mut label = None;
        if mask.label {
            let labels = self.vocab().labels.len();
            let unk = self.vocab().labels.id(UNK);
            let keep: Vec<f64> = (0..labels).map(|i| if i as u32 == unk { 0.0 } else { 1.0 }).collect();
            let keep = Tensor::from_vec(keep, (1, labels), self.device())?.to_dtype(self.dtype())?;
            let probs = row(&masked_softmax(&self.label_head.logits(&auto)?, &keep, 1)?)?;
            label = self.vocab().labels.entry(argmax(&probs) as u32).map(str::to_string);
            step.label_probs = Some(probs);
        }
        step.event = GraphEvent {
            kind,
            src,
            dst,
            label,
            ts,
        };
        Ok(step)
    }
}
