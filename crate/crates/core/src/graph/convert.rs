//! Conversions between label-level update commands and timestamped graph events.
//!
//! Commands name nodes by label only, so turning them into events needs a
//! policy for which existing node a label refers to:
//!
//! * ordinary labels resolve to the existing node with that label, if any;
//! * exit and state labels (`exit`, `closed`, `sliced`, ...) always get a fresh
//!   node per attachment, since a room has several exits and several items can
//!   be sliced at once;
//! * with a color palette configured, `"<color> <item>"` resolves to an `item`
//!   node carrying an `is` edge to a `color` node, and is created as that
//!   three-event pattern when missing.
//!
//! After a delete command, endpoints left without edges are removed with
//! `node-delete` so the belief graph only holds connected entities.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{
    ApplyMode, BeliefGraph, CommandOp, EventKind, GraphError, GraphEvent, RdfTriple, Timestamp, UpdateCommand,
};

/// Relation joining a split item to its color node.
pub const COLOR_RELATION: &str = "is";

/// Label policy used when converting commands to events.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConversionRules {
    pub exit_labels: BTreeSet<String>,
    pub state_labels: BTreeSet<String>,
    /// Color prefixes to split off item labels; `None` disables splitting.
    #[serde(default)]
    pub colors: Option<BTreeSet<String>>,
}

impl Default for ConversionRules {
    fn default() -> Self {
        Self {
            exit_labels: BTreeSet::from(["exit".to_string()]),
            state_labels: BTreeSet::new(),
            colors: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Entity<'l> {
    Plain(&'l str),
    Fresh(&'l str),
    Colored { color: &'l str, item: &'l str },
}

impl ConversionRules {
    pub fn with_states<I, S>(mut self, states: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.state_labels.extend(states.into_iter().map(Into::into));
        self
    }

    pub fn with_colors<I, S>(mut self, colors: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.colors = Some(colors.into_iter().map(Into::into).collect());
        self
    }

    /// Derives the state-label set from the objects of `is` triples.
    pub fn infer_states<'a>(mut self, triples: impl IntoIterator<Item = &'a RdfTriple>) -> Self {
        for t in triples {
            if t.relation == COLOR_RELATION {
                self.state_labels.insert(t.object.clone());
            }
        }
        self
    }

    pub fn is_color(&self, label: &str) -> bool {
        self.colors.as_ref().is_some_and(|c| c.contains(label))
    }

    /// Splits `"<color> <item>"` into `(color, item)` when colors are enabled.
    pub fn split_color<'l>(&self, label: &'l str) -> Option<(&'l str, &'l str)> {
        let colors = self.colors.as_ref()?;
        let (head, tail) = label.split_once(' ')?;
        let tail = tail.trim();
        (colors.contains(head) && !tail.is_empty()).then_some((head, tail))
    }

    /// True when a label always gets its own node.
    pub fn is_fresh(&self, label: &str) -> bool {
        self.exit_labels.contains(label) || self.state_labels.contains(label) || self.is_color(label)
    }

    fn entity<'l>(&self, label: &'l str) -> Entity<'l> {
        if let Some((color, item)) = self.split_color(label) {
            Entity::Colored { color, item }
        } else if self.is_fresh(label) {
            Entity::Fresh(label)
        } else {
            Entity::Plain(label)
        }
    }

    /// Color nodes attached to `node` through an `is` edge, earliest first.
    pub fn color_nodes(&self, graph: &BeliefGraph, node: usize) -> Vec<usize> {
        if self.colors.is_none() {
            return Vec::new();
        }
        let mut found: Vec<usize> = graph
            .edges()
            .iter()
            .filter(|e| {
                e.src == node
                    && e.dst != node
                    && e.label == COLOR_RELATION
                    && self.is_color(&graph.nodes()[e.dst].label)
            })
            .map(|e| e.dst)
            .collect();
        found.sort_by_key(|&i| (graph.nodes()[i].added_at, i));
        found
    }

    fn candidates(&self, graph: &BeliefGraph, entity: Entity<'_>) -> Vec<usize> {
        match entity {
            Entity::Plain(label) => graph
                .nodes_labeled(label)
                .filter(|&i| self.color_nodes(graph, i).is_empty())
                .collect(),
            Entity::Fresh(label) => graph.nodes_labeled(label).collect(),
            Entity::Colored { color, item } => graph
                .nodes_labeled(item)
                .filter(|&i| {
                    self.color_nodes(graph, i)
                        .iter()
                        .any(|&c| graph.nodes()[c].label == color)
                })
                .collect(),
        }
    }

    /// Edge index matching a label-level triple, oldest edge first.
    fn find_triple(&self, graph: &BeliefGraph, n1: &str, n2: &str, r: &str) -> Option<usize> {
        let srcs = self.candidates(graph, self.entity(n1));
        if srcs.is_empty() {
            return None;
        }
        let dsts = self.candidates(graph, self.entity(n2));
        graph
            .edges()
            .iter()
            .position(|e| e.label == r && srcs.contains(&e.src) && dsts.contains(&e.dst))
    }

    /// An orphan has no edges other than its own color attachments.
    fn is_orphan(&self, graph: &BeliefGraph, node: usize) -> bool {
        let colors = self.color_nodes(graph, node);
        graph
            .incident_edges(node)
            .all(|e| e.src == node && e.label == COLOR_RELATION && colors.contains(&e.dst))
    }

    /// Converts one game step's (pre-sorted) commands into events, applying
    /// them to `graph` as it goes. Event steps start at `first_event_step`.
    pub fn commands_to_events(
        &self,
        commands: &[UpdateCommand],
        graph: &mut BeliefGraph,
        game_step: u32,
        first_event_step: u32,
        mode: ApplyMode,
    ) -> Result<Vec<GraphEvent>, GraphError> {
        let mut emitter = Emitter {
            rules: self,
            graph,
            events: Vec::new(),
            game_step,
            next_event_step: first_event_step,
        };
        for command in commands {
            let outcome = match command.op {
                CommandOp::Add => emitter.add(command),
                CommandOp::Delete => emitter.delete(command),
            };
            match (outcome, mode) {
                (Ok(()), _) | (Err(_), ApplyMode::Lenient) => {}
                (Err(err), ApplyMode::Strict) => return Err(err),
            }
        }
        Ok(emitter.events)
    }

    /// Relabels color-split items as `"<color> <item>"`, drops the color nodes
    /// and their `is` edges, then extracts triples.
    pub fn merge_colored_nodes(&self, graph: &BeliefGraph) -> BTreeSet<RdfTriple> {
        if self.colors.is_none() {
            return graph.triples();
        }
        let mut labels: Vec<String> = graph.nodes().iter().map(|n| n.label.clone()).collect();
        let mut dropped = BTreeSet::new();
        for (node, label) in labels.iter_mut().enumerate() {
            let colors = self.color_nodes(graph, node);
            if let Some(&first) = colors.first() {
                *label = format!("{} {}", graph.nodes()[first].label, label);
                dropped.extend(colors);
            }
        }
        graph
            .edges()
            .iter()
            .filter(|e| !dropped.contains(&e.src) && !dropped.contains(&e.dst))
            .map(|e| RdfTriple::new(&labels[e.src], &labels[e.dst], &e.label))
            .collect()
    }
}

struct Emitter<'r, 'g> {
    rules: &'r ConversionRules,
    graph: &'g mut BeliefGraph,
    events: Vec<GraphEvent>,
    game_step: u32,
    next_event_step: u32,
}

impl Emitter<'_, '_> {
    fn ts(&mut self) -> Timestamp {
        let ts = Timestamp::new(self.game_step, self.next_event_step);
        self.next_event_step += 1;
        ts
    }

    fn emit(&mut self, event: GraphEvent) {
        // Events are built against the current graph, so they always apply.
        self.graph
            .apply(&event, ApplyMode::Strict)
            .expect("emitted event must apply");
        self.events.push(event);
    }

    fn node_add(&mut self, label: &str) -> usize {
        let ts = self.ts();
        self.emit(GraphEvent::node_add(label, ts));
        self.graph.node_count() - 1
    }

    fn resolve_or_create(&mut self, label: &str) -> usize {
        let entity = self.rules.entity(label);
        if !matches!(entity, Entity::Fresh(_)) {
            if let Some(&existing) = self.rules.candidates(self.graph, entity).first() {
                return existing;
            }
        }
        match entity {
            Entity::Plain(l) | Entity::Fresh(l) => self.node_add(l),
            Entity::Colored { color, item } => {
                let item_node = self.node_add(item);
                let color_node = self.node_add(color);
                let ts = self.ts();
                self.emit(GraphEvent::edge_add(item_node, color_node, COLOR_RELATION, ts));
                item_node
            }
        }
    }

    fn add(&mut self, c: &UpdateCommand) -> Result<(), GraphError> {
        if self.rules.find_triple(self.graph, &c.n1, &c.n2, &c.r).is_some() {
            return Ok(());
        }
        // Check the pair before creating anything so a rejected command emits nothing.
        let reuses = |label: &str| -> Option<usize> {
            let entity = self.rules.entity(label);
            match entity {
                Entity::Fresh(_) => None,
                _ => self.rules.candidates(self.graph, entity).first().copied(),
            }
        };
        if let (Some(s), Some(d)) = (reuses(&c.n1), reuses(&c.n2)) {
            if self.graph.find_edge(s, d).is_some() {
                return Err(GraphError::DuplicateEdge { src: s, dst: d });
            }
        }
        let src = self.resolve_or_create(&c.n1);
        let dst = self.resolve_or_create(&c.n2);
        let ts = self.ts();
        self.emit(GraphEvent::edge_add(src, dst, &c.r, ts));
        Ok(())
    }

    fn delete(&mut self, c: &UpdateCommand) -> Result<(), GraphError> {
        let edge = self
            .rules
            .find_triple(self.graph, &c.n1, &c.n2, &c.r)
            .ok_or_else(|| GraphError::UnresolvedCommand(c.to_string()))?;
        let (src, dst) = {
            let e = &self.graph.edges()[edge];
            (e.src, e.dst)
        };
        let ts = self.ts();
        self.emit(GraphEvent::edge_delete(src, dst, ts));

        let mut doomed = BTreeSet::new();
        for node in [src, dst] {
            if self.rules.is_orphan(self.graph, node) {
                doomed.insert(node);
                doomed.extend(self.rules.color_nodes(self.graph, node));
            }
        }
        // Highest index first so the remaining indices stay valid.
        for node in doomed.into_iter().rev() {
            let ts = self.ts();
            self.emit(GraphEvent::node_delete(node, ts));
        }
        Ok(())
    }
}

/// Converts commands to events with the given rules, leaving `graph` untouched.
pub fn commands_to_events(
    commands: &[UpdateCommand],
    graph: &BeliefGraph,
    game_step: u32,
    rules: &ConversionRules,
) -> Result<Vec<GraphEvent>, GraphError> {
    let mut scratch = graph.clone();
    rules.commands_to_events(commands, &mut scratch, game_step, 0, ApplyMode::Strict)
}

/// Projects edge events onto label-level commands, reading labels from `graph`
/// as each event is applied. Node events and markers produce nothing.
pub fn events_to_commands(
    events: &[GraphEvent],
    graph: &mut BeliefGraph,
    mode: ApplyMode,
) -> Result<BTreeSet<UpdateCommand>, GraphError> {
    let mut commands = BTreeSet::new();
    for event in events {
        let label_of = |i: Option<usize>| i.and_then(|i| graph.label(i)).map(str::to_string);
        let command = match event.kind {
            EventKind::EdgeAdd => match (label_of(event.src), label_of(event.dst), &event.label) {
                (Some(n1), Some(n2), Some(r)) => Some(UpdateCommand::add(n1, n2, r.clone())),
                _ => None,
            },
            EventKind::EdgeDelete => match (event.src, event.dst) {
                (Some(s), Some(d)) => graph.find_edge(s, d).map(|e| {
                    UpdateCommand::delete(
                        graph.nodes()[s].label.clone(),
                        graph.nodes()[d].label.clone(),
                        graph.edges()[e].label.clone(),
                    )
                }),
                _ => None,
            },
            _ => None,
        };
        graph.apply(event, mode)?;
        commands.extend(command);
    }
    Ok(commands)
}

/// Color-merged triples; identical to [`BeliefGraph::triples`] when the rules
/// carry no palette.
pub fn merge_colored_nodes(graph: &BeliefGraph, rules: &ConversionRules) -> BTreeSet<RdfTriple> {
    rules.merge_colored_nodes(graph)
}

/// Label-level application of commands to a triple set: add inserts, delete
/// removes (and is ignored when absent).
pub fn apply_commands(triples: &mut BTreeSet<RdfTriple>, commands: &[UpdateCommand]) {
    for c in commands {
        match c.op {
            CommandOp::Add => {
                triples.insert(c.triple());
            }
            CommandOp::Delete => {
                triples.remove(&c.triple());
            }
        }
    }
}
