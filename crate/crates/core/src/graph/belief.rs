use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{EventKind, GraphError, GraphEvent, RdfTriple, Timestamp};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Node {
    pub label: String,
    pub added_at: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub label: String,
    pub added_at: Timestamp,
}

/// How [`BeliefGraph::apply`] treats events that cannot be applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ApplyMode {
    /// Dangling indices, duplicate edges and missing edges are errors.
    #[default]
    Strict,
    /// Inapplicable events leave the graph unchanged.
    Lenient,
}

/// Outcome of applying a single event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Applied {
    Changed,
    /// Start/end marker; structure untouched.
    Marker,
    /// Lenient mode skipped an inapplicable event.
    Skipped,
}

/// Directed, labeled belief graph with per-element insertion timestamps.
///
/// Node indices are always `0..len`. Deleting node `i` drops its incident edges
/// and shifts every higher index down by one. At most one edge exists per
/// ordered `(src, dst)` pair; self-loops are allowed.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BeliefGraph {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
}

impl BeliefGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn label(&self, node: usize) -> Option<&str> {
        self.nodes.get(node).map(|n| n.label.as_str())
    }

    /// Index into `edges()` of the edge `src -> dst`, if any.
    pub fn find_edge(&self, src: usize, dst: usize) -> Option<usize> {
        self.edges.iter().position(|e| e.src == src && e.dst == dst)
    }

    /// Number of edges touching `node` (a self-loop counts once).
    pub fn degree(&self, node: usize) -> usize {
        self.edges.iter().filter(|e| e.src == node || e.dst == node).count()
    }

    pub fn incident_edges(&self, node: usize) -> impl Iterator<Item = &Edge> + '_ {
        self.edges.iter().filter(move |e| e.src == node || e.dst == node)
    }

    /// Node indices carrying `label`, in index order.
    pub fn nodes_labeled<'a>(&'a self, label: &'a str) -> impl Iterator<Item = usize> + 'a {
        self.nodes
            .iter()
            .enumerate()
            .filter(move |(_, n)| n.label == label)
            .map(|(i, _)| i)
    }

    /// Applies one event in place.
    pub fn apply(&mut self, event: &GraphEvent, mode: ApplyMode) -> Result<Applied, GraphError> {
        event.validate()?;
        let outcome = self.try_apply(event);
        match (outcome, mode) {
            (Ok(applied), _) => Ok(applied),
            (Err(_), ApplyMode::Lenient) => Ok(Applied::Skipped),
            (Err(err), ApplyMode::Strict) => Err(err),
        }
    }

    fn try_apply(&mut self, event: &GraphEvent) -> Result<Applied, GraphError> {
        let ts = event.ts;
        match event.kind {
            EventKind::Start | EventKind::End => Ok(Applied::Marker),
            EventKind::NodeAdd => {
                self.nodes.push(Node {
                    label: event.label.clone().expect("validated"),
                    added_at: ts,
                });
                Ok(Applied::Changed)
            }
            EventKind::NodeDelete => {
                let node = self.check_index(event.src.expect("validated"))?;
                self.remove_node(node);
                Ok(Applied::Changed)
            }
            EventKind::EdgeAdd => {
                let src = self.check_index(event.src.expect("validated"))?;
                let dst = self.check_index(event.dst.expect("validated"))?;
                if self.find_edge(src, dst).is_some() {
                    return Err(GraphError::DuplicateEdge { src, dst });
                }
                self.edges.push(Edge {
                    src,
                    dst,
                    label: event.label.clone().expect("validated"),
                    added_at: ts,
                });
                Ok(Applied::Changed)
            }
            EventKind::EdgeDelete => {
                let src = self.check_index(event.src.expect("validated"))?;
                let dst = self.check_index(event.dst.expect("validated"))?;
                let pos = self.find_edge(src, dst).ok_or(GraphError::MissingEdge { src, dst })?;
                self.edges.remove(pos);
                Ok(Applied::Changed)
            }
        }
    }

    fn check_index(&self, index: usize) -> Result<usize, GraphError> {
        if index < self.nodes.len() {
            Ok(index)
        } else {
            Err(GraphError::DanglingIndex {
                index,
                len: self.nodes.len(),
            })
        }
    }

    fn remove_node(&mut self, node: usize) {
        self.nodes.remove(node);
        self.edges.retain(|e| e.src != node && e.dst != node);
        for e in &mut self.edges {
            if e.src > node {
                e.src -= 1;
            }
            if e.dst > node {
                e.dst -= 1;
            }
        }
    }

    /// Replays `events` on an empty graph.
    pub fn replay<'a>(events: impl IntoIterator<Item = &'a GraphEvent>, mode: ApplyMode) -> Result<Self, GraphError> {
        let mut graph = Self::new();
        for ev in events {
            graph.apply(ev, mode)?;
        }
        Ok(graph)
    }

    /// One RDF triple per edge, using current node labels; label-level
    /// duplicates collapse.
    pub fn triples(&self) -> BTreeSet<RdfTriple> {
        self.edges
            .iter()
            .map(|e| RdfTriple {
                subject: self.nodes[e.src].label.clone(),
                object: self.nodes[e.dst].label.clone(),
                relation: e.label.clone(),
            })
            .collect()
    }

    /// Builds a graph from raw parts, checking that edge endpoints are in range
    /// and that no ordered pair is repeated.
    pub fn from_parts(nodes: Vec<Node>, edges: Vec<Edge>) -> Result<Self, GraphError> {
        let mut graph = Self {
            nodes,
            edges: Vec::with_capacity(edges.len()),
        };
        for e in edges {
            graph.check_index(e.src)?;
            graph.check_index(e.dst)?;
            if graph.find_edge(e.src, e.dst).is_some() {
                return Err(GraphError::DuplicateEdge { src: e.src, dst: e.dst });
            }
            graph.edges.push(e);
        }
        Ok(graph)
    }
}

/// Functional form of [`BeliefGraph::apply`].
pub fn apply_event(graph: &BeliefGraph, event: &GraphEvent, mode: ApplyMode) -> Result<BeliefGraph, GraphError> {
    let mut next = graph.clone();
    next.apply(event, mode)?;
    Ok(next)
}

/// Triples of the graph's edges, as a set.
pub fn extract_triples(graph: &BeliefGraph) -> BTreeSet<RdfTriple> {
    graph.triples()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts(g: u32, e: u32) -> Timestamp {
        Timestamp::new(g, e)
    }

    fn abc_with_edge() -> BeliefGraph {
        BeliefGraph::replay(
            &[
                GraphEvent::node_add("a", ts(0, 0)),
                GraphEvent::node_add("b", ts(0, 1)),
                GraphEvent::node_add("c", ts(0, 2)),
                GraphEvent::edge_add(0, 2, "r", ts(0, 3)),
            ],
            ApplyMode::Strict,
        )
        .unwrap()
    }

    #[test]
    fn node_add_on_empty_graph() {
        let g = apply_event(
            &BeliefGraph::new(),
            &GraphEvent::node_add("apple", ts(1, 0)),
            ApplyMode::Strict,
        )
        .unwrap();
        assert_eq!(g.node_count(), 1);
        assert_eq!(g.label(0), Some("apple"));
        assert_eq!(g.nodes()[0].added_at, ts(1, 0));
    }

    #[test]
    fn markers_leave_graph_untouched() {
        let g = abc_with_edge();
        for ev in [GraphEvent::start(ts(5, 0)), GraphEvent::end(ts(5, 3))] {
            assert_eq!(apply_event(&g, &ev, ApplyMode::Strict).unwrap(), g);
        }
    }

    // Oracle: rebuild from label/edge lists with the deleted node filtered out.
    fn rebuild_without(g: &BeliefGraph, removed: usize) -> BeliefGraph {
        let keep: Vec<usize> = (0..g.node_count()).filter(|&i| i != removed).collect();
        let new_index = |old: usize| keep.iter().position(|&k| k == old);
        let nodes = keep.iter().map(|&i| g.nodes()[i].clone()).collect();
        let edges = g
            .edges()
            .iter()
            .filter_map(|e| {
                Some(Edge {
                    src: new_index(e.src)?,
                    dst: new_index(e.dst)?,
                    ..e.clone()
                })
            })
            .collect();
        BeliefGraph::from_parts(nodes, edges).unwrap()
    }

    #[test]
    fn node_delete_compacts_indices() {
        let g = abc_with_edge();
        let after = apply_event(&g, &GraphEvent::node_delete(1, ts(1, 0)), ApplyMode::Strict).unwrap();
        assert_eq!(after.label(0), Some("a"));
        assert_eq!(after.label(1), Some("c"));
        assert_eq!(after.edges().len(), 1);
        assert_eq!((after.edges()[0].src, after.edges()[0].dst), (0, 1));
        assert_eq!(after, rebuild_without(&g, 1));
    }

    #[test]
    fn node_delete_cascades_incident_edges() {
        let g = abc_with_edge();
        let after = apply_event(&g, &GraphEvent::node_delete(2, ts(1, 0)), ApplyMode::Strict).unwrap();
        assert_eq!(after.edge_count(), 0);
        assert_eq!(after, rebuild_without(&g, 2));
    }

    #[test]
    fn strict_errors() {
        let g = abc_with_edge();
        let dangling = GraphEvent::node_delete(3, ts(1, 0));
        assert_eq!(
            apply_event(&g, &dangling, ApplyMode::Strict),
            Err(GraphError::DanglingIndex { index: 3, len: 3 })
        );
        let dup = GraphEvent::edge_add(0, 2, "other", ts(1, 0));
        assert_eq!(
            apply_event(&g, &dup, ApplyMode::Strict),
            Err(GraphError::DuplicateEdge { src: 0, dst: 2 })
        );
        let missing = GraphEvent::edge_delete(1, 2, ts(1, 0));
        assert_eq!(
            apply_event(&g, &missing, ApplyMode::Strict),
            Err(GraphError::MissingEdge { src: 1, dst: 2 })
        );
    }

    #[test]
    fn lenient_skips_inapplicable_events() {
        let mut g = abc_with_edge();
        let before = g.clone();
        for ev in [
            GraphEvent::node_delete(9, ts(1, 0)),
            GraphEvent::edge_add(0, 2, "r", ts(1, 1)),
            GraphEvent::edge_delete(2, 0, ts(1, 2)),
        ] {
            assert_eq!(g.apply(&ev, ApplyMode::Lenient), Ok(Applied::Skipped));
        }
        assert_eq!(g, before);
    }

    #[test]
    fn malformed_events_fail_in_both_modes() {
        let mut g = abc_with_edge();
        let mut ev = GraphEvent::node_delete(0, ts(1, 0));
        ev.label = Some("x".into());
        assert!(g.apply(&ev, ApplyMode::Lenient).is_err());
        assert!(g.apply(&ev, ApplyMode::Strict).is_err());
    }

    #[test]
    fn self_loops_allowed() {
        let mut g = abc_with_edge();
        g.apply(&GraphEvent::edge_add(1, 1, "near", ts(1, 0)), ApplyMode::Strict)
            .unwrap();
        assert_eq!(g.degree(1), 1);
    }

    #[test]
    fn triples_collapse_label_duplicates() {
        assert!(BeliefGraph::new().triples().is_empty());
        let g = BeliefGraph::replay(
            &[
                GraphEvent::node_add("apple", ts(0, 0)),
                GraphEvent::node_add("table", ts(0, 1)),
                GraphEvent::edge_add(0, 1, "on", ts(0, 2)),
                GraphEvent::node_add("apple", ts(0, 3)),
                GraphEvent::edge_add(2, 1, "on", ts(0, 4)),
            ],
            ApplyMode::Strict,
        )
        .unwrap();
        let triples = g.triples();
        assert_eq!(triples.len(), 1);
        assert!(triples.contains(&RdfTriple::new("apple", "table", "on")));
    }
}
