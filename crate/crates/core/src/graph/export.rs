use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{BeliefGraph, Edge, GraphError, Node, Timestamp};

/// Flat JSON form of a belief graph with explicit node ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphExport {
    pub nodes: Vec<NodeExport>,
    pub edges: Vec<EdgeExport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeExport {
    pub id: usize,
    pub label: String,
    pub added_at: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeExport {
    pub src: usize,
    pub dst: usize,
    pub label: String,
    pub added_at: Timestamp,
}

impl From<&BeliefGraph> for GraphExport {
    fn from(graph: &BeliefGraph) -> Self {
        Self {
            nodes: graph
                .nodes()
                .iter()
                .enumerate()
                .map(|(id, n)| NodeExport {
                    id,
                    label: n.label.clone(),
                    added_at: n.added_at,
                })
                .collect(),
            edges: graph
                .edges()
                .iter()
                .map(|e| EdgeExport {
                    src: e.src,
                    dst: e.dst,
                    label: e.label.clone(),
                    added_at: e.added_at,
                })
                .collect(),
        }
    }
}

impl TryFrom<GraphExport> for BeliefGraph {
    type Error = GraphError;

    fn try_from(export: GraphExport) -> Result<Self, Self::Error> {
        let mut nodes = export.nodes;
        nodes.sort_by_key(|n| n.id);
        if let Some(pos) = nodes.iter().enumerate().position(|(i, n)| n.id != i) {
            return Err(GraphError::DanglingIndex {
                index: nodes[pos].id,
                len: nodes.len(),
            });
        }
        BeliefGraph::from_parts(
            nodes
                .into_iter()
                .map(|n| Node {
                    label: n.label,
                    added_at: n.added_at,
                })
                .collect(),
            export
                .edges
                .into_iter()
                .map(|e| Edge {
                    src: e.src,
                    dst: e.dst,
                    label: e.label,
                    added_at: e.added_at,
                })
                .collect(),
        )
    }
}

fn escape(label: &str) -> String {
    label.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Graphviz rendering; nodes are keyed by index so same-label nodes stay apart.
pub fn to_dot(graph: &BeliefGraph) -> String {
    let mut out = String::from("digraph belief {\n");
    for (i, n) in graph.nodes().iter().enumerate() {
        let _ = writeln!(
            out,
            "  n{i} [label=\"{}\", added_at=\"{}\"];",
            escape(&n.label),
            n.added_at
        );
    }
    for e in graph.edges() {
        let _ = writeln!(
            out,
            "  n{} -> n{} [label=\"{}\", added_at=\"{}\"];",
            e.src,
            e.dst,
            escape(&e.label),
            e.added_at
        );
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{ApplyMode, GraphEvent};

    fn two_apples() -> BeliefGraph {
        let ts = |e| Timestamp::new(0, e);
        BeliefGraph::replay(
            &[
                GraphEvent::node_add("apple", ts(0)),
                GraphEvent::node_add("table", ts(1)),
                GraphEvent::edge_add(0, 1, "on", ts(2)),
                GraphEvent::node_add("apple", ts(3)),
                GraphEvent::node_add("chair \"big\"", ts(4)),
                GraphEvent::edge_add(2, 3, "on", ts(5)),
            ],
            ApplyMode::Strict,
        )
        .unwrap()
    }

    #[test]
    fn json_round_trip() {
        let g = two_apples();
        let json = serde_json::to_string(&GraphExport::from(&g)).unwrap();
        let back: GraphExport = serde_json::from_str(&json).unwrap();
        assert_eq!(BeliefGraph::try_from(back).unwrap(), g);
    }

    #[test]
    fn json_rejects_gaps_in_ids() {
        let mut export = GraphExport::from(&two_apples());
        export.nodes[1].id = 7;
        assert!(BeliefGraph::try_from(export).is_err());
    }

    #[test]
    fn dot_keeps_same_label_nodes_distinct() {
        let dot = to_dot(&two_apples());
        assert!(dot.starts_with("digraph belief {"));
        assert!(dot.contains("n0 [label=\"apple\""));
        assert!(dot.contains("n2 [label=\"apple\""));
        assert!(dot.contains("n2 -> n3 [label=\"on\", added_at=\"[0, 5]\"]"));
        assert!(dot.contains("chair \\\"big\\\""));
        assert_eq!(to_dot(&BeliefGraph::new()), "digraph belief {\n}\n");
    }
}
