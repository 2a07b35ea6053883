//! Timestamped graph events, the belief graph they act on, and conversions to
//! and from label-level update commands and RDF triples.

mod belief;
mod command;
mod convert;
mod event;
mod export;

pub use belief::{apply_event, extract_triples, Applied, ApplyMode, BeliefGraph, Edge, Node};
pub use command::{CommandOp, CommandParseError, RdfTriple, UpdateCommand};
pub use convert::{
    apply_commands, commands_to_events, events_to_commands, merge_colored_nodes, ConversionRules, COLOR_RELATION,
};
pub use event::{ArgMask, EventKind, GraphEvent, Timestamp};
pub use export::{to_dot, EdgeExport, GraphExport, NodeExport};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("{kind} event has {} {arg}", if *.expected { "no" } else { "an unexpected" })]
    Malformed {
        kind: EventKind,
        arg: &'static str,
        expected: bool,
    },
    #[error("event label is empty")]
    EmptyLabel,
    #[error("node index {index} out of range for {len} nodes")]
    DanglingIndex { index: usize, len: usize },
    #[error("edge {src} -> {dst} already exists")]
    DuplicateEdge { src: usize, dst: usize },
    #[error("no edge {src} -> {dst}")]
    MissingEdge { src: usize, dst: usize },
    #[error("cannot resolve command {0} against the graph")]
    UnresolvedCommand(String),
}
