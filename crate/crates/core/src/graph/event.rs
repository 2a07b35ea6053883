use std::fmt;

use serde::{Deserialize, Serialize};

use super::GraphError;

/// Two-dimensional timestamp: the game step and the event step inside it.
///
/// Ordering is lexicographic on `(game_step, event_step)`, which is a strict
/// total order over the events of one trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct Timestamp {
    pub game_step: u32,
    pub event_step: u32,
}

impl Timestamp {
    pub const fn new(game_step: u32, event_step: u32) -> Self {
        Self { game_step, event_step }
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.game_step, self.event_step)
    }
}

/// Kind of a graph event.
///
/// The discriminants are the ids used by the event-type head and stored in
/// checkpoints; `End` and `Start` are pinned to 0 and 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    End = 0,
    Start = 1,
    NodeAdd = 2,
    NodeDelete = 3,
    EdgeAdd = 4,
    EdgeDelete = 5,
}

/// Which arguments an event kind carries.
///
/// This one table drives argument validation, event-embedding masking, loss
/// masking and constrained decoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ArgMask {
    pub src: bool,
    pub dst: bool,
    pub label: bool,
}

impl EventKind {
    pub const COUNT: usize = 6;
    pub const ALL: [EventKind; 6] = [
        EventKind::End,
        EventKind::Start,
        EventKind::NodeAdd,
        EventKind::NodeDelete,
        EventKind::EdgeAdd,
        EventKind::EdgeDelete,
    ];

    pub fn id(self) -> usize {
        self as usize
    }

    pub fn from_id(id: usize) -> Option<Self> {
        Self::ALL.get(id).copied()
    }

    pub const fn mask(self) -> ArgMask {
        match self {
            EventKind::End | EventKind::Start => ArgMask {
                src: false,
                dst: false,
                label: false,
            },
            EventKind::NodeAdd => ArgMask {
                src: false,
                dst: false,
                label: true,
            },
            EventKind::NodeDelete => ArgMask {
                src: true,
                dst: false,
                label: false,
            },
            EventKind::EdgeAdd => ArgMask {
                src: true,
                dst: true,
                label: true,
            },
            EventKind::EdgeDelete => ArgMask {
                src: true,
                dst: true,
                label: false,
            },
        }
    }

    /// True when the kind selects at least one existing node.
    pub const fn requires_nodes(self) -> bool {
        self.mask().src || self.mask().dst
    }

    pub fn is_marker(self) -> bool {
        matches!(self, EventKind::Start | EventKind::End)
    }

    pub fn name(self) -> &'static str {
        match self {
            EventKind::End => "end",
            EventKind::Start => "start",
            EventKind::NodeAdd => "node-add",
            EventKind::NodeDelete => "node-delete",
            EventKind::EdgeAdd => "edge-add",
            EventKind::EdgeDelete => "edge-delete",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One timestamped, discrete graph update (or a start/end marker).
///
/// Node indices refer to positions in the belief graph immediately before the
/// event is applied.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GraphEvent {
    pub kind: EventKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub src: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dst: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub ts: Timestamp,
}

impl GraphEvent {
    pub fn start(ts: Timestamp) -> Self {
        Self::bare(EventKind::Start, ts)
    }

    pub fn end(ts: Timestamp) -> Self {
        Self::bare(EventKind::End, ts)
    }

    pub fn node_add(label: impl Into<String>, ts: Timestamp) -> Self {
        Self {
            label: Some(label.into()),
            ..Self::bare(EventKind::NodeAdd, ts)
        }
    }

    pub fn node_delete(node: usize, ts: Timestamp) -> Self {
        Self {
            src: Some(node),
            ..Self::bare(EventKind::NodeDelete, ts)
        }
    }

    pub fn edge_add(src: usize, dst: usize, label: impl Into<String>, ts: Timestamp) -> Self {
        Self {
            src: Some(src),
            dst: Some(dst),
            label: Some(label.into()),
            ..Self::bare(EventKind::EdgeAdd, ts)
        }
    }

    pub fn edge_delete(src: usize, dst: usize, ts: Timestamp) -> Self {
        Self {
            src: Some(src),
            dst: Some(dst),
            ..Self::bare(EventKind::EdgeDelete, ts)
        }
    }

    fn bare(kind: EventKind, ts: Timestamp) -> Self {
        Self {
            kind,
            src: None,
            dst: None,
            label: None,
            ts,
        }
    }

    /// Checks argument presence against the mask table.
    pub fn validate(&self) -> Result<(), GraphError> {
        let mask = self.kind.mask();
        let check = |present: bool, wanted: bool, arg: &'static str| {
            if present == wanted {
                Ok(())
            } else {
                Err(GraphError::Malformed {
                    kind: self.kind,
                    arg,
                    expected: wanted,
                })
            }
        };
        check(self.src.is_some(), mask.src, "src")?;
        check(self.dst.is_some(), mask.dst, "dst")?;
        check(self.label.is_some(), mask.label, "label")?;
        if let Some(label) = &self.label {
            if label.trim().is_empty() {
                return Err(GraphError::EmptyLabel);
            }
        }
        Ok(())
    }
}

impl fmt::Display for GraphEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind)?;
        let mut args = Vec::new();
        if let Some(s) = self.src {
            args.push(s.to_string());
        }
        if let Some(d) = self.dst {
            args.push(d.to_string());
        }
        if let Some(l) = &self.label {
            args.push(format!("{l:?}"));
        }
        if !args.is_empty() {
            write!(f, "({})", args.join(", "))?;
        }
        write!(f, " @ {}", self.ts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn marker_ids_are_pinned() {
        assert_eq!(EventKind::End.id(), 0);
        assert_eq!(EventKind::Start.id(), 1);
        for kind in EventKind::ALL {
            assert_eq!(EventKind::from_id(kind.id()), Some(kind));
        }
        assert_eq!(EventKind::from_id(6), None);
    }

    #[test]
    fn constructors_satisfy_mask_table() {
        let ts = Timestamp::new(0, 0);
        for ev in [
            GraphEvent::start(ts),
            GraphEvent::end(ts),
            GraphEvent::node_add("apple", ts),
            GraphEvent::node_delete(0, ts),
            GraphEvent::edge_add(0, 1, "on", ts),
            GraphEvent::edge_delete(0, 1, ts),
        ] {
            ev.validate().unwrap();
        }
    }

    #[test]
    fn malformed_arguments_rejected() {
        let ts = Timestamp::new(0, 0);
        let mut ev = GraphEvent::node_add("apple", ts);
        ev.src = Some(3);
        assert!(matches!(ev.validate(), Err(GraphError::Malformed { arg: "src", .. })));
        let mut ev = GraphEvent::edge_add(0, 1, "on", ts);
        ev.label = None;
        assert!(ev.validate().is_err());
        assert!(GraphEvent::node_add("  ", ts).validate().is_err());
    }

    #[test]
    fn timestamp_order_is_lexicographic() {
        assert!(Timestamp::new(0, 9) < Timestamp::new(1, 0));
        assert!(Timestamp::new(1, 0) < Timestamp::new(1, 1));
    }

    #[test]
    fn serde_uses_kebab_kinds() {
        let ev = GraphEvent::edge_delete(2, 0, Timestamp::new(3, 1));
        let json = serde_json::to_string(&ev).unwrap();
        assert!(json.contains("\"edge-delete\""));
        let back: GraphEvent = serde_json::from_str(&json).unwrap();
        assert_eq!(back, ev);
    }
}
