use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CommandOp {
    Add,
    Delete,
}

impl fmt::Display for CommandOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CommandOp::Add => "add",
            CommandOp::Delete => "delete",
        })
    }
}

/// Label-level graph update command `op(n1, n2, r)`: a directed edge labeled
/// `r` from the node labeled `n1` to the node labeled `n2`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct UpdateCommand {
    pub op: CommandOp,
    pub n1: String,
    pub n2: String,
    pub r: String,
}

impl UpdateCommand {
    pub fn add(n1: impl Into<String>, n2: impl Into<String>, r: impl Into<String>) -> Self {
        Self {
            op: CommandOp::Add,
            n1: n1.into(),
            n2: n2.into(),
            r: r.into(),
        }
    }

    pub fn delete(n1: impl Into<String>, n2: impl Into<String>, r: impl Into<String>) -> Self {
        Self {
            op: CommandOp::Delete,
            ..Self::add(n1, n2, r)
        }
    }

    pub fn triple(&self) -> RdfTriple {
        RdfTriple::new(&self.n1, &self.n2, &self.r)
    }
}

impl fmt::Display for UpdateCommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({}, {}, {})", self.op, self.n1, self.n2, self.r)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed command {input:?}: {reason}")]
pub struct CommandParseError {
    pub input: String,
    pub reason: &'static str,
}

impl FromStr for UpdateCommand {
    type Err = CommandParseError;

    /// Accepts `add ( n1 , n2 , r )` and the comma-delimited `add , n1 , n2 , r`,
    /// with arbitrary surrounding whitespace.
    fn from_str(input: &str) -> Result<Self, Self::Err> {
        let fail = |reason| CommandParseError {
            input: input.to_string(),
            reason,
        };
        let s = input.trim();
        let (op, rest) = if let Some(rest) = s.strip_prefix("add") {
            (CommandOp::Add, rest)
        } else if let Some(rest) = s.strip_prefix("delete") {
            (CommandOp::Delete, rest)
        } else {
            return Err(fail("expected `add` or `delete`"));
        };
        let rest = rest.trim_start();
        let args = if let Some(inner) = rest.strip_prefix('(') {
            inner
                .trim_end()
                .strip_suffix(')')
                .ok_or_else(|| fail("unbalanced parenthesis"))?
        } else if let Some(inner) = rest.strip_prefix(',') {
            inner
        } else {
            return Err(fail("expected `(` or `,` after the operation"));
        };
        let parts: Vec<&str> = args.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(fail("expected exactly three arguments"));
        }
        if parts.iter().any(|p| p.is_empty()) {
            return Err(fail("empty label"));
        }
        Ok(UpdateCommand {
            op,
            n1: parts[0].to_string(),
            n2: parts[1].to_string(),
            r: parts[2].to_string(),
        })
    }
}

impl Serialize for UpdateCommand {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for UpdateCommand {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Subject-object-relation triple. Serialized as `[subject, object, relation]`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "(String, String, String)", into = "(String, String, String)")]
pub struct RdfTriple {
    pub subject: String,
    pub object: String,
    pub relation: String,
}

impl RdfTriple {
    pub fn new(subject: impl Into<String>, object: impl Into<String>, relation: impl Into<String>) -> Self {
        Self {
            subject: subject.into(),
            object: object.into(),
            relation: relation.into(),
        }
    }

    pub fn is_well_formed(&self) -> bool {
        [&self.subject, &self.object, &self.relation]
            .iter()
            .all(|s| !s.trim().is_empty())
    }
}

impl From<(String, String, String)> for RdfTriple {
    fn from((subject, object, relation): (String, String, String)) -> Self {
        Self {
            subject,
            object,
            relation,
        }
    }
}

impl From<RdfTriple> for (String, String, String) {
    fn from(t: RdfTriple) -> Self {
        (t.subject, t.object, t.relation)
    }
}

impl fmt::Display for RdfTriple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.subject, self.object, self.relation)
    }
}
