//! Dataset files: one JSON object per line.

use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::graph::{RdfTriple, UpdateCommand};

/// One step of one game: the observation that followed `previous_action`,
/// the seen graph before the step, and the commands that update it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawExample {
    pub game_id: String,
    pub walkthrough_step: u32,
    pub random_step: u32,
    pub observation: String,
    pub previous_action: String,
    pub previous_graph: BTreeSet<RdfTriple>,
    pub target_commands: Vec<UpdateCommand>,
}

impl RawExample {
    pub fn key(&self) -> (&str, u32, u32) {
        (&self.game_id, self.walkthrough_step, self.random_step)
    }
}

/// Maps one parsed JSON line of some external layout onto a [`RawExample`].
pub trait RecordAdapter {
    fn adapt(&self, record: Value) -> std::result::Result<RawExample, String>;
}

/// The native layout: field names exactly as in [`RawExample`].
#[derive(Debug, Clone, Copy, Default)]
pub struct CanonicalFormat;

impl RecordAdapter for CanonicalFormat {
    fn adapt(&self, record: Value) -> std::result::Result<RawExample, String> {
        serde_json::from_value(record).map_err(|e| e.to_string())
    }
}

/// Layout of the publicly released command-generation files, where the step
/// is a `[walkthrough, random]` pair and commands use the comma grammar.
///
/// ```json
/// {"game": "g1", "step": [0, 0], "observation": "...", "previous_action": "restart",
///  "previous_graph_seen": [["apple", "table", "on"]],
///  "target_commands": ["add , apple , table , on"]}
/// ```
#[derive(Debug, Clone, Copy, Default)]
pub struct GataFormat;

#[derive(Deserialize)]
struct GataRecord {
    game: String,
    step: (u32, u32),
    observation: String,
    previous_action: String,
    previous_graph_seen: BTreeSet<RdfTriple>,
    target_commands: Vec<UpdateCommand>,
}

impl RecordAdapter for GataFormat {
    fn adapt(&self, record: Value) -> std::result::Result<RawExample, String> {
        let r: GataRecord = serde_json::from_value(record).map_err(|e| e.to_string())?;
        Ok(RawExample {
            game_id: r.game,
            walkthrough_step: r.step.0,
            random_step: r.step.1,
            observation: r.observation,
            previous_action: r.previous_action,
            previous_graph: r.previous_graph_seen,
            target_commands: r.target_commands,
        })
    }
}

/// Loads a dataset in the canonical layout.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<RawExample>> {
    load_with(path, &CanonicalFormat)
}

/// Loads a dataset through `adapter`. Errors carry the 1-based line number.
pub fn load_with(path: impl AsRef<Path>, adapter: &dyn RecordAdapter) -> Result<Vec<RawExample>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let schema = |line: usize, message: String| Error::Schema {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut seen = HashSet::new();
    let mut examples = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(line).map_err(|e| schema(i + 1, e.to_string()))?;
        let example = adapter.adapt(value).map_err(|m| schema(i + 1, m))?;
        if let Some(t) = example.previous_graph.iter().find(|t| !t.is_well_formed()) {
            return Err(schema(i + 1, format!("malformed triple {t}")));
        }
        let key = (example.game_id.clone(), example.walkthrough_step, example.random_step);
        if !seen.insert(key) {
            return Err(schema(
                i + 1,
                format!(
                    "duplicate step ({}, {}) for game {}",
                    example.walkthrough_step, example.random_step, example.game_id
                ),
            ));
        }
        examples.push(example);
    }
    Ok(examples)
}

/// Writes examples in the canonical layout.
pub fn write_dataset(path: impl AsRef<Path>, examples: &[RawExample]) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for example in examples {
        serde_json::to_writer(&mut out, example)?;
        out.push(b'\n');
    }
    fs::File::create(path)
        .and_then(|mut f| f.write_all(&out))
        .map_err(|e| Error::io(path, e))
}

/// Per-split dataset statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub examples: usize,
    pub games: usize,
    pub avg_observation_tokens: f64,
    pub avg_commands: f64,
    pub node_types: usize,
    pub edge_types: usize,
    pub avg_connections: f64,
}

impl DatasetStats {
    /// `avg_connections` is the mean number of edges in the previous graph;
    /// node and edge types count distinct labels over graphs and commands.
    pub fn compute(examples: &[RawExample], tokenizer: &dyn super::Tokenizer) -> Self {
        let mut nodes = BTreeSet::new();
        let mut relations = BTreeSet::new();
        let mut games = BTreeSet::new();
        let (mut tokens, mut commands, mut edges) = (0usize, 0usize, 0usize);
        for ex in examples {
            games.insert(ex.game_id.as_str());
            tokens += tokenizer.tokenize(&ex.observation).len();
            commands += ex.target_commands.len();
            edges += ex.previous_graph.len();
            let triples = ex
                .previous_graph
                .iter()
                .cloned()
                .chain(ex.target_commands.iter().map(UpdateCommand::triple));
            for t in triples {
                nodes.insert(t.subject);
                nodes.insert(t.object);
                relations.insert(t.relation);
            }
        }
        let mean = |total: usize| {
            if examples.is_empty() {
                0.0
            } else {
                total as f64 / examples.len() as f64
            }
        };
        Self {
            examples: examples.len(),
            games: games.len(),
            avg_observation_tokens: mean(tokens),
            avg_commands: mean(commands),
            node_types: nodes.len(),
            edge_types: relations.len(),
            avg_connections: mean(edges),
        }
    }
}
