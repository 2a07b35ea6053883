//! Dataset ingestion, preprocessing into event sequences, vocabularies and
//! batching.

mod batch;
mod cache;
mod datapoint;
mod raw;
pub mod synth;
mod tokenize;
mod vocab;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

pub use batch::{make_batches, Batch, TargetGrid, TokenGrid};
pub use cache::{preprocess_dir, read_split, write_split, Manifest, Split, MANIFEST_VERSION};
pub use datapoint::{build_corpus, build_datapoints, Corpus, Datapoint, Trajectory};
pub use raw::{
    load_dataset, load_with, write_dataset, CanonicalFormat, DatasetStats, GataFormat, RawExample, RecordAdapter,
};
pub use tokenize::{tokenize, RuleTokenizer, Tokenizer};
pub use vocab::{Vocab, Vocabularies, PAD, UNK};

use crate::error::Result;
use crate::graph::{
    ApplyMode, BeliefGraph, CommandOp, ConversionRules, GraphEvent, RdfTriple, UpdateCommand, COLOR_RELATION,
};

/// Order used for the commands of one step: deletes before adds, each group
/// sorted by `(n1, n2, r)`.
pub const SORT_ORDER: &str = "delete-first; then lexicographic (n1, n2, r)";

pub const DEFAULT_COLORS: [&str; 6] = ["green", "orange", "purple", "red", "white", "yellow"];

pub fn sort_commands(commands: &[UpdateCommand]) -> Vec<UpdateCommand> {
    let mut sorted = commands.to_vec();
    sorted.sort_by(|a, b| {
        (a.op != CommandOp::Delete, &a.n1, &a.n2, &a.r).cmp(&(b.op != CommandOp::Delete, &b.n1, &b.n2, &b.r))
    });
    sorted
}

/// Events building `triples` from an empty graph at game step 0, with colored
/// item labels split into an item node and a color node.
pub fn colored_item_split(triples: &BTreeSet<RdfTriple>, rules: &ConversionRules) -> Result<Vec<GraphEvent>> {
    let commands: Vec<_> = triples
        .iter()
        .map(|t| UpdateCommand::add(&t.subject, &t.object, &t.relation))
        .collect();
    let mut graph = BeliefGraph::new();
    Ok(rules.commands_to_events(&sort_commands(&commands), &mut graph, 0, 1, ApplyMode::Strict)?)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessConfig {
    /// Split colored items into item and color nodes.
    pub multi_mode: bool,
    pub colors: Vec<String>,
    /// Fail on commands that cannot be converted instead of skipping them.
    pub strict: bool,
    pub exit_labels: Vec<String>,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            multi_mode: false,
            colors: DEFAULT_COLORS.iter().map(|c| c.to_string()).collect(),
            strict: false,
            exit_labels: vec!["exit".into()],
        }
    }
}

impl PreprocessConfig {
    pub fn apply_mode(&self) -> ApplyMode {
        if self.strict {
            ApplyMode::Strict
        } else {
            ApplyMode::Lenient
        }
    }

    /// Conversion rules for a dataset: state labels are the objects of `is`
    /// triples that are not colors.
    pub fn rules(&self, examples: &[RawExample]) -> ConversionRules {
        let colors: BTreeSet<String> = self.colors.iter().cloned().collect();
        let mut states = BTreeSet::new();
        for ex in examples {
            let triples = ex
                .previous_graph
                .iter()
                .cloned()
                .chain(ex.target_commands.iter().map(UpdateCommand::triple));
            for t in triples {
                if t.relation == COLOR_RELATION && !colors.contains(&t.object) {
                    states.insert(t.object);
                }
            }
        }
        let mut rules = ConversionRules {
            exit_labels: self.exit_labels.iter().cloned().collect(),
            ..ConversionRules::default()
        }
        .with_states(states);
        if self.multi_mode {
            rules = rules.with_colors(colors);
        }
        rules
    }
}

/// A corpus preprocessed in memory together with the rules and vocabularies
/// derived from it.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub corpus: Corpus,
    pub rules: ConversionRules,
    pub vocab: Vocabularies,
}

/// Preprocesses one split of raw examples in memory.
pub fn prepare(examples: &[RawExample], config: &PreprocessConfig, tokenizer: &dyn Tokenizer) -> Result<Prepared> {
    let rules = config.rules(examples);
    let corpus = build_corpus(examples, &rules, config.apply_mode(), tokenizer)?;
    let vocab = build_vocabularies(corpus.datapoints.iter().map(|d| d.as_ref()), tokenizer);
    Ok(Prepared { corpus, rules, vocab })
}

/// Words from observations, actions and label tokens; labels from every node
/// and edge label in the prior and target events.
pub fn build_vocabularies<'a>(
    datapoints: impl IntoIterator<Item = &'a Datapoint>,
    tokenizer: &dyn Tokenizer,
) -> Vocabularies {
    let mut words = BTreeSet::new();
    let mut labels = BTreeSet::new();
    for dp in datapoints {
        words.extend(dp.obs_tokens.iter().cloned());
        words.extend(dp.action_tokens.iter().cloned());
        for ev in dp.prior_events.iter().chain(&dp.target_events) {
            if let Some(l) = &ev.label {
                labels.insert(l.clone());
            }
        }
    }
    for l in &labels {
        words.extend(tokenizer.tokenize(l));
    }
    let mut vocab = Vocabularies::default();
    for w in &words {
        vocab.words.insert(w);
    }
    for l in &labels {
        vocab.labels.insert(l);
    }
    vocab
}
