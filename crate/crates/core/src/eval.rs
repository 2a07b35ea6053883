//! Teacher-forced and free-run graph F1.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::data::{Corpus, Datapoint, Trajectory};
use crate::error::Result;
use crate::graph::{events_to_commands, ApplyMode, BeliefGraph, ConversionRules, GraphEvent};
use crate::nn::Model;

pub const REPORT_VERSION: u32 = 1;

/// F1 of two sets. Two empty sets score 1.
pub fn set_f1<T: Ord>(predicted: &BTreeSet<T>, gold: &BTreeSet<T>) -> f64 {
    Counts::of(predicted, gold).f1()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub hits: usize,
    pub predicted: usize,
    pub gold: usize,
}

impl Counts {
    pub fn of<T: Ord>(predicted: &BTreeSet<T>, gold: &BTreeSet<T>) -> Self {
        Self {
            hits: predicted.intersection(gold).count(),
            predicted: predicted.len(),
            gold: gold.len(),
        }
    }

    pub fn f1(&self) -> f64 {
        if self.predicted == 0 && self.gold == 0 {
            return 1.0;
        }
        if self.hits == 0 {
            return 0.0;
        }
        let p = self.hits as f64 / self.predicted as f64;
        let r = self.hits as f64 / self.gold as f64;
        2.0 * p * r / (p + r)
    }

    fn add(&mut self, other: Counts) {
        self.hits += other.hits;
        self.predicted += other.predicted;
        self.gold += other.gold;
    }
}

/// Produces the events of one game step and applies them to `graph`.
pub trait GraphUpdater {
    fn update(&self, datapoint: &Datapoint, graph: &mut BeliefGraph) -> Result<Vec<GraphEvent>>;
}

/// Constrained greedy decoding with a trained model.
pub struct Greedy<'a> {
    pub model: &'a Model,
    pub max_events: usize,
}

impl GraphUpdater for Greedy<'_> {
    fn update(&self, dp: &Datapoint, graph: &mut BeliefGraph) -> Result<Vec<GraphEvent>> {
        self.model
            .generate_events(&dp.obs_tokens, &dp.action_tokens, graph, dp.game_step, self.max_events)
    }
}

/// Replays the gold events of each step. Scores 1 whenever preprocessing and
/// scoring agree.
#[derive(Debug, Clone, Copy, Default)]
pub struct GoldReplay;

impl GraphUpdater for GoldReplay {
    fn update(&self, dp: &Datapoint, graph: &mut BeliefGraph) -> Result<Vec<GraphEvent>> {
        let mut out = Vec::new();
        for event in &dp.target_events {
            graph.apply(event, ApplyMode::Lenient)?;
            if !event.kind.is_marker() {
                out.push(event.clone());
            }
        }
        Ok(out)
    }
}

/// Never changes the graph.
#[derive(Debug, Clone, Copy, Default)]
pub struct Silent;

impl GraphUpdater for Silent {
    fn update(&self, _: &Datapoint, _: &mut BeliefGraph) -> Result<Vec<GraphEvent>> {
        Ok(Vec::new())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemScore {
    pub id: String,
    pub f1: f64,
    pub counts: Counts,
}

/// Mean per-item F1 alongside F1 of pooled counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub macro_f1: f64,
    pub micro_f1: f64,
    pub items: Vec<ItemScore>,
}

impl Score {
    fn from_items(items: Vec<ItemScore>) -> Self {
        let mut pooled = Counts::default();
        for item in &items {
            pooled.add(item.counts);
        }
        let macro_f1 = if items.is_empty() {
            1.0
        } else {
            items.iter().map(|i| i.f1).sum::<f64>() / items.len() as f64
        };
        Self {
            macro_f1,
            micro_f1: pooled.f1(),
            items,
        }
    }
}

/// Commands recovered from each step's events, decoded from the gold prior
/// graph, against the gold commands.
pub fn tf_score(updater: &dyn GraphUpdater, datapoints: &[impl AsRef<Datapoint>]) -> Result<Score> {
    let mut items = Vec::with_capacity(datapoints.len());
    for dp in datapoints {
        let dp = dp.as_ref();
        let mut graph = dp.prior_graph()?;
        let mut scratch = graph.clone();
        let events = updater.update(dp, &mut graph)?;
        let predicted = events_to_commands(&events, &mut scratch, ApplyMode::Lenient)?;
        let counts = Counts::of(&predicted, &dp.gold_commands());
        items.push(ItemScore {
            id: format!("{}/{}/{}", dp.game_id, dp.walkthrough_step, dp.random_step),
            f1: counts.f1(),
            counts,
        });
    }
    Ok(Score::from_items(items))
}

/// Final triples of each trajectory, built from an empty graph without gold
/// injection, against the gold final graph. With `merge` set, colored items
/// are merged back before scoring.
pub fn fr_score(
    updater: &dyn GraphUpdater,
    trajectories: &[Trajectory],
    merge: Option<&ConversionRules>,
) -> Result<Score> {
    let mut items = Vec::with_capacity(trajectories.len());
    for traj in trajectories {
        let mut graph = BeliefGraph::new();
        for dp in &traj.datapoints {
            updater.update(dp, &mut graph)?;
        }
        let predicted = match merge {
            Some(rules) => rules.merge_colored_nodes(&graph),
            None => graph.triples(),
        };
        let counts = Counts::of(&predicted, &traj.gold_final_graph());
        items.push(ItemScore {
            id: format!("{}/{}", traj.game_id, traj.walkthrough_step),
            f1: counts.f1(),
            counts,
        });
    }
    Ok(Score::from_items(items))
}

pub fn tf_f1(updater: &dyn GraphUpdater, datapoints: &[impl AsRef<Datapoint>]) -> Result<f64> {
    Ok(tf_score(updater, datapoints)?.macro_f1)
}

pub fn fr_f1(updater: &dyn GraphUpdater, trajectories: &[Trajectory], merge: Option<&ConversionRules>) -> Result<f64> {
    Ok(fr_score(updater, trajectories, merge)?.macro_f1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Tf,
    Fr,
    #[default]
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub version: u32,
    pub multi_mode: bool,
    /// `None` when not requested or in multi mode.
    pub tf_f1: Option<f64>,
    pub fr_f1: Option<f64>,
    pub tf: Option<Score>,
    pub fr: Option<Score>,
}

/// Scores `corpus`. Multi mode merges colored items for free-run scoring and
/// skips teacher-forced scoring, whose commands are not comparable.
pub fn evaluate(
    updater: &dyn GraphUpdater,
    corpus: &Corpus,
    metric: Metric,
    multi_mode: bool,
    rules: &ConversionRules,
) -> Result<EvalReport> {
    let tf = if metric != Metric::Fr && !multi_mode {
        Some(tf_score(updater, &corpus.datapoints)?)
    } else {
        None
    };
    let fr = if metric != Metric::Tf {
        Some(fr_score(updater, &corpus.trajectories, multi_mode.then_some(rules))?)
    } else {
        None
    };
    Ok(EvalReport {
        version: REPORT_VERSION,
        multi_mode,
        tf_f1: tf.as_ref().map(|s| s.macro_f1),
        fr_f1: fr.as_ref().map(|s| s.macro_f1),
        tf,
        fr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn set_f1_conventions() {
        assert_eq!(set_f1(&set(&["a", "b"]), &set(&["b", "c"])), 0.5);
        assert_eq!(set_f1(&set(&["a"]), &set(&["a"])), 1.0);
        assert_eq!(set_f1(&set(&[]), &set(&[])), 1.0);
        assert_eq!(set_f1(&set(&["a"]), &set(&[])), 0.0);
        assert_eq!(set_f1(&set(&[]), &set(&["a"])), 0.0);
        assert_eq!(set_f1(&set(&["a"]), &set(&["b"])), 0.0);
    }

    #[test]
    fn micro_pools_counts() {
        let score = Score::from_items(vec![
            ItemScore {
                id: "x".into(),
                f1: 1.0,
                counts: Counts {
                    hits: 1,
                    predicted: 1,
                    gold: 1,
                },
            },
            ItemScore {
                id: "y".into(),
                f1: 0.0,
                counts: Counts {
                    hits: 0,
                    predicted: 0,
                    gold: 3,
                },
            },
        ]);
        assert_eq!(score.macro_f1, 0.5);
        assert!((score.micro_f1 - 0.4).abs() < 1e-12);
    }
}
