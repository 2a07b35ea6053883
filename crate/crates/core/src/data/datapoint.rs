use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{sort_commands, RawExample, Tokenizer};
use crate::error::{Error, Result};
use crate::graph::{
    apply_commands, ApplyMode, BeliefGraph, ConversionRules, GraphEvent, RdfTriple, Timestamp, UpdateCommand,
};

/// A preprocessed game step.
///
/// `prior_events` rebuild the belief graph at the start of the step with the
/// timestamps they were generated at; `target_events` are this step's events
/// bracketed by `start` at `[t_g, 0]` and `end`, with event steps counting up
/// from 1 in between.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Datapoint {
    pub game_id: String,
    pub walkthrough_step: u32,
    pub random_step: u32,
    pub game_step: u32,
    pub obs_tokens: Vec<String>,
    pub action_tokens: Vec<String>,
    pub prior_events: Vec<GraphEvent>,
    pub target_events: Vec<GraphEvent>,
    pub previous_graph: BTreeSet<RdfTriple>,
    pub target_commands: Vec<UpdateCommand>,
}

impl Datapoint {
    pub fn prior_graph(&self) -> Result<BeliefGraph> {
        Ok(BeliefGraph::replay(&self.prior_events, ApplyMode::Strict)?)
    }

    /// Gold command set scored by teacher-forced evaluation.
    pub fn gold_commands(&self) -> BTreeSet<UpdateCommand> {
        self.target_commands.iter().cloned().collect()
    }

    /// Seen graph after the step, at label level.
    pub fn gold_graph_after(&self) -> BTreeSet<RdfTriple> {
        let mut triples = self.previous_graph.clone();
        apply_commands(&mut triples, &self.target_commands);
        triples
    }

    /// Number of event positions the decoder is trained on (everything after
    /// `start`).
    pub fn target_len(&self) -> usize {
        self.target_events.len().saturating_sub(1)
    }
}

/// Walkthrough steps `0..=walkthrough_step` followed by the random steps taken
/// from the last of them.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub game_id: String,
    pub walkthrough_step: u32,
    pub datapoints: Vec<Arc<Datapoint>>,
}

impl Trajectory {
    /// Seen graph after the final step.
    pub fn gold_final_graph(&self) -> BTreeSet<RdfTriple> {
        self.datapoints.last().map(|d| d.gold_graph_after()).unwrap_or_default()
    }
}

/// Every datapoint once, plus the trajectories that share them.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub datapoints: Vec<Arc<Datapoint>>,
    pub trajectories: Vec<Trajectory>,
}

impl Corpus {
    /// Groups datapoints into trajectories. Datapoints are ordered by
    /// `(game_id, walkthrough_step, random_step)` first.
    pub fn from_datapoints(datapoints: impl IntoIterator<Item = Datapoint>) -> Self {
        let mut datapoints: Vec<Arc<Datapoint>> = datapoints.into_iter().map(Arc::new).collect();
        datapoints.sort_by(|a, b| {
            (&a.game_id, a.walkthrough_step, a.random_step).cmp(&(&b.game_id, b.walkthrough_step, b.random_step))
        });
        let mut trajectories = Vec::new();
        let mut walkthrough: Vec<Arc<Datapoint>> = Vec::new();
        for dp in &datapoints {
            if dp.random_step == 0 {
                if walkthrough.last().is_some_and(|w| w.game_id != dp.game_id) {
                    walkthrough.clear();
                }
                walkthrough.push(dp.clone());
                trajectories.push(Trajectory {
                    game_id: dp.game_id.clone(),
                    walkthrough_step: dp.walkthrough_step,
                    datapoints: walkthrough.clone(),
                });
            } else if let Some(t) = trajectories.last_mut() {
                t.datapoints.push(dp.clone());
            }
        }
        Self {
            datapoints,
            trajectories,
        }
    }
}

#[derive(Clone, Default)]
struct ReplayState {
    graph: BeliefGraph,
    events: Vec<GraphEvent>,
}

/// Replays every game from an empty graph and emits one datapoint per step.
///
/// Each game must contain walkthrough steps `0..=W` and, for each walkthrough
/// step, random steps `1..=R` with no gaps. Walkthrough step `w` is game step
/// `w`; random step `r` taken from it is game step `w + r`. Fails with
/// [`Error::Desync`] when a replayed graph (color-merged under a palette)
/// differs from the recorded previous graph.
pub fn build_corpus(
    examples: &[RawExample],
    rules: &ConversionRules,
    mode: ApplyMode,
    tokenizer: &dyn Tokenizer,
) -> Result<Corpus> {
    let mut games: BTreeMap<&str, BTreeMap<(u32, u32), &RawExample>> = BTreeMap::new();
    for ex in examples {
        games
            .entry(&ex.game_id)
            .or_default()
            .insert((ex.walkthrough_step, ex.random_step), ex);
    }
    let mut datapoints = Vec::with_capacity(examples.len());
    for (game, steps) in &games {
        let walkthrough_len = steps.keys().filter(|(_, r)| *r == 0).count() as u32;
        let mut covered = 0;
        let mut walkthrough = ReplayState::default();
        for w in 0..walkthrough_len {
            let ex = steps.get(&(w, 0)).ok_or_else(|| missing(game, w, 0))?;
            let (dp, next) = replay_step(&walkthrough, ex, w, rules, mode, tokenizer)?;
            datapoints.push(dp);
            covered += 1;
            let mut state = next.clone();
            for r in 1.. {
                let Some(ex) = steps.get(&(w, r)) else { break };
                let (dp, after) = replay_step(&state, ex, w + r, rules, mode, tokenizer)?;
                datapoints.push(dp);
                covered += 1;
                state = after;
            }
            walkthrough = next;
        }
        if covered != steps.len() {
            let (w, r) = steps
                .keys()
                .find(|&&(w, r)| w >= walkthrough_len || (r > 0 && !steps.contains_key(&(w, r - 1))))
                .copied()
                .unwrap_or_default();
            return Err(Error::Invalid(format!(
                "game {game}: step ({w}, {r}) does not continue a trajectory"
            )));
        }
    }
    Ok(Corpus::from_datapoints(datapoints))
}

/// [`build_corpus`] returning only the trajectories.
pub fn build_datapoints(
    examples: &[RawExample],
    rules: &ConversionRules,
    mode: ApplyMode,
    tokenizer: &dyn Tokenizer,
) -> Result<Vec<Trajectory>> {
    Ok(build_corpus(examples, rules, mode, tokenizer)?.trajectories)
}

fn missing(game: &str, w: u32, r: u32) -> Error {
    Error::Invalid(format!("game {game}: missing step ({w}, {r})"))
}

fn replay_step(
    state: &ReplayState,
    ex: &RawExample,
    game_step: u32,
    rules: &ConversionRules,
    mode: ApplyMode,
    tokenizer: &dyn Tokenizer,
) -> Result<(Datapoint, ReplayState)> {
    let replayed = rules.merge_colored_nodes(&state.graph);
    if replayed != ex.previous_graph {
        let detail = match ex.previous_graph.difference(&replayed).next() {
            Some(t) => format!("missing {t}"),
            None => format!("unexpected {}", replayed.difference(&ex.previous_graph).next().unwrap()),
        };
        return Err(Error::Desync {
            game_id: ex.game_id.clone(),
            walkthrough_step: ex.walkthrough_step,
            random_step: ex.random_step,
            detail,
        });
    }
    let commands = sort_commands(&ex.target_commands);
    let mut graph = state.graph.clone();
    let events = rules.commands_to_events(&commands, &mut graph, game_step, 1, mode)?;
    let mut target_events = Vec::with_capacity(events.len() + 2);
    target_events.push(GraphEvent::start(Timestamp::new(game_step, 0)));
    target_events.extend(events.iter().cloned());
    target_events.push(GraphEvent::end(Timestamp::new(game_step, events.len() as u32 + 1)));
    let dp = Datapoint {
        game_id: ex.game_id.clone(),
        walkthrough_step: ex.walkthrough_step,
        random_step: ex.random_step,
        game_step,
        obs_tokens: tokenizer.tokenize(&ex.observation),
        action_tokens: tokenizer.tokenize(&ex.previous_action),
        prior_events: state.events.clone(),
        target_events,
        previous_graph: ex.previous_graph.clone(),
        target_commands: commands,
    };
    let mut next = ReplayState {
        graph,
        events: state.events.clone(),
    };
    next.events.extend(events);
    Ok((dp, next))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::RuleTokenizer;
    use crate::graph::EventKind;

    fn example(w: u32, r: u32, prev: &[(&str, &str, &str)], cmds: &[UpdateCommand]) -> RawExample {
        RawExample {
            game_id: "g".into(),
            walkthrough_step: w,
            random_step: r,
            observation: "You see an apple.".into(),
            previous_action: "look".into(),
            previous_graph: prev.iter().map(|&(s, o, r)| RdfTriple::new(s, o, r)).collect(),
            target_commands: cmds.to_vec(),
        }
    }

    fn build(examples: &[RawExample]) -> Result<Corpus> {
        build_corpus(examples, &ConversionRules::default(), ApplyMode::Strict, &RuleTokenizer)
    }

    #[test]
    fn second_trajectory_holds_both_walkthrough_steps() {
        let examples = [
            example(0, 0, &[], &[UpdateCommand::add("apple", "table", "on")]),
            example(
                1,
                0,
                &[("apple", "table", "on")],
                &[UpdateCommand::add("table", "kitchen", "at")],
            ),
        ];
        let corpus = build(&examples).unwrap();
        assert_eq!(corpus.datapoints.len(), 2);
        assert_eq!(corpus.trajectories.len(), 2);
        assert_eq!(corpus.trajectories[1].datapoints.len(), 2);
        assert!(corpus.trajectories[0].datapoints[0].prior_events.is_empty());
        let second = &corpus.datapoints[1];
        assert_eq!(second.game_step, 1);
        assert!(second.prior_events.iter().all(|e| e.ts.game_step == 0));
        assert_eq!(second.prior_graph().unwrap().triples(), second.previous_graph);
        assert_eq!(
            corpus.trajectories[1].gold_final_graph(),
            BTreeSet::from([
                RdfTriple::new("apple", "table", "on"),
                RdfTriple::new("table", "kitchen", "at")
            ])
        );
    }

    #[test]
    fn no_commands_gives_start_end() {
        let corpus = build(&[example(0, 0, &[], &[])]).unwrap();
        let kinds: Vec<_> = corpus.datapoints[0].target_events.iter().map(|e| e.kind).collect();
        assert_eq!(kinds, [EventKind::Start, EventKind::End]);
        assert_eq!(corpus.datapoints[0].target_events[1].ts, Timestamp::new(0, 1));
    }

    #[test]
    fn apple_table_chair_kinds() {
        use EventKind::*;
        let cmds = [
            UpdateCommand::add("apple", "table", "on"),
            UpdateCommand::add("chair", "table", "near"),
        ];
        let corpus = build(&[example(0, 0, &[], &cmds)]).unwrap();
        let dp = &corpus.datapoints[0];
        let kinds: Vec<_> = dp.target_events.iter().map(|e| e.kind).collect();
        assert_eq!(kinds, [Start, NodeAdd, NodeAdd, EdgeAdd, NodeAdd, EdgeAdd, End]);
        let steps: Vec<_> = dp.target_events.iter().map(|e| e.ts.event_step).collect();
        assert_eq!(steps, [0, 1, 2, 3, 4, 5, 6]);
    }

    #[test]
    fn random_steps_chain_from_their_walkthrough_step() {
        let examples = [
            example(0, 0, &[], &[UpdateCommand::add("apple", "table", "on")]),
            example(
                0,
                1,
                &[("apple", "table", "on")],
                &[
                    UpdateCommand::delete("apple", "table", "on"),
                    UpdateCommand::add("apple", "player", "in"),
                ],
            ),
            example(0, 2, &[("apple", "player", "in")], &[]),
            example(1, 0, &[("apple", "table", "on")], &[]),
        ];
        let corpus = build(&examples).unwrap();
        let t0 = &corpus.trajectories[0];
        assert_eq!(t0.datapoints.len(), 3);
        let steps: Vec<_> = t0.datapoints.iter().map(|d| d.game_step).collect();
        assert_eq!(steps, [0, 1, 2]);
        assert_eq!(corpus.trajectories[1].datapoints.len(), 2);
        for dp in &corpus.datapoints {
            assert_eq!(dp.prior_graph().unwrap().triples(), dp.previous_graph);
        }
    }

    #[test]
    fn desync_and_gaps_are_errors() {
        let examples = [
            example(0, 0, &[], &[UpdateCommand::add("apple", "table", "on")]),
            example(1, 0, &[("apple", "chair", "on")], &[]),
        ];
        assert!(matches!(
            build(&examples),
            Err(Error::Desync {
                walkthrough_step: 1,
                ..
            })
        ));
        let gap = [example(0, 0, &[], &[]), example(0, 2, &[], &[])];
        assert!(matches!(build(&gap), Err(Error::Invalid(_))));
        let no_start = [example(1, 0, &[], &[])];
        assert!(matches!(build(&no_start), Err(Error::Invalid(_))));
    }
}
