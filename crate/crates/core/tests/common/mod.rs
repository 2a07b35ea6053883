//! Seeded generators of label-level command streams shared by the
//! integration tests.

#![allow(dead_code)]

use std::collections::BTreeSet;

use dkg_core::data::sort_commands;
use dkg_core::graph::{ConversionRules, RdfTriple, UpdateCommand};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const ITEMS: [&str; 9] = [
    "apple", "carrot", "knife", "table", "counter", "fridge", "kitchen", "pantry", "player",
];
pub const STATES: [&str; 4] = ["sliced", "fried", "open", "closed"];
pub const RELATIONS: [&str; 5] = ["on", "in", "at", "part_of", "east_of"];

/// Items in two colors each, plus plain furniture, for the split and merge
/// tests.
pub const COLORED_ITEMS: [&str; 8] = [
    "purple potato",
    "yellow potato",
    "red apple",
    "green apple",
    "table",
    "counter",
    "kitchen",
    "player",
];

pub fn color_rules() -> ConversionRules {
    rules().with_colors(["green", "orange", "purple", "red", "white", "yellow"])
}

pub fn rules() -> ConversionRules {
    ConversionRules::default().with_states(STATES)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn connected(triples: &BTreeSet<RdfTriple>, n1: &str, n2: &str) -> bool {
    triples.iter().any(|t| t.subject == n1 && t.object == n2)
}

/// An add that changes `triples` and never puts a second edge between two
/// reusable nodes. Exits only point at items; states are only objects.
pub fn random_add(rng: &mut ChaCha8Rng, triples: &BTreeSet<RdfTriple>, allow_exit: bool) -> Option<UpdateCommand> {
    random_add_from(rng, &ITEMS, triples, allow_exit)
}

pub fn random_add_from(
    rng: &mut ChaCha8Rng,
    items: &[&str],
    triples: &BTreeSet<RdfTriple>,
    allow_exit: bool,
) -> Option<UpdateCommand> {
    for _ in 0..50 {
        let exit = allow_exit && rng.random_bool(0.15);
        let state = !exit && rng.random_bool(0.25);
        let n1 = if exit { "exit" } else { *items.choose(rng).unwrap() };
        let (n2, r) = if state {
            (*STATES.choose(rng).unwrap(), "is")
        } else {
            (*items.choose(rng).unwrap(), *RELATIONS.choose(rng).unwrap())
        };
        if n1 == n2 {
            continue;
        }
        let cmd = UpdateCommand::add(n1, n2, r);
        if triples.contains(&cmd.triple()) {
            continue;
        }
        if !exit && !state && connected(triples, n1, n2) {
            continue;
        }
        return Some(cmd);
    }
    None
}

/// A stream of at most `max_commands` valid commands grouped into steps of
/// one to four, each step in canonical order.
pub fn random_steps(rng: &mut ChaCha8Rng, max_commands: usize) -> Vec<Vec<UpdateCommand>> {
    random_steps_from(rng, &ITEMS, max_commands)
}

pub fn random_steps_from(rng: &mut ChaCha8Rng, items: &[&str], max_commands: usize) -> Vec<Vec<UpdateCommand>> {
    let total = rng.random_range(0..=max_commands);
    let mut triples = BTreeSet::new();
    let mut steps = Vec::new();
    let mut made = 0;
    while made < total {
        let size = rng.random_range(1..=4).min(total - made);
        let mut step: Vec<UpdateCommand> = Vec::new();
        let mut touched = BTreeSet::new();
        for _ in 0..size {
            let delete = !triples.is_empty() && rng.random_bool(0.35);
            let cmd = if delete {
                let all: Vec<&RdfTriple> = triples.iter().filter(|t| !touched.contains(*t)).collect();
                all.choose(rng)
                    .map(|t| UpdateCommand::delete(&t.subject, &t.object, &t.relation))
            } else {
                random_add_from(rng, items, &triples, true)
            };
            if let Some(cmd) = cmd {
                touched.insert(cmd.triple());
                dkg_core::graph::apply_commands(&mut triples, std::slice::from_ref(&cmd));
                step.push(cmd);
            }
            made += 1;
        }
        steps.push(sort_commands(&step));
    }
    steps
}

/// A prior triple set built from adds, and a non-exit command set that is
/// effective against it: every delete removes a present triple and every
/// add inserts a new one.
pub fn random_command_set(rng: &mut ChaCha8Rng) -> (Vec<UpdateCommand>, Vec<UpdateCommand>) {
    let mut prior = BTreeSet::new();
    let mut setup = Vec::new();
    for _ in 0..rng.random_range(0..8) {
        if let Some(cmd) = random_add(rng, &prior, false) {
            prior.insert(cmd.triple());
            setup.push(cmd);
        }
    }
    let mut after = prior.clone();
    let mut commands = Vec::new();
    for t in &prior {
        if rng.random_bool(0.3) {
            after.remove(t);
            commands.push(UpdateCommand::delete(&t.subject, &t.object, &t.relation));
        }
    }
    for _ in 0..rng.random_range(0..6) {
        if let Some(cmd) = random_add(rng, &after, false) {
            if prior.contains(&cmd.triple()) {
                continue;
            }
            after.insert(cmd.triple());
            commands.push(cmd);
        }
    }
    (setup, sort_commands(&commands))
}
