//! Small synthetic cooking games written in the dataset layout.
//!
//! A game is a few connected rooms with furniture and food. The player's seen
//! graph holds what has been observed so far; each step records the seen
//! graph before the step and the commands that turn it into the one after.
//! Walkthrough steps follow a goal-directed policy (open containers, collect
//! food, cut it, cook it, explore); random steps from each walkthrough step
//! pick uniformly among valid actions.

use std::collections::BTreeSet;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::RawExample;
use crate::graph::{RdfTriple, UpdateCommand};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub games: usize,
    /// Walkthrough steps per game, counting the opening step.
    pub walkthrough_steps: usize,
    /// Random steps taken from every walkthrough step.
    pub random_steps: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            games: 4,
            walkthrough_steps: 5,
            random_steps: 4,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn examples(&self) -> usize {
        self.games * self.walkthrough_steps * (1 + self.random_steps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dir {
    North,
    South,
    East,
    West,
}

impl Dir {
    const ALL: [Dir; 4] = [Dir::North, Dir::South, Dir::East, Dir::West];

    fn name(self) -> &'static str {
        match self {
            Dir::North => "north",
            Dir::South => "south",
            Dir::East => "east",
            Dir::West => "west",
        }
    }

    fn opposite(self) -> Dir {
        match self {
            Dir::North => Dir::South,
            Dir::South => Dir::North,
            Dir::East => Dir::West,
            Dir::West => Dir::East,
        }
    }

    fn relation(self) -> String {
        format!("{}_of", self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Support,
    Container,
    Cooker(&'static str, &'static str),
}

const ROOMS: [(&str, &[(&str, Kind)]); 5] = [
    (
        "kitchen",
        &[
            ("counter", Kind::Support),
            ("fridge", Kind::Container),
            ("stove", Kind::Cooker("fry", "fried")),
        ],
    ),
    ("pantry", &[("shelf", Kind::Support)]),
    (
        "backyard",
        &[
            ("patio table", Kind::Support),
            ("bbq", Kind::Cooker("grill", "grilled")),
        ],
    ),
    ("living room", &[("sofa", Kind::Support)]),
    ("bedroom", &[("bed", Kind::Support), ("wardrobe", Kind::Container)]),
];

const FOODS: [&str; 9] = [
    "red apple",
    "green apple",
    "yellow potato",
    "purple potato",
    "carrot",
    "red onion",
    "white onion",
    "yellow bell pepper",
    "block of cheese",
];

#[derive(Debug, Clone)]
struct Room {
    name: &'static str,
    neighbors: Vec<(Dir, usize)>,
}

#[derive(Debug, Clone)]
struct Furniture {
    name: &'static str,
    room: usize,
    kind: Kind,
    open: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Place {
    On(usize),
    In(usize),
    Carried,
}

#[derive(Debug, Clone)]
struct Item {
    name: &'static str,
    place: Place,
    food: bool,
    sliced: bool,
    cooked: Option<&'static str>,
}

#[derive(Debug, Clone)]
enum Action {
    Go(Dir),
    Open(usize),
    Close(usize),
    Take(usize),
    Put(usize, usize),
    Slice(usize),
    Cook(usize, usize),
    Look,
    Inventory,
}

#[derive(Debug, Clone)]
struct World {
    rooms: Vec<Room>,
    furniture: Vec<Furniture>,
    items: Vec<Item>,
    player: usize,
    visited: BTreeSet<usize>,
    seen: BTreeSet<usize>,
}

fn article(name: &str) -> &'static str {
    if name.starts_with(['a', 'e', 'i', 'o', 'u']) {
        "an"
    } else {
        "a"
    }
}

fn list(names: &[String]) -> String {
    match names {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} and {last}", init.join(", ")),
    }
}

fn title(name: &str) -> String {
    name.split(' ')
        .map(|w| {
            let mut c = w.chars();
            c.next()
                .map(|f| f.to_uppercase().chain(c).collect::<String>())
                .unwrap_or_default()
        })
        .collect::<Vec<_>>()
        .join(" ")
}

impl World {
    fn random(rng: &mut ChaCha8Rng) -> Self {
        let room_count = rng.random_range(2..=3);
        let mut chosen = vec![0];
        while chosen.len() < room_count {
            let r = rng.random_range(1..ROOMS.len());
            if !chosen.contains(&r) {
                chosen.push(r);
            }
        }
        let mut rooms: Vec<Room> = chosen
            .iter()
            .map(|&r| Room {
                name: ROOMS[r].0,
                neighbors: Vec::new(),
            })
            .collect();
        let mut back: Option<Dir> = None;
        for i in 1..rooms.len() {
            let dirs: Vec<Dir> = Dir::ALL.into_iter().filter(|&d| Some(d) != back).collect();
            let d = *dirs.choose(rng).unwrap();
            rooms[i - 1].neighbors.push((d, i));
            rooms[i].neighbors.push((d.opposite(), i - 1));
            back = Some(d.opposite());
        }
        let mut furniture = Vec::new();
        for (i, &r) in chosen.iter().enumerate() {
            for &(name, kind) in ROOMS[r].1 {
                furniture.push(Furniture {
                    name,
                    room: i,
                    kind,
                    open: false,
                });
            }
        }
        let holders: Vec<usize> = (0..furniture.len())
            .filter(|&f| !matches!(furniture[f].kind, Kind::Cooker(..)))
            .collect();
        let place = |rng: &mut ChaCha8Rng| {
            let f = *holders.choose(rng).unwrap();
            match furniture[f].kind {
                Kind::Container => Place::In(f),
                _ => Place::On(f),
            }
        };
        let mut foods: Vec<&str> = FOODS.to_vec();
        let mut items = vec![Item {
            name: "knife",
            place: place(rng),
            food: false,
            sliced: false,
            cooked: None,
        }];
        for _ in 0..rng.random_range(2..=3) {
            let i = rng.random_range(0..foods.len());
            items.push(Item {
                name: foods.swap_remove(i),
                place: place(rng),
                food: true,
                sliced: false,
                cooked: None,
            });
        }
        let mut world = World {
            rooms,
            furniture,
            items,
            player: 0,
            visited: BTreeSet::new(),
            seen: BTreeSet::new(),
        };
        world.arrive();
        world
    }

    fn visible(&self, item: &Item) -> bool {
        match item.place {
            Place::On(f) => self.furniture[f].room == self.player,
            Place::In(f) => self.furniture[f].room == self.player && self.furniture[f].open,
            Place::Carried => true,
        }
    }

    fn arrive(&mut self) {
        self.visited.insert(self.player);
        self.observe();
    }

    fn observe(&mut self) {
        for i in 0..self.items.len() {
            if self.visible(&self.items[i]) {
                self.seen.insert(i);
            }
        }
    }

    fn furniture_in(&self, room: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.furniture.len()).filter(move |&f| self.furniture[f].room == room)
    }

    fn seen_graph(&self) -> BTreeSet<RdfTriple> {
        let mut g = BTreeSet::new();
        g.insert(RdfTriple::new("player", self.rooms[self.player].name, "at"));
        for &v in &self.visited {
            let room = &self.rooms[v];
            for f in self.furniture_in(v) {
                let furniture = &self.furniture[f];
                g.insert(RdfTriple::new(furniture.name, room.name, "at"));
                if furniture.kind == Kind::Container {
                    let state = if furniture.open { "open" } else { "closed" };
                    g.insert(RdfTriple::new(furniture.name, state, "is"));
                }
            }
            for &(d, n) in &room.neighbors {
                let other = if self.visited.contains(&n) {
                    self.rooms[n].name
                } else {
                    "exit"
                };
                g.insert(RdfTriple::new(other, room.name, d.relation()));
            }
        }
        for &i in &self.seen {
            let item = &self.items[i];
            g.insert(match item.place {
                Place::On(f) => RdfTriple::new(item.name, self.furniture[f].name, "on"),
                Place::In(f) => RdfTriple::new(item.name, self.furniture[f].name, "in"),
                Place::Carried => RdfTriple::new(item.name, "player", "in"),
            });
            if item.food {
                let cut = if item.sliced { "sliced" } else { "uncut" };
                g.insert(RdfTriple::new(item.name, cut, "is"));
            }
            if let Some(state) = item.cooked {
                g.insert(RdfTriple::new(item.name, state, "is"));
            }
        }
        g
    }

    fn carrying(&self, name: &str) -> bool {
        self.items.iter().any(|i| i.name == name && i.place == Place::Carried)
    }

    fn describe(&self) -> String {
        let room = &self.rooms[self.player];
        let mut s = format!("-= {} =- You are in the {}.", title(room.name), room.name);
        let furniture: Vec<String> = self
            .furniture_in(self.player)
            .map(|f| {
                let furniture = &self.furniture[f];
                match (furniture.kind, furniture.open) {
                    (Kind::Container, true) => format!("an open {}", furniture.name),
                    (Kind::Container, false) => format!("a closed {}", furniture.name),
                    _ => format!("{} {}", article(furniture.name), furniture.name),
                }
            })
            .collect();
        s += &format!(" You see {}.", list(&furniture));
        for f in self.furniture_in(self.player) {
            let contents = self.contents(f);
            let furniture = &self.furniture[f];
            if contents.is_empty() || (furniture.kind == Kind::Container && !furniture.open) {
                continue;
            }
            if furniture.kind == Kind::Container {
                s += &format!(" The {} contains {}.", furniture.name, list(&contents));
            } else {
                s += &format!(" On the {} you see {}.", furniture.name, list(&contents));
            }
        }
        for &(d, n) in &room.neighbors {
            if self.visited.contains(&n) {
                s += &format!(" The {} is to the {}.", self.rooms[n].name, d.name());
            } else {
                s += &format!(" There is an exit to the {}.", d.name());
            }
        }
        s
    }

    fn contents(&self, f: usize) -> Vec<String> {
        self.items
            .iter()
            .filter(|i| matches!(i.place, Place::On(x) | Place::In(x) if x == f))
            .map(|i| format!("{} {}", article(i.name), i.name))
            .collect()
    }

    fn valid_actions(&self) -> Vec<Action> {
        let mut actions = vec![Action::Look, Action::Inventory];
        for &(d, _) in &self.rooms[self.player].neighbors {
            actions.push(Action::Go(d));
        }
        for f in self.furniture_in(self.player) {
            let furniture = &self.furniture[f];
            match furniture.kind {
                Kind::Container if furniture.open => actions.push(Action::Close(f)),
                Kind::Container => actions.push(Action::Open(f)),
                _ => {}
            }
        }
        for (i, item) in self.items.iter().enumerate() {
            match item.place {
                Place::Carried => {
                    for f in self.furniture_in(self.player) {
                        match self.furniture[f].kind {
                            Kind::Support => actions.push(Action::Put(i, f)),
                            Kind::Cooker(..) if item.food && item.cooked.is_none() => actions.push(Action::Cook(i, f)),
                            _ => {}
                        }
                    }
                    if item.food && !item.sliced && self.carrying("knife") {
                        actions.push(Action::Slice(i));
                    }
                }
                _ if self.visible(item) => actions.push(Action::Take(i)),
                _ => {}
            }
        }
        actions
    }

    /// Goal-directed choice: open what is closed, collect what is visible,
    /// cut and cook what is carried, otherwise explore.
    fn walkthrough_action(&self, rng: &mut ChaCha8Rng) -> Action {
        let actions = self.valid_actions();
        let rank = |a: &Action| match a {
            Action::Open(_) => 0,
            Action::Take(_) => 1,
            Action::Slice(_) => 2,
            Action::Cook(..) => 3,
            Action::Go(d) => {
                let n = self.rooms[self.player]
                    .neighbors
                    .iter()
                    .find(|(x, _)| x == d)
                    .map(|&(_, n)| n)
                    .unwrap();
                if self.visited.contains(&n) {
                    5
                } else {
                    4
                }
            }
            _ => 6,
        };
        let best = actions.iter().map(rank).min().unwrap();
        let top: Vec<&Action> = actions.iter().filter(|a| rank(a) == best).collect();
        (*top.choose(rng).unwrap()).clone()
    }

    fn act(&mut self, action: &Action) -> (String, String) {
        let (command, feedback) = match *action {
            Action::Go(d) => {
                let (_, n) = *self.rooms[self.player].neighbors.iter().find(|(x, _)| *x == d).unwrap();
                self.player = n;
                self.arrive();
                (
                    format!("go {}", d.name()),
                    format!("You go {}. {}", d.name(), self.describe()),
                )
            }
            Action::Open(f) => {
                self.furniture[f].open = true;
                self.observe();
                let name = self.furniture[f].name;
                let contents = self.contents(f);
                let inside = if contents.is_empty() {
                    format!("The {name} is empty.")
                } else {
                    format!("Inside the {name} you see {}.", list(&contents))
                };
                (format!("open {name}"), format!("You open the {name}. {inside}"))
            }
            Action::Close(f) => {
                self.furniture[f].open = false;
                let name = self.furniture[f].name;
                (format!("close {name}"), format!("You close the {name}."))
            }
            Action::Take(i) => {
                let from = match self.items[i].place {
                    Place::On(f) | Place::In(f) => self.furniture[f].name,
                    Place::Carried => unreachable!("taking a carried item"),
                };
                self.items[i].place = Place::Carried;
                let name = self.items[i].name;
                (
                    format!("take {name} from {from}"),
                    format!("You take the {name} from the {from}."),
                )
            }
            Action::Put(i, f) => {
                self.items[i].place = Place::On(f);
                let (name, on) = (self.items[i].name, self.furniture[f].name);
                (
                    format!("put {name} on {on}"),
                    format!("You put the {name} on the {on}."),
                )
            }
            Action::Slice(i) => {
                self.items[i].sliced = true;
                let name = self.items[i].name;
                (format!("slice {name} with knife"), format!("You slice the {name}."))
            }
            Action::Cook(i, f) => {
                let Kind::Cooker(verb, state) = self.furniture[f].kind else {
                    unreachable!("cooking on a non-cooker")
                };
                self.items[i].cooked = Some(state);
                let (name, on) = (self.items[i].name, self.furniture[f].name);
                (
                    format!("{verb} {name} with {on}"),
                    format!("You {verb} the {name} on the {on}. The {name} is now {state}."),
                )
            }
            Action::Look => ("look".to_string(), self.describe()),
            Action::Inventory => {
                let carried: Vec<String> = self
                    .items
                    .iter()
                    .filter(|i| i.place == Place::Carried)
                    .map(|i| format!("{} {}", article(i.name), i.name))
                    .collect();
                let text = if carried.is_empty() {
                    "You are carrying nothing.".to_string()
                } else {
                    format!("You are carrying {}.", list(&carried))
                };
                ("inventory".to_string(), text)
            }
        };
        (command, feedback)
    }
}

fn diff(before: &BTreeSet<RdfTriple>, after: &BTreeSet<RdfTriple>) -> Vec<UpdateCommand> {
    let deletes = before
        .difference(after)
        .map(|t| UpdateCommand::delete(&t.subject, &t.object, &t.relation));
    let adds = after
        .difference(before)
        .map(|t| UpdateCommand::add(&t.subject, &t.object, &t.relation));
    deletes.chain(adds).collect()
}

fn record(
    game_id: &str,
    (w, r): (usize, usize),
    action: String,
    observation: String,
    before: &BTreeSet<RdfTriple>,
    after: &BTreeSet<RdfTriple>,
) -> RawExample {
    RawExample {
        game_id: game_id.to_string(),
        walkthrough_step: w as u32,
        random_step: r as u32,
        observation,
        previous_action: action,
        previous_graph: before.clone(),
        target_commands: diff(before, after),
    }
}

/// Generates `config.examples()` examples, deterministic in the seed.
pub fn generate(config: &SynthConfig) -> Vec<RawExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut examples = Vec::with_capacity(config.examples());
    for g in 0..config.games {
        let game_id = format!("synth-{}-{g}", config.seed);
        let mut world = World::random(&mut rng);
        let mut seen = BTreeSet::new();
        for w in 0..config.walkthrough_steps {
            let (action, observation) = if w == 0 {
                ("restart".to_string(), world.describe())
            } else {
                let action = world.walkthrough_action(&mut rng);
                world.act(&action)
            };
            let after = world.seen_graph();
            examples.push(record(&game_id, (w, 0), action, observation, &seen, &after));
            seen = after;
            let mut branch = world.clone();
            let mut branch_seen = seen.clone();
            for r in 1..=config.random_steps {
                let action = branch.valid_actions().choose(&mut rng).unwrap().clone();
                let (command, observation) = branch.act(&action);
                let after = branch.seen_graph();
                examples.push(record(&game_id, (w, r), command, observation, &branch_seen, &after));
                branch_seen = after;
            }
        }
    }
    examples
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{build_corpus, PreprocessConfig, RuleTokenizer};

    #[test]
    fn deterministic_and_sized() {
        let cfg = SynthConfig::default();
        let a = generate(&cfg);
        assert_eq!(a.len(), 100);
        assert_eq!(a, generate(&cfg));
        assert_ne!(a, generate(&SynthConfig { seed: 1, ..cfg }));
        assert!(a[0].previous_graph.is_empty());
        assert_eq!(a[0].previous_action, "restart");
    }

    #[test]
    fn replays_cleanly_in_both_modes() {
        let examples = generate(&SynthConfig {
            games: 6,
            seed: 11,
            ..SynthConfig::default()
        });
        for multi_mode in [false, true] {
            let cfg = PreprocessConfig {
                multi_mode,
                strict: true,
                ..PreprocessConfig::default()
            };
            let corpus = build_corpus(&examples, &cfg.rules(&examples), cfg.apply_mode(), &RuleTokenizer).unwrap();
            assert_eq!(corpus.datapoints.len(), examples.len());
            assert_eq!(corpus.trajectories.len(), 6 * 5);
        }
    }
}
