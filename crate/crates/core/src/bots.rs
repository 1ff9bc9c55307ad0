//! Scripted module users.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::rules::{directions_in_class, nearest, ActionClass, RuleBase, RuleContext};
use crate::session::{Episode, ModuleSession};
use crate::world::{Action, EventKind, ObjectKind, Percept};

/// A bot treats an action as dangerous once this share of its tries killed it.
pub const BOT_RISK: f64 = 0.2;
/// Fruitless tries at one exact spot before a bot stops repeating an action there.
pub const GIVE_UP_AFTER: u32 = 2;

/// Exact spot relative to the nearest object and the concrete action taken
/// there; finer than a rule context.
type Spot = (Option<u8>, i32, i32, bool, Action);

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    tries: u32,
    useful: u32,
    deaths: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub initial: f64,
    pub decay: f64,
    pub floor: f64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        EpsilonSchedule {
            initial: 1.0,
            decay: 0.985,
            floor: 0.1,
        }
    }
}

impl EpsilonSchedule {
    pub fn constant(epsilon: f64) -> EpsilonSchedule {
        EpsilonSchedule {
            initial: epsilon,
            decay: 1.0,
            floor: epsilon,
        }
    }

    pub fn at(&self, episode: u32) -> f64 {
        (self.initial * self.decay.powi(episode as i32))
            .max(self.floor)
            .clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Random,
    EpsilonGreedy,
}

impl PolicyKind {
    pub fn parse(name: &str) -> Option<PolicyKind> {
        match name {
            "random" => Some(PolicyKind::Random),
            "egreedy" | "epsilon_greedy" | "epsilon-greedy" => Some(PolicyKind::EpsilonGreedy),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Policy {
    pub kind: PolicyKind,
    pub schedule: EpsilonSchedule,
    episode: u32,
    rng: ChaCha8Rng,
    knowledge: RuleBase,
    /// What happened at each exact spot, remembered on top of the rules.
    spots: BTreeMap<Spot, Tally>,
}

impl Policy {
    pub fn new(kind: PolicyKind, schedule: EpsilonSchedule, seed: u64) -> Policy {
        Policy {
            kind,
            schedule,
            episode: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            knowledge: RuleBase::new(),
            spots: BTreeMap::new(),
        }
    }

    pub fn random(seed: u64) -> Policy {
        Policy::new(PolicyKind::Random, EpsilonSchedule::constant(1.0), seed)
    }

    pub fn epsilon_greedy(seed: u64) -> Policy {
        Policy::new(PolicyKind::EpsilonGreedy, EpsilonSchedule::default(), seed)
    }

    pub fn with_knowledge(mut self, knowledge: RuleBase) -> Policy {
        self.knowledge = knowledge;
        self
    }

    pub fn knowledge(&self) -> &RuleBase {
        &self.knowledge
    }

    pub fn epsilon(&self) -> f64 {
        match self.kind {
            PolicyKind::Random => 1.0,
            PolicyKind::EpsilonGreedy => self.schedule.at(self.episode),
        }
    }

    pub fn start_episode(&mut self, episode: u32) {
        self.episode = episode;
    }

    pub fn decide(&mut self, percepts: &[Percept], attached: bool) -> Action {
        if self.kind == PolicyKind::Random || self.rng.gen::<f64>() < self.epsilon() {
            return *Action::ALL.choose(&mut self.rng).unwrap();
        }
        self.exploit(percepts, attached)
    }

    /// Best useful action the private rules know for this context; failing
    /// that, a safe move, leaning toward the nearest object.
    fn exploit(&mut self, percepts: &[Percept], attached: bool) -> Action {
        let context = RuleContext::of_percepts(percepts, attached);
        let reference = nearest(percepts).copied();
        let classes: Vec<ActionClass> = ActionClass::ALL
            .into_iter()
            .filter(|c| match (c, reference) {
                (ActionClass::MoveFree, r) => r.is_none(),
                (c, None) if c.is_move() => false,
                (c, Some(p)) if c.is_move() => !directions_in_class(*c, p.dx, p.dy).is_empty(),
                _ => true,
            })
            .collect();
        let safe: Vec<ActionClass> = classes
            .iter()
            .copied()
            .filter(|&c| {
                self.knowledge
                    .confidence(&context, c, EventKind::AgentDestroyed)
                    < BOT_RISK
            })
            .collect();
        let pool = if safe.is_empty() { classes } else { safe };

        let useful: BTreeSet<EventKind> = EventKind::USEFUL.into_iter().collect();
        let best = self
            .knowledge
            .query(&context, &useful)
            .into_iter()
            .find(|r| {
                pool.contains(&r.action)
                    && r.confidence > 0.0
                    && r.action
                        .concrete()
                        .is_none_or(|a| !self.fruitless(spot(reference.as_ref(), attached, a)))
            });
        let class = match best {
            Some(r) => r.action,
            None => {
                let moves: Vec<ActionClass> =
                    pool.iter().copied().filter(|c| c.is_move()).collect();
                if pool.contains(&ActionClass::MoveToward) && self.rng.gen_bool(0.5) {
                    ActionClass::MoveToward
                } else if !moves.is_empty() && self.rng.gen_bool(0.5) {
                    *moves.choose(&mut self.rng).unwrap()
                } else {
                    *pool.choose(&mut self.rng).unwrap()
                }
            }
        };
        self.concretize(class, reference.as_ref(), attached)
    }

    fn fruitless(&self, spot: Spot) -> bool {
        self.spots
            .get(&spot)
            .is_some_and(|t| t.useful == 0 && t.tries >= GIVE_UP_AFTER)
    }

    fn fatal(&self, spot: Spot) -> bool {
        self.spots.get(&spot).is_some_and(|t| t.deaths > 0)
    }

    /// Pick a concrete action for a class, avoiding moves that killed the
    /// bot from this exact spot before.
    fn concretize(
        &mut self,
        class: ActionClass,
        reference: Option<&Percept>,
        attached: bool,
    ) -> Action {
        if let Some(a) = class.concrete() {
            return a;
        }
        let dirs = match reference {
            Some(p) => directions_in_class(class, p.dx, p.dy),
            None => crate::world::Direction::ALL.to_vec(),
        };
        let survivable: Vec<_> = dirs
            .iter()
            .copied()
            .filter(|&d| !self.fatal(spot(reference, attached, Action::Move(d))))
            .collect();
        let choices = if survivable.is_empty() {
            dirs
        } else {
            survivable
        };
        Action::Move(*choices.choose(&mut self.rng).unwrap())
    }

    /// Fold one observed step into the private rules.
    pub fn observe(
        &mut self,
        percepts: &[Percept],
        attached: bool,
        action: Action,
        events: &[crate::world::Event],
    ) {
        if self.kind != PolicyKind::EpsilonGreedy {
            return;
        }
        let context = RuleContext::of_percepts(percepts, attached);
        let reference = nearest(percepts);
        let class = ActionClass::classify(action, reference);
        let outcomes: BTreeSet<EventKind> = events.iter().map(|e| e.kind()).collect();
        let tally = self
            .spots
            .entry(spot(reference, attached, action))
            .or_default();
        tally.tries += 1;
        if outcomes.iter().any(|o| o.is_useful()) {
            tally.useful += 1;
        }
        if outcomes.contains(&EventKind::AgentDestroyed) {
            tally.deaths += 1;
        }
        self.knowledge.record(context, class, &outcomes);
    }
}

fn spot(reference: Option<&Percept>, attached: bool, action: Action) -> Spot {
    match reference {
        Some(p) => (Some(p.shape_id), p.dx, p.dy, attached, action),
        None => (None, 0, 0, attached, action),
    }
}

/// Drive `session` until it has closed `n_episodes` more episodes.
pub fn run_bot(
    session: &mut ModuleSession,
    policy: &mut Policy,
    n_episodes: usize,
) -> Vec<Episode> {
    let start = session.closed_count();
    let target = start + n_episodes.max(1);
    let mut percepts = session.percepts();
    while session.closed_count() < target {
        policy.start_episode(session.episode_index());
        let attached = session.attached();
        let action = policy.decide(&percepts, attached);
        let (next, events) = session.act(action).expect("bot drives an open session");
        policy.observe(&percepts, attached, action, &events);
        percepts = next;
    }
    session.export_episodes()[start..target].to_vec()
}

/// Session seed for one module in a training run.
pub fn module_seed(kind: ObjectKind, seed: u64) -> u64 {
    seed.wrapping_mul(1000).wrapping_add(kind.shape_id() as u64)
}

/// Module id for a kind; names the shape only, never the behaviour.
pub fn module_name(kind: ObjectKind) -> String {
    format!("module-{}", kind.shape_id())
}

/// Train one epsilon-greedy bot on one module for `episodes` episodes.
pub fn train_module(kind: ObjectKind, seed: u64, episodes: usize) -> Vec<Episode> {
    let mut session = ModuleSession::open(module_name(kind), kind, module_seed(kind, seed));
    let mut policy = Policy::epsilon_greedy(seed);
    run_bot(&mut session, &mut policy, episodes)
}

/// One bot per object kind, their inductions merged: what a centre holds
/// after every module has reported once.
pub fn train_all(seed: u64, episodes: usize) -> RuleBase {
    ObjectKind::ALL
        .into_iter()
        .map(|kind| crate::rules::induce(&train_module(kind, seed, episodes)))
        .fold(RuleBase::new(), |acc, rb| acc.merge(&rb))
}
