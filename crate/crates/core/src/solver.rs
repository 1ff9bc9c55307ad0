//! The mission: cross a crowded field to the target using nothing but a
//! frozen rule base. The solver never looks at object automata; it sees
//! percepts, its own position and power, and the target.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::rules::{
    directions_in_class, nearest, ActionClass, DistanceBucket, RuleBase, RuleContext,
};
use crate::world::{
    line_cells, Action, Alignment, Direction, Event, EventKind, ObjectId, ObjectKind, Percept,
    Placement, Pos, WorldConfig, WorldState, CONVEY_CELLS, MAX_SPEED_BONUS,
};

pub const RISK_THRESHOLD: f64 = 0.2;
pub const USEFUL_THRESHOLD: f64 = 0.3;
pub const PERSISTENCE: u32 = 4;
/// Cells around start and target kept free of objects.
pub const CLEAR_RADIUS: i32 = 4;
/// Distance-equivalent cost of each earlier visit to a cell; keeps the
/// greedy walker from pacing in front of a blocked corridor.
const REVISIT_COST: i32 = 1;

/// Object counts in a mission field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectMix {
    pub destroyer: u32,
    pub sticker: u32,
    pub power_supply: u32,
    pub conveyor: u32,
}

impl ObjectMix {
    pub fn total(&self) -> u32 {
        self.destroyer + self.sticker + self.power_supply + self.conveyor
    }

    fn kinds(&self) -> Vec<ObjectKind> {
        let mut out = Vec::with_capacity(self.total() as usize);
        for (kind, n) in [
            (ObjectKind::Destroyer, self.destroyer),
            (ObjectKind::Sticker, self.sticker),
            (ObjectKind::PowerSupply, self.power_supply),
            (ObjectKind::Conveyor, self.conveyor),
        ] {
            out.extend(std::iter::repeat_n(kind, n as usize));
        }
        out
    }
}

impl Default for ObjectMix {
    fn default() -> Self {
        ObjectMix {
            destroyer: 40,
            sticker: 40,
            power_supply: 25,
            conveyor: 15,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MissionConfig {
    pub width: i32,
    pub height: i32,
    pub tick_budget: u32,
    pub sensing_radius: i32,
    pub mix: ObjectMix,
    pub seed: u64,
}

impl Default for MissionConfig {
    fn default() -> Self {
        MissionConfig {
            width: 48,
            height: 48,
            tick_budget: 600,
            sensing_radius: 8,
            mix: ObjectMix::default(),
            seed: 0,
        }
    }
}

impl MissionConfig {
    /// The standard field for one suite seed.
    pub fn suite(seed: u64) -> MissionConfig {
        MissionConfig {
            seed,
            ..MissionConfig::default()
        }
    }

    /// Lay out the field: agent near the west edge, target near the east
    /// edge, objects scattered outside the clear zones around both.
    pub fn world_config(&self) -> Result<WorldConfig> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let (w, h) = (self.width, self.height);
        let start = Pos::new(1, rng.gen_range(1..(h - 1).max(2)));
        let target = Pos::new(w - 2, rng.gen_range(1..(h - 1).max(2)));
        let mut free: Vec<Pos> = (0..w)
            .flat_map(|x| (0..h).map(move |y| Pos::new(x, y)))
            .filter(|p| p.chebyshev(start) > CLEAR_RADIUS && p.chebyshev(target) > CLEAR_RADIUS)
            .collect();
        free.shuffle(&mut rng);
        let kinds = self.mix.kinds();
        if kinds.len() > free.len() {
            return Err(crate::Error::InvalidConfig(format!(
                "{} objects do not fit in a {w}x{h} field",
                kinds.len()
            )));
        }
        let objects = kinds
            .into_iter()
            .zip(free)
            .map(|(kind, pos)| Placement { kind, pos })
            .collect();
        let config = WorldConfig {
            width: w,
            height: h,
            tick_budget: self.tick_budget,
            sensing_radius: self.sensing_radius,
            objects,
            agent_start: start,
            target_pos: target,
            seed: self.seed,
        };
        config.validate()?;
        Ok(config)
    }
}

/// Everything the solver may look at in one tick.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Situation {
    pub percepts: Vec<Percept>,
    pub attached: bool,
    pub agent_pos: Pos,
    pub target: Pos,
    pub width: i32,
    pub height: i32,
    pub power: u32,
}

impl Situation {
    pub fn of_world(world: &WorldState) -> Situation {
        Situation {
            percepts: world.sense(),
            attached: world.attached_to.is_some(),
            agent_pos: world.agent_pos,
            target: world.config.target_pos,
            width: world.config.width,
            height: world.config.height,
            power: world.agent_power,
        }
    }

    fn in_bounds(&self, p: Pos) -> bool {
        p.x >= 0 && p.y >= 0 && p.x < self.width && p.y < self.height
    }

    fn speed(&self) -> u32 {
        1 + self.power.min(MAX_SPEED_BONUS)
    }

    /// Where a move would end, judged from what is visible.
    fn landing(&self, dir: Direction) -> Pos {
        let mut pos = self.agent_pos;
        for _ in 0..self.speed() {
            let next = pos.step(dir);
            let occupied = self
                .percepts
                .iter()
                .any(|p| Pos::new(self.agent_pos.x + p.dx, self.agent_pos.y + p.dy) == next);
            if !self.in_bounds(next) || occupied {
                break;
            }
            pos = next;
            if pos == self.target {
                break;
            }
        }
        pos
    }

    /// Where a conveyor next to the agent would drop it: up to
    /// [`CONVEY_CELLS`] along the straight line to the target, passing over
    /// the conveyor itself and stopping short of anything else.
    fn convey_landing(&self, conveyor: Option<&Percept>) -> Pos {
        let at = |p: &Percept| Pos::new(self.agent_pos.x + p.dx, self.agent_pos.y + p.dy);
        let skip = conveyor.map(at);
        let mut pos = self.agent_pos;
        for cell in line_cells(self.agent_pos, self.target)
            .into_iter()
            .take(CONVEY_CELLS as usize)
        {
            if Some(cell) == skip {
                continue;
            }
            if !self.in_bounds(cell) || self.percepts.iter().any(|p| at(p) == cell) {
                break;
            }
            pos = cell;
        }
        pos
    }

    /// Percepts as they would read from `pos`.
    fn percepts_from(&self, pos: Pos) -> impl Iterator<Item = Percept> + '_ {
        let (sx, sy) = (pos.x - self.agent_pos.x, pos.y - self.agent_pos.y);
        self.percepts
            .iter()
            .map(move |p| Percept::from_offset(p.id, p.shape_id, p.dx - sx, p.dy - sy))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reason {
    Release,
    Useful,
    Greedy,
    Wait,
}

/// The rule a decision rests on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Justification {
    pub context: RuleContext,
    pub action: ActionClass,
    pub outcome: EventKind,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub tick: u32,
    pub action: Action,
    pub reason: Reason,
    pub rule: Option<Justification>,
    /// Moves ruled out as dangerous this tick.
    pub forbidden: Vec<Direction>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Reached,
    Destroyed,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionResult {
    pub outcome: Outcome,
    pub ticks: u32,
    /// Agent position before the first tick and after each tick.
    pub trajectory: Vec<Pos>,
    pub decisions: Vec<Decision>,
}

impl MissionResult {
    pub fn actions(&self) -> Vec<Action> {
        self.decisions.iter().map(|d| d.action).collect()
    }
}

/// A skill being carried out over several ticks.
#[derive(Debug, Clone)]
struct Commitment {
    object: Option<ObjectId>,
    origin: Pos,
    class: ActionClass,
    rule: Justification,
    ticks_left: u32,
}

/// Reactive, rule-guided agent. Keeps only what it needs to persist with a
/// skill and to avoid retrying skills that did not work from the same spot.
#[derive(Debug, Clone)]
pub struct Solver<'a> {
    rules: &'a RuleBase,
    commitment: Option<Commitment>,
    /// Skills given up on, by object, spot and action.
    abandoned: BTreeSet<(Option<ObjectId>, Pos, ActionClass)>,
    visits: BTreeMap<Pos, i32>,
}

impl<'a> Solver<'a> {
    pub fn new(rules: &'a RuleBase) -> Solver<'a> {
        Solver {
            rules,
            commitment: None,
            abandoned: BTreeSet::new(),
            visits: BTreeMap::new(),
        }
    }

    fn dangerous(&self, context: RuleContext) -> bool {
        danger_confidence(self.rules, context) >= RISK_THRESHOLD
    }

    /// Moves whose landing cell puts some visible object in a context that
    /// has killed before.
    pub fn forbidden_moves(&self, s: &Situation) -> Vec<Direction> {
        Direction::ALL
            .into_iter()
            .filter(|&d| {
                let landing = s.landing(d);
                landing != s.agent_pos && self.unsafe_at(s, landing)
            })
            .collect()
    }

    /// Whether standing on `pos` would put a visible object in a context
    /// that has killed before.
    fn unsafe_at(&self, s: &Situation, pos: Pos) -> bool {
        s.percepts_from(pos)
            .any(|p| self.dangerous(RuleContext::of_percept(&p, s.attached)))
    }

    /// Best rule for `percept` toward one of `goals` above the usefulness
    /// threshold, skipping skills already abandoned here.
    fn best_rule(
        &self,
        s: &Situation,
        percept: Option<&Percept>,
        goals: &BTreeSet<EventKind>,
    ) -> Option<Justification> {
        let context = match percept {
            Some(p) => RuleContext::of_percept(p, s.attached),
            None => RuleContext {
                attached: s.attached,
                ..RuleContext::EMPTY
            },
        };
        let object = percept.map(|p| p.id);
        self.rules
            .query(&context, goals)
            .into_iter()
            .find(|r| {
                r.confidence >= USEFUL_THRESHOLD
                    && !self.abandoned.contains(&(object, s.agent_pos, r.action))
                    && !(r.outcome == EventKind::Conveyed
                        && self.unsafe_at(s, s.convey_landing(percept)))
            })
            .map(|r| Justification {
                context,
                action: r.action,
                outcome: r.outcome,
                confidence: r.confidence,
            })
    }

    fn concretize(
        &self,
        s: &Situation,
        class: ActionClass,
        reference: Option<&Percept>,
        forbidden: &[Direction],
    ) -> Option<Action> {
        if let Some(a) = class.concrete() {
            return Some(a);
        }
        let dirs = match reference {
            Some(p) => directions_in_class(class, p.dx, p.dy),
            None => Direction::ALL.to_vec(),
        };
        dirs.into_iter()
            .filter(|d| !forbidden.contains(d))
            .min_by_key(|&d| s.landing(d).chebyshev(s.target))
            .map(Action::Move)
    }

    /// Decide the next action. Call [`Solver::observe`] with the resulting
    /// events before deciding again.
    pub fn decide(&mut self, s: &Situation, tick: u32) -> Decision {
        let forbidden = self.forbidden_moves(s);
        let decision = |action, reason, rule| Decision {
            tick,
            action,
            reason,
            rule,
            forbidden: forbidden.clone(),
        };
        let near = nearest(&s.percepts);

        // Keep going with a skill already under way.
        if let Some(c) = self.commitment.take() {
            let reference = s.percepts.iter().find(|p| Some(p.id) == c.object);
            let still_valid = c.origin == s.agent_pos
                && c.ticks_left > 0
                && (c.object.is_none() || reference.is_some())
                && (c.rule.outcome == EventKind::Released) == s.attached;
            if still_valid {
                if let Some(action) = self.concretize(s, c.class, reference, &forbidden) {
                    let reason = if s.attached {
                        Reason::Release
                    } else {
                        Reason::Useful
                    };
                    let rule = c.rule.clone();
                    self.commitment = Some(c);
                    return decision(action, reason, Some(rule));
                }
            }
        }

        // Attached: any adjacent object may be the one holding on.
        let candidate = if s.attached {
            let goals = BTreeSet::from([EventKind::Released]);
            s.percepts
                .iter()
                .filter(|p| p.distance == 1)
                .filter_map(|p| self.best_rule(s, Some(p), &goals).map(|r| (p, r)))
                .min_by(|(pa, a), (pb, b)| {
                    b.confidence
                        .total_cmp(&a.confidence)
                        .then(a.action.cmp(&b.action))
                        .then(pa.id.cmp(&pb.id))
                })
        } else {
            let goals = BTreeSet::from([
                EventKind::ObjectDestroyed,
                EventKind::PowerGained,
                EventKind::Conveyed,
            ]);
            near.and_then(|p| self.best_rule(s, Some(p), &goals).map(|r| (p, r)))
        };
        if let Some((p, rule)) = candidate {
            if let Some(action) = self.concretize(s, rule.action, Some(p), &forbidden) {
                self.commitment = Some(Commitment {
                    object: Some(p.id),
                    origin: s.agent_pos,
                    class: rule.action,
                    rule: rule.clone(),
                    ticks_left: PERSISTENCE,
                });
                let reason = if s.attached {
                    Reason::Release
                } else {
                    Reason::Useful
                };
                return decision(action, reason, Some(rule));
            }
        }

        let best = Direction::ALL
            .into_iter()
            .filter(|d| !forbidden.contains(d))
            .map(|d| (d, s.landing(d)))
            .filter(|&(_, p)| p != s.agent_pos)
            .min_by_key(|&(_, p)| {
                p.chebyshev(s.target) + REVISIT_COST * self.visits.get(&p).copied().unwrap_or(0)
            });
        match best {
            Some((d, _)) => decision(Action::Move(d), Reason::Greedy, None),
            None => decision(Action::Wait, Reason::Wait, None),
        }
    }

    /// Feed back the events of the last decided action.
    pub fn observe(&mut self, before: &Situation, events: &[Event], after: Pos) {
        *self.visits.entry(after).or_insert(0) += 1;
        let Some(c) = self.commitment.as_mut() else {
            return;
        };
        if events.iter().any(|e| e.kind() == c.rule.outcome) {
            self.commitment = None;
            return;
        }
        c.ticks_left -= 1;
        if c.ticks_left == 0 {
            self.abandoned.insert((c.object, before.agent_pos, c.class));
            self.commitment = None;
        }
    }
}

/// Pooled death rate of `context`, generalizing when it was never seen:
/// first over the attached flag, then over the two axes, then over the
/// adjacent and near distances. The first level with any support answers.
pub fn danger_confidence(rules: &RuleBase, context: RuleContext) -> f64 {
    let attached = [context.attached, !context.attached];
    let alignments = match context.alignment {
        Alignment::AxisH | Alignment::AxisV => vec![Alignment::AxisH, Alignment::AxisV],
        a => vec![a],
    };
    let distances = match context.distance {
        DistanceBucket::Adjacent | DistanceBucket::Near => {
            vec![DistanceBucket::Adjacent, DistanceBucket::Near]
        }
        d => vec![d],
    };
    let levels: [(&[bool], &[Alignment], &[DistanceBucket]); 4] = [
        (&attached[..1], &alignments[..1], &distances[..1]),
        (&attached, &alignments[..1], &distances[..1]),
        (&attached, &alignments, &distances[..1]),
        (&attached, &alignments, &distances),
    ];
    for (atts, aligns, dists) in levels {
        let (mut support, mut hits) = (0u64, 0u64);
        for &attached in atts {
            for &alignment in aligns {
                for &distance in dists {
                    let ctx = RuleContext {
                        attached,
                        alignment,
                        distance,
                        ..context
                    };
                    for (_, stats) in rules.in_context(ctx) {
                        support += stats.support;
                        hits += stats
                            .hits
                            .get(&EventKind::AgentDestroyed)
                            .copied()
                            .unwrap_or(0);
                    }
                }
            }
        }
        if support > 0 {
            return hits as f64 / support as f64;
        }
    }
    0.0
}

/// One stateless decision: what a fresh solver would do here.
pub fn choose_action(situation: &Situation, rules: &RuleBase) -> Action {
    Solver::new(rules).decide(situation, 0).action
}

/// Run the mission to the end with frozen rules.
pub fn solve(config: &MissionConfig, rules: &RuleBase) -> Result<MissionResult> {
    let mut world = WorldState::create(config.world_config()?)?;
    let mut solver = Solver::new(rules);
    let mut trajectory = vec![world.agent_pos];
    let mut decisions = Vec::new();
    let outcome = loop {
        if world.at_target() {
            break Outcome::Reached;
        }
        if !world.agent_alive {
            break Outcome::Destroyed;
        }
        if world.tick >= world.config.tick_budget {
            break Outcome::Timeout;
        }
        let situation = Situation::of_world(&world);
        let decision = solver.decide(&situation, world.tick);
        let events = world.step(decision.action)?;
        solver.observe(&situation, &events, world.agent_pos);
        trajectory.push(world.agent_pos);
        decisions.push(decision);
    };
    Ok(MissionResult {
        outcome,
        ticks: world.tick,
        trajectory,
        decisions,
    })
}

/// Fraction of missions over `seeds` that reach the target.
pub fn success_rate(seeds: impl IntoIterator<Item = u64>, rules: &RuleBase) -> Result<f64> {
    let (mut reached, mut total) = (0usize, 0usize);
    for seed in seeds {
        total += 1;
        if solve(&MissionConfig::suite(seed), rules)?.outcome == Outcome::Reached {
            reached += 1;
        }
    }
    Ok(if total == 0 {
        0.0
    } else {
        reached as f64 / total as f64
    })
}

/// A rule base written down from the known object behaviours rather than
/// learned. Counts are nominal.
pub fn oracle_rulebase() -> RuleBase {
    const N: u64 = 20;
    let mut rb = RuleBase::new();
    let ctx = |shape: ObjectKind, distance, alignment, attached| RuleContext {
        shape_id: Some(shape.shape_id()),
        distance,
        alignment,
        attached,
    };
    let near = [DistanceBucket::Adjacent, DistanceBucket::Near];
    for attached in [false, true] {
        for d in near {
            // On a destroyer's axis nothing saves the agent.
            for al in [Alignment::AxisH, Alignment::AxisV] {
                for a in ActionClass::ALL {
                    rb.insert(
                        ctx(ObjectKind::Destroyer, d, al, attached),
                        a,
                        EventKind::AgentDestroyed,
                        N,
                        N,
                    )
                    .expect("valid");
                }
            }
            rb.insert(
                ctx(ObjectKind::Destroyer, d, Alignment::Diagonal, attached),
                ActionClass::Fire,
                EventKind::ObjectDestroyed,
                N,
                N,
            )
            .expect("valid");
        }
    }
    for al in [Alignment::AxisH, Alignment::AxisV, Alignment::Diagonal] {
        let sticker = ctx(ObjectKind::Sticker, DistanceBucket::Adjacent, al, true);
        rb.insert(
            sticker,
            ActionClass::PushPull,
            EventKind::Released,
            N,
            N / 2,
        )
        .expect("valid");
        rb.insert(
            sticker,
            ActionClass::PushPull,
            EventKind::NoEffect,
            N,
            N / 2,
        )
        .expect("valid");
        let supply = ctx(ObjectKind::PowerSupply, DistanceBucket::Adjacent, al, false);
        rb.insert(supply, ActionClass::Touch, EventKind::PowerGained, N, N / 2)
            .expect("valid");
        rb.insert(supply, ActionClass::Touch, EventKind::Charging, N, N / 2)
            .expect("valid");
    }
    rb.insert(
        ctx(
            ObjectKind::Conveyor,
            DistanceBucket::Adjacent,
            Alignment::AxisH,
            false,
        ),
        ActionClass::Touch,
        EventKind::Conveyed,
        N,
        N,
    )
    .expect("valid");
    rb
}
