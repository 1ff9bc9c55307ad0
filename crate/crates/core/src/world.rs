//! Deterministic grid world: agent, target and the four hidden object automata.
//!
//! Coordinates are `(x, y)` with `y` growing northwards, so `Direction::N` is
//! `(0, +1)`. Distances are Chebyshev throughout.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-only lethal range of a destroyer.
pub const KILL_RANGE: i32 = 4;
/// Maximum diagonal distance from which a destroyer can be shot.
pub const FIRE_RANGE: i32 = 3;
/// Ticks of re-attach immunity after a sticker lets go.
pub const STICKER_IMMUNITY: u32 = 3;
/// Consecutive push-pull actions needed to break free.
pub const RELEASE_PRESSES: u32 = 2;
/// Consecutive touch ticks needed to draw one unit of power.
pub const TOUCH_TICKS: u32 = 2;
pub const POWER_CHARGES: u32 = 3;
pub const RECHARGE_TICKS: u32 = 1;
/// Cells a conveyor carries the agent toward the target.
pub const CONVEY_CELLS: i32 = 6;
pub const CONVEYOR_COOLDOWN: u32 = 10;
/// Extra cells per move granted by power, capped.
pub const MAX_SPEED_BONUS: u32 = 2;
pub const MIN_SIDE: i32 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Pos {
    pub x: i32,
    pub y: i32,
}

impl Pos {
    pub const fn new(x: i32, y: i32) -> Self {
        Pos { x, y }
    }

    pub fn offset(self, dx: i32, dy: i32) -> Pos {
        Pos::new(self.x + dx, self.y + dy)
    }

    pub fn step(self, dir: Direction) -> Pos {
        let (dx, dy) = dir.delta();
        self.offset(dx, dy)
    }

    /// Chebyshev distance.
    pub fn chebyshev(self, other: Pos) -> i32 {
        (self.x - other.x).abs().max((self.y - other.y).abs())
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Direction {
    N,
    NE,
    E,
    SE,
    S,
    SW,
    W,
    NW,
}

impl Direction {
    /// Clockwise order starting at north; also the solver's tie-break order.
    pub const ALL: [Direction; 8] = [
        Direction::N,
        Direction::NE,
        Direction::E,
        Direction::SE,
        Direction::S,
        Direction::SW,
        Direction::W,
        Direction::NW,
    ];

    pub fn delta(self) -> (i32, i32) {
        match self {
            Direction::N => (0, 1),
            Direction::NE => (1, 1),
            Direction::E => (1, 0),
            Direction::SE => (1, -1),
            Direction::S => (0, -1),
            Direction::SW => (-1, -1),
            Direction::W => (-1, 0),
            Direction::NW => (-1, 1),
        }
    }

    fn index(self) -> usize {
        Direction::ALL.iter().position(|d| *d == self).unwrap()
    }

    pub fn rotate_cw90(self) -> Direction {
        Direction::ALL[(self.index() + 2) % 8]
    }

    pub fn opposite(self) -> Direction {
        Direction::ALL[(self.index() + 4) % 8]
    }

    /// Octant containing the vector `(dx, dy)`; `None` for the zero vector.
    ///
    /// Exact integer test: a vector is axis-like when the minor component is
    /// below `tan(22.5°)` of the major one, i.e. `(major + minor)² < 2·major²`.
    pub fn octant(dx: i32, dy: i32) -> Option<Direction> {
        if dx == 0 && dy == 0 {
            return None;
        }
        let (ax, ay) = (dx.abs() as i64, dy.abs() as i64);
        let horizontal = (ax + ay) * (ax + ay) < 2 * ax * ax;
        let vertical = (ax + ay) * (ax + ay) < 2 * ay * ay;
        let dir = if horizontal {
            if dx > 0 {
                Direction::E
            } else {
                Direction::W
            }
        } else if vertical {
            if dy > 0 {
                Direction::N
            } else {
                Direction::S
            }
        } else {
            match (dx > 0, dy > 0) {
                (true, true) => Direction::NE,
                (true, false) => Direction::SE,
                (false, true) => Direction::NW,
                (false, false) => Direction::SW,
            }
        };
        Some(dir)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alignment {
    AxisH,
    AxisV,
    Diagonal,
    None,
}

impl Alignment {
    pub fn of(dx: i32, dy: i32) -> Alignment {
        if dy == 0 {
            Alignment::AxisH
        } else if dx == 0 {
            Alignment::AxisV
        } else if dx.abs() == dy.abs() {
            Alignment::Diagonal
        } else {
            Alignment::None
        }
    }

    pub fn is_axis(self) -> bool {
        matches!(self, Alignment::AxisH | Alignment::AxisV)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectKind {
    Destroyer,
    Sticker,
    PowerSupply,
    Conveyor,
}

impl ObjectKind {
    pub const ALL: [ObjectKind; 4] = [
        ObjectKind::Destroyer,
        ObjectKind::Sticker,
        ObjectKind::PowerSupply,
        ObjectKind::Conveyor,
    ];

    /// The glyph sensors report. One shape per kind, but the learner is never
    /// told which is which.
    pub fn shape_id(self) -> u8 {
        match self {
            ObjectKind::Destroyer => 1,
            ObjectKind::Sticker => 2,
            ObjectKind::PowerSupply => 3,
            ObjectKind::Conveyor => 4,
        }
    }

    pub fn from_shape(shape_id: u8) -> Option<ObjectKind> {
        ObjectKind::ALL
            .into_iter()
            .find(|k| k.shape_id() == shape_id)
    }

    pub fn name(self) -> &'static str {
        match self {
            ObjectKind::Destroyer => "destroyer",
            ObjectKind::Sticker => "sticker",
            ObjectKind::PowerSupply => "power_supply",
            ObjectKind::Conveyor => "conveyor",
        }
    }

    pub fn parse(name: &str) -> Option<ObjectKind> {
        match name.to_ascii_lowercase().replace('-', "_").as_str() {
            "destroyer" => Some(ObjectKind::Destroyer),
            "sticker" => Some(ObjectKind::Sticker),
            "power_supply" | "powersupply" | "power" => Some(ObjectKind::PowerSupply),
            "conveyor" => Some(ObjectKind::Conveyor),
            _ => None,
        }
    }

    pub fn initial_state(self) -> BehaviorState {
        match self {
            ObjectKind::Destroyer => BehaviorState::Destroyer,
            ObjectKind::Sticker => BehaviorState::Sticker {
                attach_cooldown: 0,
                pull_streak: 0,
            },
            ObjectKind::PowerSupply => BehaviorState::PowerSupply {
                charges_left: POWER_CHARGES,
                touch_streak: 0,
                recharge: 0,
            },
            ObjectKind::Conveyor => BehaviorState::Conveyor { cooldown: 0 },
        }
    }
}

/// Hidden per-object counters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BehaviorState {
    Destroyer,
    Sticker {
        attach_cooldown: u32,
        pull_streak: u32,
    },
    PowerSupply {
        charges_left: u32,
        touch_streak: u32,
        recharge: u32,
    },
    Conveyor {
        cooldown: u32,
    },
}

impl BehaviorState {
    pub fn kind(&self) -> ObjectKind {
        match self {
            BehaviorState::Destroyer => ObjectKind::Destroyer,
            BehaviorState::Sticker { .. } => ObjectKind::Sticker,
            BehaviorState::PowerSupply { .. } => ObjectKind::PowerSupply,
            BehaviorState::Conveyor { .. } => ObjectKind::Conveyor,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Move(Direction),
    Fire,
    Touch,
    PushPull,
    Wait,
}

impl Action {
    /// Every concrete action, moves first in direction order.
    pub const ALL: [Action; 12] = [
        Action::Move(Direction::N),
        Action::Move(Direction::NE),
        Action::Move(Direction::E),
        Action::Move(Direction::SE),
        Action::Move(Direction::S),
        Action::Move(Direction::SW),
        Action::Move(Direction::W),
        Action::Move(Direction::NW),
        Action::Fire,
        Action::Touch,
        Action::PushPull,
        Action::Wait,
    ];
}

pub type ObjectId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Percept {
    pub id: ObjectId,
    pub shape_id: u8,
    pub distance: i32,
    pub bearing: Direction,
    pub alignment: Alignment,
    /// Object position minus agent position.
    pub dx: i32,
    pub dy: i32,
}

impl Percept {
    pub fn from_offset(id: ObjectId, shape_id: u8, dx: i32, dy: i32) -> Percept {
        Percept {
            id,
            shape_id,
            distance: dx.abs().max(dy.abs()),
            bearing: Direction::octant(dx, dy).unwrap_or(Direction::N),
            alignment: Alignment::of(dx, dy),
            dx,
            dy,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Event {
    ObjectDestroyed { id: ObjectId },
    AgentDestroyed,
    Attached { id: ObjectId },
    Released { id: ObjectId },
    PowerGained { id: ObjectId },
    Charging { id: ObjectId },
    Conveyed { id: ObjectId, cells: i32 },
    Moved,
    Blocked,
    NoEffect,
}

/// Event with its payload stripped; the unit rules are counted over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    AgentDestroyed,
    Attached,
    Blocked,
    Charging,
    Conveyed,
    Moved,
    NoEffect,
    ObjectDestroyed,
    PowerGained,
    Released,
}

impl EventKind {
    pub const ALL: [EventKind; 10] = [
        EventKind::AgentDestroyed,
        EventKind::Attached,
        EventKind::Blocked,
        EventKind::Charging,
        EventKind::Conveyed,
        EventKind::Moved,
        EventKind::NoEffect,
        EventKind::ObjectDestroyed,
        EventKind::PowerGained,
        EventKind::Released,
    ];

    /// Outcomes a module user is trying to produce.
    pub const USEFUL: [EventKind; 4] = [
        EventKind::ObjectDestroyed,
        EventKind::PowerGained,
        EventKind::Conveyed,
        EventKind::Released,
    ];

    pub fn is_useful(self) -> bool {
        EventKind::USEFUL.contains(&self)
    }

    /// Bookkeeping feedback that carries no consequence by itself.
    pub fn is_neutral(self) -> bool {
        matches!(
            self,
            EventKind::Moved | EventKind::Blocked | EventKind::NoEffect | EventKind::Charging
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            EventKind::AgentDestroyed => "agent_destroyed",
            EventKind::Attached => "attached",
            EventKind::Blocked => "blocked",
            EventKind::Charging => "charging",
            EventKind::Conveyed => "conveyed",
            EventKind::Moved => "moved",
            EventKind::NoEffect => "no_effect",
            EventKind::ObjectDestroyed => "object_destroyed",
            EventKind::PowerGained => "power_gained",
            EventKind::Released => "released",
        }
    }

    pub fn parse(name: &str) -> Option<EventKind> {
        EventKind::ALL.into_iter().find(|k| k.name() == name)
    }
}

impl Event {
    pub fn kind(&self) -> EventKind {
        match self {
            Event::ObjectDestroyed { .. } => EventKind::ObjectDestroyed,
            Event::AgentDestroyed => EventKind::AgentDestroyed,
            Event::Attached { .. } => EventKind::Attached,
            Event::Released { .. } => EventKind::Released,
            Event::PowerGained { .. } => EventKind::PowerGained,
            Event::Charging { .. } => EventKind::Charging,
            Event::Conveyed { .. } => EventKind::Conveyed,
            Event::Moved => EventKind::Moved,
            Event::Blocked => EventKind::Blocked,
            Event::NoEffect => EventKind::NoEffect,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub kind: ObjectKind,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorldConfig {
    pub width: i32,
    pub height: i32,
    pub tick_budget: u32,
    pub sensing_radius: i32,
    pub objects: Vec<Placement>,
    pub agent_start: Pos,
    pub target_pos: Pos,
    pub seed: u64,
}

impl WorldConfig {
    pub fn in_bounds(&self, p: Pos) -> bool {
        p.x >= 0 && p.y >= 0 && p.x < self.width && p.y < self.height
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: String| Err(Error::InvalidConfig(msg));
        if self.width < MIN_SIDE || self.height < MIN_SIDE {
            return invalid(format!(
                "grid {}x{} is smaller than {MIN_SIDE}x{MIN_SIDE}",
                self.width, self.height
            ));
        }
        if self.sensing_radius < 1 {
            return invalid(format!("sensing radius {} < 1", self.sensing_radius));
        }
        if !self.in_bounds(self.agent_start) {
            return invalid(format!("agent start {} out of bounds", self.agent_start));
        }
        if !self.in_bounds(self.target_pos) {
            return invalid(format!("target {} out of bounds", self.target_pos));
        }
        if self.agent_start == self.target_pos {
            return invalid(format!(
                "agent start and target share cell {}",
                self.target_pos
            ));
        }
        let mut seen = BTreeMap::new();
        for (i, p) in self.objects.iter().enumerate() {
            if !self.in_bounds(p.pos) {
                return invalid(format!(
                    "object {i} ({}) at {} out of bounds",
                    p.kind.name(),
                    p.pos
                ));
            }
            if p.pos == self.agent_start {
                return invalid(format!(
                    "object {i} ({}) on agent start {}",
                    p.kind.name(),
                    p.pos
                ));
            }
            if p.pos == self.target_pos {
                return invalid(format!(
                    "object {i} ({}) on target {}",
                    p.kind.name(),
                    p.pos
                ));
            }
            if let Some(j) = seen.insert(p.pos, i) {
                return invalid(format!("objects {j} and {i} overlap at {}", p.pos));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorldObject {
    pub kind: ObjectKind,
    pub pos: Pos,
    pub state: BehaviorState,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorldState {
    pub config: Arc<WorldConfig>,
    pub tick: u32,
    pub agent_pos: Pos,
    pub agent_power: u32,
    pub attached_to: Option<ObjectId>,
    pub agent_alive: bool,
    pub objects: BTreeMap<ObjectId, WorldObject>,
}

/// How the agent relates to the sticker being resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    Free,
    ToThis,
    ToOther,
}

/// What an object automaton decided this tick. The world turns these into
/// effects and events.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reaction {
    Destroyed,
    Attach,
    Release,
    PowerGained,
    Charging,
    Convey,
}

/// Pure automaton step for one object. `offset` is the agent position minus
/// the object position, evaluated after the agent's action.
pub fn resolve_object_reaction(
    state: BehaviorState,
    offset: (i32, i32),
    link: Link,
    action: Action,
) -> (BehaviorState, Option<Reaction>) {
    let (dx, dy) = offset;
    let distance = dx.abs().max(dy.abs());
    match state {
        BehaviorState::Destroyer => {
            let hit = action == Action::Fire
                && Alignment::of(dx, dy) == Alignment::Diagonal
                && distance <= FIRE_RANGE;
            (state, hit.then_some(Reaction::Destroyed))
        }
        BehaviorState::Sticker {
            mut attach_cooldown,
            mut pull_streak,
        } => {
            let mut reaction = None;
            match link {
                Link::ToThis => {
                    if action == Action::PushPull {
                        pull_streak += 1;
                        if pull_streak >= RELEASE_PRESSES {
                            pull_streak = 0;
                            attach_cooldown = STICKER_IMMUNITY;
                            reaction = Some(Reaction::Release);
                        }
                    } else {
                        pull_streak = 0;
                    }
                }
                Link::Free | Link::ToOther => {
                    pull_streak = 0;
                    if attach_cooldown > 0 {
                        attach_cooldown -= 1;
                    } else if link == Link::Free && distance == 1 {
                        reaction = Some(Reaction::Attach);
                    }
                }
            }
            (
                BehaviorState::Sticker {
                    attach_cooldown,
                    pull_streak,
                },
                reaction,
            )
        }
        BehaviorState::PowerSupply {
            charges_left,
            mut touch_streak,
            mut recharge,
        } => {
            // A recharge tick cannot pay out; the streak restarted at the gain.
            let recharging = recharge > 0;
            recharge = recharge.saturating_sub(1);
            let mut reaction = None;
            let mut charges = charges_left;
            if action == Action::Touch && distance == 1 && charges > 0 {
                touch_streak += 1;
                if touch_streak >= TOUCH_TICKS && !recharging {
                    touch_streak = 0;
                    charges -= 1;
                    recharge = RECHARGE_TICKS;
                    reaction = Some(Reaction::PowerGained);
                } else {
                    reaction = Some(Reaction::Charging);
                }
            } else {
                touch_streak = 0;
            }
            (
                BehaviorState::PowerSupply {
                    charges_left: charges,
                    touch_streak,
                    recharge,
                },
                reaction,
            )
        }
        BehaviorState::Conveyor { mut cooldown } => {
            if cooldown > 0 {
                cooldown -= 1;
                return (BehaviorState::Conveyor { cooldown }, None);
            }
            let at_tip = dy == 0 && dx.abs() == 1;
            let fire = action == Action::Touch && at_tip && link == Link::Free;
            (
                BehaviorState::Conveyor { cooldown },
                fire.then_some(Reaction::Convey),
            )
        }
    }
}

/// Cells of the straight line from `from` toward `to`, excluding `from`,
/// ending at `to`. Every cell is one Chebyshev step closer to `to`.
pub fn line_cells(from: Pos, to: Pos) -> Vec<Pos> {
    let (dx, dy) = (to.x - from.x, to.y - from.y);
    let n = dx.abs().max(dy.abs());
    (1..=n)
        .map(|i| {
            // Round-half-away-from-zero of from + i·d/n, in integers.
            let lerp = |a: i32, d: i32| {
                let num = 2 * d * i + n * d.signum();
                a + num / (2 * n)
            };
            Pos::new(lerp(from.x, dx), lerp(from.y, dy))
        })
        .collect()
}

impl WorldState {
    pub fn create(config: WorldConfig) -> Result<WorldState> {
        config.validate()?;
        let objects = config
            .objects
            .iter()
            .enumerate()
            .map(|(i, p)| {
                (
                    i as ObjectId,
                    WorldObject {
                        kind: p.kind,
                        pos: p.pos,
                        state: p.kind.initial_state(),
                    },
                )
            })
            .collect();
        Ok(WorldState {
            tick: 0,
            agent_pos: config.agent_start,
            agent_power: 0,
            attached_to: None,
            agent_alive: true,
            objects,
            config: Arc::new(config),
        })
    }

    pub fn occupied(&self, p: Pos) -> bool {
        self.objects.values().any(|o| o.pos == p)
    }

    pub fn at_target(&self) -> bool {
        self.agent_pos == self.config.target_pos
    }

    pub fn speed(&self) -> u32 {
        1 + self.agent_power.min(MAX_SPEED_BONUS)
    }

    pub fn is_finished(&self) -> bool {
        !self.agent_alive || self.tick >= self.config.tick_budget
    }

    /// Where a move would actually take the agent, and the direction it is
    /// diverted into when attached.
    pub fn move_destination(&self, dir: Direction) -> (Direction, Pos) {
        let tether = self
            .attached_to
            .and_then(|id| self.objects.get(&id))
            .map(|o| o.pos);
        let dir = if tether.is_some() {
            dir.rotate_cw90()
        } else {
            dir
        };
        let mut pos = self.agent_pos;
        for _ in 0..self.speed() {
            let next = pos.step(dir);
            let tether_ok = tether.is_none_or(|t| next.chebyshev(t) == 1);
            if !self.config.in_bounds(next) || self.occupied(next) || !tether_ok {
                break;
            }
            pos = next;
            if pos == self.config.target_pos {
                break;
            }
        }
        (dir, pos)
    }

    /// Percepts of every object within the sensing radius, nearest first.
    pub fn sense(&self) -> Vec<Percept> {
        let mut out: Vec<Percept> = self
            .objects
            .iter()
            .filter_map(|(&id, o)| {
                let (dx, dy) = (o.pos.x - self.agent_pos.x, o.pos.y - self.agent_pos.y);
                let p = Percept::from_offset(id, o.kind.shape_id(), dx, dy);
                (p.distance <= self.config.sensing_radius).then_some(p)
            })
            .collect();
        out.sort_by_key(|p| (p.distance, p.id));
        out
    }

    /// Whether a live destroyer has the agent on one of its axes within range.
    pub fn under_fire(&self) -> bool {
        self.objects.values().any(|o| {
            o.kind == ObjectKind::Destroyer && {
                let (dx, dy) = (self.agent_pos.x - o.pos.x, self.agent_pos.y - o.pos.y);
                Alignment::of(dx, dy).is_axis() && dx.abs().max(dy.abs()) <= KILL_RANGE
            }
        })
    }

    /// Advance one tick.
    pub fn step(&mut self, action: Action) -> Result<Vec<Event>> {
        if !self.agent_alive {
            return Err(Error::Contract("step on a destroyed agent".into()));
        }
        if self.tick >= self.config.tick_budget {
            return Err(Error::Contract(format!(
                "step past tick budget {}",
                self.config.tick_budget
            )));
        }
        let mut events = Vec::new();

        if let Action::Move(dir) = action {
            let (_, dest) = self.move_destination(dir);
            if dest == self.agent_pos {
                events.push(Event::Blocked);
            } else {
                self.agent_pos = dest;
                events.push(Event::Moved);
            }
        }

        // Every object reacts to where the agent stood when it acted; a ride
        // on one conveyor cannot set off another in the same tick.
        let acted_from = self.agent_pos;
        let mut conveyed = false;
        let ids: Vec<ObjectId> = self.objects.keys().copied().collect();
        for id in ids {
            let Some(obj) = self.objects.get(&id) else {
                continue;
            };
            let offset = (acted_from.x - obj.pos.x, acted_from.y - obj.pos.y);
            let link = match self.attached_to {
                None => Link::Free,
                Some(a) if a == id => Link::ToThis,
                Some(_) => Link::ToOther,
            };
            let (state, reaction) = resolve_object_reaction(obj.state, offset, link, action);
            self.objects.get_mut(&id).unwrap().state = state;
            match reaction {
                None => {}
                Some(Reaction::Destroyed) => {
                    self.objects.remove(&id);
                    events.push(Event::ObjectDestroyed { id });
                }
                Some(Reaction::Attach) => {
                    self.attached_to = Some(id);
                    events.push(Event::Attached { id });
                }
                Some(Reaction::Release) => {
                    self.attached_to = None;
                    events.push(Event::Released { id });
                }
                Some(Reaction::Charging) => events.push(Event::Charging { id }),
                Some(Reaction::PowerGained) => {
                    self.agent_power += 1;
                    events.push(Event::PowerGained { id });
                    if matches!(
                        state,
                        BehaviorState::PowerSupply {
                            charges_left: 0,
                            ..
                        }
                    ) {
                        // Spent supplies expire.
                        self.objects.remove(&id);
                    }
                }
                Some(Reaction::Convey) if conveyed => {}
                Some(Reaction::Convey) => {
                    // The agent rides over the conveyor's own cell but never
                    // lands on it or passes another object.
                    let conveyor = self.objects[&id].pos;
                    let start = self.agent_pos;
                    let mut dest = start;
                    for cell in line_cells(start, self.config.target_pos)
                        .into_iter()
                        .take(CONVEY_CELLS as usize)
                    {
                        if cell == conveyor {
                            continue;
                        }
                        if !self.config.in_bounds(cell) || self.occupied(cell) {
                            break;
                        }
                        dest = cell;
                    }
                    let target = self.config.target_pos;
                    let cells = start.chebyshev(target) - dest.chebyshev(target);
                    if cells > 0 {
                        conveyed = true;
                        self.agent_pos = dest;
                        if let Some(o) = self.objects.get_mut(&id) {
                            o.state = BehaviorState::Conveyor {
                                cooldown: CONVEYOR_COOLDOWN,
                            };
                        }
                        events.push(Event::Conveyed { id, cells });
                    } else {
                        events.push(Event::Blocked);
                    }
                }
            }
        }

        if self.under_fire() {
            self.agent_alive = false;
            events.push(Event::AgentDestroyed);
        }
        if events.is_empty() {
            events.push(Event::NoEffect);
        }
        self.tick += 1;
        Ok(events)
    }

    pub fn to_canonical_json(&self) -> String {
        crate::canonical::to_string(self)
    }
}

/// Free-function form of [`WorldState::create`].
pub fn create_world(config: WorldConfig) -> Result<WorldState> {
    WorldState::create(config)
}

/// Free-function form of [`WorldState::sense`].
pub fn sense(world: &WorldState) -> Vec<Percept> {
    world.sense()
}
