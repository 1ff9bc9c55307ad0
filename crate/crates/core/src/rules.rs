//! Cause-effect rules: abstraction of trace steps, counting, merging.
//!
//! A rule reads "IF the nearest object looks like `context` AND the user does
//! `action` THEN `outcome` follows", with `hits / support` as its confidence.
//! Counts are plain integers so bases from different modules add exactly.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::session::{Episode, TraceStep};
use crate::world::{Action, Alignment, Direction, EventKind, Percept};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceBucket {
    Adjacent,
    Near,
    Far,
    None,
}

impl DistanceBucket {
    pub fn of(distance: i32) -> DistanceBucket {
        match distance {
            1 => DistanceBucket::Adjacent,
            2..=4 => DistanceBucket::Near,
            5..=8 => DistanceBucket::Far,
            _ => DistanceBucket::None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RuleContext {
    pub shape_id: Option<u8>,
    pub distance: DistanceBucket,
    pub alignment: Alignment,
    pub attached: bool,
}

impl RuleContext {
    pub const EMPTY: RuleContext = RuleContext {
        shape_id: None,
        distance: DistanceBucket::None,
        alignment: Alignment::None,
        attached: false,
    };

    pub fn of_percept(p: &Percept, attached: bool) -> RuleContext {
        let distance = DistanceBucket::of(p.distance);
        if distance == DistanceBucket::None {
            return RuleContext {
                attached,
                ..RuleContext::EMPTY
            };
        }
        RuleContext {
            shape_id: Some(p.shape_id),
            distance,
            alignment: p.alignment,
            attached,
        }
    }

    /// Every context an observation can produce.
    pub fn all() -> Vec<RuleContext> {
        let mut out = Vec::new();
        for attached in [false, true] {
            out.push(RuleContext {
                attached,
                ..RuleContext::EMPTY
            });
            for shape in crate::world::ObjectKind::ALL {
                for distance in [
                    DistanceBucket::Adjacent,
                    DistanceBucket::Near,
                    DistanceBucket::Far,
                ] {
                    for alignment in [
                        Alignment::AxisH,
                        Alignment::AxisV,
                        Alignment::Diagonal,
                        Alignment::None,
                    ] {
                        out.push(RuleContext {
                            shape_id: Some(shape.shape_id()),
                            distance,
                            alignment,
                            attached,
                        });
                    }
                }
            }
        }
        out.sort();
        out
    }

    /// Context of the nearest percept; ties go to the lowest object id.
    pub fn of_percepts(percepts: &[Percept], attached: bool) -> RuleContext {
        nearest(percepts)
            .map(|p| RuleContext::of_percept(p, attached))
            .unwrap_or(RuleContext {
                attached,
                ..RuleContext::EMPTY
            })
    }
}

pub fn nearest(percepts: &[Percept]) -> Option<&Percept> {
    percepts.iter().min_by_key(|p| (p.distance, p.id))
}

/// Actions with moves folded relative to the nearest object. Variants are in
/// lexicographic order of their wire names, which is the tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionClass {
    Fire,
    MoveAway,
    MoveFree,
    MoveOrthogonal,
    MoveToward,
    PushPull,
    Touch,
    Wait,
}

impl ActionClass {
    pub const ALL: [ActionClass; 8] = [
        ActionClass::Fire,
        ActionClass::MoveAway,
        ActionClass::MoveFree,
        ActionClass::MoveOrthogonal,
        ActionClass::MoveToward,
        ActionClass::PushPull,
        ActionClass::Touch,
        ActionClass::Wait,
    ];

    pub fn is_move(self) -> bool {
        matches!(
            self,
            ActionClass::MoveAway
                | ActionClass::MoveFree
                | ActionClass::MoveOrthogonal
                | ActionClass::MoveToward
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            ActionClass::Fire => "fire",
            ActionClass::MoveAway => "move_away",
            ActionClass::MoveFree => "move_free",
            ActionClass::MoveOrthogonal => "move_orthogonal",
            ActionClass::MoveToward => "move_toward",
            ActionClass::PushPull => "push_pull",
            ActionClass::Touch => "touch",
            ActionClass::Wait => "wait",
        }
    }

    pub fn parse(name: &str) -> Option<ActionClass> {
        ActionClass::ALL.into_iter().find(|c| c.name() == name)
    }

    /// Fold a concrete action. Moves compare the step against the offset to
    /// `reference` by sign of the dot product.
    pub fn classify(action: Action, reference: Option<&Percept>) -> ActionClass {
        match action {
            Action::Fire => ActionClass::Fire,
            Action::Touch => ActionClass::Touch,
            Action::PushPull => ActionClass::PushPull,
            Action::Wait => ActionClass::Wait,
            Action::Move(dir) => match reference {
                None => ActionClass::MoveFree,
                Some(p) => move_class(dir, p.dx, p.dy),
            },
        }
    }

    /// The concrete action for non-move classes.
    pub fn concrete(self) -> Option<Action> {
        match self {
            ActionClass::Fire => Some(Action::Fire),
            ActionClass::Touch => Some(Action::Touch),
            ActionClass::PushPull => Some(Action::PushPull),
            ActionClass::Wait => Some(Action::Wait),
            _ => None,
        }
    }
}

pub fn move_class(dir: Direction, dx: i32, dy: i32) -> ActionClass {
    if dx == 0 && dy == 0 {
        return ActionClass::MoveFree;
    }
    let (mx, my) = dir.delta();
    match (mx * dx + my * dy).signum() {
        1 => ActionClass::MoveToward,
        -1 => ActionClass::MoveAway,
        _ => ActionClass::MoveOrthogonal,
    }
}

/// Directions belonging to a move class relative to the given offset.
pub fn directions_in_class(class: ActionClass, dx: i32, dy: i32) -> Vec<Direction> {
    Direction::ALL
        .into_iter()
        .filter(|&d| move_class(d, dx, dy) == class)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Abstracted {
    pub context: RuleContext,
    pub action: ActionClass,
    pub outcomes: BTreeSet<EventKind>,
}

pub fn abstract_step(step: &TraceStep) -> Abstracted {
    let reference = nearest(&step.percepts);
    Abstracted {
        context: RuleContext::of_percepts(&step.percepts, step.attached),
        action: ActionClass::classify(step.action, reference),
        outcomes: step.events.iter().map(|e| e.kind()).collect(),
    }
}

/// Counts for one `(context, action)` pair.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PairStats {
    pub support: u64,
    pub hits: BTreeMap<EventKind, u64>,
}

impl PairStats {
    pub fn confidence(&self, outcome: EventKind) -> f64 {
        if self.support == 0 {
            return 0.0;
        }
        self.hits.get(&outcome).copied().unwrap_or(0) as f64 / self.support as f64
    }
}

/// One `(context, action, outcome)` row, the flat form used on disk and on
/// the wire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleEntry {
    pub context: RuleContext,
    pub action: ActionClass,
    pub outcome: EventKind,
    pub support: u64,
    pub hits: u64,
}

impl RuleEntry {
    pub fn confidence(&self) -> f64 {
        self.hits as f64 / self.support as f64
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RuleBase {
    pairs: BTreeMap<(RuleContext, ActionClass), PairStats>,
    provenance: BTreeSet<String>,
}

impl RuleBase {
    pub fn new() -> RuleBase {
        RuleBase::default()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Number of `(context, action, outcome)` rows.
    pub fn len(&self) -> usize {
        self.pairs.values().map(|s| s.hits.len()).sum()
    }

    pub fn provenance(&self) -> &BTreeSet<String> {
        &self.provenance
    }

    pub fn add_provenance(&mut self, packet_id: impl Into<String>) {
        self.provenance.insert(packet_id.into());
    }

    pub fn pair(&self, context: &RuleContext, action: ActionClass) -> Option<&PairStats> {
        self.pairs.get(&(*context, action))
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&(RuleContext, ActionClass), &PairStats)> {
        self.pairs.iter()
    }

    /// Pairs observed in one context.
    pub fn in_context(
        &self,
        context: RuleContext,
    ) -> impl Iterator<Item = (ActionClass, &PairStats)> + '_ {
        let lo = (context, ActionClass::Fire);
        self.pairs
            .range(lo..)
            .take_while(move |((c, _), _)| *c == context)
            .map(|((_, a), s)| (*a, s))
    }

    pub fn confidence(
        &self,
        context: &RuleContext,
        action: ActionClass,
        outcome: EventKind,
    ) -> f64 {
        self.pair(context, action)
            .map_or(0.0, |s| s.confidence(outcome))
    }

    /// Pooled confidence of `outcome` in `context` over every action.
    pub fn context_confidence(&self, context: RuleContext, outcome: EventKind) -> f64 {
        let (support, hits) = self.in_context(context).fold((0, 0), |(s, h), (_, st)| {
            (
                s + st.support,
                h + st.hits.get(&outcome).copied().unwrap_or(0),
            )
        });
        if support == 0 {
            0.0
        } else {
            hits as f64 / support as f64
        }
    }

    /// Count one observation.
    pub fn record(
        &mut self,
        context: RuleContext,
        action: ActionClass,
        outcomes: &BTreeSet<EventKind>,
    ) {
        let stats = self.pairs.entry((context, action)).or_default();
        stats.support += 1;
        for &o in outcomes {
            *stats.hits.entry(o).or_insert(0) += 1;
        }
    }

    pub fn record_step(&mut self, step: &TraceStep) {
        let a = abstract_step(step);
        self.record(a.context, a.action, &a.outcomes);
    }

    /// Insert counts directly (hand-written bases, decoding).
    pub fn insert(
        &mut self,
        context: RuleContext,
        action: ActionClass,
        outcome: EventKind,
        support: u64,
        hits: u64,
    ) -> Result<()> {
        if support == 0 || hits > support {
            return Err(Error::MalformedRules(format!(
                "support {support}, hits {hits} for {action:?} in {context:?}"
            )));
        }
        let stats = self.pairs.entry((context, action)).or_default();
        if stats.support != 0 && stats.support != support {
            return Err(Error::MalformedRules(format!(
                "support {support} disagrees with {} for {action:?} in {context:?}",
                stats.support
            )));
        }
        stats.support = support;
        stats.hits.insert(outcome, hits);
        Ok(())
    }

    /// Entrywise addition; commutative and associative, empty base is the
    /// identity. Every contributor counts the same.
    pub fn merge(&self, other: &RuleBase) -> RuleBase {
        let mut out = self.clone();
        out.merge_in(other);
        out
    }

    pub fn merge_in(&mut self, other: &RuleBase) {
        for (key, theirs) in &other.pairs {
            let mine = self.pairs.entry(*key).or_default();
            mine.support += theirs.support;
            for (o, h) in &theirs.hits {
                *mine.hits.entry(*o).or_insert(0) += h;
            }
        }
        self.provenance.extend(other.provenance.iter().cloned());
    }

    /// Keep pairs with enough support and rows with enough confidence.
    pub fn prune(&self, min_support: u64, min_confidence: f64) -> RuleBase {
        let mut out = RuleBase {
            pairs: BTreeMap::new(),
            provenance: self.provenance.clone(),
        };
        for (key, stats) in &self.pairs {
            if stats.support < min_support {
                continue;
            }
            let hits: BTreeMap<_, _> = stats
                .hits
                .iter()
                .filter(|(o, _)| stats.confidence(**o) >= min_confidence)
                .map(|(o, h)| (*o, *h))
                .collect();
            if !hits.is_empty() {
                out.pairs.insert(
                    *key,
                    PairStats {
                        support: stats.support,
                        hits,
                    },
                );
            }
        }
        out
    }

    pub fn entries(&self) -> Vec<RuleEntry> {
        self.pairs
            .iter()
            .flat_map(|((context, action), stats)| {
                stats.hits.iter().map(move |(outcome, hits)| RuleEntry {
                    context: *context,
                    action: *action,
                    outcome: *outcome,
                    support: stats.support,
                    hits: *hits,
                })
            })
            .collect()
    }

    /// Structural invariants: support ≥ 1, hits ≤ support, at least one
    /// outcome per pair, and every step's outcomes covered.
    pub fn check(&self) -> Result<()> {
        for ((c, a), s) in &self.pairs {
            let bad = |why: &str| Err(Error::MalformedRules(format!("{why} for {a:?} in {c:?}")));
            if s.support == 0 {
                return bad("zero support");
            }
            if s.hits.is_empty() {
                return bad("no outcomes");
            }
            if s.hits.values().any(|&h| h > s.support) {
                return bad("hits exceed support");
            }
            if s.hits.values().sum::<u64>() < s.support {
                return bad("outcome hits sum below support");
            }
        }
        Ok(())
    }

    /// Ranked rows matching `context` whose outcome is in `goals`: by
    /// confidence, then support (both descending), then action name.
    pub fn query(&self, context: &RuleContext, goals: &BTreeSet<EventKind>) -> Vec<RankedRule> {
        let mut out: Vec<RankedRule> = self
            .in_context(*context)
            .flat_map(|(action, stats)| {
                stats
                    .hits
                    .iter()
                    .filter(|(o, _)| goals.contains(o))
                    .map(move |(outcome, _)| RankedRule {
                        action,
                        outcome: *outcome,
                        confidence: stats.confidence(*outcome),
                        support: stats.support,
                    })
            })
            .collect();
        out.sort_by(|a, b| {
            b.confidence
                .total_cmp(&a.confidence)
                .then(b.support.cmp(&a.support))
                .then(a.action.cmp(&b.action))
                .then(a.outcome.cmp(&b.outcome))
        });
        out
    }

    pub fn to_canonical_json(&self) -> String {
        crate::canonical::to_string(self)
    }

    pub fn from_json(text: &str) -> Result<RuleBase> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedRule {
    pub action: ActionClass,
    pub outcome: EventKind,
    pub confidence: f64,
    pub support: u64,
}

#[derive(Serialize, Deserialize)]
struct RuleBaseDoc {
    entries: Vec<RuleEntry>,
    provenance: BTreeSet<String>,
}

impl Serialize for RuleBase {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        RuleBaseDoc {
            entries: self.entries(),
            provenance: self.provenance.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for RuleBase {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let doc = RuleBaseDoc::deserialize(deserializer)?;
        let mut rb = RuleBase {
            pairs: BTreeMap::new(),
            provenance: doc.provenance,
        };
        for e in doc.entries {
            rb.insert(e.context, e.action, e.outcome, e.support, e.hits)
                .map_err(serde::de::Error::custom)?;
        }
        Ok(rb)
    }
}

/// Count every abstracted step of every episode.
pub fn induce(episodes: &[Episode]) -> RuleBase {
    let mut rb = RuleBase::new();
    for step in episodes.iter().flat_map(|e| e.steps.iter()) {
        rb.record_step(step);
    }
    rb
}

pub fn merge(a: &RuleBase, b: &RuleBase) -> RuleBase {
    a.merge(b)
}

pub fn prune(rb: &RuleBase, min_support: u64, min_confidence: f64) -> RuleBase {
    rb.prune(min_support, min_confidence)
}

pub const DEFAULT_MIN_SUPPORT: u64 = 5;
pub const DEFAULT_MIN_CONFIDENCE: f64 = 0.2;

/// Trailing-window success rate per episode index. A window wider than the
/// episode list collapses to one aggregate point.
pub fn learning_curve(episodes: &[Episode], window: usize) -> Vec<(usize, f64)> {
    let window = window.max(1);
    let wins: Vec<f64> = episodes
        .iter()
        .map(|e| if e.is_success() { 1.0 } else { 0.0 })
        .collect();
    if wins.is_empty() {
        return Vec::new();
    }
    if window > wins.len() {
        let mean = wins.iter().sum::<f64>() / wins.len() as f64;
        return vec![(wins.len() - 1, mean)];
    }
    (window - 1..wins.len())
        .map(|i| {
            let slice = &wins[i + 1 - window..=i];
            (i, slice.iter().sum::<f64>() / window as f64)
        })
        .collect()
}
