//! Generators shared by the integration suites.
#![allow(dead_code)]

use std::collections::BTreeSet;

use cognite::centre::{Ack, SkillPacket};
use cognite::rules::{ActionClass, RankedRule, RuleBase, RuleContext};
use cognite::session::{Episode, ModuleSession};
use cognite::transport::{Body, Message, StateBody};
use cognite::world::{Action, Event, EventKind, ObjectKind, Percept};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A few contexts only, so generated bases overlap often.
fn context_pool() -> Vec<RuleContext> {
    RuleContext::all()
        .into_iter()
        .step_by(11)
        .take(12)
        .collect()
}

/// One observation: context, action class, set of outcome kinds.
fn observation() -> impl Strategy<Value = (RuleContext, ActionClass, BTreeSet<EventKind>)> {
    let pool = context_pool();
    (
        prop::sample::select(pool),
        prop::sample::select(ActionClass::ALL.to_vec()),
        prop::collection::btree_set(prop::sample::select(EventKind::ALL.to_vec()), 1..3),
    )
}

pub fn rule_base() -> impl Strategy<Value = RuleBase> {
    prop::collection::vec(observation(), 0..12).prop_map(|obs| {
        let mut rb = RuleBase::new();
        for (c, a, o) in &obs {
            rb.record(*c, *a, o);
        }
        rb
    })
}

pub fn non_empty_rule_base() -> impl Strategy<Value = RuleBase> {
    rule_base().prop_filter("needs rules", |rb| !rb.is_empty())
}

/// Real episodes from modules driven by uniformly random actions.
pub fn random_episodes(
    kind: ObjectKind,
    seed: u64,
    episodes: usize,
    max_steps: usize,
) -> Vec<Episode> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let mut n = 0;
    while out.len() < episodes {
        let mut session =
            ModuleSession::open(format!("module-{}", kind.shape_id()), kind, seed * 100 + n);
        n += 1;
        for _ in 0..rng.gen_range(1..=max_steps) {
            session
                .act(Action::ALL[rng.gen_range(0..Action::ALL.len())])
                .unwrap();
        }
        session.close();
        out.extend(session.export_episodes());
    }
    out.truncate(episodes);
    out
}

pub fn packet(module: usize, first_episode: u32, rules: RuleBase) -> SkillPacket {
    SkillPacket::new(
        format!("module-{module}"),
        1 + (module % 4) as u8,
        rules,
        first_episode,
        10,
    )
}

pub fn event() -> impl Strategy<Value = Event> {
    (0u8..10, any::<u32>(), -6i32..=6).prop_map(|(k, id, cells)| match k {
        0 => Event::ObjectDestroyed { id },
        1 => Event::AgentDestroyed,
        2 => Event::Attached { id },
        3 => Event::Released { id },
        4 => Event::PowerGained { id },
        5 => Event::Charging { id },
        6 => Event::Conveyed { id, cells },
        7 => Event::Moved,
        8 => Event::Blocked,
        _ => Event::NoEffect,
    })
}

pub fn percept() -> impl Strategy<Value = Percept> {
    (any::<u32>(), 1u8..=4, -8i32..=8, -8i32..=8)
        .prop_filter("not on the agent", |&(_, _, dx, dy)| (dx, dy) != (0, 0))
        .prop_map(|(id, shape, dx, dy)| Percept::from_offset(id, shape, dx, dy))
}

pub fn context() -> impl Strategy<Value = RuleContext> {
    prop::sample::select(RuleContext::all())
}

pub fn kinds() -> impl Strategy<Value = BTreeSet<EventKind>> {
    prop::collection::btree_set(prop::sample::select(EventKind::ALL.to_vec()), 0..4)
}

pub fn ranked() -> impl Strategy<Value = RankedRule> {
    (
        prop::sample::select(ActionClass::ALL.to_vec()),
        prop::sample::select(EventKind::ALL.to_vec()),
        0.0f64..=1.0,
        1u64..1_000_000,
    )
        .prop_map(|(action, outcome, confidence, support)| RankedRule {
            action,
            outcome,
            confidence,
            support,
        })
}

pub fn body() -> impl Strategy<Value = Body> {
    prop_oneof![
        ("\\PC{0,12}", any::<u32>()).prop_map(|(module_id, protocol_version)| Body::Hello {
            module_id,
            protocol_version
        }),
        (non_empty_rule_base(), 0usize..8, any::<u32>())
            .prop_map(|(rb, m, f)| Body::Submit(packet(m, f, rb))),
        ("[0-9a-f]{32}", any::<bool>()).prop_map(|(packet_id, dup)| Body::Ack {
            packet_id,
            status: if dup { Ack::Duplicate } else { Ack::Accepted },
        }),
        (context(), kinds()).prop_map(|(context, goal_outcomes)| Body::Query {
            context,
            goal_outcomes
        }),
        prop::collection::vec(ranked(), 0..6).prop_map(|rules| Body::Rules { rules }),
        ("\\PC{0,10}", any::<u64>()).prop_map(|(object, seed)| Body::Open { object, seed }),
        (
            "\\PC{0,10}",
            any::<u32>(),
            any::<u32>(),
            prop::collection::vec(percept(), 0..4),
            prop::collection::vec(event(), 0..4),
            any::<bool>(),
            0u32..4,
        )
            .prop_map(
                |(session, episode, tick, percepts, events, attached, power)| {
                    Body::State(StateBody {
                        session,
                        episode,
                        tick,
                        percepts,
                        events,
                        attached,
                        power,
                    })
                }
            ),
        prop::sample::select(Action::ALL.to_vec()).prop_map(|action| Body::Act { action }),
        Just(Body::Bye {}),
        ("[a-z-]{1,20}", "\\PC{0,30}").prop_map(|(code, detail)| Body::Err { code, detail }),
    ]
}

pub fn message() -> impl Strategy<Value = Message> {
    (any::<u64>(), body()).prop_map(|(id, body)| Message::new(id, body))
}
