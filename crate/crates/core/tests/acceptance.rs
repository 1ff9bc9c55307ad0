//! Acceptance run: one PASS/FAIL line per criterion, with its measurement
//! and runtime. Exits non-zero if any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::io::Cursor;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use cognite::bots::train_module;
use cognite::centre::{Ack, CentreState, SkillPacket};
use cognite::rules::{induce, merge, ActionClass, DistanceBucket, RuleBase, RuleContext};
use cognite::session::Episode;
use cognite::solver::{oracle_rulebase, solve, MissionConfig, ObjectMix, Outcome};
use cognite::transport::{decode, encode, serve_stream, Client, Handler, Server};
use cognite::world::{
    Action, Alignment, EventKind, ObjectKind, Placement, Pos, WorldConfig, WorldState,
};
use common::{message, non_empty_rule_base, packet, random_episodes, rule_base};
use proptest::prelude::*;
use proptest::strategy::ValueTree;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];
const EPISODES: usize = 200;
const SUITE: std::ops::Range<u64> = 0..100;

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Verdict {
        Verdict {
            pass,
            detail: detail.into(),
        }
    }
}

fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    })
}

// ---------------------------------------------------------------- determinism

fn determinism() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut steps = 0;
    for pair in 0..50 {
        let config = MissionConfig {
            width: rng.gen_range(16..48),
            height: rng.gen_range(16..48),
            tick_budget: 300,
            sensing_radius: 8,
            mix: ObjectMix {
                destroyer: rng.gen_range(0..15),
                sticker: rng.gen_range(0..15),
                power_supply: rng.gen_range(0..15),
                conveyor: rng.gen_range(0..15),
            },
            seed: rng.gen(),
        }
        .world_config()
        .unwrap();
        let actions: Vec<Action> = (0..rng.gen_range(1..300))
            .map(|_| Action::ALL[rng.gen_range(0..Action::ALL.len())])
            .collect();
        let run = || {
            let mut world = WorldState::create(config.clone()).unwrap();
            let mut log = Vec::new();
            for &a in &actions {
                if world.is_finished() {
                    break;
                }
                log.push(world.step(a).unwrap());
            }
            (
                serde_json::to_string(&log).unwrap(),
                world.to_canonical_json(),
                log.len(),
            )
        };
        let (a, b) = (run(), run());
        steps += a.2;
        if (&a.0, &a.1) != (&b.0, &b.1) {
            return Verdict::new(false, format!("pair {pair} diverged"));
        }
    }
    Verdict::new(true, format!("50 pairs, {steps} steps, byte-identical"))
}

// ----------------------------------------------------------------- automata

fn world_at(kind: ObjectKind, dx: i32, dy: i32) -> WorldState {
    WorldState::create(WorldConfig {
        width: 48,
        height: 48,
        tick_budget: 50,
        sensing_radius: 8,
        objects: vec![Placement {
            kind,
            pos: Pos::new(20, 20),
        }],
        agent_start: Pos::new(20 + dx, 20 + dy),
        target_pos: Pos::new(40, 20),
        seed: 0,
    })
    .unwrap()
}

fn kinds_of(world: &mut WorldState, action: Action) -> Vec<EventKind> {
    world
        .step(action)
        .unwrap()
        .iter()
        .map(|e| e.kind())
        .collect()
}

fn automata() -> Verdict {
    use EventKind::*;
    let mut checked = 0;
    let mut failures = Vec::new();
    for dx in -8i32..=8 {
        for dy in -8i32..=8 {
            if (dx, dy) == (0, 0) {
                continue;
            }
            let d = i32::max(dx.abs(), dy.abs());
            let axis = dx == 0 || dy == 0;
            let diagonal = dx.abs() == dy.abs();
            // destroyer: axis kill, diagonal fire
            let mut w = world_at(ObjectKind::Destroyer, dx, dy);
            let killed = kinds_of(&mut w, Action::Wait).contains(&AgentDestroyed);
            let mut w = world_at(ObjectKind::Destroyer, dx, dy);
            let shot = kinds_of(&mut w, Action::Fire).contains(&ObjectDestroyed);
            // supply: continuous touching
            let mut w = world_at(ObjectKind::PowerSupply, dx, dy);
            let touches: Vec<Vec<EventKind>> =
                (0..8).map(|_| kinds_of(&mut w, Action::Touch)).collect();
            let power = w.agent_power;
            // sticker: attach, then two presses
            let mut w = world_at(ObjectKind::Sticker, dx, dy);
            let stuck = kinds_of(&mut w, Action::Wait) == [Attached];
            let released = stuck
                && kinds_of(&mut w, Action::PushPull) == [NoEffect]
                && kinds_of(&mut w, Action::PushPull) == [Released];
            // conveyor
            let mut w = world_at(ObjectKind::Conveyor, dx, dy);
            let ev = w.step(Action::Touch).unwrap();
            let ride = w.agent_pos.x - (20 + dx);

            let expect_supply: Vec<Vec<EventKind>> = if d == 1 {
                vec![
                    vec![Charging],
                    vec![PowerGained],
                    vec![Charging],
                    vec![PowerGained],
                    vec![Charging],
                    vec![PowerGained],
                    vec![NoEffect],
                    vec![NoEffect],
                ]
            } else {
                vec![vec![NoEffect]; 8]
            };
            let tip = dy == 0 && dx.abs() == 1;
            let checks = [
                ("axis kill", killed == (axis && d <= 4)),
                ("diagonal fire", shot == (diagonal && d <= 3)),
                (
                    "touch cycle",
                    touches == expect_supply && power == if d == 1 { 3 } else { 0 },
                ),
                ("attach", stuck == (d == 1)),
                ("release", released == (d == 1)),
                (
                    "conveyor",
                    if tip {
                        ev == [cognite::world::Event::Conveyed { id: 0, cells: 6 }] && ride == 6
                    } else {
                        ev.iter().all(|e| e.kind() == NoEffect) && ride == 0
                    },
                ),
            ];
            for (name, ok) in checks {
                checked += 1;
                if !ok {
                    failures.push(format!("{name} at ({dx},{dy})"));
                }
            }
        }
    }
    match failures.first() {
        None => Verdict::new(true, format!("{checked} offset checks over 288 offsets")),
        Some(f) => Verdict::new(false, format!("{} failures, first: {f}", failures.len())),
    }
}

// ------------------------------------------------------------- merge algebra

fn ingest(packets: &[SkillPacket]) -> String {
    let mut centre = CentreState::in_memory();
    for p in packets {
        centre.submit(p.clone()).unwrap();
    }
    centre.to_canonical_json()
}

fn law<T: std::fmt::Debug>(
    r: Result<(), proptest::test_runner::TestError<T>>,
) -> Result<(), String> {
    r.map_err(|e| e.to_string())
}

fn merge_algebra() -> Verdict {
    let cases = 1000;
    let laws = [
        (
            "commutativity",
            law(runner(cases).run(&(rule_base(), rule_base()), |(a, b)| {
                prop_assert_eq!(
                    merge(&a, &b).to_canonical_json(),
                    merge(&b, &a).to_canonical_json()
                );
                Ok(())
            })),
        ),
        (
            "associativity",
            law(
                runner(cases).run(&(rule_base(), rule_base(), rule_base()), |(a, b, c)| {
                    prop_assert_eq!(
                        merge(&merge(&a, &b), &c).to_canonical_json(),
                        merge(&a, &merge(&b, &c)).to_canonical_json()
                    );
                    Ok(())
                }),
            ),
        ),
        (
            "identity",
            law(runner(cases).run(&rule_base(), |a| {
                let e = RuleBase::new();
                prop_assert_eq!(merge(&a, &e).to_canonical_json(), a.to_canonical_json());
                prop_assert_eq!(merge(&e, &a).to_canonical_json(), a.to_canonical_json());
                Ok(())
            })),
        ),
        (
            "ingestion",
            law(runner(cases).run(
                &(
                    prop::collection::vec(non_empty_rule_base(), 1..6),
                    any::<u64>(),
                    prop::collection::vec(any::<prop::sample::Index>(), 0..6),
                ),
                |(bases, order_seed, dupes)| {
                    let packets: Vec<SkillPacket> = bases
                        .into_iter()
                        .enumerate()
                        .map(|(i, rb)| packet(i, 0, rb))
                        .collect();
                    let mut arrivals = packets.clone();
                    arrivals.extend(dupes.iter().map(|d| d.get(&packets).clone()));
                    use rand::seq::SliceRandom;
                    arrivals.shuffle(&mut ChaCha8Rng::seed_from_u64(order_seed));
                    prop_assert_eq!(ingest(&arrivals), ingest(&packets));
                    Ok(())
                },
            )),
        ),
    ];
    for (name, r) in &laws {
        if let Err(e) = r {
            return Verdict::new(false, format!("{name}: {e}"));
        }
    }
    Verdict::new(
        true,
        format!("{cases} cases each: commutativity, associativity, identity, permuted+duplicated ingestion"),
    )
}

// ------------------------------------------------------ induction homomorphism

fn homomorphism() -> Verdict {
    let cases = 200;
    let r = runner(cases).run(
        &(
            prop::sample::select(ObjectKind::ALL.to_vec()),
            0u64..1_000_000,
            1usize..12,
            prop::collection::vec(any::<prop::sample::Index>(), 0..5),
        ),
        |(kind, seed, n, cuts)| {
            let episodes = random_episodes(kind, seed, n, 40);
            let mut points: Vec<usize> = cuts.iter().map(|c| c.index(n + 1)).collect();
            points.extend([0, episodes.len()]);
            points.sort_unstable();
            let merged = points.windows(2).fold(RuleBase::new(), |acc, w| {
                merge(&acc, &induce(&episodes[w[0]..w[1]]))
            });
            prop_assert!(points.len() - 1 <= 5);
            prop_assert_eq!(
                merged.to_canonical_json(),
                induce(&episodes).to_canonical_json()
            );
            Ok(())
        },
    );
    match r {
        Ok(()) => Verdict::new(true, format!("{cases} cases, k <= 5, exact")),
        Err(e) => Verdict::new(false, e.to_string()),
    }
}

// ------------------------------------------------- skill recovery and curves

/// Pooled counts of `(shape, adjacency, alignments, attached) + action`.
fn pooled(
    rb: &RuleBase,
    kind: ObjectKind,
    distance: DistanceBucket,
    alignments: &[Alignment],
    attached: bool,
    action: ActionClass,
) -> (u64, BTreeMap<EventKind, u64>) {
    let mut support = 0;
    let mut hits = BTreeMap::new();
    for &alignment in alignments {
        let ctx = RuleContext {
            shape_id: Some(kind.shape_id()),
            distance,
            alignment,
            attached,
        };
        if let Some(s) = rb.pair(&ctx, action) {
            support += s.support;
            for (k, h) in &s.hits {
                *hits.entry(*k).or_insert(0) += h;
            }
        }
    }
    (support, hits)
}

fn skill_recovery(trained: &BTreeMap<(ObjectKind, u64), Vec<Episode>>) -> Verdict {
    const ANY: [Alignment; 4] = [
        Alignment::AxisH,
        Alignment::AxisV,
        Alignment::Diagonal,
        Alignment::None,
    ];
    let triples = [
        (
            ObjectKind::Destroyer,
            DistanceBucket::Near,
            &[Alignment::Diagonal][..],
            false,
            ActionClass::Fire,
            EventKind::ObjectDestroyed,
            0.8,
        ),
        (
            ObjectKind::Sticker,
            DistanceBucket::Adjacent,
            &ANY[..],
            true,
            ActionClass::PushPull,
            EventKind::Released,
            0.35,
        ),
        (
            ObjectKind::PowerSupply,
            DistanceBucket::Adjacent,
            &ANY[..],
            false,
            ActionClass::Touch,
            EventKind::PowerGained,
            0.35,
        ),
        (
            ObjectKind::Conveyor,
            DistanceBucket::Adjacent,
            &[Alignment::AxisH][..],
            false,
            ActionClass::Touch,
            EventKind::Conveyed,
            0.35,
        ),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (kind, distance, alignments, attached, action, outcome, floor) in triples {
        let mut lo = f64::INFINITY;
        let mut lo_support = u64::MAX;
        for seed in SEEDS {
            let rb = induce(&trained[&(kind, seed)]);
            let (support, hits) = pooled(&rb, kind, distance, alignments, attached, action);
            let h = hits.get(&outcome).copied().unwrap_or(0);
            let conf = if support == 0 {
                0.0
            } else {
                h as f64 / support as f64
            };
            let top = hits
                .iter()
                .filter(|(k, _)| !k.is_neutral() && **k != outcome)
                .all(|(_, &o)| o < h);
            pass &= conf >= floor && support >= 20 && top;
            lo = lo.min(conf);
            lo_support = lo_support.min(support);
        }
        parts.push(format!(
            "{} min conf {lo:.2} min n {lo_support}",
            kind.name()
        ));
    }
    Verdict::new(pass, parts.join("; "))
}

fn quartiles(eps: &[Episode]) -> (f64, f64) {
    let q = eps.len() / 4;
    let rate = |s: &[Episode]| s.iter().filter(|e| e.is_success()).count() as f64 / s.len() as f64;
    (rate(&eps[..q]), rate(&eps[eps.len() - q..]))
}

fn learning_curves(trained: &BTreeMap<(ObjectKind, u64), Vec<Episode>>) -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for kind in ObjectKind::ALL {
        let mut strict = 0;
        let mut line = Vec::new();
        for seed in SEEDS {
            let (first, last) = quartiles(&trained[&(kind, seed)]);
            pass &= last >= first;
            strict += usize::from(last > first);
            line.push(format!("{first:.2}->{last:.2}"));
        }
        pass &= strict >= 4;
        parts.push(format!(
            "{} [{}] strict {strict}/5",
            kind.name(),
            line.join(" ")
        ));
    }
    Verdict::new(pass, parts.join("; "))
}

// ------------------------------------------------------------ knowledge pays

fn success(rules: &RuleBase) -> (f64, usize, usize) {
    let (mut reached, mut destroyed, mut timeout) = (0, 0, 0);
    for seed in SUITE {
        match solve(&MissionConfig::suite(seed), rules).unwrap().outcome {
            Outcome::Reached => reached += 1,
            Outcome::Destroyed => destroyed += 1,
            Outcome::Timeout => timeout += 1,
        }
    }
    (reached as f64 / SUITE.count() as f64, destroyed, timeout)
}

fn knowledge_pays() -> Verdict {
    let accumulated = cognite::bots::train_all(1, EPISODES);
    let (oracle, ..) = success(&oracle_rulebase());
    let (empty, ed, et) = success(&RuleBase::new());
    let (bots, ..) = success(&accumulated);
    let pass = oracle >= 0.9 && empty <= 0.3 && (oracle - bots).abs() <= 0.15 + 1e-9;
    Verdict::new(
        pass,
        format!(
            "oracle {:.0}%, empty {:.0}% ({ed} destroyed, {et} timeout), bots {:.0}%",
            oracle * 100.0,
            empty * 100.0,
            bots * 100.0
        ),
    )
}

// ------------------------------------------------------------------ protocol

fn protocol() -> Verdict {
    let roundtrip = runner(1000).run(&message(), |m| {
        let bytes = encode(&m);
        prop_assert_eq!(&decode(&bytes).unwrap(), &m);
        Ok(())
    });
    if let Err(e) = roundtrip {
        return Verdict::new(false, format!("roundtrip: {e}"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut input = Vec::new();
    let mut sampler = runner(1);
    let samples: Vec<Vec<u8>> = (0..50)
        .map(|_| encode(&message().new_tree(&mut sampler).unwrap().current()))
        .collect();
    for _ in 0..10_000 {
        let mut f = samples[rng.gen_range(0..samples.len())].clone();
        match rng.gen_range(0..4) {
            0 => {}
            1 => {
                let i = rng.gen_range(0..f.len());
                f[i] = rng.gen();
            }
            2 => f.truncate(rng.gen_range(0..f.len())),
            _ => f = (0..rng.gen_range(0..60)).map(|_| rng.gen()).collect(),
        }
        f.retain(|&b| b != b'\n');
        f.push(b'\n');
        input.extend(f);
    }
    let centre = Arc::new(Mutex::new(CentreState::in_memory()));
    let served = std::panic::catch_unwind(|| {
        let mut out = Vec::new();
        // BYE ends a connection; keep feeding the rest on fresh ones.
        let mut rest = &input[..];
        let mut answers = 0;
        while !rest.is_empty() {
            let mut cursor = Cursor::new(rest);
            serve_stream(Handler::new(centre.clone(), "fuzz"), &mut cursor, &mut out).unwrap();
            rest = &rest[cursor.position() as usize..];
            answers = out.iter().filter(|&&b| b == b'\n').count();
        }
        answers
    });
    let answers = match served {
        Ok(n) => n,
        Err(_) => return Verdict::new(false, "fuzz: handler panicked"),
    };

    let server = Server::spawn(
        "127.0.0.1:0",
        Arc::new(Mutex::new(CentreState::in_memory())),
    )
    .unwrap();
    let p = packet(
        0,
        0,
        induce(&random_episodes(ObjectKind::Destroyer, 1, 3, 30)),
    );
    let mut a = Client::open(server.local_addr(), "a").unwrap();
    let mut b = Client::open(server.local_addr(), "b").unwrap();
    let acks = (a.submit(p.clone()).unwrap(), b.submit(p).unwrap());
    server.shutdown();

    let pass = answers == 10_000 && acks == (Ack::Accepted, Ack::Duplicate);
    Verdict::new(
        pass,
        format!(
            "1000 roundtrips exact; 10000 fuzz frames, {answers} answers, no panic; acks {acks:?}"
        ),
    )
}

// --------------------------------------------------------------- persistence

fn persistence() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("centre.log");
    let mut reference = CentreState::in_memory();
    let mut script: Vec<SkillPacket> = Vec::new();
    for i in 0..100u64 {
        let p = if i % 9 == 8 {
            script[(i as usize * 3) % script.len()].clone()
        } else {
            let kind = ObjectKind::ALL[(i % 4) as usize];
            packet(
                (i % 6) as usize,
                i as u32,
                induce(&random_episodes(kind, i, 2, 25)),
            )
        };
        script.push(p);
    }
    let mut live = CentreState::open(&log).unwrap();
    for (k, p) in script.into_iter().enumerate() {
        reference.submit(p.clone()).unwrap();
        live.submit(p).unwrap();
        drop(live);
        live = CentreState::open(&log).unwrap();
        if live.to_canonical_json() != reference.to_canonical_json() {
            return Verdict::new(false, format!("state differs after {} packets", k + 1));
        }
    }
    Verdict::new(
        true,
        format!(
            "100 prefixes, {} distinct packets, identical",
            reference.packet_count()
        ),
    )
}

// ---------------------------------------------------------------------- main

fn main() {
    let mut failed = 0;
    let mut report = |name: &str, limit: Option<Duration>, f: &mut dyn FnMut() -> Verdict| {
        let t = Instant::now();
        let v = f();
        let took = t.elapsed();
        let in_time = limit.is_none_or(|l| took < l);
        let pass = v.pass && in_time;
        if !pass {
            failed += 1;
        }
        let budget = limit
            .map(|l| format!(" (limit {}s)", l.as_secs()))
            .unwrap_or_default();
        println!(
            "{} {name}: {} [{:.2}s{budget}]",
            if pass { "PASS" } else { "FAIL" },
            v.detail,
            took.as_secs_f64()
        );
    };

    report(
        "determinism",
        Some(Duration::from_secs(10)),
        &mut determinism,
    );
    report(
        "behavior automata",
        Some(Duration::from_secs(5)),
        &mut automata,
    );
    report("merge algebra", None, &mut merge_algebra);
    report("induction homomorphism", None, &mut homomorphism);

    // Training is shared with the learning curves and charged to recovery.
    let mut trained = BTreeMap::new();
    report(
        "skill recovery",
        Some(Duration::from_secs(120)),
        &mut || {
            for kind in ObjectKind::ALL {
                for seed in SEEDS {
                    trained.insert((kind, seed), train_module(kind, seed, EPISODES));
                }
            }
            skill_recovery(&trained)
        },
    );
    report("learning curves", None, &mut || learning_curves(&trained));
    report(
        "knowledge pays",
        Some(Duration::from_secs(300)),
        &mut knowledge_pays,
    );
    report("protocol", None, &mut protocol);
    report("persistence", None, &mut persistence);

    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
