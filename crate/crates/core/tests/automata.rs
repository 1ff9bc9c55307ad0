//! Exhaustive behaviour checks: every object kind against every agent
//! offset within Chebyshev distance 8. Expected values come from small
//! hand-written models below, not from the world code.

use cognite::world::{
    Action, Direction, Event, EventKind, ObjectKind, Placement, Pos, WorldConfig, WorldState,
};

const CENTER: Pos = Pos::new(20, 20);

fn offsets() -> impl Iterator<Item = (i32, i32)> {
    (-8..=8)
        .flat_map(|dx| (-8..=8).map(move |dy| (dx, dy)))
        .filter(|&o| o != (0, 0))
}

/// Object at the centre, agent at centre + offset, target far east.
fn world(kind: ObjectKind, offset: (i32, i32)) -> WorldState {
    world_with_target(kind, offset, Pos::new(40, 20))
}

fn world_with_target(kind: ObjectKind, offset: (i32, i32), target: Pos) -> WorldState {
    WorldState::create(WorldConfig {
        width: 48,
        height: 48,
        tick_budget: 100,
        sensing_radius: 8,
        objects: vec![Placement { kind, pos: CENTER }],
        agent_start: Pos::new(CENTER.x + offset.0, CENTER.y + offset.1),
        target_pos: target,
        seed: 0,
    })
    .unwrap()
}

fn kinds(events: &[Event]) -> Vec<EventKind> {
    events.iter().map(Event::kind).collect()
}

fn cheb((dx, dy): (i32, i32)) -> i32 {
    dx.abs().max(dy.abs())
}

// Reference models.
fn on_axis_in_kill_range(o: (i32, i32)) -> bool {
    (o.0 == 0 || o.1 == 0) && cheb(o) <= 4
}

fn diagonal_in_fire_range(o: (i32, i32)) -> bool {
    o.0.abs() == o.1.abs() && cheb(o) <= 3
}

/// Control diversion: 90 degrees clockwise, y pointing north.
fn rotated(d: Direction) -> (i32, i32) {
    match d {
        Direction::N => (1, 0),
        Direction::NE => (1, -1),
        Direction::E => (0, -1),
        Direction::SE => (-1, -1),
        Direction::S => (-1, 0),
        Direction::SW => (-1, 1),
        Direction::W => (0, 1),
        Direction::NW => (1, 1),
    }
}

#[test]
fn destroyer_kills_on_axis_within_four() {
    for o in offsets() {
        let mut w = world(ObjectKind::Destroyer, o);
        let ev = kinds(&w.step(Action::Wait).unwrap());
        let expect_death = on_axis_in_kill_range(o);
        assert_eq!(
            ev.contains(&EventKind::AgentDestroyed),
            expect_death,
            "offset {o:?}: {ev:?}"
        );
        assert_eq!(w.agent_alive, !expect_death);
    }
}

#[test]
fn destroyer_falls_to_diagonal_fire_within_three() {
    for o in offsets() {
        let mut w = world(ObjectKind::Destroyer, o);
        let ev = kinds(&w.step(Action::Fire).unwrap());
        let kill = diagonal_in_fire_range(o);
        assert_eq!(
            ev.contains(&EventKind::ObjectDestroyed),
            kill,
            "offset {o:?}: {ev:?}"
        );
        assert_eq!(
            ev.contains(&EventKind::AgentDestroyed),
            on_axis_in_kill_range(o),
            "offset {o:?}"
        );
        assert_eq!(w.objects.is_empty(), kill);
    }
}

#[test]
fn sticker_attaches_only_when_adjacent() {
    for o in offsets() {
        let mut w = world(ObjectKind::Sticker, o);
        let ev = kinds(&w.step(Action::Wait).unwrap());
        let adjacent = cheb(o) == 1;
        assert_eq!(
            ev == vec![EventKind::Attached],
            adjacent,
            "offset {o:?}: {ev:?}"
        );
        assert_eq!(w.attached_to.is_some(), adjacent);
    }
}

#[test]
fn attached_moves_are_rotated_and_tethered() {
    for o in offsets().filter(|&o| cheb(o) == 1) {
        for d in Direction::ALL {
            let mut w = world(ObjectKind::Sticker, o);
            w.step(Action::Wait).unwrap();
            let before = w.agent_pos;
            let ev = kinds(&w.step(Action::Move(d)).unwrap());
            let (rx, ry) = rotated(d);
            let next = Pos::new(before.x + rx, before.y + ry);
            if next.chebyshev(CENTER) == 1 {
                assert_eq!(w.agent_pos, next, "offset {o:?} move {d:?}");
                assert_eq!(ev, vec![EventKind::Moved]);
            } else {
                assert_eq!(w.agent_pos, before, "offset {o:?} move {d:?}");
                assert_eq!(ev, vec![EventKind::Blocked]);
            }
            assert!(w.attached_to.is_some());
        }
    }
}

#[test]
fn two_push_pulls_release_then_three_ticks_of_immunity() {
    for o in offsets().filter(|&o| cheb(o) == 1) {
        let mut w = world(ObjectKind::Sticker, o);
        w.step(Action::Wait).unwrap();
        assert_eq!(
            kinds(&w.step(Action::PushPull).unwrap()),
            vec![EventKind::NoEffect]
        );
        assert_eq!(
            kinds(&w.step(Action::PushPull).unwrap()),
            vec![EventKind::Released]
        );
        for i in 0..3 {
            assert_eq!(
                kinds(&w.step(Action::Wait).unwrap()),
                vec![EventKind::NoEffect],
                "immune tick {i}"
            );
        }
        assert_eq!(
            kinds(&w.step(Action::Wait).unwrap()),
            vec![EventKind::Attached]
        );
    }
}

#[test]
fn interrupted_push_pull_does_not_release() {
    let mut w = world(ObjectKind::Sticker, (1, 0));
    w.step(Action::Wait).unwrap();
    w.step(Action::PushPull).unwrap();
    w.step(Action::Wait).unwrap();
    assert_eq!(
        kinds(&w.step(Action::PushPull).unwrap()),
        vec![EventKind::NoEffect]
    );
    assert_eq!(
        kinds(&w.step(Action::PushPull).unwrap()),
        vec![EventKind::Released]
    );
}

#[test]
fn power_supply_pays_on_second_touch_three_times() {
    for o in offsets() {
        let mut w = world(ObjectKind::PowerSupply, o);
        let mut seen = Vec::new();
        for _ in 0..8 {
            seen.extend(kinds(&w.step(Action::Touch).unwrap()));
        }
        if cheb(o) == 1 {
            use EventKind::{Charging as C, NoEffect as N, PowerGained as G};
            assert_eq!(seen, vec![C, G, C, G, C, G, N, N], "offset {o:?}");
            assert_eq!(w.agent_power, 3);
            assert!(w.objects.is_empty(), "spent supply stays");
        } else {
            assert!(
                seen.iter().all(|&k| k == EventKind::NoEffect),
                "offset {o:?}: {seen:?}"
            );
            assert_eq!(w.agent_power, 0);
        }
    }
}

#[test]
fn single_touches_never_pay() {
    let mut w = world(ObjectKind::PowerSupply, (0, 1));
    for _ in 0..6 {
        assert_eq!(
            kinds(&w.step(Action::Touch).unwrap()),
            vec![EventKind::Charging]
        );
        w.step(Action::Wait).unwrap();
    }
    assert_eq!(w.agent_power, 0);
}

#[test]
fn conveyor_carries_six_cells_from_east_and_west_tips_only() {
    for o in offsets() {
        let mut w = world(ObjectKind::Conveyor, o);
        let start = w.agent_pos;
        let ev = w.step(Action::Touch).unwrap();
        let tip = o == (1, 0) || o == (-1, 0);
        if tip {
            assert_eq!(
                ev,
                vec![Event::Conveyed { id: 0, cells: 6 }],
                "offset {o:?}"
            );
            assert_eq!(w.agent_pos, Pos::new(start.x + 6, start.y));
        } else {
            assert_eq!(kinds(&ev), vec![EventKind::NoEffect], "offset {o:?}");
            assert_eq!(w.agent_pos, start);
        }
    }
}

#[test]
fn conveyor_rests_ten_ticks() {
    // West tip, target straight north so the ride ends beside the tip's column.
    let mut w = world_with_target(ObjectKind::Conveyor, (-1, 0), Pos::new(19, 45));
    assert!(matches!(
        w.step(Action::Touch).unwrap()[..],
        [Event::Conveyed { cells: 6, .. }]
    ));
    assert_eq!(w.agent_pos, Pos::new(19, 26));
    // walk back to the tip: six steps south
    for _ in 0..6 {
        w.step(Action::Move(Direction::S)).unwrap();
    }
    assert_eq!(w.agent_pos, Pos::new(19, 20));
    // 6 of the 10 rest ticks are used up; four more touches do nothing
    for i in 0..4 {
        assert_eq!(
            kinds(&w.step(Action::Touch).unwrap()),
            vec![EventKind::NoEffect],
            "rest {i}"
        );
    }
    assert_eq!(
        kinds(&w.step(Action::Touch).unwrap()),
        vec![EventKind::Conveyed]
    );
}

#[test]
fn conveyance_toward_target_shortens_distance() {
    for target in [
        Pos::new(40, 40),
        Pos::new(2, 44),
        Pos::new(45, 3),
        Pos::new(0, 0),
    ] {
        for o in [(1, 0), (-1, 0)] {
            let mut w = world_with_target(ObjectKind::Conveyor, o, target);
            let before = w.agent_pos.chebyshev(target);
            let ev = w.step(Action::Touch).unwrap();
            match ev[..] {
                [Event::Conveyed { cells, .. }] => {
                    assert_eq!(before - w.agent_pos.chebyshev(target), cells);
                    assert!(cells > 0 && cells <= 6);
                }
                [Event::Blocked] => assert_eq!(w.agent_pos.chebyshev(target), before),
                _ => panic!("{ev:?}"),
            }
        }
    }
}
