//! Browser demo. Three things to do on one static page:
//!
//! * play a module whose object is hidden, watching outcomes and the rules
//!   your own play produces;
//! * let a bot train on a module and watch its learning curve;
//! * fly a mission with no rules, bot-trained rules, or reference rules.
//!
//! Everything crosses the JS boundary as JSON text.

use std::collections::BTreeSet;

use cognite::bots::train_all;
use cognite::bots::train_module;
use cognite::rules::{induce, learning_curve, RuleBase, RuleEntry};
use cognite::session::{Episode, ModuleSession, MODULE_SIDE};
use cognite::solver::{oracle_rulebase, solve, MissionConfig};
use cognite::world::{Action, ObjectKind, WorldState};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn kind_of(shape_id: u8) -> Result<ObjectKind, String> {
    ObjectKind::from_shape(shape_id).ok_or_else(|| format!("no object with shape {shape_id}"))
}

/// Strongest rules first, neutral outcomes left out.
fn top_rules(rb: &RuleBase, n: usize) -> Vec<RuleEntry> {
    let mut entries: Vec<RuleEntry> = rb
        .entries()
        .into_iter()
        .filter(|e| !e.outcome.is_neutral())
        .collect();
    entries.sort_by(|a, b| {
        b.confidence()
            .total_cmp(&a.confidence())
            .then(b.support.cmp(&a.support))
    });
    entries.truncate(n);
    entries
}

/// A live module the player drives one action at a time.
#[wasm_bindgen]
pub struct Playground {
    session: ModuleSession,
}

impl Playground {
    pub fn open(shape_id: u8, seed: u64) -> Result<Playground, String> {
        let kind = kind_of(shape_id)?;
        Ok(Playground {
            session: ModuleSession::open(format!("module-{shape_id}"), kind, seed),
        })
    }

    /// What the player may see: the field, their position, and objects by
    /// shape only.
    pub fn view_value(&self) -> Value {
        let s = &self.session;
        let agent = s.agent_pos();
        let objects: Vec<Value> = s
            .percepts()
            .iter()
            .map(|p| json!({"shape_id": p.shape_id, "x": agent.x + p.dx, "y": agent.y + p.dy}))
            .collect();
        json!({
            "side": MODULE_SIDE,
            "agent": {"x": agent.x, "y": agent.y},
            "target": target_of(s.world()),
            "objects": objects,
            "percepts": s.percepts(),
            "episode": s.episode_index(),
            "tick": s.tick(),
            "attached": s.attached(),
            "power": s.power(),
        })
    }

    pub fn act_value(&mut self, action: &str) -> Result<Value, String> {
        let action: Action =
            serde_json::from_str(action).map_err(|e| format!("bad action {action}: {e}"))?;
        let episode = self.session.episode_index();
        let (_, events) = self.session.act(action).map_err(|e| e.to_string())?;
        let mut view = self.view_value();
        view["events"] = json!(events);
        view["episode_over"] = json!(self.session.episode_index() != episode);
        Ok(view)
    }

    /// Rules induced from everything played so far.
    pub fn rules_value(&self) -> Value {
        let mut episodes = self.session.export_episodes();
        episodes.push(Episode {
            module_id: self.session.module_id().into(),
            episode: self.session.episode_index(),
            seed: 0,
            status: None,
            steps: self.session.current_steps().to_vec(),
        });
        json!(top_rules(&induce(&episodes), 12))
    }
}

fn target_of(world: &WorldState) -> Value {
    json!({"x": world.config.target_pos.x, "y": world.config.target_pos.y})
}

#[wasm_bindgen]
impl Playground {
    #[wasm_bindgen(constructor)]
    pub fn new(shape_id: u8, seed: u64) -> Result<Playground, JsError> {
        Playground::open(shape_id, seed).map_err(|e| JsError::new(&e))
    }

    pub fn view(&self) -> String {
        self.view_value().to_string()
    }

    /// `action` is JSON: `{"move":"NE"}`, `"fire"`, `"touch"`, `"push_pull"`
    /// or `"wait"`.
    pub fn act(&mut self, action: &str) -> Result<String, JsError> {
        self.act_value(action)
            .map(|v| v.to_string())
            .map_err(|e| JsError::new(&e))
    }

    pub fn rules(&self) -> String {
        self.rules_value().to_string()
    }
}

pub fn train_value(shape_id: u8, seed: u64, episodes: usize) -> Result<Value, String> {
    let kind = kind_of(shape_id)?;
    let eps = train_module(kind, seed, episodes.max(1));
    let window = (eps.len() / 8).max(1);
    let curve: Vec<Value> = learning_curve(&eps, window)
        .into_iter()
        .map(|(i, rate)| json!([i, rate]))
        .collect();
    Ok(json!({
        "episodes": eps.len(),
        "curve": curve,
        "rules": top_rules(&induce(&eps), 10),
    }))
}

/// Train a bot on one module and report its learning curve and best rules.
#[wasm_bindgen]
pub fn train_bot(shape_id: u8, seed: u64, episodes: usize) -> Result<String, JsError> {
    train_value(shape_id, seed, episodes)
        .map(|v| v.to_string())
        .map_err(|e| JsError::new(&e))
}

pub fn mission_value(seed: u64, rules: &str, episodes: usize) -> Result<Value, String> {
    let rb = match rules {
        "empty" => RuleBase::new(),
        "oracle" => oracle_rulebase(),
        "trained" => train_all(seed, episodes.max(1)),
        other => return Err(format!("unknown rule source {other:?}")),
    };
    let config = MissionConfig::suite(seed);
    let world = config.world_config().map_err(|e| e.to_string())?;
    let result = solve(&config, &rb).map_err(|e| e.to_string())?;
    // Replay to show which objects were gone by the end.
    let mut replay = WorldState::create(world.clone()).map_err(|e| e.to_string())?;
    for a in result.actions() {
        replay.step(a).map_err(|e| e.to_string())?;
    }
    let alive: BTreeSet<u32> = replay.objects.keys().copied().collect();
    let objects: Vec<Value> = world
        .objects
        .iter()
        .enumerate()
        .map(|(i, p)| {
            json!({
                "shape_id": p.kind.shape_id(),
                "x": p.pos.x,
                "y": p.pos.y,
                "gone": !alive.contains(&(i as u32)),
            })
        })
        .collect();
    Ok(json!({
        "width": world.width,
        "height": world.height,
        "start": {"x": world.agent_start.x, "y": world.agent_start.y},
        "target": {"x": world.target_pos.x, "y": world.target_pos.y},
        "objects": objects,
        "outcome": result.outcome,
        "ticks": result.ticks,
        "trajectory": result.trajectory,
        "rules": rb.len(),
    }))
}

/// Fly one mission. `rules` is `empty`, `trained` (bots train first, with
/// `episodes` per module) or `oracle`.
#[wasm_bindgen]
pub fn run_mission(seed: u64, rules: &str, episodes: usize) -> Result<String, JsError> {
    mission_value(seed, rules, episodes)
        .map(|v| v.to_string())
        .map_err(|e| JsError::new(&e))
}
