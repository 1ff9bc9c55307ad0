//! Single-object training sessions. A session hides which object it holds and
//! records every reaction of its user as a trace.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::world::{Action, Event, ObjectKind, Percept, Placement, Pos, WorldConfig, WorldState};

pub const EPISODE_CAP: u32 = 120;
pub const MODULE_SIDE: i32 = 16;
pub const MODULE_SENSING: i32 = 8;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    pub tick: u32,
    /// What the user saw before reacting.
    pub percepts: Vec<Percept>,
    pub attached: bool,
    pub action: Action,
    pub events: Vec<Event>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodeStatus {
    CapReached,
    AgentDestroyed,
    Closed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Episode {
    pub module_id: String,
    pub episode: u32,
    pub seed: u64,
    pub status: Option<EpisodeStatus>,
    pub steps: Vec<TraceStep>,
}

impl Episode {
    /// True when the episode produced a useful outcome and the agent survived.
    pub fn is_success(&self) -> bool {
        let events = || self.steps.iter().flat_map(|s| s.events.iter());
        events().any(|e| e.kind().is_useful())
            && !events().any(|e| matches!(e, Event::AgentDestroyed))
    }
}

/// Lay out a module field for one episode: one object somewhere in the
/// interior, agent and target on distinct border cells.
pub fn module_config(kind: ObjectKind, seed: u64) -> WorldConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = MODULE_SIDE;
    let object = Pos::new(rng.gen_range(1..side - 1), rng.gen_range(1..side - 1));
    let border: Vec<Pos> = (0..side)
        .flat_map(|x| (0..side).map(move |y| Pos::new(x, y)))
        .filter(|p| p.x == 0 || p.y == 0 || p.x == side - 1 || p.y == side - 1)
        .collect();
    let agent = border[rng.gen_range(0..border.len())];
    let target = loop {
        let t = border[rng.gen_range(0..border.len())];
        if t != agent {
            break t;
        }
    };
    WorldConfig {
        width: side,
        height: side,
        tick_budget: EPISODE_CAP,
        sensing_radius: MODULE_SENSING,
        objects: vec![Placement { kind, pos: object }],
        agent_start: agent,
        target_pos: target,
        seed,
    }
}

#[derive(Debug, Clone)]
pub struct ModuleSession {
    session_id: String,
    module_id: String,
    kind: ObjectKind,
    seed: u64,
    world: WorldState,
    current: Episode,
    finished: Vec<Episode>,
    open: bool,
}

impl ModuleSession {
    pub fn open(module_id: impl Into<String>, kind: ObjectKind, seed: u64) -> ModuleSession {
        let module_id = module_id.into();
        let session_id = format!("{module_id}-{seed}");
        ModuleSession::open_with_id(session_id, module_id, kind, seed)
    }

    pub fn open_with_id(
        session_id: impl Into<String>,
        module_id: impl Into<String>,
        kind: ObjectKind,
        seed: u64,
    ) -> ModuleSession {
        let module_id = module_id.into();
        ModuleSession {
            session_id: session_id.into(),
            world: WorldState::create(module_config(kind, seed)).expect("module layout is valid"),
            current: Episode {
                module_id: module_id.clone(),
                episode: 0,
                seed,
                status: None,
                steps: Vec::new(),
            },
            module_id,
            kind,
            seed,
            finished: Vec::new(),
            open: true,
        }
    }

    pub fn session_id(&self) -> &str {
        &self.session_id
    }

    pub fn module_id(&self) -> &str {
        &self.module_id
    }

    pub fn shape_id(&self) -> u8 {
        self.kind.shape_id()
    }

    pub fn is_open(&self) -> bool {
        self.open
    }

    pub fn episode_index(&self) -> u32 {
        self.current.episode
    }

    pub fn tick(&self) -> u32 {
        self.world.tick
    }

    pub fn percepts(&self) -> Vec<Percept> {
        self.world.sense()
    }

    pub fn attached(&self) -> bool {
        self.world.attached_to.is_some()
    }

    pub fn power(&self) -> u32 {
        self.world.agent_power
    }

    pub fn agent_pos(&self) -> Pos {
        self.world.agent_pos
    }

    /// Read-only view for renderers that are allowed to draw the field.
    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn current_steps(&self) -> &[TraceStep] {
        &self.current.steps
    }

    /// Step the session. Returns the percepts the user now faces (those of
    /// the next episode when this step ended one) and the step's events.
    pub fn act(&mut self, action: Action) -> Result<(Vec<Percept>, Vec<Event>)> {
        if !self.open {
            return Err(Error::SessionClosed(self.session_id.clone()));
        }
        let percepts = self.world.sense();
        let attached = self.world.attached_to.is_some();
        let tick = self.world.tick;
        let events = self.world.step(action)?;
        self.current.steps.push(TraceStep {
            tick,
            percepts,
            attached,
            action,
            events: events.clone(),
        });
        let status = if !self.world.agent_alive {
            Some(EpisodeStatus::AgentDestroyed)
        } else if self.world.tick >= EPISODE_CAP {
            Some(EpisodeStatus::CapReached)
        } else {
            None
        };
        if let Some(status) = status {
            self.roll_over(status);
        }
        Ok((self.world.sense(), events))
    }

    fn roll_over(&mut self, status: EpisodeStatus) {
        let next = self.current.episode + 1;
        let seed = self.seed.wrapping_add(next as u64);
        self.world = WorldState::create(module_config(self.kind, seed)).expect("valid layout");
        let mut done = std::mem::replace(
            &mut self.current,
            Episode {
                module_id: self.module_id.clone(),
                episode: next,
                seed,
                status: None,
                steps: Vec::new(),
            },
        );
        done.status = Some(status);
        self.finished.push(done);
    }

    /// Close the running episode and the session.
    pub fn close(&mut self) {
        if !self.open {
            return;
        }
        self.open = false;
        let mut done = self.current.clone();
        done.status = Some(EpisodeStatus::Closed);
        self.current.steps.clear();
        self.finished.push(done);
    }

    /// All closed episodes in order.
    pub fn export_episodes(&self) -> Vec<Episode> {
        self.finished.clone()
    }

    pub fn closed_count(&self) -> usize {
        self.finished.len()
    }

    /// Re-run an episode's actions from its seed and return the events.
    pub fn replay(&self, episode: &Episode) -> Result<Vec<Vec<Event>>> {
        replay_episode(self.kind, episode)
    }
}

pub fn replay_episode(kind: ObjectKind, episode: &Episode) -> Result<Vec<Vec<Event>>> {
    let mut world = WorldState::create(module_config(kind, episode.seed))?;
    episode.steps.iter().map(|s| world.step(s.action)).collect()
}

/// Free-function forms mirroring the session API.
pub fn open_session(module_id: &str, kind: ObjectKind, seed: u64) -> ModuleSession {
    ModuleSession::open(module_id, kind, seed)
}

pub fn export_episodes(session: &ModuleSession) -> Vec<Episode> {
    session.export_episodes()
}
